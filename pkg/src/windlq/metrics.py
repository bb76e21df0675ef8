"""Post-processing: rainflow counting, damage-equivalent loads, tracking stats.

Rainflow uses the four-point rule on the turning-point sequence: whenever
the inner range of four consecutive turning points is no larger than
both neighboring ranges, the inner pair closes a full cycle and is
removed; what remains at the end is the residual, counted as half
cycles.  Under this convention the half-cycle total always equals the
number of turning points minus one.

The damage-equivalent load condenses a counted history into the constant
amplitude that would cause the same Wöhler-law damage over the design
life at the reference cycle count:

    DEL = [ (t_life / t_sim) * sum_i count_i * range_i^m / n_ref ]^(1/m)

Load channels are proxies computed from the model states (the plant has
no blade degrees of freedom): tower fore-aft moment h_ref*(k_t x_t +
d_t v_t), shaft torque = generator torque, and rotor thrust.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .turbine import tower_force

__all__ = [
    "CycleSet",
    "DelSpec",
    "rainflow",
    "damage_equivalent_load",
    "rms_tracking_error",
    "rate_statistics",
    "load_proxies",
    "DEFAULT_TOWER_LEVER",
]

# Documented lever arm turning tower-top force balance into a base moment proxy, m.
DEFAULT_TOWER_LEVER = 110.0


@dataclass(frozen=True)
class CycleSet:
    """Counted cycles: parallel arrays of range, mean, and count (0.5 or 1.0)."""

    ranges: np.ndarray
    means: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.ranges, dtype=float)
        m = np.asarray(self.means, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if not (r.shape == m.shape == c.shape) or r.ndim != 1:
            raise ValueError("ranges, means, counts must be 1-D and equal length")
        if np.any(r < 0.0):
            raise ValueError("cycle ranges must be >= 0")
        if not np.all((c == 0.5) | (c == 1.0)):
            raise ValueError("cycle counts must be 0.5 or 1.0")
        object.__setattr__(self, "ranges", r)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "counts", c)

    def __len__(self):
        return len(self.ranges)

    @property
    def total_half_cycles(self):
        return float(np.sum(self.counts) * 2.0)


@dataclass(frozen=True)
class DelSpec:
    m: float = 4.0          # Wöhler exponent
    n_ref: float = 2.0e6    # reference cycle count
    t_life: float = 20.0 * 365.25 * 86400.0  # design lifetime, s
    t_sim: float = 600.0    # simulated duration, s

    def __post_init__(self):
        if self.m < 1.0:
            raise ValueError("Wöhler exponent must be >= 1")
        if self.n_ref <= 0.0:
            raise ValueError("n_ref must be > 0")
        if not self.t_life >= self.t_sim > 0.0:
            raise ValueError("need t_life >= t_sim > 0")


def _turning_points(signal):
    """Strict local extrema including endpoints; plateaus collapse to one point."""
    sig = np.asarray(signal, dtype=float)
    if sig.size < 2:
        return sig.copy()
    # drop consecutive repeats
    keep = np.ones(sig.size, dtype=bool)
    keep[1:] = sig[1:] != sig[:-1]
    sig = sig[keep]
    if sig.size < 3:
        return sig
    d = np.diff(sig)
    interior = d[:-1] * d[1:] < 0.0
    mask = np.ones(sig.size, dtype=bool)
    mask[1:-1] = interior
    return sig[mask]


def rainflow(signal):
    """Four-point rainflow count of a load history."""
    if len(signal) < 2:
        raise ValueError("signal must have at least 2 samples")
    tp = _turning_points(signal)
    ranges, means, counts = [], [], []
    stack = []
    for point in tp:
        stack.append(float(point))
        while len(stack) >= 4:
            s1, s2, s3, s4 = stack[-4], stack[-3], stack[-2], stack[-1]
            inner = abs(s2 - s3)
            if inner <= abs(s1 - s2) and inner <= abs(s3 - s4):
                ranges.append(inner)
                means.append(0.5 * (s2 + s3))
                counts.append(1.0)
                del stack[-3:-1]
            else:
                break
    for a, b in zip(stack[:-1], stack[1:]):
        ranges.append(abs(a - b))
        means.append(0.5 * (a + b))
        counts.append(0.5)
    return CycleSet(
        ranges=np.array(ranges), means=np.array(means), counts=np.array(counts)
    )


def damage_equivalent_load(cycles, spec):
    """Constant-amplitude equivalent load per the Wöhler extrapolation."""
    if len(cycles) == 0:
        return 0.0
    damage = float(np.sum(cycles.counts * cycles.ranges ** spec.m))
    return (spec.t_life / spec.t_sim * damage / spec.n_ref) ** (1.0 / spec.m)


def rms_tracking_error(traj):
    """Root-mean-square electrical power tracking error over the log, W."""
    err = traj["p_w"] - traj["p_d_w"]
    return float(np.sqrt(np.mean(err * err)))


def rate_statistics(traj):
    """(max |pitch rate|, max |torque rate|) realized in the log."""
    return (
        float(np.max(np.abs(traj["u1_eff_radps"]))),
        float(np.max(np.abs(traj["u2_eff_nmps"]))),
    )


def load_proxies(traj, params, surface, tower_lever=DEFAULT_TOWER_LEVER):
    """Per-channel load series for fatigue comparison.

    Returns a dict: tower fore-aft moment proxy (N*m), shaft torque
    proxy (N*m, generator side), rotor thrust proxy (N).
    """
    x_t = traj["x_t_m"]
    v_t = traj["v_t_mps"]
    tower = tower_lever * (params.k_t * x_t + params.d_t * v_t)
    omega = traj["omega_radps"]
    theta = traj["theta_rad"]
    v = traj["v_true_mps"]
    thrust = np.array([
        tower_force(params, surface, float(om), float(vv), float(th))
        for om, vv, th in zip(omega, v, theta)
    ])
    return {
        "tower_moment": tower,
        "shaft_torque": traj["m_g_nm"].copy(),
        "thrust": thrust,
    }
