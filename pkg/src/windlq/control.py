"""Runtime controllers: robust-LQ deviation feedback and a textbook baseline.

The robust-LQ path follows the external-input pipeline each sampling
instant: correct the farm reference power by the weather-dependent
available power, look up the desired generator speed, blend the two
region gains by the wind-speed ramp factor, refresh the operating
equilibrium when the inputs moved enough, and feed back the deviation
from it.  A torque-balance wind estimator (or an oracle mode for tests)
supplies the wind speed estimate.

The baseline for comparison is a conventional two-loop controller:
quadratic torque law saturated by the power limit and a gain-scheduled
PI pitch loop holding the scheduled generator speed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .coefficients import cp_opt, optimal_point
from .equilibrium import NoEquilibrium, compute_equilibrium
from .turbine import ControlInput, ExternalInput, rotor_torque

__all__ = [
    "V_CUTIN",
    "V_CUTOUT",
    "PowerSpeedTable",
    "GainSchedule",
    "ControllerState",
    "EstimatorConfig",
    "WindEstimator",
    "BaselineConfig",
    "BaselineController",
    "desired_power",
    "desired_speed",
    "region_boundary_speed",
    "compute_alpha",
    "blended_gain",
    "control_step",
    "rated_speed",
    "build_power_speed_table",
    "region_external_inputs",
]

log = logging.getLogger(__name__)

# Operating wind-speed envelope.  The bundled analytic Cp surface cannot
# shed enough power above ~18-19 m/s within its 30 deg pitch range, so
# the default cut-out sits there; both are plain defaults, not physics.
V_CUTIN = 3.0
V_CUTOUT = 19.0

# Equilibrium refresh hysteresis: recompute the operating point when the
# wind estimate or the desired power moved by more than these amounts.
REFRESH_DV = 0.25          # m/s
REFRESH_DP_FRAC = 0.01     # fraction of rated power

# Back-off applied to the desired power when computing equilibria that
# sit exactly on the available-power limit (region 2): keeps the pitch
# root solvable despite rounding in the lookup-table chain.
_EQ_POWER_BACKOFF = 1e-3


@dataclass(frozen=True)
class PowerSpeedTable:
    """Monotone lookup table from desired power (W) to generator speed (rad/s)."""

    p_grid: np.ndarray
    omega_grid: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p_grid, dtype=float)
        om = np.asarray(self.omega_grid, dtype=float)
        if p.ndim != 1 or p.size < 2 or p.shape != om.shape:
            raise ValueError("p_grid and omega_grid must be 1-D, equal length >= 2")
        if not np.all(np.diff(p) > 0):
            raise ValueError("p_grid must be strictly increasing")
        if np.any(np.diff(om) < 0):
            raise ValueError("omega_grid must be nondecreasing")
        object.__setattr__(self, "p_grid", p)
        object.__setattr__(self, "omega_grid", om)


@dataclass(frozen=True)
class GainSchedule:
    """Region gains (physical units) and the blending half-width."""

    k2: np.ndarray
    k3: np.ndarray
    delta_v: float = 0.5

    def __post_init__(self):
        k2 = np.asarray(self.k2, dtype=float)
        k3 = np.asarray(self.k3, dtype=float)
        if k2.shape != k3.shape or k2.ndim != 2:
            raise ValueError("k2 and k3 must be 2-D matrices of equal shape")
        if self.delta_v <= 0.0:
            raise ValueError("delta_v must be > 0")
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "k3", k3)


def desired_power(params, surface, p_ref, v_hat):
    """Reference power corrected by the available wind power, W."""
    if p_ref < 0.0:
        raise ValueError("p_ref must be >= 0")
    if v_hat <= 0.0:
        raise ValueError("v_hat must be > 0")
    avail = (
        0.5 * params.rho * math.pi * params.r ** 2 * params.eta
        * v_hat ** 3 * cp_opt(surface)
    )
    return min(p_ref, avail)


def desired_speed(table, p_d):
    """Linear interpolation in the power-speed table, clamped at the ends."""
    return float(np.interp(p_d, table.p_grid, table.omega_grid))


def region_boundary_speed(params, surface, p_ref):
    """Wind speed at which the available power equals p_ref, m/s."""
    if p_ref <= 0.0:
        raise ValueError("p_ref must be > 0")
    denom = 0.5 * params.rho * math.pi * params.r ** 2 * params.eta * cp_opt(surface)
    return (p_ref / denom) ** (1.0 / 3.0)


def compute_alpha(v_hat, v_d, delta_v):
    """Blend factor: 1 deep in region 2, 0 deep in region 3, linear ramp between."""
    if delta_v <= 0.0:
        raise ValueError("delta_v must be > 0")
    if v_hat <= v_d - delta_v:
        return 1.0
    if v_hat >= v_d + delta_v:
        return 0.0
    return -(v_hat - v_d - delta_v) / (2.0 * delta_v)


def blended_gain(schedule, alpha):
    """Convex combination alpha*K2 + (1-alpha)*K3."""
    return alpha * schedule.k2 + (1.0 - alpha) * schedule.k3


def rated_speed(params, surface):
    """Generator speed at rated power on the optimal tip-speed-ratio locus."""
    lam_opt, _, _ = optimal_point(surface)
    v_rated = region_boundary_speed(params, surface, params.p_rated)
    return params.n_g * lam_opt * v_rated / params.r


def build_power_speed_table(params, surface, n_points=200, p_min_frac=0.01,
                            omega_floor_frac=0.3):
    """Power-to-speed schedule on the optimal tip-speed-ratio locus.

    For each desired power the equivalent wind speed (the speed at which
    the available power equals it) is inverted and the speed that tracks
    the optimal tip-speed ratio there is tabulated, clamped between a
    minimum operating speed and rated speed.
    """
    lam_opt, _, _ = optimal_point(surface)
    om_rated = rated_speed(params, surface)
    om_floor = max(params.omega_min, omega_floor_frac * om_rated)
    p_grid = np.linspace(p_min_frac * params.p_rated, params.p_rated, n_points)
    omega = np.empty(n_points)
    for i, p in enumerate(p_grid):
        v_eq = region_boundary_speed(params, surface, float(p))
        omega[i] = min(max(params.n_g * lam_opt * v_eq / params.r, om_floor), om_rated)
    return PowerSpeedTable(p_grid=p_grid, omega_grid=omega)


@dataclass
class EstimatorConfig:
    mode: str = "torque_balance"   # or "oracle"
    tau: float = 0.5               # low-pass time constant on the speed derivative, s
    noise_std: float = 0.0         # oracle-mode additive noise, m/s
    v_min: float = V_CUTIN
    v_max: float = V_CUTOUT
    bisect_tol: float = 1e-4       # m/s
    scan_points: int = 64          # coarse bracketing resolution over [v_min, v_max]


class WindEstimator:
    """Torque-balance wind-speed observer.

    The aerodynamic torque is reconstructed from the filtered speed
    derivative and the applied generator torque, then the steady torque
    map V -> rotor_torque(omega, V, theta) is inverted for the smallest
    root by a bracketing scan plus bisection.  Between samples the
    inversion warm-starts around the previous estimate and falls back to
    the full scan if the local bracket fails.  `oracle` mode returns the
    true wind speed plus configured noise, seeded deterministically.
    """

    def __init__(self, params, surface, config=None, seed=0, v_init=None):
        self.params = params
        self.surface = surface
        self.cfg = config or EstimatorConfig()
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, 0x57494E44]))
        self._omega_prev = None
        self._omega_dot_filt = 0.0
        self.v_hat = float(v_init) if v_init is not None else 0.5 * (
            self.cfg.v_min + self.cfg.v_max
        )

    def _torque(self, omega, v, theta):
        return rotor_torque(self.params, self.surface, omega, v, theta)

    def _invert(self, omega, theta, target):
        cfg = self.cfg

        def g(v):
            return self._torque(omega, v, theta) - target

        # warm bracket around the previous estimate
        lo = max(cfg.v_min, self.v_hat - 0.5)
        hi = min(cfg.v_max, self.v_hat + 0.5)
        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            return lo
        if glo * ghi > 0.0:
            # full scan from below; first sign change = smallest root
            vs = np.linspace(cfg.v_min, cfg.v_max, cfg.scan_points)
            prev_v, prev_g = float(vs[0]), g(float(vs[0]))
            if prev_g == 0.0:
                return prev_v
            found = False
            for v in vs[1:]:
                cur_v, cur_g = float(v), g(float(v))
                if cur_g == 0.0:
                    return cur_v
                if prev_g * cur_g < 0.0:
                    lo, glo, hi = prev_v, prev_g, cur_v
                    found = True
                    break
                prev_v, prev_g = cur_v, cur_g
            if not found:
                return None
        while hi - lo > cfg.bisect_tol:
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if gm == 0.0:
                return mid
            if (glo < 0.0) == (gm < 0.0):
                lo, glo = mid, gm
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def update(self, omega_meas, m_g_applied, theta_applied, dt, true_v=None):
        cfg = self.cfg
        if cfg.mode == "oracle":
            if true_v is None:
                raise ValueError("oracle mode requires the true wind speed")
            noise = cfg.noise_std * self._rng.standard_normal() if cfg.noise_std else 0.0
            self.v_hat = max(cfg.v_min, min(cfg.v_max, true_v + noise))
            return self.v_hat
        if omega_meas < self.params.omega_min:
            raise ValueError("omega below model validity threshold")
        if self._omega_prev is None:
            raw = 0.0
        else:
            raw = (omega_meas - self._omega_prev) / dt
        self._omega_prev = omega_meas
        self._omega_dot_filt += (dt / cfg.tau) * (raw - self._omega_dot_filt)
        m_r_hat = (
            self.params.j_t / self.params.n_g * self._omega_dot_filt
            + self.params.n_g * m_g_applied
        )
        root = self._invert(omega_meas, theta_applied, m_r_hat)
        if root is None:
            log.debug("wind inversion found no root; holding %.3f m/s", self.v_hat)
        else:
            self.v_hat = root
        return self.v_hat


@dataclass
class ControllerState:
    """Mutable state owned by one robust-LQ control loop."""

    equilibrium: object = None       # current Equilibrium or None
    gain: np.ndarray = None          # blended physical gain actually applied
    alpha: float = 0.0
    p_d: float = 0.0                 # current pipeline desired power, W
    omega_d: float = 0.0             # current pipeline desired speed, rad/s
    v_d: float = 0.0                 # region boundary speed for the active p_ref
    p_ref_cached: float = -1.0
    hold_events: int = 0             # NoEquilibrium fallbacks
    refresh_events: int = 0


def _maybe_refresh_equilibrium(state, params, surface, v_hat, omega_d, p_d):
    eq = state.equilibrium
    if eq is not None:
        if (
            abs(v_hat - eq.w_s.v) <= REFRESH_DV
            and abs(p_d - eq.w_s.p_d) <= REFRESH_DP_FRAC * params.p_rated
        ):
            return
    p_d_eq = min(p_d, (1.0 - _EQ_POWER_BACKOFF) * desired_power(
        params, surface, math.inf, v_hat))
    try:
        state.equilibrium = compute_equilibrium(
            params, surface, ExternalInput(v=v_hat, omega_d=omega_d, p_d=p_d_eq)
        )
        state.refresh_events += 1
    except NoEquilibrium:
        state.hold_events += 1
        log.debug(
            "no equilibrium at v=%.2f p_d=%.3g; holding previous", v_hat, p_d
        )
        if state.equilibrium is None:
            raise


def control_step(state, x, w_hat, params, surface, table, schedule):
    """One robust-LQ sampling instant; returns the rate commands.

    `w_hat.v` is the wind estimate and `w_hat.p_d` the farm reference
    power; the desired power/speed pair is recomputed here, so the
    incoming omega_d is ignored.  The state's equilibrium is refreshed
    per the hysteresis policy and held on NoEquilibrium.
    """
    v_hat = w_hat.v
    p_ref = w_hat.p_d
    if p_ref != state.p_ref_cached:
        state.v_d = region_boundary_speed(params, surface, p_ref)
        state.p_ref_cached = p_ref
    p_d = desired_power(params, surface, p_ref, v_hat)
    omega_d = desired_speed(table, p_d)
    alpha = compute_alpha(v_hat, state.v_d, schedule.delta_v)
    gain = blended_gain(schedule, alpha)
    _maybe_refresh_equilibrium(state, params, surface, v_hat, omega_d, p_d)
    state.alpha = alpha
    state.gain = gain
    state.p_d = p_d
    state.omega_d = omega_d
    x_s = state.equilibrium.x_s
    xi = x.as_array() - x_s.as_array()
    u = gain @ xi
    return ControlInput(u1=float(u[0]), u2=float(u[1]))


@dataclass
class BaselineConfig:
    """Two-loop baseline tuning (documented defaults for the bundled fixture)."""

    kp_pitch: float = 0.008    # rad per rad/s of speed error
    ki_pitch: float = 0.003    # rad per rad of accumulated speed error
    theta_knee: float = 0.11   # pitch gain-scheduling knee, rad
    omega_filter_tau: float = 0.25  # measurement low-pass, s


class BaselineController:
    """Quadratic torque law + power limit, with gain-scheduled PI pitch.

    Torque command: min(k_opt*omega^2, p_d/(eta*omega)) so power capture
    follows the optimal locus in region 2 and saturates at the desired
    power in region 3.  Pitch: PI on the speed error towards the
    scheduled speed, gains reduced by 1/(1+theta/theta_knee), with the
    integrator clamped to the pitch range (anti-windup).  Commands are
    positions; the actuator model turns them into bounded rates.
    """

    def __init__(self, params, surface, table, config=None):
        self.params = params
        self.surface = surface
        self.table = table
        self.cfg = config or BaselineConfig()
        lam_opt, _, cpo = optimal_point(surface)
        # generator-side torque coefficient of the optimal locus
        self.k_opt = (
            0.5 * params.rho * math.pi * params.r ** 5 * cpo
            / (lam_opt ** 3 * params.n_g ** 3)
        )
        self._integ = 0.0
        self._omega_f = None
        self.p_d = 0.0
        self.omega_ref = 0.0

    def step(self, omega_meas, v_hat, p_ref, dt):
        """Returns (theta_cmd, m_g_cmd) position commands."""
        params, cfg = self.params, self.cfg
        if self._omega_f is None:
            self._omega_f = omega_meas
        else:
            self._omega_f += (dt / cfg.omega_filter_tau) * (omega_meas - self._omega_f)
        om = self._omega_f
        p_d = desired_power(params, self.surface, p_ref, v_hat)
        omega_ref = desired_speed(self.table, p_d)
        self.p_d = p_d
        self.omega_ref = omega_ref

        mg_quad = self.k_opt * om * om
        if om > params.omega_min:
            mg_cmd = min(mg_quad, p_d / (params.eta * om))
        else:
            mg_cmd = mg_quad
        mg_cmd = min(max(mg_cmd, params.mg_min), params.mg_max)

        err = om - omega_ref
        gk = 1.0 / (1.0 + max(self._integ, 0.0) / cfg.theta_knee)
        self._integ += gk * cfg.ki_pitch * err * dt
        self._integ = min(max(self._integ, params.theta_min), params.theta_max)
        theta_cmd = gk * cfg.kp_pitch * err + self._integ
        theta_cmd = min(max(theta_cmd, params.theta_min), params.theta_max)
        return theta_cmd, mg_cmd


def region_external_inputs(params, surface, table, region, p_ref,
                           v_cutin=V_CUTIN, v_cutout=V_CUTOUT, count=4,
                           winds=None):
    """Vertex external inputs for gain synthesis in one operating region.

    Region 3: wind speeds spanning [boundary+1, cutout-1] at rated speed
    and the reference power.  Region 2: wind speeds spanning
    [cutin+1, boundary-1], each with the desired power/speed pipeline
    applied (power backed off from the available-power limit so the
    equilibria stay solvable).  `winds`, if given, replaces the default
    speed grid but keeps the per-region desired-power/speed policy.
    """
    v_d = region_boundary_speed(params, surface, p_ref)
    if region == 3:
        if winds is None:
            lo, hi = v_d + 1.0, v_cutout - 1.0
            if hi <= lo:
                raise ValueError(
                    "empty region-3 wind range; lower p_ref or raise cutout"
                )
            winds = np.linspace(lo, hi, count)
        om_rated = rated_speed(params, surface)
        return [
            ExternalInput(v=float(v), omega_d=om_rated, p_d=p_ref)
            for v in winds
        ]
    if region == 2:
        if winds is None:
            lo, hi = v_cutin + 1.0, v_d - 1.0
            if hi <= lo:
                raise ValueError(
                    "empty region-2 wind range; raise p_ref or lower cutin"
                )
            winds = np.linspace(lo, hi, count)
        out = []
        for v in winds:
            p_d = (1.0 - _EQ_POWER_BACKOFF) * desired_power(
                params, surface, p_ref, float(v)
            )
            out.append(ExternalInput(
                v=float(v), omega_d=desired_speed(table, p_d), p_d=p_d
            ))
        return out
    raise ValueError("region must be 2 or 3")
