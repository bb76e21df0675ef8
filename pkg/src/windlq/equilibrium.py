"""Equilibrium computation for the augmented turbine model.

For a constant external input w = (v, omega_d, p_d) an equilibrium
exists iff the power coefficient equation

    cp(lambda_s, theta_s) = 2 p_d / (rho pi r^2 eta v^3)

has a pitch solution theta_s within the actuator bounds, where
lambda_s = (r/n_g) * omega_d / v is fixed by the inputs.  When several
solutions exist the largest pitch angle is selected.  At the equilibrium
the rate inputs vanish, the tower is at rest, and the generator torque
balances the desired power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import eval_cp, eval_ct
from .turbine import (
    AugmentedState,
    ControlInput,
    ExternalInput,
    f_augmented,
    wind_power,
)

__all__ = [
    "NoEquilibrium",
    "Equilibrium",
    "required_cp",
    "solve_theta",
    "compute_equilibrium",
    "state_scales",
    "input_scales",
    "scaled_residual_norm",
]

# Dense-scan resolution and bisection tolerance for the pitch root search.
_SCAN_POINTS = 2000
_BISECT_TOL = 1e-12
# Absolute Cp slack under which a scan sample counts as an exact root;
# keeps boundary equilibria (target equal to an attained extremum up to
# rounding) solvable without admitting genuinely unattainable targets.
_ROOT_ZTOL = 1e-11


class NoEquilibrium(RuntimeError):
    """No pitch angle inside the bounds satisfies the power-balance equation."""


@dataclass(frozen=True)
class Equilibrium:
    x_s: AugmentedState
    u_s: ControlInput
    w_s: ExternalInput
    lambda_s: float
    theta_s: float


def required_cp(params, w_s):
    """Power coefficient the rotor must realize to hold p_d at wind v."""
    if w_s.v <= 0.0:
        raise ValueError("wind speed must be strictly positive")
    return 2.0 * w_s.p_d / (params.rho * math.pi * params.r ** 2 * params.eta * w_s.v ** 3)


def solve_theta(surface, lambda_s, target_cp, theta_min, theta_max):
    """Largest pitch angle in [theta_min, theta_max] with cp(lambda_s, .) = target_cp.

    A dense uniform scan brackets every sign change of
    cp(lambda_s, theta) - target_cp, each bracket is bisected, and the
    largest root is returned.  Scan samples within `_ROOT_ZTOL` of the
    target count as roots directly, which makes boundary equilibria
    (target equal to the attainable extremum up to rounding) solvable.
    """
    if theta_max < theta_min:
        raise ValueError("theta_max < theta_min")
    ev = surface._fast["cp"]
    lam = float(lambda_s)

    def g(th):
        return ev(lam, th) - target_cp

    thetas = np.linspace(theta_min, theta_max, _SCAN_POINTS)
    vals = [g(float(t)) for t in thetas]

    best = None
    for i in range(_SCAN_POINTS - 1, -1, -1):
        if abs(vals[i]) <= _ROOT_ZTOL:
            best = float(thetas[i])
            break
        if i > 0 and vals[i - 1] * vals[i] < 0.0:
            lo, hi = float(thetas[i - 1]), float(thetas[i])
            glo = vals[i - 1]
            while hi - lo > _BISECT_TOL:
                mid = 0.5 * (lo + hi)
                gm = g(mid)
                if gm == 0.0:
                    lo = hi = mid
                    break
                if (glo < 0.0) == (gm < 0.0):
                    lo, glo = mid, gm
                else:
                    hi = mid
            best = 0.5 * (lo + hi)
            break
    if best is None:
        raise NoEquilibrium(
            f"cp({lambda_s:.6g}, theta) = {target_cp:.6g} has no solution in "
            f"[{theta_min:.6g}, {theta_max:.6g}]"
        )
    return best


def compute_equilibrium(params, surface, w_s):
    """Equilibrium (x_s, u_s=0, w_s) of the augmented model.

    The integrator states are free at an equilibrium (their derivatives
    vanish regardless of their values) and are set to zero so that
    deviation coordinates measure error accumulated since controller
    start.
    """
    if w_s.omega_d < params.omega_min:
        raise ValueError("omega_d below model validity threshold")
    lambda_s = params.r * w_s.omega_d / (params.n_g * w_s.v)
    target = required_cp(params, w_s)
    theta_s = solve_theta(surface, lambda_s, target, params.theta_min, params.theta_max)
    m_g_s = w_s.p_d / (params.eta * w_s.omega_d)
    x_t_s = (
        0.5 * params.rho * math.pi * params.r ** 2 / params.k_t
        * w_s.v ** 2 * eval_ct(surface, lambda_s, theta_s)
    )
    x_s = AugmentedState(
        omega=w_s.omega_d, x_t=x_t_s, v_t=0.0, z_omega=0.0, z_p=0.0,
        theta=theta_s, m_g=m_g_s,
    )
    return Equilibrium(
        x_s=x_s, u_s=ControlInput(0.0, 0.0), w_s=w_s,
        lambda_s=lambda_s, theta_s=theta_s,
    )


def state_scales(params):
    """Characteristic magnitude of each state, used for scaled norms.

    omega scales with the rated operating speed, the tower states with
    1 m / 1 m/s, the integrators with one second of full-scale error,
    pitch with its span, and torque with its upper bound.
    """
    s_omega = params.p_rated / (params.eta * params.mg_max)
    return np.array([
        s_omega,
        1.0,
        1.0,
        s_omega,            # rad of accumulated speed error over ~1 s
        params.p_rated,     # J of accumulated power error over ~1 s
        params.theta_max - params.theta_min,
        params.mg_max,
    ])


def input_scales(params):
    """Characteristic magnitude of each rate input (its saturation bound)."""
    return np.array([params.dtheta_max, params.dmg_max])


def scaled_residual_norm(params, surface, eq):
    """||f_a(x_s, w_s)|| with each row divided by its state scale per second."""
    f = f_augmented(params, surface, eq.x_s, eq.w_s)
    return float(np.linalg.norm(f / state_scales(params)))
