"""Plant parameters and the augmented nonlinear turbine model.

State vector x = [omega, x_t, v_t, z_omega, z_p, theta, m_g]:
generator speed (rad/s), tower-top fore-aft position (m) and velocity
(m/s), integral speed error (rad), integral power error (J), pitch angle
(rad), generator torque (N*m).  Control inputs are the pitch and torque
rates u = [u1, u2]; external inputs are w = [v, omega_d, p_d].  The
dynamics split as xdot = f_augmented(x, w) + B u with constant B.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from importlib import resources

import numpy as np

from .coefficients import eval_cp, eval_ct

__all__ = [
    "TurbineParameters",
    "AugmentedState",
    "ControlInput",
    "ExternalInput",
    "OmegaDomainError",
    "default_parameters",
    "load_parameters",
    "save_parameters",
    "wind_power",
    "tip_speed_ratio",
    "rotor_torque",
    "electrical_power",
    "tower_force",
    "f_augmented",
    "b_matrix",
]

N_STATES = 7
N_INPUTS = 2


class OmegaDomainError(ValueError):
    """Generator speed below the model validity threshold (1/omega singularity)."""


@dataclass(frozen=True)
class TurbineParameters:
    """Physical constants and actuator limits, SI units throughout."""

    rho: float          # air density, kg/m^3
    r: float            # rotor radius, m
    n_g: float          # gearbox ratio, generator speed / rotor speed
    j_t: float          # drive-train inertia referred to the rotor axis, kg*m^2
    eta: float          # combined gearbox+generator efficiency, (0, 1]
    m_t: float          # tower-top modal mass, kg
    d_t: float          # tower fore-aft damping, N*s/m
    k_t: float          # tower fore-aft stiffness, N/m
    theta_min: float    # pitch angle bounds, rad
    theta_max: float
    mg_min: float       # generator torque bounds, N*m
    mg_max: float
    dtheta_min: float   # pitch rate bounds, rad/s
    dtheta_max: float
    dmg_min: float      # torque rate bounds, N*m/s
    dmg_max: float
    omega_min: float    # minimum generator speed for model validity, rad/s
    p_rated: float      # rated electrical power, W

    def __post_init__(self):
        for name in ("rho", "r", "n_g", "j_t", "m_t", "d_t", "k_t"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        for lo, hi in (
            ("theta_min", "theta_max"),
            ("mg_min", "mg_max"),
            ("dtheta_min", "dtheta_max"),
            ("dmg_min", "dmg_max"),
        ):
            if not getattr(self, lo) < getattr(self, hi):
                raise ValueError(f"{lo} must be < {hi}")
        if self.omega_min <= 0.0:
            raise ValueError("omega_min must be > 0")
        if self.p_rated <= 0.0:
            raise ValueError("p_rated must be > 0")


@dataclass(frozen=True)
class AugmentedState:
    omega: float    # generator speed, rad/s
    x_t: float      # tower-top fore-aft position, m
    v_t: float      # tower-top fore-aft velocity, m/s
    z_omega: float  # integral of speed tracking error, rad
    z_p: float      # integral of power tracking error, J
    theta: float    # pitch angle, rad
    m_g: float      # generator torque, N*m

    def as_array(self):
        return np.array(
            [self.omega, self.x_t, self.v_t, self.z_omega, self.z_p,
             self.theta, self.m_g]
        )

    @staticmethod
    def from_array(arr):
        a = np.asarray(arr, dtype=float)
        if a.shape != (N_STATES,):
            raise ValueError(f"state vector must have shape ({N_STATES},)")
        return AugmentedState(*[float(v) for v in a])


@dataclass(frozen=True)
class ControlInput:
    u1: float  # pitch rate, rad/s
    u2: float  # torque rate, N*m/s

    def as_array(self):
        return np.array([self.u1, self.u2])


@dataclass(frozen=True)
class ExternalInput:
    v: float        # wind speed, m/s
    omega_d: float  # desired generator speed, rad/s
    p_d: float      # desired electrical power, W


_DEFAULT_FIXTURE = "turbine_3p4mw.json"


def load_parameters(path):
    """Load TurbineParameters from a flat JSON object."""
    with open(path) as fh:
        data = json.load(fh)
    return TurbineParameters(**data)


def save_parameters(params, path):
    with open(path, "w") as fh:
        json.dump(asdict(params), fh, indent=2, sort_keys=True)
        fh.write("\n")


def default_parameters():
    """Bundled self-consistent 3.4 MW-class parameter fixture."""
    data = json.loads(
        resources.files("windlq.data").joinpath(_DEFAULT_FIXTURE).read_text()
    )
    return TurbineParameters(**data)


def wind_power(params, v):
    """Kinetic power of the wind through the rotor disc, W."""
    if v < 0.0:
        raise ValueError("wind speed must be non-negative")
    return 0.5 * params.rho * math.pi * params.r ** 2 * v ** 3


def tip_speed_ratio(params, omega, v):
    """Tip-speed ratio r*omega_r/v with omega_r = omega/n_g."""
    if v <= 0.0:
        raise ValueError("wind speed must be strictly positive")
    return params.r * omega / (params.n_g * v)


def rotor_torque(params, surface, omega, v, theta):
    """Aerodynamic torque on the rotor axis, N*m."""
    if omega < params.omega_min:
        raise OmegaDomainError(
            f"omega={omega} below validity threshold {params.omega_min}"
        )
    lam = tip_speed_ratio(params, omega, v)
    omega_r = omega / params.n_g
    return wind_power(params, v) * eval_cp(surface, lam, theta) / omega_r


def electrical_power(params, omega, m_g):
    """Electrical power eta*omega*m_g, W."""
    return params.eta * omega * m_g


def tower_force(params, surface, omega, v, theta):
    """Aerodynamic thrust on the tower top, N."""
    if v <= 0.0:
        raise ValueError("wind speed must be strictly positive")
    lam = tip_speed_ratio(params, omega, v)
    return 0.5 * params.rho * math.pi * params.r ** 2 * v ** 2 * eval_ct(surface, lam, theta)


class _PlantContext:
    """Precomputed constants + scalar hot-path dynamics for one (params, surface).

    The public module functions wrap this; the simulator drives it directly.
    """

    __slots__ = (
        "params", "surface", "cp", "ct", "c_aero", "ng2_jt", "c_thrust",
        "dt_mt", "kt_mt", "eta", "r_ng", "omega_min", "n_g",
    )

    def __init__(self, params, surface):
        self.params = params
        self.surface = surface
        self.cp = surface._fast["cp"]
        self.ct = surface._fast["ct"]
        half_rho_a = 0.5 * params.rho * math.pi * params.r ** 2
        self.ng2_jt = params.n_g ** 2 / params.j_t
        self.c_aero = half_rho_a * self.ng2_jt
        self.c_thrust = half_rho_a / params.m_t
        self.dt_mt = params.d_t / params.m_t
        self.kt_mt = params.k_t / params.m_t
        self.eta = params.eta
        self.r_ng = params.r / params.n_g
        self.omega_min = params.omega_min
        self.n_g = params.n_g

    def rates(self, omega, x_t, v_t, theta, m_g, v, omega_d, p_d):
        """Derivatives of (omega, x_t, v_t, z_omega, z_p); raises on omega guard."""
        if omega < self.omega_min:
            raise OmegaDomainError(
                f"omega={omega} below validity threshold {self.omega_min}"
            )
        lam = self.r_ng * omega / v
        v2 = v * v
        d_omega = self.c_aero * v2 * v * self.cp(lam, theta) / omega - self.ng2_jt * m_g
        d_vt = self.c_thrust * v2 * self.ct(lam, theta) - self.dt_mt * v_t - self.kt_mt * x_t
        return (
            d_omega,
            v_t,
            d_vt,
            omega_d - omega,
            p_d - self.eta * omega * m_g,
        )

    def rates_clamped(self, omega, x_t, v_t, theta, m_g, v, omega_d, p_d):
        """As `rates` but clamps omega inside the aerodynamic terms.

        Used by integrator substeps so that transient excursions below
        omega_min do not abort mid-step; the caller flags the event.
        """
        clamped = omega < self.omega_min
        om = self.omega_min if clamped else omega
        lam = self.r_ng * om / v
        v2 = v * v
        d_omega = self.c_aero * v2 * v * self.cp(lam, theta) / om - self.ng2_jt * m_g
        d_vt = self.c_thrust * v2 * self.ct(lam, theta) - self.dt_mt * v_t - self.kt_mt * x_t
        return (
            d_omega,
            v_t,
            d_vt,
            omega_d - omega,
            p_d - self.eta * omega * m_g,
        ), clamped


def f_augmented(params, surface, x, w):
    """Drift term of the augmented dynamics, as a 7-vector.

    The full state derivative is f_augmented(x, w) + B u; the last two
    rows are structurally zero because pitch and torque are driven purely
    by their rate inputs.
    """
    if w.v <= 0.0:
        raise ValueError("wind speed must be strictly positive")
    ctx = _PlantContext(params, surface)
    d = ctx.rates(x.omega, x.x_t, x.v_t, x.theta, x.m_g, w.v, w.omega_d, w.p_d)
    return np.array([d[0], d[1], d[2], d[3], d[4], 0.0, 0.0])


def b_matrix():
    """Constant input matrix mapping (u1, u2) onto the last two state rows."""
    b = np.zeros((N_STATES, N_INPUTS))
    b[5, 0] = 1.0
    b[6, 1] = 1.0
    return b
