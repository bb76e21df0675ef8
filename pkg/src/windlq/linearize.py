"""Jacobian of the augmented dynamics at an equilibrium.

The drift f_a is sparse in the state: only eleven entries of the 7x7
Jacobian are nonzero, and the aerodynamic ones reduce to the gradient of
the interpolated Cp/CT surfaces through the tip-speed ratio
lambda = r*omega/(n_g*v).  Writing c = rho*pi*r^2/2:

    A[0,0] = (c n_g^2 / j_t) v^3 [ (dCp/dlam)(r/(n_g v)) omega - Cp ] / omega^2
    A[0,5] = (c n_g^2 / j_t) (v^3/omega) dCp/dth     A[0,6] = -n_g^2/j_t
    A[1,2] = 1
    A[2,0] = (c/m_t) v^2 (dCT/dlam) r/(n_g v)
    A[2,1] = -k_t/m_t    A[2,2] = -d_t/m_t
    A[2,5] = (c/m_t) v^2 dCT/dth
    A[3,0] = -1          A[4,0] = -eta*m_g_s         A[4,6] = -eta*omega_s

A diagonal state/input scaling is provided for synthesis conditioning;
the physical gain recovers as k_phys = S_u k_scaled S_x^{-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import eval_cp, partial_cp, partial_ct
from .equilibrium import Equilibrium, input_scales, state_scales
from .turbine import N_STATES, b_matrix

__all__ = [
    "LinearModel",
    "linearize",
    "controllability_check",
    "scale_model",
    "unscale_gain",
    "scaled_model",
]

# (row, col) positions allowed to be nonzero, 0-indexed.
SPARSITY = frozenset(
    [(0, 0), (0, 5), (0, 6), (1, 2), (2, 0), (2, 1), (2, 2), (2, 5),
     (3, 0), (4, 0), (4, 6)]
)


@dataclass(frozen=True)
class LinearModel:
    a: np.ndarray
    b: np.ndarray
    equilibrium: Equilibrium


def linearize(params, surface, eq):
    """Analytic Jacobian of f_a at the equilibrium."""
    v = eq.w_s.v
    omega = eq.x_s.omega
    lam = eq.lambda_s
    th = eq.theta_s
    c = 0.5 * params.rho * math.pi * params.r ** 2

    cp = eval_cp(surface, lam, th)
    dcp_dlam, dcp_dth = partial_cp(surface, lam, th)
    dct_dlam, dct_dth = partial_ct(surface, lam, th)
    dlam_domega = params.r / (params.n_g * v)

    a = np.zeros((N_STATES, N_STATES))
    c_rot = c * params.n_g ** 2 / params.j_t
    a[0, 0] = c_rot * v ** 3 * (dcp_dlam * dlam_domega * omega - cp) / omega ** 2
    a[0, 5] = c_rot * v ** 3 / omega * dcp_dth
    a[0, 6] = -params.n_g ** 2 / params.j_t
    a[1, 2] = 1.0
    a[2, 0] = c / params.m_t * v ** 2 * dct_dlam * dlam_domega
    a[2, 1] = -params.k_t / params.m_t
    a[2, 2] = -params.d_t / params.m_t
    a[2, 5] = c / params.m_t * v ** 2 * dct_dth
    a[3, 0] = -1.0
    a[4, 0] = -params.eta * eq.x_s.m_g
    a[4, 6] = -params.eta * omega
    return LinearModel(a=a, b=b_matrix(), equilibrium=eq)


def controllability_check(model_or_a, b=None, tol=1e-10):
    """Rank of the controllability matrix [B, AB, ..., A^{n-1}B].

    A is normalized before building the Krylov blocks (the span, hence
    the verdict, is invariant to positive scalar scaling of A), each row
    of the stacked matrix is rescaled to unit peak (a diagonal state
    similarity, which also leaves controllability unchanged but undoes
    the wild unit spread of the physical model), and the rank comes from
    the singular values relative to the largest one.

    Returns
    -------
    (controllable, rank) : (bool, int)
    """
    if b is None:
        a, b = model_or_a.a, model_or_a.b
    else:
        a = model_or_a
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    na = np.linalg.norm(a, 2)
    nb = np.linalg.norm(b, 2)
    if nb == 0.0:
        return False, 0
    ah = a / na if na > 0.0 else a
    blk = b / nb
    blocks = [blk]
    for _ in range(n - 1):
        blk = ah @ blk
        blocks.append(blk)
    krylov = np.hstack(blocks)
    peaks = np.max(np.abs(krylov), axis=1, keepdims=True)
    scale = np.where(peaks > 0.0, peaks, 1.0)
    sv = np.linalg.svd(krylov / scale, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0]))
    return rank == n, rank


def scale_model(a, b, sx, su):
    """Similarity-scale (A, B) by diagonal state/input scalings."""
    sx = np.asarray(sx, dtype=float)
    su = np.asarray(su, dtype=float)
    a_s = a / sx[:, None] * sx[None, :]
    b_s = b / sx[:, None] * su[None, :]
    return a_s, b_s


def unscale_gain(k_scaled, sx, su):
    """Physical-units gain from a gain designed in scaled coordinates."""
    sx = np.asarray(sx, dtype=float)
    su = np.asarray(su, dtype=float)
    return k_scaled * su[:, None] / sx[None, :]


def scaled_model(params, model):
    """Convenience: scale a LinearModel with the documented characteristic scales."""
    sx = state_scales(params)
    su = input_scales(params)
    a_s, b_s = scale_model(model.a, model.b, sx, su)
    return a_s, b_s, sx, su
