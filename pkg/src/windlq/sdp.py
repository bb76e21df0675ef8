"""Log-barrier interior-point solver for small dense linear SDPs.

Solves

    minimize    c' z
    subject to  G_b(z) := F0_b + sum_k z_k Fk_b  is PSD,  for each block b
                |z_k| <= box_bound

by path following on the log-det barrier.  Problems are tiny here (tens
of variables, blocks of order <= ~16), so Newton systems are formed
densely and factorized directly.

The box bound is part of the solved problem: it keeps every centering
subproblem bounded when the objective has flat directions (e.g. a zero
state-cost weight lets the Lyapunov variable grow without changing the
cost).  Its default is far above any optimum arising from the scaled
turbine problems, where it never binds.

A phase-I program (minimize s subject to G_b(z) + s I PSD) produces a
strictly feasible start or an infeasibility verdict; phase II then
tracks the central path until the barrier duality gap m_total/t drops
below the requested tolerance, with m_total the total barrier order
(cone orders plus the box terms).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

__all__ = [
    "SdpBlock",
    "ConeProgram",
    "SdpSolution",
    "SdpInfeasibleError",
    "SdpNumericalError",
    "solve",
]


class SdpInfeasibleError(RuntimeError):
    """Phase I converged without finding a strictly feasible point."""


class SdpNumericalError(RuntimeError):
    """Newton iteration failed to make progress."""


@dataclass
class SdpBlock:
    """One PSD cone: constant term f0 (m x m) and coefficients fk (K x m x m)."""

    f0: np.ndarray
    fk: np.ndarray

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=float)
        self.fk = np.asarray(self.fk, dtype=float)
        m = self.f0.shape[0]
        if self.f0.shape != (m, m):
            raise ValueError("f0 must be square")
        if self.fk.ndim != 3 or self.fk.shape[1:] != (m, m):
            raise ValueError("fk must have shape (K, m, m)")

    @property
    def order(self):
        return self.f0.shape[0]

    def evaluate(self, z):
        return self.f0 + np.tensordot(z, self.fk, axes=1)


@dataclass
class ConeProgram:
    c: np.ndarray
    blocks: list[SdpBlock]

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        for blk in self.blocks:
            if blk.fk.shape[0] != self.c.size:
                raise ValueError("coefficient count mismatch between blocks and c")

    @property
    def n_vars(self):
        return self.c.size

    @property
    def total_order(self):
        return sum(b.order for b in self.blocks)

    def to_dict(self):
        return {
            "c": self.c.tolist(),
            "blocks": [
                {"f0": b.f0.tolist(), "fk": b.fk.tolist()} for b in self.blocks
            ],
        }

    @staticmethod
    def from_dict(data):
        return ConeProgram(
            c=np.array(data["c"], dtype=float),
            blocks=[
                SdpBlock(np.array(b["f0"], dtype=float), np.array(b["fk"], dtype=float))
                for b in data["blocks"]
            ],
        )


@dataclass
class SdpSolution:
    z: np.ndarray
    objective: float
    gap: float
    newton_steps: int
    status: str = "optimal"
    info: dict = field(default_factory=dict)


def _chol_all(blocks, z):
    """Cholesky factors of every block at z, or None if any is not PD."""
    factors = []
    for blk in blocks:
        g = blk.evaluate(z)
        try:
            factors.append(np.linalg.cholesky(g))
        except np.linalg.LinAlgError:
            return None
    return factors


def _grad_hess(blocks, factors, n_vars):
    grad = np.zeros(n_vars)
    hess = np.zeros((n_vars, n_vars))
    for blk, ch in zip(blocks, factors):
        m = blk.order
        # W_k = L^{-1} F_k L^{-T} for all k at once (F_k symmetric)
        f2 = np.moveaxis(blk.fk, 0, 1).reshape(m, n_vars * m)
        t2 = solve_triangular(ch, f2, lower=True)          # T_k = L^{-1} F_k
        s2 = t2.reshape(m, n_vars, m).transpose(2, 1, 0).reshape(m, n_vars * m)
        u2 = solve_triangular(ch, s2, lower=True)          # U_k = L^{-1} T_k'
        w = u2.reshape(m, n_vars, m).transpose(1, 2, 0)    # W_k = U_k'
        grad -= np.einsum("kii->k", w)
        hess += np.einsum("aij,bji->ab", w, w)
    return grad, hess


class _Barrier:
    """Log-det barrier over the cone blocks plus an analytic box on z."""

    def __init__(self, blocks, box):
        self.blocks = blocks
        self.box = box

    def factors(self, z):
        if np.max(np.abs(z)) >= self.box:
            return None
        return _chol_all(self.blocks, z)

    def value(self, z, factors):
        val = 0.0
        for ch in factors:
            val -= 2.0 * float(np.sum(np.log(np.diag(ch))))
        val -= float(np.sum(np.log(self.box - z) + np.log(self.box + z)))
        return val

    def grad_hess(self, z, factors):
        g, h = _grad_hess(self.blocks, factors, z.size)
        lo = self.box + z
        hi = self.box - z
        g += 1.0 / hi - 1.0 / lo
        h[np.diag_indices_from(h)] += 1.0 / hi ** 2 + 1.0 / lo ** 2
        return g, h


def _center(barrier, c, z, t, *, decrement_tol=1e-9, max_steps=120, stop=None):
    """Damped Newton on t*c'z + barrier(z); z must be strictly feasible.

    Newton steps are norm-capped so that flat directions walk outward in
    bounded hops instead of jumping to the box edge.  `stop`, if given,
    is checked after every accepted step.
    """
    factors = barrier.factors(z)
    if factors is None:
        raise SdpNumericalError("centering called at an infeasible point")
    steps = 0
    for _ in range(max_steps):
        bgrad, bhess = barrier.grad_hess(z, factors)
        grad = t * c + bgrad
        try:
            chh = cho_factor(bhess, lower=True)
            dz = -cho_solve(chh, grad)
        except np.linalg.LinAlgError:
            n = z.size
            reg = 1e-10 * max(1.0, float(np.trace(bhess)) / n)
            dz = -np.linalg.solve(bhess + reg * np.eye(n), grad)
        decr2 = float(-grad @ dz)
        # floating-point floor: the gradient of t*c'z carries ~eps*t*|obj|
        # of rounding noise, below which the decrement is meaningless
        tol_eff = max(decrement_tol, 1e-13 * (1.0 + t * abs(float(c @ z))))
        if decr2 <= tol_eff ** 2:
            return z, factors, steps
        cap = 100.0 * (1.0 + float(np.linalg.norm(z)))
        nrm = float(np.linalg.norm(dz))
        if nrm > cap:
            dz *= cap / nrm
        psi0 = t * float(c @ z) + barrier.value(z, factors)
        slope = float(grad @ dz)
        alpha = 1.0
        improved = False
        while alpha > 1e-13:
            z_new = z + alpha * dz
            f_new = barrier.factors(z_new)
            if f_new is not None:
                psi_new = t * float(c @ z_new) + barrier.value(z_new, f_new)
                if psi_new <= psi0 + 0.01 * alpha * slope:
                    z, factors = z_new, f_new
                    improved = True
                    break
            alpha *= 0.5
        steps += 1
        if not improved:
            # stalled at machine precision; current point stays feasible
            return z, factors, steps
        if stop is not None and stop(z):
            return z, factors, steps
    return z, factors, steps


def _path_follow(barrier, c, m_total, z, *, gap_tol, mu, decrement_tol, stop=None):
    t = 1.0
    total_steps = 0
    while True:
        final = m_total / t <= gap_tol
        tol = decrement_tol if final else max(decrement_tol, 1e-3)
        z, _, steps = _center(barrier, c, z, t, decrement_tol=tol, stop=stop)
        total_steps += steps
        if stop is not None and stop(z):
            return z, m_total / t, total_steps
        if final:
            return z, m_total / t, total_steps
        t *= mu


def solve(program, *, gap_tol=1e-9, mu=10.0, box_bound=1e8):
    """Solve the cone program to the requested barrier gap.

    Parameters
    ----------
    program : ConeProgram
    gap_tol : float
        Target barrier duality gap (absolute, in objective units).
    mu : float
        Path-following multiplier for the barrier parameter.
    box_bound : float
        Bound |z_k| <= box_bound added to every variable (see module
        docstring); must comfortably exceed the expected solution scale.

    Raises
    ------
    SdpInfeasibleError, SdpNumericalError
    """
    blocks = list(program.blocks)
    c = program.c
    n = program.n_vars
    m_total = program.total_order + 2 * n
    barrier = _Barrier(blocks, box_bound)

    z = np.zeros(n)
    if barrier.factors(z) is None:
        # Phase I in (z, s): minimize s subject to G_b(z) + s I PSD.
        s0 = 0.0
        for blk in blocks:
            lam_min = float(np.linalg.eigvalsh(blk.evaluate(z))[0])
            s0 = max(s0, -lam_min)
        s0 = 1.0 + 1.01 * s0
        margin = 1e-6 * (1.0 + s0)
        p1_blocks = [
            SdpBlock(
                blk.f0,
                np.concatenate([blk.fk, np.eye(blk.order)[None, :, :]], axis=0),
            )
            for blk in blocks
        ]
        b1 = _Barrier(p1_blocks, box_bound)
        c1 = np.zeros(n + 1)
        c1[n] = 1.0
        z1 = np.concatenate([z, [s0]])
        m1 = program.total_order + 2 * (n + 1)
        z1, gap1, _ = _path_follow(
            b1, c1, m1, z1, gap_tol=0.5 * margin, mu=mu,
            decrement_tol=1e-6, stop=lambda w: w[n] < -margin,
        )
        if z1[n] >= 0.0:
            raise SdpInfeasibleError(
                f"phase I stalled at slack {z1[n]:.3e} (gap {gap1:.3e})"
            )
        z = z1[:n]
        if barrier.factors(z) is None:
            raise SdpNumericalError("phase I produced a non-interior point")

    z, gap, steps = _path_follow(
        barrier, c, m_total, z, gap_tol=gap_tol, mu=mu, decrement_tol=1e-9,
    )
    return SdpSolution(
        z=z, objective=float(c @ z), gap=gap, newton_steps=steps,
    )
