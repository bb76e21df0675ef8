"""Robust multi-model H2 state-feedback synthesis via LMIs.

For a set of vertex systems (A_i, B) sharing one input matrix, a single
gain K is sought that stabilizes every vertex and bounds the worst-case
quadratic cost.  With decision variables P (n x n, symmetric), Y = K P
(p x n) and an epigraph variable X (p x p) the problem is the linear SDP

    minimize    Tr(Q P) + Tr(X)
    subject to  [[X, R^(1/2) Y], [Y' R^(1/2), P]]  >=  eps I
                P                                  >=  eps I
                A_i P + P A_i' + B Y + Y' B' + I   <= -eps I   for all i

from which K = Y P^{-1}.  The strict inequalities of the underlying
problem are realized by the fixed margin eps.  A certification pass
recomputes everything the solution claims from scratch: LMI residual
eigenvalues, per-vertex Lyapunov solutions P_i with their costs J_i,
the dominance P > P_i, and the bound J_i < J.

All synthesis here is coordinate-agnostic; the turbine pipeline feeds
scaled models (see `linearize`) and unscales the gain afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from . import sdp
from .equilibrium import compute_equilibrium, input_scales, state_scales
from .linearize import controllability_check, linearize, scale_model, unscale_gain
from .sdp import ConeProgram, SdpBlock, SdpInfeasibleError, SdpNumericalError

__all__ = [
    "SynthesisWeights",
    "ModelSet",
    "SynthesisResult",
    "SynthesisProgram",
    "CertificationFailure",
    "CertificateReport",
    "SdpInfeasibleError",
    "SdpNumericalError",
    "assemble_sdp",
    "solve_sdp",
    "synthesize",
    "certify",
    "polytope_stability_sample",
    "spectral_abscissa",
    "default_scaled_weights",
    "synthesize_vertex_set",
    "VertexSetSynthesis",
]


class CertificationFailure(RuntimeError):
    """A certificate condition failed on recomputation."""


def _check_symmetric(m, name, tol=1e-12):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SynthesisWeights:
    """State weight Q (PSD) and input weight R (PD)."""

    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q = _check_symmetric(self.q, "q")
        r = _check_symmetric(self.r, "r")
        if np.linalg.eigvalsh(q)[0] < -1e-10:
            raise ValueError("q must be positive semidefinite")
        if np.linalg.eigvalsh(r)[0] < 1e-10:
            raise ValueError("r must be positive definite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)

    @staticmethod
    def from_diagonals(q_diag, r_diag):
        return SynthesisWeights(np.diag(np.asarray(q_diag, dtype=float)),
                                np.diag(np.asarray(r_diag, dtype=float)))


@dataclass(frozen=True)
class ModelSet:
    """Vertex dynamics matrices A_i with the shared input matrix B."""

    vertices: tuple
    b: np.ndarray

    def __post_init__(self):
        verts = tuple(np.asarray(a, dtype=float) for a in self.vertices)
        if not verts:
            raise ValueError("at least one vertex is required")
        b = np.asarray(self.b, dtype=float)
        n = verts[0].shape[0]
        if b.ndim != 2 or b.shape[0] != n:
            raise ValueError("b row count must match state dimension")
        for a in verts:
            if a.shape != (n, n):
                raise ValueError("all vertices must be square and same size")
        for i, a in enumerate(verts):
            ok, rank = controllability_check(a, b)
            if not ok:
                raise ValueError(f"vertex {i} is not controllable (rank {rank} < {n})")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.vertices[0].shape[0]

    @property
    def p(self):
        return self.b.shape[1]

    @property
    def q_count(self):
        return len(self.vertices)


@dataclass(frozen=True)
class SynthesisResult:
    k: np.ndarray               # feedback gain, u = K xi
    p: np.ndarray               # joint Lyapunov-like SDP variable
    y: np.ndarray               # Y = K P
    x_bound: np.ndarray         # epigraph bound on the input-cost trace term
    cost_j: float               # Tr(Q P) + Tr(X), upper bound on every J_i
    epsilon: float
    per_vertex_cost: tuple      # certified J_i
    solver_gap: float = 0.0


def _sqrt_psd(m, floor=1e-12):
    """Symmetric eigen square root with an eigenvalue floor."""
    w, v = np.linalg.eigh(m)
    w = np.maximum(w, floor)
    return (v * np.sqrt(w)) @ v.T


def _sym_basis(n):
    """Symmetric basis matrices E_ij (i <= j) and their index pairs."""
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    mats = []
    for i, j in pairs:
        e = np.zeros((n, n))
        e[i, j] = 1.0
        e[j, i] = 1.0
        mats.append(e)
    return pairs, mats


@dataclass
class SynthesisProgram:
    """Assembled cone program plus the variable layout needed to unpack it."""

    cone: ConeProgram
    n: int
    p: int
    epsilon: float

    @property
    def n_p_vars(self):
        return self.n * (self.n + 1) // 2

    @property
    def n_y_vars(self):
        return self.p * self.n

    def unpack(self, z):
        n, p = self.n, self.p
        pairs, _ = _sym_basis(n)
        pm = np.zeros((n, n))
        for (i, j), v in zip(pairs, z[: self.n_p_vars]):
            pm[i, j] = v
            pm[j, i] = v
        y = np.asarray(z[self.n_p_vars: self.n_p_vars + self.n_y_vars]).reshape(p, n)
        xpairs, _ = _sym_basis(p)
        xm = np.zeros((p, p))
        for (a, b), v in zip(xpairs, z[self.n_p_vars + self.n_y_vars:]):
            xm[a, b] = v
            xm[b, a] = v
        return pm, y, xm

    def to_dict(self):
        return {
            "cone": self.cone.to_dict(),
            "n": self.n,
            "p": self.p,
            "epsilon": self.epsilon,
        }

    @staticmethod
    def from_dict(data):
        return SynthesisProgram(
            cone=ConeProgram.from_dict(data["cone"]),
            n=int(data["n"]),
            p=int(data["p"]),
            epsilon=float(data["epsilon"]),
        )


def assemble_sdp(models, weights, epsilon=1e-8):
    """Build the cone program for the vertex set and weights."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be > 0")
    n, p = models.n, models.p
    if weights.q.shape != (n, n) or weights.r.shape != (p, p):
        raise ValueError("weight dimensions do not match the model set")
    b = models.b
    r_half = _sqrt_psd(weights.r)

    p_pairs, p_mats = _sym_basis(n)
    x_pairs, x_mats = _sym_basis(p)
    n_pv = len(p_pairs)
    n_yv = p * n
    n_xv = len(x_pairs)
    n_vars = n_pv + n_yv + n_xv
    y_index = [(a, j) for a in range(p) for j in range(n)]

    # objective: Tr(Q P) + Tr(X)
    c = np.zeros(n_vars)
    for k, (i, j) in enumerate(p_pairs):
        c[k] = weights.q[i, j] * (1.0 if i == j else 2.0)
    for k, (a, bb) in enumerate(x_pairs):
        c[n_pv + n_yv + k] = 1.0 if a == bb else 0.0

    blocks = []

    # Schur block [[X, R^1/2 Y], [Y' R^1/2, P]] >= eps I
    ms = p + n
    fk = np.zeros((n_vars, ms, ms))
    for k, e in enumerate(p_mats):
        fk[k, p:, p:] = e
    for k, (a, j) in enumerate(y_index):
        col = r_half[:, a]
        fk[n_pv + k, :p, p + j] += col
        fk[n_pv + k, p + j, :p] += col
    for k, e in enumerate(x_mats):
        fk[n_pv + n_yv + k, :p, :p] = e
    blocks.append(SdpBlock(-epsilon * np.eye(ms), fk))

    # P >= eps I
    fk = np.zeros((n_vars, n, n))
    for k, e in enumerate(p_mats):
        fk[k] = e
    blocks.append(SdpBlock(-epsilon * np.eye(n), fk))

    # -(A_i P + P A_i' + B Y + Y' B' + I) >= eps I
    for a_i in models.vertices:
        fk = np.zeros((n_vars, n, n))
        for k, e in enumerate(p_mats):
            ae = a_i @ e
            fk[k] = -(ae + ae.T)
        for k, (a, j) in enumerate(y_index):
            col = b[:, a]
            m = np.zeros((n, n))
            m[:, j] -= col
            m[j, :] -= col
            fk[n_pv + k] = m
        blocks.append(SdpBlock(-(1.0 + epsilon) * np.eye(n), fk))

    return SynthesisProgram(
        cone=ConeProgram(c=c, blocks=blocks), n=n, p=p, epsilon=epsilon
    )


def solve_sdp(program, gap_tol=1e-9, box_bound=1e8):
    """Solve an assembled program; returns (P, Y, X, objective, gap)."""
    sol = sdp.solve(program.cone, gap_tol=gap_tol, box_bound=box_bound)
    pm, y, xm = program.unpack(sol.z)
    return pm, y, xm, sol.objective, sol.gap


def spectral_abscissa(m):
    """Maximum real part of the eigenvalues."""
    return float(np.max(np.real(np.linalg.eigvals(m))))


def _vertex_costs(models, weights, k):
    """Per-vertex Lyapunov solutions P_i and costs J_i for the closed loops."""
    q_half = _sqrt_psd(weights.q, floor=0.0)
    r_half = _sqrt_psd(weights.r)
    p_list, j_list = [], []
    for a_i in models.vertices:
        acl = a_i + models.b @ k
        if spectral_abscissa(acl) >= 0.0:
            raise CertificationFailure("closed-loop vertex is not Hurwitz")
        p_i = solve_continuous_lyapunov(acl, -np.eye(models.n))
        p_i = 0.5 * (p_i + p_i.T)
        rk = r_half @ k
        j_i = float(np.trace(q_half.T @ p_i @ q_half) + np.trace(rk @ p_i @ rk.T))
        p_list.append(p_i)
        j_list.append(j_i)
    return p_list, j_list


def synthesize(models, weights, epsilon=1e-8, gap_tol=1e-9, box_bound=1e8):
    """Solve the vertex-set synthesis and package the certified result."""
    program = assemble_sdp(models, weights, epsilon)
    try:
        pm, y, xm, objective, gap = solve_sdp(program, gap_tol, box_bound)
    except SdpInfeasibleError as exc:
        raise SdpInfeasibleError(
            f"synthesis infeasible for q={models.q_count} vertex set: {exc}"
        ) from exc
    k = np.linalg.solve(pm.T, y.T).T  # K = Y P^{-1}, P symmetric
    _, j_list = _vertex_costs(models, weights, k)
    return SynthesisResult(
        k=k, p=pm, y=y, x_bound=xm, cost_j=objective, epsilon=epsilon,
        per_vertex_cost=tuple(j_list), solver_gap=gap,
    )


@dataclass(frozen=True)
class CertificateReport:
    schur_min_eig: float        # min eig of the Schur block, must be >= eps/2
    p_min_eig: float            # min eig of P, must be >= eps/2
    stability_max_eig: tuple    # per vertex: max eig of A_iP+PA_i'+BY+Y'B'+I, <= -eps/2
    closed_loop_abscissa: tuple
    p_dominance_min_eig: tuple  # per vertex: min eig of P - P_i, > 0
    per_vertex_cost: tuple
    cost_j: float

    def summary(self):
        lines = [
            f"joint cost bound J = {self.cost_j:.6e}",
            f"Schur block min eig      {self.schur_min_eig: .3e}",
            f"P min eig                {self.p_min_eig: .3e}",
        ]
        for i, (se, ab, pd, j) in enumerate(zip(
                self.stability_max_eig, self.closed_loop_abscissa,
                self.p_dominance_min_eig, self.per_vertex_cost)):
            lines.append(
                f"vertex {i}: stab max eig {se: .3e}  abscissa {ab: .4e}  "
                f"min eig(P-P_i) {pd: .3e}  J_i {j:.6e}"
            )
        return "\n".join(lines)


def certify(result, models, weights):
    """Recompute every certificate condition; raise CertificationFailure on any miss.

    Checks: (a) the LMI residuals are strictly on the correct side by at
    least eps/2, (b) each per-vertex Lyapunov equation has a PD solution
    P_i, (c) the per-vertex costs J_i follow from P_i, (d) P > P_i and
    J_i < J for every vertex.
    """
    eps = result.epsilon
    k, pm, y, xm = result.k, result.p, result.y, result.x_bound
    n = models.n
    r_half = _sqrt_psd(weights.r)

    kp_err = float(np.max(np.abs(k @ pm - y)))
    if kp_err > 1e-8 * max(1.0, float(np.max(np.abs(y)))):
        raise CertificationFailure(f"K P differs from Y by {kp_err:.3e}")

    schur = np.block([[xm, r_half @ y], [(r_half @ y).T, pm]])
    schur_min = float(np.linalg.eigvalsh(schur)[0])
    if schur_min < 0.5 * eps:
        raise CertificationFailure(f"Schur block min eig {schur_min:.3e} < eps/2")
    p_min = float(np.linalg.eigvalsh(pm)[0])
    if p_min < 0.5 * eps:
        raise CertificationFailure(f"P min eig {p_min:.3e} < eps/2")

    stab_eigs, abscissas = [], []
    for i, a_i in enumerate(models.vertices):
        resid = a_i @ pm + pm @ a_i.T + models.b @ y + (models.b @ y).T + np.eye(n)
        semax = float(np.linalg.eigvalsh(resid)[-1])
        if semax > -0.5 * eps:
            raise CertificationFailure(
                f"vertex {i}: stability LMI max eig {semax:.3e} > -eps/2"
            )
        stab_eigs.append(semax)
        abscissas.append(spectral_abscissa(a_i + models.b @ result.k))

    p_list, j_list = _vertex_costs(models, weights, k)
    dominance = []
    for i, (p_i, j_i) in enumerate(zip(p_list, j_list)):
        dmin = float(np.linalg.eigvalsh(pm - p_i)[0])
        if dmin <= 0.0:
            raise CertificationFailure(f"vertex {i}: P - P_i not positive definite")
        if j_i >= result.cost_j:
            raise CertificationFailure(
                f"vertex {i}: J_i = {j_i:.6e} not below J = {result.cost_j:.6e}"
            )
        dominance.append(dmin)

    return CertificateReport(
        schur_min_eig=schur_min,
        p_min_eig=p_min,
        stability_max_eig=tuple(stab_eigs),
        closed_loop_abscissa=tuple(abscissas),
        p_dominance_min_eig=tuple(dominance),
        per_vertex_cost=tuple(j_list),
        cost_j=result.cost_j,
    )


def polytope_stability_sample(result, models, n_samples, seed=0):
    """Worst closed-loop spectral abscissa over random convex combinations.

    Combination weights are drawn uniformly from the simplex
    (symmetric Dirichlet), deterministically per seed.
    """
    rng = np.random.default_rng(seed)
    alphas = rng.dirichlet(np.ones(models.q_count), size=n_samples)
    verts = np.stack(models.vertices)
    bk = models.b @ result.k
    worst = -np.inf
    for alpha in alphas:
        a_mix = np.tensordot(alpha, verts, axes=1)
        worst = max(worst, spectral_abscissa(a_mix + bk))
    return worst


# Default synthesis weights, expressed as diagonals in the scaled
# coordinates of `linearize`/`equilibrium` (artifact-tuned).  Region 3
# leans on the power-error integrator for accurate tracking; region 2
# emphasizes speed tracking to hold the optimal tip-speed ratio.
_SCALED_WEIGHTS = {
    2: ([30.0, 0.05, 3.0, 30.0, 3.0, 0.02, 0.02], [1.0, 1.0]),
    3: ([3.0, 0.05, 3.0, 3.0, 300.0, 0.02, 0.02], [1.0, 1.0]),
}


def default_scaled_weights(region):
    """SynthesisWeights (scaled coordinates) for operating region 2 or 3."""
    try:
        q_diag, r_diag = _SCALED_WEIGHTS[int(region)]
    except KeyError:
        raise ValueError("region must be 2 or 3") from None
    return SynthesisWeights.from_diagonals(q_diag, r_diag)


@dataclass(frozen=True)
class VertexSetSynthesis:
    """Scaled-coordinate synthesis output plus the physical-units gain."""

    result: SynthesisResult
    report: CertificateReport
    k_physical: np.ndarray
    models: ModelSet            # scaled coordinates
    equilibria: tuple
    external_inputs: tuple


def synthesize_vertex_set(params, surface, w_list, weights,
                          epsilon=1e-8, gap_tol=1e-9):
    """Equilibria -> Jacobians -> scaled vertex set -> certified gain.

    `weights` are in scaled coordinates (see `default_scaled_weights`).
    The returned gain `k_physical` acts on physical deviation states.
    """
    if not w_list:
        raise ValueError("need at least one external input")
    sx = state_scales(params)
    su = input_scales(params)
    equilibria = []
    verts = []
    b_s = None
    for w_s in w_list:
        eq = compute_equilibrium(params, surface, w_s)
        model = linearize(params, surface, eq)
        a_s, b_scaled = scale_model(model.a, model.b, sx, su)
        equilibria.append(eq)
        verts.append(a_s)
        b_s = b_scaled
    models = ModelSet(vertices=tuple(verts), b=b_s)
    result = synthesize(models, weights, epsilon=epsilon, gap_tol=gap_tol)
    report = certify(result, models, weights)
    k_phys = unscale_gain(result.k, sx, su)
    return VertexSetSynthesis(
        result=result, report=report, k_physical=k_phys, models=models,
        equilibria=tuple(equilibria), external_inputs=tuple(w_list),
    )
