"""Independent oracles used by the test suite.

Everything here deliberately avoids the code paths it checks: Jacobians
come from central finite differences of the nonlinear model, LQR gains
from Kleinman iteration on Lyapunov equations (with a Bass-style
stabilizing start), and extrema/roots from exhaustive scans.
"""

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from windlq.equilibrium import state_scales
from windlq.turbine import AugmentedState, f_augmented


def finite_difference_jacobian(params, surface, eq):
    """Central-difference Jacobian of f_a in the state at an equilibrium."""
    x0 = eq.x_s.as_array()
    scales = state_scales(params)
    jac = np.zeros((7, 7))
    for j in range(7):
        h = max(1e-6 * abs(x0[j]), 1e-7 * scales[j])
        xp = x0.copy()
        xm = x0.copy()
        xp[j] += h
        xm[j] -= h
        fp = f_augmented(params, surface, AugmentedState.from_array(xp), eq.w_s)
        fm = f_augmented(params, surface, AugmentedState.from_array(xm), eq.w_s)
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def bass_stabilizing_gain(a, b):
    """Stabilizing gain via the Bass shifted-Lyapunov construction."""
    n = a.shape[0]
    beta = 1.0 + np.linalg.norm(a)
    w = solve_continuous_lyapunov(a + beta * np.eye(n), 2.0 * b @ b.T)
    return -np.linalg.solve(w.T, b).T


def kleinman_lqr(a, b, q, r, max_iter=100, tol=1e-13):
    """LQR gain by Kleinman iteration (Newton on the Riccati equation).

    Returns (K, X) with u = K x the optimal feedback (negative-definite
    closed loop) and X the stabilizing Riccati solution.
    """
    k = bass_stabilizing_gain(a, b)
    r_inv = np.linalg.inv(r)
    x = None
    for _ in range(max_iter):
        acl = a + b @ k
        x = solve_continuous_lyapunov(acl.T, -(q + k.T @ r @ k))
        k_next = -r_inv @ b.T @ x
        if np.max(np.abs(k_next - k)) <= tol * max(1.0, float(np.max(np.abs(k_next)))):
            return k_next, x
        k = k_next
    return k, x


def h2_cost_of_gain(a, b, q, r, k):
    """Closed-loop quadratic cost Tr((Q + K'RK) P) with unit-intensity input."""
    acl = a + b @ k
    p = solve_continuous_lyapunov(acl, -np.eye(a.shape[0]))
    return float(np.trace((q + k.T @ r @ k) @ p))


def spectral_abscissa(m):
    return float(np.max(np.real(np.linalg.eigvals(m))))


def scan_max_theta(surface, lam, n=10**6):
    """Exhaustive scan of cp(lam, theta) over the full theta range."""
    from windlq.coefficients import eval_cp

    thetas = np.linspace(surface.theta_grid[0], surface.theta_grid[-1], n)
    vals = np.array([eval_cp(surface, lam, float(t)) for t in thetas])
    i = int(np.argmax(vals))
    return float(thetas[i]), float(vals[i])


def scan_roots_theta(surface, lam, target, theta_min, theta_max, n=10**6):
    """All sign-change roots of cp(lam, .) - target located by dense scan."""
    from windlq.coefficients import eval_cp

    thetas = np.linspace(theta_min, theta_max, n)
    vals = np.array([eval_cp(surface, lam, float(t)) - target for t in thetas])
    roots = []
    for i in range(n - 1):
        if vals[i] == 0.0:
            roots.append(float(thetas[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            lo, hi = float(thetas[i]), float(thetas[i + 1])
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                vm = eval_cp(surface, lam, mid) - target
                if (vals[i] < 0.0) == (vm < 0.0):
                    lo = mid
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
    if vals[-1] == 0.0:
        roots.append(float(thetas[-1]))
    return roots
