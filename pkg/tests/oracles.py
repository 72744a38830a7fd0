"""Independent reference computations backing the expected test values.

Every helper here recomputes its target from first principles — dense KKT
systems, explicit null-space bases, staged grid searches over convex
objectives, central finite differences — without touching the solver code
paths under test.
"""

import numpy as np
import scipy.linalg


def staged_grid(evaluate, center, half, final_resolution=1e-3, points=81,
                minimize=True):
    """Coarse-to-fine grid optimization of a convex (or concave) function.

    ``evaluate`` maps an array of candidate points with shape (k, dim) to k
    objective values.  Each stage evaluates a full grid, then re-centers a
    window of twice the current resolution around the incumbent; stages
    repeat until the resolution drops to ``final_resolution``.

    Returns
    -------
    (point, value)
    """
    center = np.asarray(center, dtype=float)
    sign = 1.0 if minimize else -1.0
    best_z, best_v = center, None
    while True:
        axes = [np.linspace(c - half, c + half, points) for c in center]
        step = 2 * half / (points - 1)
        mesh = np.meshgrid(*axes, indexing="ij")
        Z = np.stack([m.ravel() for m in mesh], axis=1)
        vals = sign * np.asarray(evaluate(Z), dtype=float)
        i = int(np.argmin(vals))
        if best_v is None or vals[i] < best_v:
            best_z, best_v = Z[i], vals[i]
        center = best_z
        if step <= final_resolution:
            return best_z, sign * best_v
        half = 2 * step


def linf_grid_opt(A, g, points=81, final_resolution=1e-3):
    """Grid-search optimum of min ||Ax||_inf over g^T x = -1.

    Parametrizes the hyperplane as x = x_p + V z with V a null-space basis
    of g, so the search runs in the (d-1)-dimensional free coordinates.
    The search window provably contains the minimizer: from
    ||F(z*-z0)||_2 <= ||Fz*+c||_2 + ||Fz0+c||_2 <= 2 sqrt(n) w0 with z0
    the 2-norm minimizer of width w0.
    """
    A = np.asarray(A, dtype=float)
    g = np.asarray(g, dtype=float)
    xp = -g / (g @ g)
    V = scipy.linalg.null_space(g[None, :])
    F = A @ V
    c = A @ xp
    z0, *_ = np.linalg.lstsq(F, -c, rcond=None)
    w0 = float(np.max(np.abs(F @ z0 + c)))
    if w0 == 0.0:
        return 0.0
    smin = np.linalg.svd(F, compute_uv=False)[-1]
    half = 2 * np.sqrt(F.shape[0]) * w0 / smin + 1e-3

    def evaluate(Z):
        return np.max(np.abs(Z @ F.T + c), axis=1)

    _, val = staged_grid(evaluate, z0, half, points=points,
                         final_resolution=final_resolution)
    return float(val)


def grid_min_box(A, b, low, high, points=201, final_resolution=1e-3):
    """Grid-search min of ||Ax - b||_inf over the box [low, high]^d."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = A.shape[1]
    center = np.full(d, (low + high) / 2)
    half = (high - low) / 2

    def evaluate(Z):
        return np.max(np.abs(Z @ A.T - b), axis=1)

    _, val = staged_grid(evaluate, center, half, points=points,
                         final_resolution=final_resolution)
    return float(val)


def kkt_weighted_ls(A, r, g):
    """Dense KKT solve of min <r, (Ax)^2> subject to g^T x = -1."""
    A = np.asarray(A, dtype=float)
    r = np.asarray(r, dtype=float)
    g = np.asarray(g, dtype=float)
    B = A.T @ (r[:, None] * A)
    d = B.shape[0]
    K = np.zeros((d + 1, d + 1))
    K[:d, :d] = 2 * B
    K[:d, d] = g
    K[d, :d] = g
    rhs = np.zeros(d + 1)
    rhs[d] = -1.0
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    return sol[:d]


def nullspace_weighted_ls(A, N, p, u):
    """Explicit null-space-basis reference for the constrained solve:
    min <p, (Ax)^2> subject to N x = 0 and u^T A x = -1."""
    A = np.asarray(A, dtype=float)
    V = scipy.linalg.null_space(np.atleast_2d(np.asarray(N, dtype=float)))
    F = A @ V
    z = kkt_weighted_ls(F, p, F.T @ np.asarray(u, dtype=float))
    return V @ z


def nullspace_bilinear(A, N, p, w_vec, u_vec):
    """Explicit-basis evaluation of w^T A V (V^T A^T P A V)^+ V^T A^T u."""
    A = np.asarray(A, dtype=float)
    p = np.asarray(p, dtype=float)
    V = scipy.linalg.null_space(np.atleast_2d(np.asarray(N, dtype=float)))
    F = A @ V
    G = np.linalg.pinv(F.T @ (p[:, None] * F))
    return float(np.asarray(w_vec, float) @ F @ G @ (F.T @ np.asarray(u_vec, float)))


def central_grad(func, x, step=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (func(x + e) - func(x - e)) / (2 * step)
    return g


def residual_grid_opt(loss, A, b, x, points=81, final_resolution=1e-4):
    """Grid maximum of grad f^T (A delta) - (1/e)(A delta)^T H (A delta)
    over the box ||A delta||_inf <= 1/C, for d = 2.

    The window half-width sqrt(n)/(C sigma_min) covers the whole feasible
    box since ||delta||_2 <= ||A delta||_2 / sigma_min <= sqrt(n)/(C sigma_min).
    """
    A = np.asarray(A, dtype=float)
    res = A @ np.asarray(x, dtype=float) - np.asarray(b, dtype=float)
    fp = loss.first(res)
    fpp = loss.second(res)
    C = loss.qsc_constant
    box = 1.0 / C
    smin = np.linalg.svd(A, compute_uv=False)[-1]
    half = np.sqrt(A.shape[0]) * box / smin + 1e-9

    def evaluate(Z):
        AZ = Z @ A.T
        vals = AZ @ fp - (AZ**2) @ fpp / np.e
        vals[np.max(np.abs(AZ), axis=1) > box * (1 + 1e-12)] = -np.inf
        return vals

    _, val = staged_grid(evaluate, np.zeros(A.shape[1]), half, points=points,
                         final_resolution=final_resolution, minimize=False)
    return float(val)
