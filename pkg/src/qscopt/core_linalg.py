"""Weighted least-squares kernels and electrical-energy primitives.

Everything here is a pure function of dense numpy arrays.  The rest of the
package calls linear algebra only through this layer, so the regularization
and pseudo-inverse conventions live in one place:

* normal matrices are factorized with Cholesky, falling back to a diagonal
  regularization floor of ``1e-12 * trace(B) / d`` and finally to a
  pseudo-inverse with singular values below ``1e-10 * sigma_max`` cut off;
* resistances below 1e-300 are clamped before forming normal matrices.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import InfeasibleConstraint, NonFinite, SingularSystem

RESISTANCE_FLOOR = 1e-300
PINV_RCOND = 1e-10
REG_FLOOR = 1e-12


def _check_finite(*arrays):
    for a in arrays:
        if a is not None and not np.all(np.isfinite(a)):
            raise NonFinite("input contains NaN or Inf")


@dataclass(frozen=True)
class ProblemMatrix:
    """Design matrix with an optional affine constraint pair (N, v).

    Rows of ``A`` are datapoints.  When ``N`` is present it must have fewer
    rows than ``A`` has columns, and ``v`` gives the right-hand side of the
    constraint ``N x = v``.
    """

    A: np.ndarray
    N: np.ndarray = None
    v: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        n, d = A.shape
        if n < 1 or d < 1:
            raise ValueError("A must have at least one row and one column")
        _check_finite(A)
        if self.N is not None:
            N = np.atleast_2d(np.asarray(self.N, dtype=float))
            object.__setattr__(self, "N", N)
            m = N.shape[0]
            if N.shape[1] != d:
                raise ValueError("N must have the same number of columns as A")
            if m >= d:
                raise ValueError("N must have fewer rows than A has columns")
            v = np.zeros(m) if self.v is None else np.asarray(self.v, dtype=float)
            if v.shape != (m,):
                raise ValueError("v must have length equal to the rows of N")
            object.__setattr__(self, "v", v)
            _check_finite(N, v)

    @property
    def shape(self):
        return self.A.shape

    @property
    def constrained(self):
        return self.N is not None


@dataclass
class ResistanceVector:
    """Nonnegative per-row weights driving the IRLS iterations."""

    r: np.ndarray
    l1_mass: float = field(default=None)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        _check_finite(self.r)
        if np.any(self.r < 0):
            raise ValueError("resistances must be nonnegative")
        mass = float(np.sum(self.r))
        if self.l1_mass is None:
            self.l1_mass = mass
        elif mass != 0 and abs(self.l1_mass - mass) > 1e-12 * mass:
            raise ValueError("cached l1_mass disagrees with the entries")


@dataclass(frozen=True)
class EnergySolve:
    """Minimizer of <r, (Ax)^2> over the hyperplane g^T x = -1, with its
    objective value (the electrical energy)."""

    x: np.ndarray
    energy: float


def _normal_matrix(A, r):
    r = np.maximum(r, RESISTANCE_FLOOR)
    return A.T @ (r[:, None] * A)


def _psd_solve(B, rhs):
    """Solve B y = rhs for PSD B, with regularization then pinv fallback."""
    try:
        c, low = scipy.linalg.cho_factor(B)
        return scipy.linalg.cho_solve((c, low), rhs)
    except np.linalg.LinAlgError:
        pass
    d = B.shape[0]
    lam = REG_FLOOR * np.trace(B) / d
    if lam > 0:
        try:
            c, low = scipy.linalg.cho_factor(B + lam * np.eye(d))
            return scipy.linalg.cho_solve((c, low), rhs)
        except np.linalg.LinAlgError:
            pass
    return np.linalg.pinv(B, rcond=PINV_RCOND) @ rhs


def _pinv(B):
    return np.linalg.pinv(B, rcond=PINV_RCOND)


def solve_weighted_ls(mat, r, g):
    """Solve min <r, (Ax)^2> subject to g^T x = -1.

    Parameters
    ----------
    mat : ProblemMatrix
        Must not carry an affine constraint block.
    r : ResistanceVector or array
    g : array of length d, nonzero.

    Returns
    -------
    EnergySolve
        ``x = -B^+ g / (g^T B^+ g)`` with ``B = A^T diag(r) A`` and the
        energy ``<r, (Ax)^2>``.
    """
    A = mat.A if isinstance(mat, ProblemMatrix) else np.asarray(mat, dtype=float)
    rvec = r.r if isinstance(r, ResistanceVector) else np.asarray(r, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_finite(A, rvec, g)
    if not np.any(rvec > 0):
        raise ValueError("r must have at least one strictly positive entry")
    if not np.any(g != 0):
        raise ValueError("g must be nonzero")

    B = _normal_matrix(A, rvec)
    y = _psd_solve(B, g)
    denom = float(g @ y)
    if denom <= 1e-14 * max(np.linalg.norm(g) * np.linalg.norm(y), 1e-300):
        raise SingularSystem("g^T B^+ g <= 0: g outside the weighted row space")
    x = -y / denom
    energy = float(rvec @ (A @ x) ** 2)
    return EnergySolve(x=x, energy=energy)


def energy(mat, r, g):
    """Electrical energy E(r) = min_{g^T x = -1} <r, (Ax)^2>."""
    return solve_weighted_ls(mat, r, g).energy


def leverage_scores_exact(A, w):
    """Leverage scores of diag(w)^{1/2} A, computed via a thin SVD.

    Returns the diagonal of the orthogonal projection onto the column space
    of the reweighted matrix; entries lie in [0, 1] and sum to its rank.
    """
    A = np.asarray(A, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_finite(A, w)
    sw = np.sqrt(np.maximum(w, 0.0))
    B = sw[:, None] * A
    U, svals, _ = np.linalg.svd(B, full_matrices=False)
    if svals.size == 0 or svals[0] == 0:
        return np.zeros(A.shape[0])
    keep = svals > PINV_RCOND * svals[0]
    return np.einsum("ij,ij->i", U[:, keep], U[:, keep])


def leverage_scores_sketched(A, w, sketch_rows, rng_seed):
    """Sketched leverage-score estimates using a standard-normal sketch.

    The estimate for row i is ``(1/s) || S B (B^T B)^+ (sqrt(w_i) a_i) ||^2``
    with ``B = diag(w)^{1/2} A`` and ``S`` an ``s x n`` i.i.d. N(0,1) matrix.
    Unbiased, and deterministic for a fixed ``rng_seed``.
    """
    A = np.asarray(A, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_finite(A, w)
    if sketch_rows < 1:
        raise ValueError("sketch_rows must be >= 1")
    n = A.shape[0]
    sw = np.sqrt(np.maximum(w, 0.0))
    B = sw[:, None] * A
    rng = np.random.default_rng(rng_seed)
    S = rng.standard_normal((sketch_rows, n))
    # G maps a row b_i to its sketched projection coefficients.
    G = (S @ B) @ _pinv(B.T @ B)
    proj = G @ B.T  # sketch_rows x n, column i is S B (B^T B)^+ b_i
    return np.einsum("ij,ij->j", proj, proj) / sketch_rows


def _constrained_kernel(A, N, p):
    """Matrix Z with Z A^T u = B (B^T A^T P A B)^+ B^T A^T u, B a null-space
    basis of N, evaluated without forming B."""
    Bp = _pinv(_normal_matrix(A, p))
    K = N @ Bp @ N.T
    return Bp - Bp @ N.T @ _pinv(K) @ N @ Bp


def constrained_weighted_ls(mat, p, u):
    """Solve min <p, (Ax)^2> subject to N x = 0 and u^T A x = -1.

    Uses the closed-form pseudo-inverse expression that avoids constructing
    an explicit null-space basis of N.  With an empty constraint block this
    reduces to :func:`solve_weighted_ls` with ``g = A^T u``.
    """
    A = mat.A
    pvec = p.r if isinstance(p, ResistanceVector) else np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_finite(A, pvec, u)
    if not mat.constrained or mat.N.shape[0] == 0:
        return solve_weighted_ls(ProblemMatrix(A), pvec, A.T @ u).x
    delta = _constrained_kernel(A, mat.N, pvec) @ (A.T @ u)
    denom = float(u @ (A @ delta))
    scale = max(np.linalg.norm(u) * np.linalg.norm(A @ delta), 1e-300)
    if abs(denom) <= 1e-14 * scale:
        raise InfeasibleConstraint(
            "normalization hyperplane unreachable inside ker(N)"
        )
    return -delta / denom


def constrained_bilinear(mat, p, w_vec, u_vec):
    """Evaluate w^T A B (B^T A^T P A B)^+ B^T A^T u without forming the
    null-space basis B of N."""
    A = mat.A
    pvec = p.r if isinstance(p, ResistanceVector) else np.asarray(p, dtype=float)
    w_vec = np.asarray(w_vec, dtype=float)
    u_vec = np.asarray(u_vec, dtype=float)
    _check_finite(A, pvec, w_vec, u_vec)
    if not mat.constrained or mat.N.shape[0] == 0:
        Z = _pinv(_normal_matrix(A, pvec))
    else:
        Z = _constrained_kernel(A, mat.N, pvec)
    return float(w_vec @ A @ Z @ (A.T @ u_vec))


def constrained_leverage_scores(mat, w):
    """Leverage scores of (diag(w)^{1/2} A B) for a null-space basis B of N,
    via the same kernel as :func:`constrained_weighted_ls`."""
    A = mat.A
    w = np.asarray(w, dtype=float)
    if not mat.constrained or mat.N.shape[0] == 0:
        return leverage_scores_exact(A, w)
    Z = _constrained_kernel(A, mat.N, w)
    return w * np.einsum("ij,jk,ik->i", A, Z, A)
