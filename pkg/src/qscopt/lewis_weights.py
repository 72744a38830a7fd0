"""Row-weight overestimates via the leverage-score fixed-point iteration.

The target object is a vector ``w >= 0`` with ``d <= ||w||_1 <= 2d`` and
``w_i >= sigma(diag(w)^{1/2} A)_i`` for every row; such vectors initialize
every IRLS loop in this package.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core_linalg import leverage_scores_exact, leverage_scores_sketched
from .exceptions import OverestimateFailure, RankDeficient

DEFAULT_SKETCH_ROWS = 64
EXACT_MODE_MAX_ROWS = 5000
SAFETY_FACTOR = 1.05
VERIFY_TOL = 1e-10


@dataclass(frozen=True)
class LewisOverestimate:
    """Overestimate vector together with its cached l1 mass."""

    w: np.ndarray
    mass: float


def _fixed_point_average(A, exact, sketch_rows, rng):
    """Average of the leverage fixed-point iterates, starting from uniform
    weights d/n and including the initial round."""
    n, d = A.shape
    T = max(1, math.ceil(10 * math.log(max(n, 2))))
    w = np.full(n, d / n)
    acc = w.copy()
    for _ in range(T - 1):
        if exact:
            w = leverage_scores_exact(A, w)
        else:
            seed = int(rng.integers(0, 2**63 - 1))
            w = leverage_scores_sketched(A, w, sketch_rows, seed)
        acc += w
    return acc / T


def _postprocess(A, w, d):
    n = w.shape[0]
    w = w * SAFETY_FACTOR
    mass = float(np.sum(w))
    if mass < d:
        # Adding mass uniformly preserves overestimation: it raises every
        # w_i while the leverage of the reweighted rows cannot outgrow it.
        w = w + (d - mass) / n
    # Leverage scores are invariant under uniform scaling of w, so scaling
    # up by the worst ratio sigma_i / w_i enforces the overestimate
    # property exactly without moving the target.
    sigma = leverage_scores_exact(A, w)
    c = float(np.max(sigma / w))
    if c > 1:
        w = w * c * (1 + 1e-12)
    mass = float(np.sum(w))
    if mass > 2 * d:
        w = w * (2 * d / mass)
    return w


def verify_overestimate(A, w):
    """Check ``w_i >= sigma(diag(w)^{1/2} A)_i`` for all rows.

    Returns
    -------
    (ok, max_violation) : (bool, float)
        ``max_violation`` is the worst value of ``sigma_i - w_i`` (negative
        when the overestimate holds with margin).
    """
    A = np.asarray(A, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("w must be nonnegative")
    sigma = leverage_scores_exact(A, w)
    worst = float(np.max(sigma - w))
    return worst <= VERIFY_TOL, worst


def approx_lewis(A, rng_seed=0, sketch_rows=DEFAULT_SKETCH_ROWS, exact=None):
    """Compute row-weight overestimates for a tall matrix A (n >= d).

    Runs ceil(10 log n) rounds of the leverage fixed-point iteration from
    the uniform start, averages the rounds, then applies a 1.05 safety
    factor and mass corrections so that both invariants hold.  Sketched
    rounds are retried with fresh seeds (up to 3 times) and finally fall
    back to exact leverage scores if verification keeps failing.

    ``exact`` defaults to True for n <= 5000.
    """
    A = np.asarray(A, dtype=float)
    n, d = A.shape
    if n < d:
        raise ValueError("approx_lewis requires n >= d")
    if np.linalg.matrix_rank(A) < 1:
        raise RankDeficient("A has rank 0")
    if exact is None:
        exact = n <= EXACT_MODE_MAX_ROWS

    rng = np.random.default_rng(rng_seed)
    attempts = 3 if not exact else 1
    for attempt in range(attempts + 1):
        use_exact = exact or attempt == attempts
        w = _fixed_point_average(A, use_exact, sketch_rows, rng)
        w = _postprocess(A, w, d)
        ok, _ = verify_overestimate(A, w)
        if ok:
            mass = float(np.sum(w))
            if not (d - 1e-9 <= mass <= 2 * d + 1e-9):
                raise OverestimateFailure(f"mass {mass} outside [d, 2d]")
            return LewisOverestimate(w=w, mass=mass)
    raise OverestimateFailure("overestimate property failed after retries")
