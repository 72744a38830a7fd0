"""Row-weight overestimate tests: fixed-point iteration, safety margins,
verification, and the mass window [d, 2d]."""

import numpy as np
import pytest

from qscopt.core_linalg import leverage_scores_exact
from qscopt.exceptions import RankDeficient
from qscopt.lewis_weights import (
    LewisOverestimate,
    _fixed_point_average,
    approx_lewis,
    verify_overestimate,
)


def converged_fixed_point(A, rounds=500):
    """Plain fixed-point iteration of w <- leverage(diag(w)^{1/2} A),
    run to convergence; the limit is the true weight vector."""
    n, d = A.shape
    w = np.full(n, d / n)
    for _ in range(rounds):
        w = leverage_scores_exact(A, w)
    return w


class TestFixedPointAverage:
    def test_identity_is_a_fixed_point(self):
        # Uniform weights on I_d are already the fixed point, so every
        # round (including the initial one) contributes 1 per row.
        for d in (2, 4):
            avg = _fixed_point_average(np.eye(d), exact=True, sketch_rows=64,
                                       rng=np.random.default_rng(0))
            np.testing.assert_allclose(avg, np.ones(d), atol=1e-12)

    def test_stacked_identities_symmetric(self):
        d = 3
        A = np.vstack([np.eye(d), np.eye(d)])
        avg = _fixed_point_average(A, exact=True, sketch_rows=64,
                                   rng=np.random.default_rng(0))
        np.testing.assert_allclose(avg, avg[0], rtol=1e-12)
        assert d / (2 * d) - 1e-12 <= avg[0] <= 1.0 + 1e-12


class TestApproxLewis:
    def test_identity(self):
        d = 4
        est = approx_lewis(np.eye(d))
        assert isinstance(est, LewisOverestimate)
        # All rows equal by symmetry; mass stays in the contract window.
        np.testing.assert_allclose(est.w, est.w[0], rtol=1e-12)
        assert d <= est.mass <= 2 * d
        assert verify_overestimate(np.eye(d), est.w)[0]

    def test_stacked_identities(self):
        d = 3
        A = np.vstack([np.eye(d), np.eye(d)])
        est = approx_lewis(A)
        np.testing.assert_allclose(est.w, est.w[0], rtol=1e-12)
        assert np.all(est.w >= d / (2 * d) - 1e-12)
        assert np.all(est.w <= 1.0 + 1e-9)
        assert d <= est.mass <= 2 * d

    def test_random_60x5_exact_verifies(self):
        rng = np.random.default_rng(19)
        A = rng.standard_normal((60, 5))
        est = approx_lewis(A)
        ok, worst = verify_overestimate(A, est.w)
        assert ok, worst

    def test_property_50_random_matrices_exact(self):
        rng = np.random.default_rng(100)
        for _ in range(50):
            n = int(rng.integers(40, 201))
            d = int(rng.integers(2, 11))
            A = rng.standard_normal((n, d))
            est = approx_lewis(A, exact=True)
            ok, worst = verify_overestimate(A, est.w)
            assert ok, worst
            assert d - 1e-9 <= est.mass <= 2 * d + 1e-9

    def test_sketched_mode_passes_with_retry_loop(self):
        # Sketched rounds plus the verification-and-retry loop must end in
        # a verified overestimate on (at least) 48 of 50 seeds; with the
        # post-averaging corrections every run lands verified.
        rng = np.random.default_rng(200)
        passed = 0
        for seed in range(50):
            n = int(rng.integers(30, 80))
            d = int(rng.integers(2, 6))
            A = rng.standard_normal((n, d))
            est = approx_lewis(A, rng_seed=seed, exact=False)
            if verify_overestimate(A, est.w)[0]:
                passed += 1
        assert passed >= 48

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((50, 4))
        a = approx_lewis(A, rng_seed=5, exact=False)
        b = approx_lewis(A, rng_seed=5, exact=False)
        assert np.array_equal(a.w, b.w)

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            approx_lewis(np.ones((2, 3)))

    def test_rank_zero_rejected(self):
        with pytest.raises(RankDeficient):
            approx_lewis(np.zeros((4, 2)))


class TestVerifyOverestimate:
    def test_all_ones_always_passes(self):
        rng = np.random.default_rng(29)
        A = rng.standard_normal((12, 4))
        ok, worst = verify_overestimate(A, np.ones(12))
        assert ok
        assert worst <= 0

    def test_true_weights_have_zero_margin(self):
        rng = np.random.default_rng(17)
        A = rng.standard_normal((10, 3))
        w = converged_fixed_point(A)
        ok, worst = verify_overestimate(A, w)
        assert ok
        assert abs(worst) < 1e-8

    def test_half_true_weights_fail(self):
        rng = np.random.default_rng(17)
        A = rng.standard_normal((10, 3))
        w = converged_fixed_point(A)
        ok, _ = verify_overestimate(A, 0.5 * w)
        assert not ok

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            verify_overestimate(np.eye(2), np.array([1.0, -1.0]))
