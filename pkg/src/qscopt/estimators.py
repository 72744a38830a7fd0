"""Scikit-learn style estimator wrappers around the solvers."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core_linalg import ProblemMatrix
from .linf import homogenize, linf_regress
from .qsc import QscProblem, lp_l2_loss, objective, optimize


class LinfRegression(RegressorMixin, BaseEstimator):
    """Minimax linear regression: fit coefficients minimizing the maximum
    absolute residual to a (1 + eps) factor.

    Parameters
    ----------
    eps : float, default=0.05
        Relative approximation target.
    verify_invariants : bool, default=False
        Run the solver's internal energy-invariant checks.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    opt_value_ : float
        The achieved maximum absolute residual on the training data.
    n_solves_ : int
        Number of linear system solves used.
    """

    def __init__(self, eps=0.05, verify_invariants=False):
        self.eps = eps
        self.verify_invariants = verify_invariants

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        inst = homogenize(X, y, self.eps)
        x, trace = linf_regress(inst.A, inst.g, self.eps,
                                verify=self.verify_invariants)
        # The homogenizing constraint pins the last coordinate to 1.
        assert abs(x[-1] - 1.0) < 1e-8
        self.coef_ = x[:-1]
        self.opt_value_ = float(np.max(np.abs(X @ self.coef_ - y)))
        self.n_solves_ = trace.solver_calls
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_


class QuasiSelfConcordantRegression(RegressorMixin, BaseEstimator):
    """Regression under the loss |t|^p + mu t^2, minimized to high
    precision by the trust-region solver.

    Parameters
    ----------
    p : float, default=8.0
        Exponent of the power term, must be >= 3.
    mu : float, default=1.0
        Quadratic regularization weight.
    eps : float, default=1e-8
        Additive optimization accuracy target.
    R : float or None
        Residual-space diameter bound; estimated heuristically from the
        least-squares start when None.
    B : float, default=0.0
        Lower bound on the objective.
    verify_invariants : bool, default=False

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    objective_ : float
    n_outer_iter_ : int
    """

    def __init__(self, p=8.0, mu=1.0, eps=1e-8, R=None, B=0.0,
                 verify_invariants=False):
        self.p = p
        self.mu = mu
        self.eps = eps
        self.R = R
        self.B = B
        self.verify_invariants = verify_invariants

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        loss = lp_l2_loss(self.p, self.mu)
        x0, *_ = np.linalg.lstsq(X, y, rcond=None)
        R = self.R
        if R is None:
            R = 4 * max(float(np.max(np.abs(X @ x0 - y))), 1.0)
        problem = QscProblem(
            mat=ProblemMatrix(X), b=y, loss=loss, x0=x0,
            lower_bound_B=self.B, diameter_R=R, eps=self.eps,
        )
        coef, records = optimize(problem, verify=self.verify_invariants)
        self.coef_ = coef
        self.objective_ = objective(problem, coef)
        self.n_outer_iter_ = len(records)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_
