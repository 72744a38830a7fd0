"""Trust-region minimization of sums of quasi-self-concordant losses.

The outer loop repeatedly maximizes a concave quadratic model of the
objective over an l-infinity box of radius 1/C in residual space.  Each
model problem is handled by an IRLS residual solver driven by a double
binary search over guesses of the model optimum.  Affine constraints
N x = v are supported by routing every weighted least-squares step through
the closed-form constrained solve.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core_linalg import (
    ProblemMatrix,
    ResistanceVector,
    constrained_leverage_scores,
    constrained_weighted_ls,
    solve_weighted_ls,
)
from .exceptions import (
    InvariantViolation,
    NoProgress,
    SingularHessian,
    SolverBudgetExceeded,
)
from .lewis_weights import LewisOverestimate, approx_lewis

E = math.e
INVARIANT_SLACK = 1e-8
BUDGET_MULTIPLIER = 200
# Outer-iteration cap folds the 1/20 approximation factor and the e^2 step
# damping into an explicit ceiling.
OUTER_BUDGET_FACTOR = 40 * math.e**2 * 20
EARLY_EXIT_FACTOR = 1 / 8
GRAD_TOL = 1e-10


@dataclass(frozen=True)
class QscFunction:
    """Scalar loss with derivatives and its quasi-self-concordance constant.

    ``second`` must be nonnegative and ``|f'''| <= qsc_constant * f''``
    should hold everywhere; :func:`check_qsc` spot-checks the latter by
    finite differences.
    """

    value: callable
    first: callable
    second: callable
    qsc_constant: float

    def check_qsc(self, points=None, n_points=1000, factor=1.05, rng_seed=0):
        """Finite-difference spot check of the third-derivative bound."""
        if points is None:
            rng = np.random.default_rng(rng_seed)
            points = rng.uniform(-10, 10, size=n_points)
        points = np.asarray(points, dtype=float)
        ok = True
        worst = 0.0
        for t in points:
            step = 1e-4 * (1 + abs(t))
            f2 = self.second(t)
            if f2 < 0:
                return False, math.inf
            f3 = (self.second(t + step) - self.second(t - step)) / (2 * step)
            bound = factor * self.qsc_constant * f2 + 1e-8
            if abs(f3) > bound:
                ok = False
            worst = max(worst, abs(f3) - self.qsc_constant * f2)
        return ok, worst


def lp_l2_loss(p, mu):
    """The loss |t|^p + mu t^2, quasi-self-concordant with constant
    p * mu^(-1/(p-2)) for p >= 3 and mu > 0."""
    if p < 3:
        raise ValueError("p must be >= 3")
    if mu <= 0:
        raise ValueError("mu must be positive")
    C = p * mu ** (-1 / (p - 2))

    def value(t):
        return np.abs(t) ** p + mu * t**2

    def first(t):
        return p * np.sign(t) * np.abs(t) ** (p - 1) + 2 * mu * t

    def second(t):
        return p * (p - 1) * np.abs(t) ** (p - 2) + 2 * mu

    return QscFunction(value=value, first=first, second=second, qsc_constant=C)


@dataclass(frozen=True)
class QscProblem:
    """Loss, data, starting point and the scale parameters of the solve."""

    mat: ProblemMatrix
    b: np.ndarray
    loss: QscFunction
    x0: np.ndarray
    lower_bound_B: float
    diameter_R: float
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        n, d = self.mat.shape
        if self.b.shape != (n,):
            raise ValueError("b must have one entry per row of A")
        if self.x0.shape != (d,):
            raise ValueError("x0 must have length d")
        if self.mat.constrained:
            gap = np.max(np.abs(self.mat.N @ self.x0 - self.mat.v))
            if gap > 1e-9 * (1 + np.max(np.abs(self.mat.v))):
                raise ValueError("x0 violates N x0 = v")
        if not self.diameter_R > 0:
            raise ValueError("diameter_R must be positive")
        h0 = float(np.sum(self.loss.value(self.mat.A @ self.x0 - self.b)))
        if self.lower_bound_B > h0 + 1e-12 * (1 + abs(h0)):
            raise ValueError("lower_bound_B exceeds h(x0)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


def gradient_pieces(problem, x):
    """Componentwise f', f'' at the residuals Ax - b, plus h(x)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    res = problem.mat.A @ x - problem.b
    fp = problem.loss.first(res)
    fpp = problem.loss.second(res)
    h = float(np.sum(problem.loss.value(res)))
    return fp, fpp, h


def objective(problem, x):
    res = problem.mat.A @ x - problem.b
    return float(np.sum(problem.loss.value(res)))


def residual_value(problem, x, delta):
    """Concave local model grad f^T (A delta) - (1/e) (A delta)^T H (A delta)."""
    fp, fpp, _ = gradient_pieces(problem, x)
    Ad = problem.mat.A @ np.asarray(delta, dtype=float)
    return float(fp @ Ad - (Ad**2 @ fpp) / E)


@dataclass
class ResidualOutcome:
    tag: str  # "primal" or "dual"
    delta: np.ndarray = None
    r: ResistanceVector = None
    solver_calls: int = 0
    invariant_checks: int = 0

    @property
    def is_primal(self):
        return self.tag == "primal"


def _weighted_argmin(problem, p, u):
    """argmin <p, (A delta)^2> over u^T A delta = -1 (and N delta = 0)."""
    mat = problem.mat
    if mat.constrained:
        return constrained_weighted_ls(mat, p, u)
    return solve_weighted_ls(ProblemMatrix(mat.A), p, mat.A.T @ u).x


def _residual_loop(problem, x, M, r, mass_factor, mass_cap, S, budget,
                   case1, verify, trace):
    """Common IRLS loop shared by the two residual-solver regimes.

    ``mass_factor`` multiplies s in p = mass_factor * s + (M C^2 / 2) r;
    ``case1`` enables the unit-increment branch for high-width iterates.
    """
    A = problem.mat.A
    C = problem.loss.qsc_constant
    fp, s, _ = gradient_pieces(problem, x)
    u = -fp / M
    half_mc2 = M * C**2 / 2
    out = ResidualOutcome(tag="dual")
    v_acc = np.zeros(A.shape[1])
    t_avg = 0
    prev_energy = None
    prev_rmass = None

    def check_invariant(e_now, rmass_now):
        nonlocal prev_energy, prev_rmass
        if verify:
            out.invariant_checks += 1
        if verify and prev_energy is not None:
            gain = e_now - prev_energy
            required = 26 * M * (rmass_now - prev_rmass) * (1 - INVARIANT_SLACK)
            if gain < required - INVARIANT_SLACK * abs(e_now):
                raise InvariantViolation(
                    f"residual energy gain {gain} below 26M mass gain"
                )
        prev_energy, prev_rmass = e_now, rmass_now

    t = 0
    while float(np.sum(r)) <= mass_cap:
        if out.solver_calls >= budget:
            raise SolverBudgetExceeded(
                f"residual solver exceeded {budget:.0f} linear solves"
            )
        p = mass_factor * s + half_mc2 * r
        delta = _weighted_argmin(problem, p, u)
        out.solver_calls += 1
        Ad = A @ delta
        energy = float(p @ Ad**2)
        rmass = float(np.sum(r))
        check_invariant(energy, rmass)

        width = float(np.max(np.abs(Ad)))
        dual_val = float((s + half_mc2 * r / rmass) @ Ad**2)
        if trace is not None:
            trace({"t": t, "r_mass": rmass, "energy": energy, "width": width})
        if dual_val >= 13 * M:
            out.tag = "dual"
            out.r = ResistanceVector(r.copy())
            return out
        if width <= 11 / C:
            out.tag = "primal"
            out.delta = delta
            return out

        if case1 and width > S:
            i = int(np.argmax(np.abs(Ad)))
            r[i] += 1.0
        else:
            if width <= S:
                t_avg += 1
                v_acc += delta
                avg = v_acc / t_avg
                if float(np.max(np.abs(A @ avg))) <= 11 / C:
                    out.tag = "primal"
                    out.delta = avg
                    return out
            mask = Ad**2 >= 100 / C**2
            r[mask] *= Ad[mask] ** 2 * C**2 / 52
        t += 1

    if verify:
        p = mass_factor * s + half_mc2 * r
        delta = _weighted_argmin(problem, p, u)
        out.solver_calls += 1
        rmass = float(np.sum(r))
        energy = float(p @ (A @ delta) ** 2)
        check_invariant(energy, rmass)
        dual_val = float((s + half_mc2 * r / rmass) @ (A @ delta) ** 2)
        if dual_val < 13 * M * (1 - INVARIANT_SLACK):
            raise InvariantViolation("loop-exit dual certificate below 13M")
    out.tag = "dual"
    out.r = ResistanceVector(r.copy())
    return out


def residual_solver(problem, x, M, w=None, verify=True, trace=None):
    """Overdetermined-regime residual solver (requires n >= d).

    Initializes resistances from a Lewis overestimate of A (or of the
    reduced matrix when affine constraints are present) and runs the IRLS
    loop with the high-width increment branch enabled.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    n, d = problem.mat.shape
    C = problem.loss.qsc_constant
    if w is None:
        w = lewis_for_problem(problem)
    wvec = w.w if isinstance(w, LewisOverestimate) else np.asarray(w, dtype=float)
    wmass = float(np.sum(wvec))
    r = wvec + d / n
    budget = BUDGET_MULTIPLIER * d ** (1 / 3) * max(math.log(n), 1.0)
    return _residual_loop(
        problem, x, M, r,
        mass_factor=2 * (wmass + d),
        mass_cap=2 * (wmass + d),
        S=11 * d ** (1 / 3) / C,
        budget=budget,
        case1=True,
        verify=verify,
        trace=trace,
    )


def residual_solver_underdetermined(problem, x, M, verify=True, trace=None):
    """Residual solver for n <= d: uniform initialization, no Lewis weights
    and no high-width increment branch."""
    if M <= 0:
        raise ValueError("M must be positive")
    n, d = problem.mat.shape
    C = problem.loss.qsc_constant
    r = np.ones(n)
    budget = BUDGET_MULTIPLIER * n ** (1 / 3) * max(math.log(max(n, 2)), 1.0)
    return _residual_loop(
        problem, x, M, r,
        mass_factor=2 * n,
        mass_cap=2 * n,
        S=11 * n ** (1 / 3) / C,
        budget=budget,
        case1=False,
        verify=verify,
        trace=trace,
    )


def lewis_for_problem(problem):
    """Lewis overestimates of A, or of A restricted to ker(N) when
    constrained (computed without forming a null-space basis)."""
    mat = problem.mat
    n, d = mat.shape
    if not mat.constrained:
        return approx_lewis(mat.A)
    # Exact fixed-point rounds on the constrained leverage scores.
    d_eff = d - np.linalg.matrix_rank(mat.N)
    T = max(1, math.ceil(10 * math.log(max(n, 2))))
    w = np.full(n, d_eff / n)
    acc = w.copy()
    for _ in range(T - 1):
        w = constrained_leverage_scores(mat, w)
        acc += w
    w = acc / T * 1.05
    mass = float(np.sum(w))
    if mass < d_eff:
        w = w + (d_eff - mass) / n
    sigma = constrained_leverage_scores(mat, w)
    c = float(np.max(sigma / w))
    if c > 1:
        w = w * c * (1 + 1e-12)
    mass = float(np.sum(w))
    if mass > 2 * d_eff:
        w = w * (2 * d_eff / mass)
    return LewisOverestimate(w=w, mass=float(np.sum(w)))


def _projected_grad_norm(problem, grad):
    N = problem.mat.N
    if N is None:
        return float(np.linalg.norm(grad))
    proj = grad - N.T @ np.linalg.lstsq(N.T, grad, rcond=None)[0]
    return float(np.linalg.norm(proj))


@dataclass
class OuterRecord:
    t: int
    h: float
    nu: float
    M: float
    res_value: float
    solver_calls: int
    step_width: float = 0.0
    invariant_checks: int = 0


def optimize(problem, verify=True, trace_sink=None, pool_candidates=True):
    """Minimize h(x) = sum_i f((Ax - b)_i) subject to N x = v.

    Runs the trust-region outer loop: at each iterate, a double binary
    search over (nu, M) drives the regime-appropriate residual solver, the
    primal candidates are rescaled by 1/11, and the best one (after the
    1/e^2 damping) becomes the next iterate.  Terminates early when the
    best improvement drops to eps / (8 C R).

    Returns
    -------
    (x, records) : (ndarray, list of OuterRecord)
    """
    n, d = problem.mat.shape
    C = problem.loss.qsc_constant
    R = problem.diameter_R
    B = problem.lower_bound_B
    eps = problem.eps
    underdetermined = n < d
    w = None if underdetermined else lewis_for_problem(problem)

    x = problem.x0.copy()
    h = objective(problem, x)
    gap0 = max(h - B, eps)
    T_cap = math.ceil(OUTER_BUDGET_FACTOR * C * R * max(math.log(gap0 / eps), 1.0))
    exit_threshold = eps * EARLY_EXIT_FACTOR / (C * R)
    records = []

    for t in range(T_cap):
        if h - B <= eps:
            # h <= B + eps <= h(x*) + eps: target accuracy reached.
            break
        fp, _, _ = gradient_pieces(problem, x)
        grad = problem.mat.A.T @ fp
        gnorm = _projected_grad_norm(problem, grad)
        if gnorm <= GRAD_TOL * (1 + abs(h)):
            break

        candidates = []  # (h_new, x_new, nu, M, delta_hat)
        total_calls = 0
        total_checks = 0
        seen = {}  # successive nu levels revisit the same halving grid of M
        nu = h - B
        while nu >= eps:
            M = E**2 * nu
            level = []
            while M >= nu / (C * R):
                if M not in seen:
                    if underdetermined:
                        out = residual_solver_underdetermined(
                            problem, x, M, verify=verify
                        )
                    else:
                        out = residual_solver(problem, x, M, w=w, verify=verify)
                    total_calls += out.solver_calls
                    total_checks += out.invariant_checks
                    if out.is_primal:
                        delta_hat = out.delta / 11
                        x_new = x - delta_hat / E**2
                        seen[M] = (objective(problem, x_new), x_new, delta_hat)
                    else:
                        seen[M] = None
                if seen[M] is not None:
                    h_new, x_new, delta_hat = seen[M]
                    level.append((h_new, x_new, nu, M, delta_hat))
                M /= 2
            candidates.extend(level)
            if not pool_candidates and level and min(c[0] for c in level) < h:
                break
            nu /= 2

        if not candidates:
            if gnorm > GRAD_TOL * (1 + abs(h)):
                raise NoProgress(
                    "no primal candidates; C, R or B may be mis-specified"
                )
            break
        h_new, x_new, nu_star, M_star, delta_star = min(
            candidates, key=lambda c: c[0]
        )
        improvement = h - h_new
        if improvement <= 0:
            break
        rec = OuterRecord(
            t=t, h=h_new, nu=nu_star, M=M_star,
            res_value=residual_value(problem, x, delta_star),
            solver_calls=total_calls,
            step_width=float(np.max(np.abs(problem.mat.A @ (x_new - x)))),
            invariant_checks=total_checks,
        )
        records.append(rec)
        if trace_sink is not None:
            trace_sink(rec)
        x, h = x_new, h_new
        if improvement <= exit_threshold:
            break
    return x, records


def newton_baseline(problem, max_iter=500, trace_sink=None):
    """Damped Newton method with Armijo backtracking line search.

    Serves as the high-precision reference: stops when the gradient norm
    drops below 1e-12 or an accepted step improves h by less than eps.
    Affine constraints are handled by a KKT solve that keeps the step in
    ker(N).
    """
    A = problem.mat.A
    N = problem.mat.N
    x = problem.x0.copy()
    records = []
    h = objective(problem, x)
    for it in range(max_iter):
        fp, fpp, _ = gradient_pieces(problem, x)
        grad = A.T @ fp
        if _projected_grad_norm(problem, grad) < 1e-12 * (1 + abs(h)):
            break
        H = A.T @ (fpp[:, None] * A)
        try:
            if N is None:
                step = _newton_direction(H, grad)
            else:
                Hp = np.linalg.pinv(H, rcond=1e-12)
                K = N @ Hp @ N.T
                lam = np.linalg.pinv(K, rcond=1e-12) @ (N @ Hp @ grad)
                step = Hp @ (grad - N.T @ lam)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian(str(exc)) from exc
        slope = float(grad @ step)
        if slope <= 0:
            raise SingularHessian("Newton direction is not a descent direction")
        alpha = 1.0
        for _ in range(60):
            h_new = objective(problem, x - alpha * step)
            if h_new <= h - 1e-4 * alpha * slope:
                break
            alpha /= 2
        x = x - alpha * step
        decrease = h - h_new
        h = h_new
        if trace_sink is not None:
            trace_sink({"iter": it, "h": h, "alpha": alpha})
        records.append({"iter": it, "h": h, "alpha": alpha})
        if decrease < problem.eps:
            break
    return x, records


def _newton_direction(H, grad):
    try:
        import scipy.linalg

        c, low = scipy.linalg.cho_factor(H)
        return scipy.linalg.cho_solve((c, low), grad)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(H, rcond=1e-12) @ grad
