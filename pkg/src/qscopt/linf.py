"""(1+eps)-approximate overdetermined l-infinity regression.

A binary-search driver walks a (1+eps)-grid of guesses M for the optimal
value.  For each guess, an IRLS subsolver either returns a feasible point
with width at most (1+eps)M, or a resistance vector whose energy-to-mass
ratio certifies that M is below the optimum.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core_linalg import ProblemMatrix, ResistanceVector, solve_weighted_ls
from .exceptions import InvariantViolation, SolverBudgetExceeded
from .lewis_weights import LewisOverestimate, approx_lewis

EPS_CAP = 0.5
BUDGET_MULTIPLIER = 200
INVARIANT_SLACK = 1e-8


@dataclass(frozen=True)
class LinfInstance:
    """Homogeneous-form instance: minimize ||Ax||_inf over g^T x = -1."""

    A: np.ndarray
    g: np.ndarray
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        if not np.any(self.g != 0):
            raise ValueError("g must be nonzero")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass
class IterationCounts:
    total: int = 0
    high_width: int = 0
    low_width: int = 0
    solver_calls: int = 0
    invariant_checks: int = 0


@dataclass
class SubsolverOutcome:
    """Primal point or dual resistance certificate, plus iteration counts."""

    tag: str  # "primal" or "dual"
    x: np.ndarray = None
    r: ResistanceVector = None
    iterations: IterationCounts = field(default_factory=IterationCounts)

    @property
    def is_primal(self):
        return self.tag == "primal"


def homogenize(A, b, eps=0.1):
    """Rewrite min ||Ax - b||_inf as a homogeneous instance.

    Appends -b as an extra column and pins the new coordinate to 1 through
    the constraint g^T x' = -1 with g = -e_{d+1}.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.shape != (A.shape[0],):
        raise ValueError("b must have one entry per row of A")
    Ah = np.hstack([A, -b[:, None]])
    g = np.zeros(A.shape[1] + 1)
    g[-1] = -1.0
    return LinfInstance(A=Ah, g=g, eps=eps)


def _emit(trace, t, r_mass, e, width, case):
    if trace is not None:
        trace({"t": t, "r_mass": r_mass, "energy": e, "width": width,
               "case": case})


def subsolver(inst, M, w, trace=None, verify=True):
    """IRLS subsolver for a single guess M of the optimal width.

    Starts from resistances ``w + d/n`` and repeatedly solves the weighted
    least-squares problem.  High-width iterates (width > d^{1/3} M) trigger
    a unit increment on a maximizing coordinate (ties broken by lowest
    index); low-width iterates accumulate a running average and rescale the
    resistances of over-wide coordinates multiplicatively.  Both updates
    keep the energy gain per unit of added resistance mass at least M^2,
    which is checked at every step when ``verify`` is set.
    """
    A, g = inst.A, inst.g
    n, d = A.shape
    eps = min(inst.eps, EPS_CAP)
    if M <= 0:
        raise ValueError("M must be positive")
    wvec = w.w if isinstance(w, LewisOverestimate) else np.asarray(w, dtype=float)

    r = wvec + d / n
    mat = ProblemMatrix(A)
    mass0 = float(np.sum(r))
    budget = BUDGET_MULTIPLIER * (
        (d ** (1 / 3) / eps + 1 / eps**2) * math.log(max(n / eps, 2.0))
    )
    S = d ** (1 / 3) * M
    thresh_dual = (M / (1 + eps)) ** 2
    counts = IterationCounts()
    s_acc = np.zeros(d)
    t_avg = 0
    prev_energy = None
    prev_mass = None

    def check_invariant(e_now, mass_now):
        if not verify or prev_energy is None:
            return
        counts.invariant_checks += 1
        gain = e_now - prev_energy
        required = M**2 * (mass_now - prev_mass) - INVARIANT_SLACK * e_now
        if gain < required:
            raise InvariantViolation(
                f"energy gain {gain} below M^2 mass gain at t={counts.total}"
            )

    while float(np.sum(r)) <= mass0 / eps:
        if counts.solver_calls >= budget:
            raise SolverBudgetExceeded(
                f"subsolver exceeded {budget:.0f} linear solves"
            )
        sol = solve_weighted_ls(mat, r, g)
        counts.solver_calls += 1
        mass = float(np.sum(r))
        check_invariant(sol.energy, mass)
        prev_energy, prev_mass = sol.energy, mass

        Ax = A @ sol.x
        width = float(np.max(np.abs(Ax)))
        if sol.energy / mass >= thresh_dual:
            _emit(trace, counts.total, mass, sol.energy, width, "dual")
            return SubsolverOutcome(
                tag="dual", r=ResistanceVector(r.copy()), iterations=counts
            )
        if width <= (1 + eps) * M:
            _emit(trace, counts.total, mass, sol.energy, width, "primal")
            return SubsolverOutcome(tag="primal", x=sol.x, iterations=counts)

        if width > S:
            i = int(np.argmax(np.abs(Ax)))
            r[i] += 1.0
            counts.high_width += 1
            _emit(trace, counts.total, mass, sol.energy, width, "high")
        else:
            t_avg += 1
            s_acc += sol.x
            avg = s_acc / t_avg
            if float(np.max(np.abs(A @ avg))) <= (1 + eps) * M:
                _emit(trace, counts.total, mass, sol.energy, width, "primal-avg")
                return SubsolverOutcome(tag="primal", x=avg, iterations=counts)
            mask = Ax**2 >= (1 + eps) * M**2
            r[mask] *= Ax[mask] ** 2 / M**2
            counts.low_width += 1
            _emit(trace, counts.total, mass, sol.energy, width, "low")
        counts.total += 1

    if verify:
        final = solve_weighted_ls(mat, r, g)
        counts.solver_calls += 1
        mass = float(np.sum(r))
        check_invariant(final.energy, mass)
        if final.energy / mass < thresh_dual * (1 - INVARIANT_SLACK):
            raise InvariantViolation("loop-exit dual ratio below (M/(1+eps))^2")
    return SubsolverOutcome(
        tag="dual", r=ResistanceVector(r.copy()), iterations=counts
    )


@dataclass
class LinfTrace:
    """Binary-search history of one linf_regress call."""

    guesses: list = field(default_factory=list)  # (P, M, tag)
    outcomes: list = field(default_factory=list)
    steps: int = 0
    solver_calls: int = 0
    invariant_checks: int = 0


def linf_regress(A, g, eps, w=None, trace_sink=None, verify=True):
    """Solve min ||Ax||_inf over g^T x = -1 to a (1+eps) factor.

    Returns
    -------
    (x, trace) : (ndarray, LinfTrace)
    """
    A = np.asarray(A, dtype=float)
    g = np.asarray(g, dtype=float)
    inst = LinfInstance(A=A, g=g, eps=eps)
    eps = min(eps, EPS_CAP)
    n, d = A.shape

    trace = LinfTrace()
    x0 = solve_weighted_ls(ProblemMatrix(A), np.ones(n), g).x
    trace.solver_calls += 1
    norm2 = float(np.linalg.norm(A @ x0))
    # Exact interpolation: the (1+eps)-grid degenerates at optimum 0.
    if norm2 <= 1e-10 * np.linalg.norm(A) * (1 + np.linalg.norm(x0)):
        return x0, trace

    if w is None:
        w = approx_lewis(A)
    base = math.log1p(eps)
    L = math.floor(math.log(norm2 / math.sqrt(n)) / base)
    U = math.floor(math.log(norm2) / base)
    max_steps = math.ceil(math.log2((U - L) + 1)) if U > L else 0

    best = x0  # x0 certifies M = ||A x0||_2 feasible
    while L < U:
        P = (L + U) // 2
        M = (1 + eps) ** P
        out = subsolver(inst, M, w, verify=verify)
        trace.solver_calls += out.iterations.solver_calls
        trace.invariant_checks += out.iterations.invariant_checks
        trace.guesses.append((P, M, out.tag))
        trace.outcomes.append(out)
        if trace_sink is not None:
            trace_sink({"P": P, "M": M, "tag": out.tag,
                        "solver_calls": out.iterations.solver_calls})
        if out.is_primal:
            U = P
            best = out.x
        else:
            L = P + 1
        trace.steps += 1
        assert trace.steps <= max_steps, "binary search exceeded its bound"
    assert best is not None  # x0 always provides a feasible fallback
    return best, trace
