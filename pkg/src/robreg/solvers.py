"""Nominal, regularized and robust linear regression.

The regularized problem is

    min_beta ||y - X beta||_p + c ||beta||_h

with unsquared norms. By default it is handed to a conic solver through
cvxpy; a plain subgradient method is kept as ``method="subgradient"``.
Every returned point carries an optimality certificate: the norm of the
smallest subgradient of the objective at that point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import warnings

import cvxpy as cp
import numpy as np

from .norms import INF, check_exponent, dual_exponent, mat_norm, rank_one_norm, vec_norm
from .norms import FrobeniusP, Induced, RowWise, SchattenP
from .robustify import UncertaintySet, classify_equivalence, worst_case_loss

__all__ = [
    "RegressionProblem",
    "SolveReport",
    "regularized_objective",
    "min_norm_subgradient",
    "solve_regularized",
    "solve_robust",
    "AuditResult",
    "robust_objective_audit",
]


@dataclass(frozen=True)
class RegressionProblem:
    X: np.ndarray
    y: np.ndarray
    loss_p: float = 2.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError("X and y have inconsistent row counts")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("empty design matrix")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("data must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "loss_p", check_exponent(self.loss_p))

    @property
    def shape(self):
        return self.X.shape


@dataclass
class SolveReport:
    beta: np.ndarray
    objective: float
    bracket: tuple | None = None
    iterations: int = 0
    converged: bool = True
    certificate: float | None = None
    history: list = field(default_factory=list, repr=False)


def regularized_objective(prob, beta, coeff, h, *, squared=False) -> float:
    r = prob.y - prob.X @ beta
    loss = vec_norm(r, prob.loss_p)
    if squared:
        loss = loss**2
    return loss + coeff * vec_norm(beta, h)


# Clarabel stops near 1e-8 by default; certificates at kinks of l_p with
# p < 2 need more digits than that.
_TIGHT = dict(tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, tol_ktratio=1e-10, max_iter=500)


# --- optimality certificate -------------------------------------------------

def _norm_subdifferential(x, p, var, tol):
    """cvxpy constraints describing ``var`` in the subdifferential of ||.||_p at x."""
    xn = vec_norm(x, p)
    if xn <= tol:
        return [cp.norm(var, dual_exponent(p)) <= 1]
    if p == 1:
        cons = []
        free = np.abs(x) <= tol
        if (~free).any():
            cons.append(var[~free] == np.sign(x[~free]))
        if free.any():
            cons.append(cp.abs(var[free]) <= 1)
        return cons
    if p == INF:
        active = np.abs(x) >= xn - tol
        w = cp.Variable(int(active.sum()), nonneg=True)
        cons = [cp.sum(w) == 1]
        s = np.zeros((x.size, int(active.sum())))
        s[np.flatnonzero(active), np.arange(int(active.sum()))] = np.sign(x[active])
        cons.append(var == s @ w)
        return cons
    g = np.sign(x) * (np.abs(x) / xn) ** (p - 1.0)
    return [var == g]


def min_norm_subgradient(prob, beta, coeff, h, *, squared=False, kink_tol=None) -> float:
    """Euclidean norm of the smallest subgradient of the objective at ``beta``.

    Residual entries and coefficients within ``kink_tol`` of a kink are
    treated as sitting on it. The value is relative to
    ``1 + ||X||_2 + coeff``.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    h = check_exponent(h)
    m, n = prob.shape
    r = prob.y - prob.X @ beta
    if kink_tol is None:
        kink_tol = 1e-7 * (1.0 + vec_norm(prob.y, INF) + vec_norm(beta, INF))
    s = cp.Variable(m)
    t = cp.Variable(n)
    cons = _norm_subdifferential(r, prob.loss_p, s, kink_tol)
    if coeff > 0:
        cons += _norm_subdifferential(beta, h, t, kink_tol)
    else:
        cons.append(t == 0)
    loss_scale = 2.0 * vec_norm(r, prob.loss_p) if squared else 1.0
    g = -loss_scale * (prob.X.T @ s) + coeff * t
    problem = cp.Problem(cp.Minimize(cp.sum_squares(g)), cons)
    problem.solve(solver=cp.CLARABEL)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        return float("inf")
    spectral = float(np.linalg.norm(prob.X, 2))
    return float(np.sqrt(max(problem.value, 0.0))) / (1.0 + loss_scale * spectral + coeff)


# --- solvers ----------------------------------------------------------------

def _solve_conic(prob, coeff, h, squared):
    n = prob.shape[1]
    b = cp.Variable(n)
    loss = cp.norm(prob.y - prob.X @ b, prob.loss_p)
    if squared:
        loss = cp.square(loss)
    obj = loss + (coeff * cp.norm(b, h) if coeff > 0 else 0)
    problem = cp.Problem(cp.Minimize(obj))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        problem.solve(solver=cp.CLARABEL, **_TIGHT)
    ok = problem.status in ("optimal", "optimal_inaccurate")
    beta = np.zeros(n) if b.value is None else np.asarray(b.value, dtype=float)
    iters = problem.solver_stats.num_iters or 0
    return beta, ok, int(iters)


def _subgradient(prob, beta, coeff, h, squared):
    r = prob.y - prob.X @ beta
    rn = vec_norm(r, prob.loss_p)
    if rn > 0:
        gl = _grad_direction(r, prob.loss_p)
        g = -(prob.X.T @ gl)
        if squared:
            g = 2.0 * rn * g
    else:
        g = np.zeros_like(beta)
    if coeff > 0 and np.any(beta):
        g = g + coeff * _grad_direction(beta, h)
    return g


def _grad_direction(x, p):
    """The subgradient of ``||.||_p`` at nonzero ``x`` (zero entries get 0)."""
    if p == 1:
        return np.sign(x)
    if p == INF:
        g = np.zeros_like(x)
        k = int(np.argmax(np.abs(x)))
        g[k] = np.sign(x[k])
        return g
    xn = vec_norm(x, p)
    return np.sign(x) * (np.abs(x) / xn) ** (p - 1.0)


def _solve_subgradient(prob, coeff, h, squared, max_iter, tol, seed):
    """Subgradient descent with Polyak steps against a shrinking target."""
    n = prob.shape[1]
    beta = np.zeros(n)
    f = regularized_objective(prob, beta, coeff, h, squared=squared)
    best, best_beta = f, beta.copy()
    history = [best]
    slack = max(f, 1.0) * 0.1
    stall = 0
    for k in range(1, max_iter + 1):
        g = _subgradient(prob, beta, coeff, h, squared)
        gg = g @ g
        if gg == 0:
            break
        target = best - slack
        beta = beta - (f - target) / gg * g
        f = regularized_objective(prob, beta, coeff, h, squared=squared)
        if f < best - tol * max(1.0, abs(best)):
            best, best_beta = f, beta.copy()
            stall = 0
        else:
            stall += 1
            if stall >= 50:
                slack *= 0.5
                stall = 0
                beta, f = best_beta.copy(), best
        if f < best:
            best, best_beta = f, beta.copy()
        history.append(best)
        if slack < tol * max(1.0, abs(best)):
            return best_beta, True, k, history
    return best_beta, False, max_iter, history


def solve_regularized(prob: RegressionProblem, h_coeff: float, h_exponent=1.0, *,
                      squared=False, method="conic", max_iter=100_000, tol=1e-10,
                      seed=0, certify=True) -> SolveReport:
    """Minimize ``||y - X beta||_p + h_coeff ||beta||_h``.

    Parameters
    ----------
    squared : bool
        Use ``||y - X beta||_p ** 2`` as the loss (Lasso-style scaling).
    method : {"conic", "subgradient"}
        ``"conic"`` solves the problem with Clarabel through cvxpy;
        ``"subgradient"`` runs Polyak-step subgradient descent from zero and
        keeps the best iterate.
    certify : bool
        Attach the relative minimal subgradient norm at the returned point.
    """
    if h_coeff < 0:
        raise ValueError("penalty coefficient must be nonnegative")
    h = check_exponent(h_exponent)
    n = prob.shape[1]
    if not np.any(prob.X):
        beta = np.zeros(n)
        obj = regularized_objective(prob, beta, h_coeff, h, squared=squared)
        return SolveReport(beta, obj, None, 0, True, 0.0 if certify else None, [obj])
    if method == "conic":
        beta, ok, iters = _solve_conic(prob, h_coeff, h, squared)
        history = []
    elif method == "subgradient":
        beta, ok, iters, history = _solve_subgradient(prob, h_coeff, h, squared, max_iter, tol, seed)
    else:
        raise ValueError(f"unknown method {method!r}")
    obj = regularized_objective(prob, beta, h_coeff, h, squared=squared)
    cert = min_norm_subgradient(prob, beta, h_coeff, h, squared=squared) if certify else None
    if cert is not None and cert > 1e-4:
        ok = False
    return SolveReport(beta, obj, None, iters, ok, cert, history)


def solve_robust(prob: RegressionProblem, U: UncertaintySet, **kwargs) -> SolveReport:
    """Minimize the worst-case loss over ``U``, or bracket it.

    In exact regimes this is the regularized problem with the equivalent
    penalty. Otherwise both bounding problems are solved; the minimizer of
    the upper one is returned with ``bracket = (lower optimum, upper
    optimum)`` and the objective is the worst case at that point.
    """
    m, n = prob.shape
    if (U.rows, U.cols) != (m, n):
        raise ValueError("uncertainty set dimensions do not match the data")
    verdict = classify_equivalence(prob.loss_p, U)
    upper = solve_regularized(prob, verdict.upper_coefficient, verdict.exponent, **kwargs)
    z = prob.y - prob.X @ upper.beta
    robust = worst_case_loss(z, upper.beta, U, prob.loss_p).value
    if verdict.exact:
        upper.objective = robust
        return upper
    lower = solve_regularized(prob, verdict.lower_coefficient, verdict.exponent, **kwargs)
    upper.bracket = (lower.objective, upper.objective)
    upper.objective = robust
    upper.iterations += lower.iterations
    upper.converged = upper.converged and lower.converged
    return upper


# --- sampling audit ---------------------------------------------------------

@dataclass(frozen=True)
class AuditResult:
    analytic: float
    sampled_max: float
    exact: bool


def _random_member(U, rng):
    """A random perturbation on the boundary of ``U``."""
    shape = U.shape
    m, n = U.rows, U.cols
    if rng.random() < 0.5:
        u, v = rng.standard_normal(m), rng.standard_normal(n)
        return U.radius * np.outer(u, v) / rank_one_norm(u, v, shape)
    D = rng.standard_normal((m, n))
    if isinstance(shape, Induced) and not (shape.h == 1 or shape.g == INF or shape.h == shape.g == 2):
        # ||D b||_g <= ||D b||_1 <= sum_i ||d_i||_{h*} ||b||_h
        bound = sum(vec_norm(row, dual_exponent(shape.h)) for row in D)
        return U.radius * D / bound
    return U.radius * D / mat_norm(D, shape)


def robust_objective_audit(beta, prob: RegressionProblem, U: UncertaintySet, trials=1000,
                           *, seed=0, witness=None) -> AuditResult:
    """Compare the analytic worst case with the largest loss over sampled ``Delta``.

    ``witness`` (a perturbation in ``U``) is added to the sample when given.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    z = prob.y - prob.X @ beta
    p = prob.loss_p
    wc = worst_case_loss(z, beta, U, p)
    verdict = classify_equivalence(p, U)
    analytic = wc.value if wc.exact else vec_norm(z, p) + verdict.upper_penalty(beta)
    rng = np.random.default_rng(seed)
    best = vec_norm(z, p)
    for _ in range(trials):
        D = _random_member(U, rng)
        best = max(best, vec_norm(z + D @ beta, p), vec_norm(z - D @ beta, p))
    if witness is not None:
        best = max(best, vec_norm(z + np.asarray(witness) @ beta, p))
    return AuditResult(analytic, best, wc.exact)
