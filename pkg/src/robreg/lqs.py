"""Least quantile regression: nominal and robust mixed-integer formulations.

The q-th order LQS problem is ``min_beta |r_(q)|`` with ``r = y - X beta``
and ``|r_(1)| <= ... <= |r_(m)|``. Robust versions take the worst case over
a perturbation ball whose dual norm factors as ``phi(u) psi(v)``:

* ``phi = l_1``: every residual may move by ``lam psi(beta)``, so the
  objective is ``|r_(q)| + lam psi(beta)``;
* ``phi = l_inf``: the residuals share an l_1 budget ``lam psi(beta)`` and the
  worst case is the waterfilling level.

Formulations are linear programs plus SOS-1 pairs (at most one member of
each pair nonzero) and are solved by branch and bound over the LP solver in
:mod:`robreg.numerics`.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as sopt

from .norms import INF, Induced, check_exponent, dual_exponent, vec_norm
from .numerics import LpProblem, bisect, solve_lp
from .robustify import UncertaintySet

__all__ = [
    "RobustSpec",
    "LqsProblem",
    "MioNode",
    "MioResult",
    "order_statistic",
    "waterfill",
    "waterfill_closed_form",
    "robust_lqs_inner",
    "lqs_objective",
    "lqs_uncertainty_set",
    "lqs_oracle",
    "robust_lqs_grid_oracle",
    "build_formulation",
    "lqs_mio",
    "sampled_adversary_audit",
]


@dataclass(frozen=True)
class RobustSpec:
    phi: float  # 1 or inf
    psi: float  # 1, 2 or inf
    lam: float

    def __post_init__(self):
        phi, psi = check_exponent(self.phi), check_exponent(self.psi)
        if phi not in (1.0, INF):
            raise ValueError("phi must be l_1 or l_inf")
        if psi not in (1.0, 2.0, INF):
            raise ValueError("psi must be l_1, l_2 or l_inf")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @property
    def conic(self) -> bool:
        return self.psi == 2.0


@dataclass(frozen=True)
class LqsProblem:
    X: np.ndarray
    y: np.ndarray
    q: int
    robust: RobustSpec | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise ValueError("X and y have inconsistent row counts")
        if not 1 <= int(self.q) <= y.size:
            raise ValueError(f"q must lie in [1, {y.size}]")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "q", int(self.q))

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]


# --- scalar pieces ------------------------------------------------------------

def order_statistic(r, q) -> float:
    """The q-th smallest absolute value of ``r`` (1-based)."""
    a = np.sort(np.abs(np.asarray(r, dtype=float).ravel()))
    if not 1 <= q <= a.size:
        raise ValueError(f"q must lie in [1, {a.size}]")
    return float(a[q - 1])


def _fill(a_top, nu):
    return float(np.sum(np.maximum(nu - a_top, 0.0)))


def waterfill(abs_residuals, q, budget, tol=1e-12) -> float:
    """Level ``nu`` with ``sum_{i >= q} (nu - |r|_(i))_+ = budget``.

    This is the largest q-th order statistic reachable when the residuals
    may be moved by a total l_1 amount ``budget``.
    """
    a = np.sort(np.abs(np.asarray(abs_residuals, dtype=float).ravel()))
    if not 1 <= q <= a.size:
        raise ValueError(f"q must lie in [1, {a.size}]")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    top = a[q - 1:]
    lo = top[0]
    if budget == 0:
        return float(lo)
    hi = lo + 2.0 * budget
    f_hi = _fill(top, hi) - budget
    if f_hi <= 0:
        # budget below the float spacing at lo
        return float(hi)
    scale = max(1.0, abs(hi))
    return bisect(lambda nu: _fill(top, nu) - budget, lo, hi, tol=tol * scale)


def waterfill_closed_form(abs_residuals, q, budget) -> float:
    """``min_j (budget + sum_{i=q..j} |r|_(i)) / (j - q + 1)``."""
    a = np.sort(np.abs(np.asarray(abs_residuals, dtype=float).ravel()))
    top = a[q - 1:]
    levels = (budget + np.cumsum(top)) / np.arange(1, top.size + 1)
    return float(levels.min())


def robust_lqs_inner(r, q, phi, psi_value) -> float:
    """Worst q-th order statistic of ``|r + u|`` over the ``phi*`` ball of radius ``psi_value``."""
    if psi_value < 0:
        raise ValueError("budget must be nonnegative")
    phi = check_exponent(phi)
    if phi == 1:
        return order_statistic(r, q) + psi_value
    if phi == INF:
        return waterfill(np.abs(r), q, psi_value)
    raise ValueError("phi must be l_1 or l_inf")


def lqs_objective(prob: LqsProblem, beta) -> float:
    """True (robust) objective at ``beta``."""
    beta = np.asarray(beta, dtype=float).ravel()
    r = prob.y - prob.X @ beta
    if prob.robust is None:
        return order_statistic(r, prob.q)
    rs = prob.robust
    return robust_lqs_inner(r, prob.q, rs.phi, rs.lam * vec_norm(beta, rs.psi))


def lqs_uncertainty_set(prob: LqsProblem) -> UncertaintySet:
    """An induced ball realizing the problem's ``(phi, psi)`` pair.

    The induced ``(h, g)`` norm has ``phi = g*`` and ``psi = h``.
    """
    rs = prob.robust
    if rs is None:
        raise ValueError("nominal problems have no uncertainty set")
    return UncertaintySet(Induced(rs.psi, dual_exponent(rs.phi)), rs.lam, prob.m, prob.n)


# --- exact oracles -------------------------------------------------------------

def _chebyshev_fit(X, y):
    """``min_beta max_i |y_i - x_i beta|`` as an LP in ``(beta, t)``."""
    k, n = X.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A = np.vstack([np.hstack([X, np.ones((k, 1))]), np.hstack([-X, np.ones((k, 1))])])
    b = np.concatenate([y, -y])
    lower = np.concatenate([np.full(n, -np.inf), [0.0]])
    res = solve_lp(LpProblem(c, A, [">="] * (2 * k), b, lower, np.full(n + 1, np.inf)))
    if not res.optimal:
        raise ArithmeticError(f"Chebyshev LP ended with status {res.status}")
    return res.x[:n], res.value


def lqs_oracle(prob: LqsProblem, cap=10_000):
    """Exact nominal LQS by enumerating all q-subsets.

    For each subset the Chebyshev fit gives the best possible largest
    residual on it; the minimum over subsets is the LQS value.
    """
    m, q = prob.m, prob.q
    if math.comb(m, q) > cap:
        raise ValueError(f"C({m},{q}) subsets exceed the cap of {cap}")
    best, best_beta = np.inf, None
    for S in itertools.combinations(range(m), q):
        S = list(S)
        beta, val = _chebyshev_fit(prob.X[S], prob.y[S])
        if val < best - 1e-12:
            best, best_beta = val, beta
    # the fit on the chosen subset attains it; report the true order statistic
    return best_beta, order_statistic(prob.y - prob.X @ best_beta, q)


def _grid_objective(prob, B):
    """Robust objective at every row of ``B``, using the closed-form waterfill."""
    rs = prob.robust
    A = np.sort(np.abs(prob.y[None, :] - B @ prob.X.T), axis=1)
    if rs.psi == INF:
        budget = rs.lam * np.abs(B).max(axis=1)
    elif rs.psi == 1:
        budget = rs.lam * np.abs(B).sum(axis=1)
    else:
        budget = rs.lam * np.linalg.norm(B, axis=1)
    top = A[:, prob.q - 1:]
    if rs.phi == 1:
        return top[:, 0] + budget
    levels = (budget[:, None] + np.cumsum(top, axis=1)) / np.arange(1, top.shape[1] + 1)
    return levels.min(axis=1)


def robust_lqs_grid_oracle(prob: LqsProblem, *, points=201, restarts=20, seed=0):
    """Grid search plus Nelder-Mead refinement for robust LQS with ``n <= 2``.

    The grid spans ``+-2 ||beta_nominal||_inf`` (at least ``+-1``) on each
    axis. Validation only: the result is an upper bound on the optimum.
    """
    if prob.robust is None:
        raise ValueError("the grid oracle is for robust problems")
    n = prob.n
    if n > 2:
        raise ValueError("the grid oracle handles n <= 2 only")
    nominal = LqsProblem(prob.X, prob.y, prob.q)
    beta_nom, _ = lqs_oracle(nominal)
    radius = max(2.0 * vec_norm(beta_nom, INF), 1.0)
    axis = np.linspace(-radius, radius, points)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    B = np.stack([g.ravel() for g in grids], axis=1)
    B = np.vstack([B, np.zeros(n), beta_nom])
    f = lambda b: lqs_objective(prob, b)
    vals = _grid_objective(prob, B)
    order = np.argsort(vals)[:restarts]
    step = 2 * radius / (points - 1)
    best_val, best_beta = vals[order[0]], B[order[0]].copy()
    for k in order:
        x0 = B[k]
        simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(n)])
        for _ in range(3):
            res = sopt.minimize(f, x0, method="Nelder-Mead",
                                options=dict(initial_simplex=simplex, xatol=1e-12, fatol=1e-14,
                                             maxiter=4000, maxfev=8000))
            x0 = res.x
            simplex = np.vstack([x0] + [x0 + step * 0.1 * e for e in np.eye(n)])
            if res.fun < best_val:
                best_val, best_beta = float(res.fun), res.x.copy()
    return best_beta, best_val


# --- MIO formulations ---------------------------------------------------------

@dataclass
class Formulation:
    """An LP with SOS-1 pairs and the index of the coefficient block."""

    lp: LpProblem
    sos: list
    beta_slice: slice
    approx_note: str = ""


class _Builder:
    def __init__(self):
        self.names = {}
        self.lower, self.upper = [], []
        self.rows, self.senses, self.rhs = [], [], []
        self.size = 0

    def var(self, name, k, lo=0.0, hi=np.inf):
        self.names[name] = slice(self.size, self.size + k)
        self.lower += [lo] * k
        self.upper += [hi] * k
        self.size += k
        return self.names[name]

    def idx(self, name, i=0):
        return self.names[name].start + i

    def row(self, coefs, sense, rhs):
        self.rows.append(coefs)
        self.senses.append(sense)
        self.rhs.append(rhs)

    def lp(self, objective):
        A = np.zeros((len(self.rows), self.size))
        for k, coefs in enumerate(self.rows):
            for j, v in coefs:
                A[k, j] += v
        c = np.zeros(self.size)
        for j, v in objective:
            c[j] += v
        return LpProblem(c, A, self.senses, np.array(self.rhs), np.array(self.lower), np.array(self.upper))


def _l2_directions(n, segments=16):
    """Unit directions whose support function under-approximates ``||.||_2``."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    dirs = []
    angles = 2 * np.pi * np.arange(segments) / segments
    for i, j in itertools.combinations(range(n), 2):
        for t in angles:
            d = np.zeros(n)
            d[i], d[j] = np.cos(t), np.sin(t)
            dirs.append(d)
    if n > 2:
        for s in itertools.product((-1.0, 1.0), repeat=n):
            dirs.append(np.array(s) / np.sqrt(n))
    return np.unique(np.round(np.array(dirs), 15), axis=0)


def _psi_epigraph(bld, psi, w_name):
    """Constraints making variable ``w_name`` at least ``psi(beta)`` (or its polyhedral bound)."""
    n = bld.names["beta"].stop - bld.names["beta"].start
    w = bld.idx(w_name)
    note = ""
    if psi == 1:
        t = bld.var("abs_beta", n)
        for j in range(n):
            bld.row([(bld.idx("abs_beta", j), 1.0), (bld.idx("beta", j), -1.0)], ">=", 0.0)
            bld.row([(bld.idx("abs_beta", j), 1.0), (bld.idx("beta", j), 1.0)], ">=", 0.0)
        bld.row([(w, 1.0)] + [(bld.idx("abs_beta", j), -1.0) for j in range(n)], ">=", 0.0)
    elif psi == INF:
        for j in range(n):
            bld.row([(w, 1.0), (bld.idx("beta", j), -1.0)], ">=", 0.0)
            bld.row([(w, 1.0), (bld.idx("beta", j), 1.0)], ">=", 0.0)
    else:
        D = _l2_directions(n)
        for d in D:
            bld.row([(w, 1.0)] + [(bld.idx("beta", j), -d[j]) for j in range(n)], ">=", 0.0)
        note = f"l_2 replaced by the support function of {len(D)} unit directions"
    return note


def build_formulation(prob: LqsProblem) -> Formulation:
    """Assemble the LP relaxation and SOS-1 pairs for ``prob``.

    Nominal block (``a_i = r+_i + r-_i`` is ``|r_i|`` once ``(r+, r-)`` is
    complementary)::

        r+_i + r-_i - gamma = mubar_i - mu_i
        r+_i - r-_i = y_i - x_i beta
        sum z_i = q,  0 <= z_i <= 1
        gamma >= mu_i
        SOS-1: (mubar_i, mu_i), (r+_i, r-_i), (z_i, mubar_i)

    ``z_i > 0`` forces ``mubar_i = 0``, i.e. ``|r_i| <= gamma``; with
    ``sum z = q`` and ``z <= 1`` at least q residuals lie below ``gamma``.
    The SOS pair ties ``z_i`` to ``mubar_i``: pairing it with ``mu_i`` instead
    would let ``gamma = 0`` satisfy every constraint.

    ``phi = l_1`` adds ``tau >= lam psi(beta)`` and minimizes ``gamma + tau``.

    ``phi = l_inf`` minimizes ``nu`` subject to::

        (m - q + 1) rho - sum tau_i >= lam psi(beta)
        rho - tau_i <= pi_i,  tau_i, pi_i >= 0
        s_i = pi_i - nu + a_i >= 0,  SOS-1: (s_i, pi_i)
        nu >= gamma

    so ``pi_i = (nu - a_i)_+`` and ``nu`` is the waterfilling level. The
    last row keeps ``nu`` at or above the nominal order statistic, which
    matters when ``psi(beta) = 0``: without it the budget row holds for any
    ``nu`` and the problem is unbounded below.
    """
    m, n, q = prob.m, prob.n, prob.q
    X, y = prob.X, prob.y
    bld = _Builder()
    bld.var("beta", n, -np.inf, np.inf)
    bld.var("rp", m)
    bld.var("rm", m)
    bld.var("mu", m)
    bld.var("mubar", m)
    bld.var("z", m, 0.0, 1.0)
    bld.var("gamma", 1)
    I = bld.idx
    for i in range(m):
        bld.row([(I("rp", i), 1.0), (I("rm", i), 1.0), (I("gamma"), -1.0),
                 (I("mubar", i), -1.0), (I("mu", i), 1.0)], "=", 0.0)
        bld.row([(I("rp", i), 1.0), (I("rm", i), -1.0)] + [(I("beta", j), X[i, j]) for j in range(n)],
                "=", y[i])
        bld.row([(I("gamma"), 1.0), (I("mu", i), -1.0)], ">=", 0.0)
    bld.row([(I("z", i), 1.0) for i in range(m)], "=", float(q))
    sos = []
    for i in range(m):
        sos += [(I("mubar", i), I("mu", i)), (I("rp", i), I("rm", i)), (I("z", i), I("mubar", i))]
    note = ""
    rs = prob.robust
    if rs is None:
        objective = [(I("gamma"), 1.0)]
    elif rs.phi == 1:
        bld.var("tau", 1)
        bld.var("w", 1)
        note = _psi_epigraph(bld, rs.psi, "w")
        bld.row([(I("tau"), 1.0), (I("w"), -rs.lam)], ">=", 0.0)
        objective = [(I("gamma"), 1.0), (I("tau"), 1.0)]
    else:
        bld.var("nu", 1, -np.inf, np.inf)
        bld.var("rho", 1, -np.inf, np.inf)
        bld.var("tau", m)
        bld.var("pi", m)
        bld.var("s", m)
        bld.var("w", 1)
        note = _psi_epigraph(bld, rs.psi, "w")
        bld.row([(I("rho"), float(m - q + 1))] + [(I("tau", i), -1.0) for i in range(m)]
                + [(I("w"), -rs.lam)], ">=", 0.0)
        for i in range(m):
            bld.row([(I("rho"), 1.0), (I("tau", i), -1.0), (I("pi", i), -1.0)], "<=", 0.0)
            bld.row([(I("s", i), 1.0), (I("pi", i), -1.0), (I("nu"), 1.0),
                     (I("rp", i), -1.0), (I("rm", i), -1.0)], "=", 0.0)
            sos.append((I("s", i), I("pi", i)))
        bld.row([(I("nu"), 1.0), (I("gamma"), -1.0)], ">=", 0.0)
        objective = [(I("nu"), 1.0)]
    return Formulation(bld.lp(objective), sos, bld.names["beta"], note)


# --- branch and bound ---------------------------------------------------------

@dataclass(order=True)
class MioNode:
    """A branch-and-bound node: SOS members fixed to zero and the parent bound."""

    bound: float
    serial: int
    fixed: tuple = field(compare=False, default=())


@dataclass
class MioResult:
    beta: np.ndarray
    value: float
    proved_gap: float
    lower_bound: float
    nodes: int
    status: str  # "optimal" or "node_limit"
    approximation_gap: float = 0.0
    note: str = ""


def lqs_mio(prob: LqsProblem, gap_tol=1e-7, *, node_limit=200_000, sos_tol=1e-9,
            incumbent=None, warm_start=True, lp_tol=1e-9):
    """Solve ``prob`` by best-bound branch and bound over SOS-1 pairs.

    Each node solves the LP relaxation with its fixed members held at zero.
    The most violated pair (largest ``min`` of its two values) is branched
    on, one child per member. Every LP solution gives a feasible ``beta``
    whose true objective updates the incumbent. The search stops once the
    best open bound is within ``gap_tol`` of the incumbent.

    For ``psi = l_2`` the norm is replaced by a polyhedral under-estimate, so
    bounds are valid but possibly loose; ``approximation_gap`` reports the
    true objective minus the final bound.

    Nominal problems start from the subset-enumeration optimum when
    ``warm_start`` is set and the enumeration is small enough; otherwise
    (or with ``incumbent`` given) the search starts from that point or zero.
    """
    form = build_formulation(prob)
    base = form.lp
    bs = form.beta_slice
    if incumbent is None and warm_start and prob.robust is None:
        try:
            incumbent, _ = lqs_oracle(prob)
        except ValueError:
            incumbent = None
    if incumbent is None:
        incumbent = np.zeros(prob.n)
    best_beta = np.asarray(incumbent, dtype=float).copy()
    best_val = lqs_objective(prob, best_beta)

    def solve(fixed):
        upper = base.upper.copy()
        for j in fixed:
            upper[j] = 0.0
        lp = LpProblem(base.c, base.A, base.senses, base.b, base.lower, upper)
        return solve_lp(lp, tol=lp_tol)

    heap = [MioNode(-np.inf, 0, ())]
    serial = 1
    nodes = 0
    closed_lb = np.inf  # smallest bound among nodes closed without branching
    status = "optimal"
    while heap:
        node = heapq.heappop(heap)
        if node.bound >= best_val - gap_tol:
            closed_lb = min(closed_lb, node.bound)
            continue
        if nodes >= node_limit:
            heapq.heappush(heap, node)
            status = "node_limit"
            break
        nodes += 1
        res = solve(node.fixed)
        if res.status == "infeasible":
            continue
        if not res.optimal:
            raise ArithmeticError(f"LP relaxation ended with status {res.status}")
        x = res.x
        beta = x[bs]
        val = lqs_objective(prob, beta)
        if val < best_val:
            best_val, best_beta = val, beta.copy()
        if res.value >= best_val - gap_tol:
            closed_lb = min(closed_lb, res.value)
            continue
        viol = [min(x[a], x[b]) for a, b in form.sos]
        k = int(np.argmax(viol))
        if viol[k] <= sos_tol:
            # complementary: exact formulations attain the LP value here, the
            # polyhedral l_2 bound only under-estimates it
            closed_lb = min(closed_lb, res.value)
            continue
        a, b = form.sos[k]
        for j in (a, b):
            heapq.heappush(heap, MioNode(res.value, serial, node.fixed + (j,)))
            serial += 1
    lb = min([closed_lb, best_val] + [nd.bound for nd in heap])
    gap = max(best_val - lb, 0.0)
    approx = gap if prob.robust is not None and prob.robust.conic else 0.0
    return MioResult(best_beta, best_val, gap, lb, nodes, status, approx, form.approx_note)


# --- audit ---------------------------------------------------------------------

def sampled_adversary_audit(prob: LqsProblem, beta, trials=1000, seed=0) -> float:
    """Largest sampled ``ord_q |y - (X + Delta) beta|`` over ``Delta`` in the ball."""
    beta = np.asarray(beta, dtype=float).ravel()
    U = lqs_uncertainty_set(prob)
    rng = np.random.default_rng(seed)
    h, g = U.shape.h, U.shape.g
    best = order_statistic(prob.y - prob.X @ beta, prob.q)
    for _ in range(trials):
        u = rng.standard_normal(prob.m)
        v = rng.standard_normal(prob.n)
        # rank-one matrices have induced norm ||u||_g ||v||_{h*}
        D = U.radius * np.outer(u, v) / (vec_norm(u, g) * vec_norm(v, dual_exponent(h)))
        best = max(best, order_statistic(prob.y - (prob.X + D) @ beta, prob.q))
    return best
