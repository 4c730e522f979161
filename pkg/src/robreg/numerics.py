"""Dense numeric kernels: Jacobi SVD, a bounded-variable simplex LP solver and
bracketed root finding.

Everything here works on plain numpy arrays and is sized for desk-scale
problems (tens of rows and columns).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as _sopt

__all__ = [
    "SVDConvergenceError",
    "svd",
    "LpProblem",
    "LpResult",
    "solve_lp",
    "bisect",
]


class SVDConvergenceError(RuntimeError):
    pass


def _complete_orthonormal(Q, filled):
    """Replace the columns of ``Q`` not flagged in ``filled`` by an orthonormal
    completion of the flagged ones."""
    m, k = Q.shape
    basis = [Q[:, j] for j in range(k) if filled[j]]
    candidates = iter(np.eye(m))
    for j in range(k):
        if filled[j]:
            continue
        for e in candidates:
            w = e.copy()
            for b in basis:
                w -= (b @ w) * b
            nw = np.linalg.norm(w)
            if nw > 1e-8:
                w /= nw
                # second pass for numerical orthogonality
                for b in basis:
                    w -= (b @ w) * b
                w /= np.linalg.norm(w)
                Q[:, j] = w
                basis.append(w)
                break
    return Q


def svd(A, *, tol=1e-12, max_sweeps=100):
    """Thin singular value decomposition by one-sided (Hestenes) Jacobi rotations.

    Parameters
    ----------
    A : array_like, shape (m, n)
    tol : float
        Rotation threshold on the normalized column inner product.
    max_sweeps : int
        Iteration cap; exceeding it raises :class:`SVDConvergenceError`.

    Returns
    -------
    U : ndarray, shape (m, k)
    s : ndarray, shape (k,)
        Singular values, nonincreasing, ``k = min(m, n)``.
    V : ndarray, shape (n, k)
        ``A = U @ diag(s) @ V.T`` and ``U``, ``V`` have orthonormal columns.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("svd expects a 2-D array")
    if not np.all(np.isfinite(A)):
        raise ValueError("svd input must be finite")
    m, n = A.shape
    if m < n:
        V, s, U = svd(A.T, tol=tol, max_sweeps=max_sweeps)
        return U, s, V
    if n == 0:
        return np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0))

    W = A.copy()
    V = np.eye(n)
    # columns below this squared size are numerically zero; rotating them
    # only produces underflow noise
    floor = (np.finfo(float).eps * np.linalg.norm(A)) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                wi, wj = W[:, i], W[:, j]
                alpha = wi @ wi
                beta = wj @ wj
                gamma = wi @ wj
                if min(alpha, beta) <= floor or abs(gamma) <= tol * np.sqrt(alpha) * np.sqrt(beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                sn = c * t
                W[:, [i, j]] = np.column_stack((c * wi - sn * wj, sn * wi + c * wj))
                vi, vj = V[:, i].copy(), V[:, j].copy()
                V[:, i] = c * vi - sn * vj
                V[:, j] = sn * vi + c * vj
        if not rotated:
            break
    else:
        raise SVDConvergenceError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")

    s = np.linalg.norm(W, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    W = W[:, order]
    V = V[:, order]
    scale = s[0] if s[0] > 0 else 1.0
    filled = s > 1e-14 * scale * max(m, n)
    U = np.zeros((m, n))
    U[:, filled] = W[:, filled] / s[filled]
    s = np.where(filled, s, 0.0)
    if not filled.all():
        U = _complete_orthonormal(U, filled)
    return U, s, V


@dataclass
class LpProblem:
    """``min c @ x`` subject to ``A[i] @ x (senses[i]) b[i]`` and ``lower <= x <= upper``.

    ``senses`` entries are ``"<="``, ``"="`` or ``">="``. Bounds may be infinite.
    """

    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.senses = list(self.senses)
        if self.A.shape[0] != self.b.size or len(self.senses) != self.b.size:
            raise ValueError("constraint dimensions are inconsistent")
        bad = set(self.senses) - {"<=", "=", ">="}
        if bad:
            raise ValueError(f"unknown constraint senses {bad}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, float).ravel().copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, float).ravel().copy()
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound dimensions are inconsistent")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    x: np.ndarray | None = None
    value: float | None = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == "optimal"


@dataclass
class _Tableau:
    T: np.ndarray          # B^-1 A
    xb: np.ndarray         # values of basic variables
    basis: list
    ub: np.ndarray         # upper bounds (lower bounds are all zero)
    at_upper: np.ndarray   # nonbasic state
    iterations: int = 0
    in_basis: np.ndarray = field(default=None)

    def __post_init__(self):
        self.in_basis = np.zeros(self.T.shape[1], dtype=bool)
        self.in_basis[self.basis] = True

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.in_basis[self.basis[r]] = False
        self.basis[r] = j
        self.in_basis[j] = True


def _run_simplex(tab, cost, tol, max_iter, rule):
    """Bounded-variable primal simplex on ``tab``. Returns a status string."""
    T = tab.T
    k, N = T.shape
    while True:
        if tab.iterations >= max_iter:
            return "iteration_limit"
        cb = cost[tab.basis]
        d = cost - cb @ tab.T
        movable = ~tab.in_basis & (tab.ub > tol)
        improving = movable & np.where(tab.at_upper, d > tol, d < -tol)
        cand = np.flatnonzero(improving)
        if cand.size == 0:
            return "optimal"
        if rule == "bland":
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        sgn = -1.0 if tab.at_upper[j] else 1.0
        col = tab.T[:, j]
        alpha = sgn * col
        t_best = tab.ub[j]
        leave = -1
        leave_to_upper = False
        for i in range(k):
            a = alpha[i]
            if a > tol:
                t = max(tab.xb[i], 0.0) / a
                to_up = False
            elif a < -tol and np.isfinite(tab.ub[tab.basis[i]]):
                t = max(tab.ub[tab.basis[i]] - tab.xb[i], 0.0) / (-a)
                to_up = True
            else:
                continue
            if t < t_best - 1e-12 or (
                leave >= 0 and abs(t - t_best) <= 1e-12 and tab.basis[i] < tab.basis[leave]
            ):
                t_best, leave, leave_to_upper = t, i, to_up
        if not np.isfinite(t_best):
            return "unbounded"
        tab.iterations += 1
        tab.xb -= sgn * t_best * col
        if leave < 0:
            tab.at_upper[j] = not tab.at_upper[j]
            continue
        entering_value = t_best if sgn > 0 else tab.ub[j] - t_best
        old = tab.basis[leave]
        tab.at_upper[old] = leave_to_upper
        tab.pivot(leave, j)
        tab.xb[leave] = entering_value
        tab.at_upper[j] = False
        # clean tiny bound violations from roundoff
        np.clip(tab.xb, 0.0, None, out=tab.xb)


def solve_lp(problem, *, tol=1e-9, max_iter=50_000, rule="bland"):
    """Solve a small dense LP with a two-phase bounded-variable simplex.

    ``rule`` selects the entering-variable pricing: ``"bland"`` (smallest
    improving index, guarantees termination) or ``"dantzig"`` (most negative
    reduced cost).
    """
    p = problem
    n = p.c.size
    lo, up = p.lower, p.upper

    # x = offset + M @ x_std, with every x_std in [0, ub_std]
    cols, ub_std, offset = [], [], np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo[j]):
            offset[j] = lo[j]
            cols.append(e)
            ub_std.append(up[j] - lo[j])
        elif np.isfinite(up[j]):
            offset[j] = up[j]
            cols.append(-e)
            ub_std.append(np.inf)
        else:
            cols.append(e)
            ub_std.append(np.inf)
            cols.append(-e)
            ub_std.append(np.inf)
    M = np.array(cols).T if cols else np.zeros((n, 0))
    A = p.A @ M
    b = p.b - p.A @ offset
    c = p.c @ M
    k = A.shape[0]

    slack_cols = []
    for i, s in enumerate(p.senses):
        if s == "=":
            continue
        e = np.zeros(k)
        e[i] = 1.0 if s == "<=" else -1.0
        slack_cols.append(e)
    S = np.array(slack_cols).T if slack_cols else np.zeros((k, 0))
    A = np.hstack([A, S])
    c = np.concatenate([c, np.zeros(S.shape[1])])
    ub = np.concatenate([np.asarray(ub_std, float), np.full(S.shape[1], np.inf)])
    nstd = A.shape[1]

    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign

    # phase 1 with one artificial per row
    T = np.hstack([A, np.eye(k)])
    ub1 = np.concatenate([ub, np.full(k, np.inf)])
    cost1 = np.concatenate([np.zeros(nstd), np.ones(k)])
    tab = _Tableau(T, b.copy(), list(range(nstd, nstd + k)), ub1, np.zeros(nstd + k, dtype=bool))
    status = _run_simplex(tab, cost1, tol, max_iter, rule)
    if status == "iteration_limit":
        return LpResult("iteration_limit", iterations=tab.iterations)
    scale = max(1.0, np.abs(b).max(initial=0.0))
    if cost1[tab.basis] @ tab.xb > 1e-8 * scale:
        return LpResult("infeasible", iterations=tab.iterations)

    # drive artificials out of the basis, dropping redundant rows
    keep = np.ones(k, dtype=bool)
    for r in range(k):
        if tab.basis[r] < nstd:
            continue
        row = np.abs(tab.T[r, :nstd])
        row[tab.in_basis[:nstd]] = 0.0
        j = int(np.argmax(row)) if row.size else -1
        if j >= 0 and row[j] > 1e-9:
            val = tab.ub[j] if tab.at_upper[j] else 0.0
            tab.pivot(r, j)
            tab.xb[r] = val
            tab.at_upper[j] = False
        else:
            keep[r] = False
    rows = np.flatnonzero(keep)
    tab2 = _Tableau(
        tab.T[rows][:, :nstd].copy(),
        tab.xb[rows].copy(),
        [tab.basis[r] for r in rows],
        ub,
        tab.at_upper[:nstd].copy(),
        iterations=tab.iterations,
    )
    # recompute basic values from scratch to shed phase-1 drift
    xn = np.where(tab2.at_upper, ub, 0.0)
    xn[tab2.in_basis] = 0.0
    xn = np.where(np.isfinite(xn), xn, 0.0)
    B = A[rows][:, tab2.basis]
    try:
        if rows.size == 0:
            raise np.linalg.LinAlgError
        tab2.xb = np.linalg.solve(B, b[rows] - A[rows] @ xn)
        tab2.T = np.linalg.solve(B, A[rows])
    except np.linalg.LinAlgError:
        pass
    np.clip(tab2.xb, 0.0, None, out=tab2.xb)

    status = _run_simplex(tab2, c, tol, max_iter, rule)
    if status != "optimal":
        return LpResult(status, iterations=tab2.iterations)
    xs = np.where(tab2.at_upper, ub, 0.0)
    xs = np.where(np.isfinite(xs), xs, 0.0)
    xs[tab2.basis] = tab2.xb
    x = offset + M @ xs[: M.shape[1]]
    return LpResult("optimal", x, float(p.c @ x), tab2.iterations)


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of a monotone scalar function on a sign-changing bracket."""
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ValueError("bracket does not straddle a root")
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    return float(_sopt.bisect(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))
