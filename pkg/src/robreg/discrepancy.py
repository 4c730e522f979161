"""The discrepancy function ``delta_m(a, b) = max { ||u||_a : ||u||_b = 1 }``.

``delta`` uses the closed form; ``delta_oracle`` maximizes numerically and
shares no code with it, so the two can be checked against each other.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .norms import INF, check_exponent, dual_exponent

__all__ = ["DiscrepancyResult", "delta", "delta_value", "delta_oracle", "delta_duality_check"]


@dataclass(frozen=True)
class DiscrepancyResult:
    value: float
    witness: np.ndarray
    exact: bool = True


def _inv(p):
    return 0.0 if p == INF else 1.0 / p


def delta_value(m: int, a, b) -> float:
    """Closed-form ``delta_m(a, b)``: 1 if ``a >= b``, else ``m**(1/a - 1/b)``."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    a, b = check_exponent(a), check_exponent(b)
    if a >= b or m == 1:
        return 1.0
    return float(m ** (_inv(a) - _inv(b)))


def delta(m: int, a, b) -> DiscrepancyResult:
    """Discrepancy value with a maximizing unit vector.

    The witness is ``e_1`` when ``a >= b`` and the uniform vector scaled to
    unit l_b norm otherwise.
    """
    value = delta_value(m, a, b)
    a, b = check_exponent(a), check_exponent(b)
    if a >= b:
        u = np.zeros(m)
        u[0] = 1.0
    else:
        u = np.full(m, float(m) ** -_inv(b))
    return DiscrepancyResult(value, u, True)


def delta_duality_check(m: int, p, q, tol=1e-9) -> bool:
    """Whether ``delta_m(p*, q*) == delta_m(q, p)``."""
    lhs = delta_value(m, dual_exponent(p), dual_exponent(q))
    rhs = delta_value(m, q, p)
    return abs(lhs - rhs) <= tol * max(1.0, abs(rhs))


# --- numeric oracle ---------------------------------------------------------

def _pnorm_rows(U, p):
    A = np.abs(U)
    if p == INF:
        return A.max(axis=1)
    top = A.max(axis=1, keepdims=True)
    top[top == 0] = 1.0
    return top[:, 0] * np.sum((A / top) ** p, axis=1) ** (1.0 / p)


def _grad_rows(U, a):
    """A subgradient of ``||u||_a`` at every row of ``U``."""
    S = np.where(U < 0, -1.0, 1.0)
    if a == 1:
        return S
    A = np.abs(U)
    if a == INF:
        G = np.zeros_like(U)
        idx = np.argmax(A, axis=1)
        G[np.arange(len(U)), idx] = S[np.arange(len(U)), idx]
        return G
    top = A.max(axis=1, keepdims=True)
    top[top == 0] = 1.0
    return S * (A / top) ** (a - 1.0)


def _linmax_rows(G, b):
    """Row-wise maximizer of ``<g, w>`` over the unit l_b ball."""
    S = np.where(G < 0, -1.0, 1.0)
    A = np.abs(G)
    if b == INF:
        return S
    if b == 1:
        W = np.zeros_like(G)
        idx = np.argmax(A, axis=1)
        W[np.arange(len(G)), idx] = S[np.arange(len(G)), idx]
        return W
    bs = b / (b - 1.0)
    top = A.max(axis=1, keepdims=True)
    top[top == 0] = 1.0
    W = S * (A / top) ** (bs - 1.0)
    return W / _pnorm_rows(W, b)[:, None]


def delta_oracle(m: int, a, b, *, samples=4096, starts=64, iters=200, seed=0,
                 return_points=False):
    """Numerically maximize ``||u||_a`` over the unit l_b sphere in R^m.

    Random sphere samples give a floor; conditional-gradient ascent from
    ``starts`` random points (each step jumps to the l_b-ball maximizer of
    the linearization, which never decreases a convex objective) refines it.
    """
    a, b = check_exponent(a), check_exponent(b)
    if m == 1:
        val = 1.0
        return (val, np.ones((1, 1))) if return_points else val
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((samples, m))
    P /= _pnorm_rows(P, b)[:, None]
    sampled = _pnorm_rows(P, a).max()

    U = rng.standard_normal((starts, m))
    U /= _pnorm_rows(U, b)[:, None]
    vals = _pnorm_rows(U, a)
    for _ in range(iters):
        W = _linmax_rows(_grad_rows(U, a), b)
        new = _pnorm_rows(W, a)
        improved = new > vals
        if not improved.any():
            break
        U[improved] = W[improved]
        vals = np.maximum(vals, new)
    best = float(max(sampled, vals.max()))
    if return_points:
        return best, U[vals >= best * (1 - 1e-9)]
    return best
