"""Vector and matrix (semi)norms, dual exponents and dual-norm witnesses.

Exponents are plain floats in ``[1, inf]``; ``numpy.inf`` stands for the
max-norm and every formula branches on it explicitly instead of letting
``inf`` flow through arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import svd

__all__ = [
    "INF",
    "check_exponent",
    "dual_exponent",
    "vec_norm",
    "dual_witness",
    "FrobeniusP",
    "SchattenP",
    "Induced",
    "ProjectedF2",
    "RowWise",
    "MatrixNormSpec",
    "NormValue",
    "ApproximateOnlyError",
    "induced_norm",
    "mat_norm",
    "dual_mat_norm",
    "rank_one_norm",
    "SeparableFactors",
    "separable_factors",
    "spec_label",
]

INF = np.inf


class ApproximateOnlyError(ValueError):
    """Raised when an exact value is demanded for a norm we can only bound."""


def check_exponent(p) -> float:
    p = float(p)
    if np.isnan(p) or p < 1:
        raise ValueError(f"exponent must lie in [1, inf], got {p}")
    return p


def dual_exponent(p) -> float:
    """Conjugate exponent ``p*`` with ``1/p + 1/p* = 1``."""
    p = check_exponent(p)
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    if p == 2:
        return 2.0
    return p / (p - 1.0)


def vec_norm(x, p) -> float:
    """The l_p norm of a vector (flattened if needed)."""
    p = check_exponent(p)
    a = np.abs(np.asarray(x, dtype=float).ravel())
    if a.size == 0:
        return 0.0
    if p == INF:
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.linalg.norm(a))
    top = a.max()
    if top == 0:
        return 0.0
    # scaling by the largest entry keeps large p from overflowing
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


def dual_witness(beta, q) -> np.ndarray:
    """Unit l_q vector ``v`` with ``v @ beta = ||beta||_{q*}``.

    Ties are broken deterministically: for ``q = 1`` the lowest index among
    the largest ``|beta_i|`` is used, for ``q = inf`` zero entries get 0.
    """
    q = check_exponent(q)
    b = np.asarray(beta, dtype=float).ravel()
    if not np.any(b):
        raise ValueError("dual witness of the zero vector is undefined")
    sgn = np.where(b < 0, -1.0, 1.0)
    if q == INF:
        return np.sign(b)
    if q == 1:
        i = int(np.argmax(np.abs(b)))
        v = np.zeros_like(b)
        v[i] = sgn[i]
        return v
    qs = dual_exponent(q)
    a = np.abs(b) / np.abs(b).max()
    v = sgn * a ** (qs - 1.0)
    return v / vec_norm(v, q)


# --- matrix norm descriptors ----------------------------------------------

@dataclass(frozen=True)
class FrobeniusP:
    """Entrywise l_p norm."""

    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", check_exponent(self.p))


@dataclass(frozen=True)
class SchattenP:
    """l_p norm of the singular values."""

    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", check_exponent(self.p))


@dataclass(frozen=True)
class Induced:
    """Operator norm ``max_b ||A b||_g / ||b||_h``."""

    h: float
    g: float

    def __post_init__(self):
        object.__setattr__(self, "h", check_exponent(self.h))
        object.__setattr__(self, "g", check_exponent(self.g))


@dataclass(frozen=True)
class ProjectedF2:
    """Frobenius seminorm restricted to the entries flagged in ``mask``."""

    mask: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValueError("mask must be a 2-D boolean array")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    def __eq__(self, other):
        return isinstance(other, ProjectedF2) and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.mask.shape, self.mask.tobytes()))


@dataclass(frozen=True)
class RowWise:
    """Largest row l_q norm; the ball ``{every row has ||d_i||_q <= lam}``."""

    q: float

    def __post_init__(self):
        object.__setattr__(self, "q", check_exponent(self.q))

    def as_induced(self) -> Induced:
        return Induced(dual_exponent(self.q), INF)


MatrixNormSpec = FrobeniusP | SchattenP | Induced | ProjectedF2 | RowWise


def _fmt(p):
    return "inf" if p == INF else f"{p:g}"


def spec_label(spec) -> str:
    """Short human-readable tag, e.g. ``F_2`` or ``(1,2)``."""
    if isinstance(spec, FrobeniusP):
        return f"F_{_fmt(spec.p)}"
    if isinstance(spec, SchattenP):
        return f"sigma_{_fmt(spec.p)}"
    if isinstance(spec, Induced):
        return f"({_fmt(spec.h)},{_fmt(spec.g)})"
    if isinstance(spec, RowWise):
        return f"rowwise_{_fmt(spec.q)}"
    if isinstance(spec, ProjectedF2):
        return "P(F_2)"
    raise TypeError(f"unknown norm spec {spec!r}")


@dataclass(frozen=True)
class NormValue:
    value: float
    exact: bool


def _induced_ascent(A, h, g, starts, rng, iters=500):
    """Alternating dual-witness ascent for ``max ||A b||_g`` over ``||b||_h <= 1``."""
    m, n = A.shape
    gs = dual_exponent(g)
    best = 0.0
    cands = [np.eye(n)[j] for j in range(n)]
    cands += list(rng.standard_normal((starts, n)))
    for b in cands:
        b = b / vec_norm(b, h)
        val = vec_norm(A @ b, g)
        for _ in range(iters):
            y = A @ b
            if not np.any(y):
                break
            w = dual_witness(y, gs)
            c = A.T @ w
            if not np.any(c):
                break
            b = dual_witness(c, h)
            new = vec_norm(A @ b, g)
            if new <= val * (1 + 1e-14):
                val = max(val, new)
                break
            val = new
        best = max(best, val)
    return best


def induced_norm(A, h, g, *, starts=32, seed=0) -> NormValue:
    """Induced ``(h, g)`` operator norm.

    Closed forms cover ``h = 1`` (largest column l_g norm), ``g = inf``
    (largest row l_{h*} norm) and ``h = g = 2`` (spectral norm). Anything
    else is a multi-start ascent and the result is a lower bound.
    """
    A = np.asarray(A, dtype=float)
    h, g = check_exponent(h), check_exponent(g)
    if A.size == 0 or not np.any(A):
        return NormValue(0.0, True)
    if h == 1:
        return NormValue(max(vec_norm(c, g) for c in A.T), True)
    if g == INF:
        hs = dual_exponent(h)
        return NormValue(max(vec_norm(r, hs) for r in A), True)
    if h == 2 and g == 2:
        return NormValue(float(svd(A)[1][0]), True)
    if A.shape[1] == 1:
        return NormValue(vec_norm(A[:, 0], g), True)
    if A.shape[0] == 1:
        return NormValue(vec_norm(A[0], dual_exponent(h)), True)
    rng = np.random.default_rng(seed)
    return NormValue(_induced_ascent(A, h, g, starts, rng), False)


def mat_norm(A, spec, *, require_exact=False) -> float:
    """Evaluate a matrix (semi)norm given by ``spec``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("matrix norms expect a 2-D array")
    if isinstance(spec, FrobeniusP):
        return vec_norm(A, spec.p)
    if isinstance(spec, SchattenP):
        if A.size == 0:
            return 0.0
        return vec_norm(svd(A)[1], spec.p)
    if isinstance(spec, RowWise):
        return max((vec_norm(r, spec.q) for r in A), default=0.0)
    if isinstance(spec, ProjectedF2):
        if spec.mask.shape != A.shape:
            raise ValueError("mask shape does not match the matrix")
        return float(np.linalg.norm(A[spec.mask]))
    if isinstance(spec, Induced):
        res = induced_norm(A, spec.h, spec.g)
        if require_exact and not res.exact:
            raise ApproximateOnlyError(
                f"no closed form for the induced {spec_label(spec)} norm; "
                f"ascent lower bound is {res.value:.6g}"
            )
        return res.value
    raise TypeError(f"unknown norm spec {spec!r}")


def dual_mat_norm(A, spec) -> float:
    """Dual norm for the entrywise and Schatten families."""
    if isinstance(spec, FrobeniusP):
        return mat_norm(A, FrobeniusP(dual_exponent(spec.p)))
    if isinstance(spec, SchattenP):
        return mat_norm(A, SchattenP(dual_exponent(spec.p)))
    raise ValueError(f"dual norm not available for {spec_label(spec)}")


def rank_one_norm(u, v, spec) -> float:
    """``||u v^T||`` for ``spec`` without forming the matrix."""
    if isinstance(spec, FrobeniusP):
        return vec_norm(u, spec.p) * vec_norm(v, spec.p)
    if isinstance(spec, SchattenP):
        return vec_norm(u, 2) * vec_norm(v, 2)
    if isinstance(spec, Induced):
        return vec_norm(u, spec.g) * vec_norm(v, dual_exponent(spec.h))
    if isinstance(spec, RowWise):
        return vec_norm(u, INF) * vec_norm(v, spec.q)
    if isinstance(spec, ProjectedF2):
        return mat_norm(np.outer(u, v), spec)
    raise TypeError(f"unknown norm spec {spec!r}")


@dataclass(frozen=True)
class SeparableFactors:
    """Exponents of ``phi`` and ``psi`` with ``||u v^T||_* = phi(u) psi(v)``."""

    phi: float
    psi: float

    def __iter__(self):
        return iter((self.phi, self.psi))


def separable_factors(spec) -> SeparableFactors:
    """Factor the dual norm of ``spec`` on rank-one matrices."""
    if isinstance(spec, FrobeniusP):
        ps = dual_exponent(spec.p)
        return SeparableFactors(ps, ps)
    if isinstance(spec, SchattenP):
        return SeparableFactors(2.0, 2.0)
    if isinstance(spec, Induced):
        return SeparableFactors(dual_exponent(spec.g), spec.h)
    if isinstance(spec, RowWise):
        return separable_factors(spec.as_induced())
    if isinstance(spec, ProjectedF2):
        raise ValueError("the projected Frobenius seminorm does not define a perturbation ball")
    raise TypeError(f"unknown norm spec {spec!r}")
