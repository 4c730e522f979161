"""Worst-case losses over perturbation balls and their regularizer equivalents.

Conventions
-----------
For a residual ``z`` and coefficients ``beta`` the robust loss is

    sup_{Delta in U} || z + Delta @ beta ||_p .

The ball is symmetric, so for a regression residual ``z = y - X @ beta``
the perturbed data matrix attaining the supremum is ``X - Delta_hat``.

When the dual of the ball's norm factors on rank-one matrices as
``||u v^T||_* = phi(u) psi(v)``, the supremum equals
``sup { ||z + u||_p : phi*(u) <= lam * psi(beta) }``, a problem in ``R^m``
only. Everything below works on that reduced problem and lifts the
maximizing ``u`` back to a rank-one perturbation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .discrepancy import delta, delta_value
from .norms import (
    INF,
    FrobeniusP,
    Induced,
    ProjectedF2,
    RowWise,
    SchattenP,
    check_exponent,
    dual_exponent,
    dual_witness,
    mat_norm,
    rank_one_norm,
    separable_factors,
    spec_label,
    vec_norm,
)

__all__ = [
    "UncertaintySet",
    "EquivalenceVerdict",
    "Witness",
    "WorstCase",
    "reduced_worst_case",
    "ascent_worst_case",
    "worst_case_loss",
    "adversarial_witness",
    "classify_equivalence",
    "ProbeResult",
    "strictness_probe",
    "probe_trial",
    "equivalence_probe",
    "scaling_gap_limit",
    "scaling_gap_sweep",
    "uncertainty_membership",
]


@dataclass(frozen=True)
class UncertaintySet:
    """The ball ``{Delta in R^{rows x cols} : ||Delta|| <= radius}``."""

    shape: object
    radius: float
    rows: int
    cols: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("dimensions must be positive")
        if isinstance(self.shape, ProjectedF2):
            raise ValueError("the projected Frobenius seminorm belongs to matrix models")

    @property
    def factors(self):
        return separable_factors(self.shape)

    def norm(self, D) -> float:
        return mat_norm(D, self.shape)

    def contains(self, D, tol=1e-9) -> bool:
        D = np.asarray(D, dtype=float)
        if D.shape != (self.rows, self.cols):
            return False
        return self.norm(D) <= self.radius * (1 + tol) + tol

    def label(self) -> str:
        return f"{spec_label(self.shape)} ball, lambda={self.radius:g}"


@dataclass(frozen=True)
class EquivalenceVerdict:
    """Outcome of comparing a robust loss with loss plus penalty.

    The penalty is ``coefficient * ||beta||_exponent`` and upper bounds the
    robust excess loss for every ``z``. ``lower_coefficient`` gives the
    matching lower bound ``lower_coefficient * ||beta||_exponent``. The two
    agree (and equal ``coefficient``) exactly when ``status == "Exact"``.
    """

    status: str
    coefficient: float
    exponent: float
    lower_coefficient: float
    upper_coefficient: float

    @property
    def exact(self) -> bool:
        return self.status == "Exact"

    def penalty(self, beta) -> float:
        return self.coefficient * vec_norm(beta, self.exponent)

    def lower_penalty(self, beta) -> float:
        return self.lower_coefficient * vec_norm(beta, self.exponent)

    def upper_penalty(self, beta) -> float:
        return self.upper_coefficient * vec_norm(beta, self.exponent)


@dataclass(frozen=True)
class Witness:
    perturbation: np.ndarray
    attained_value: float


@dataclass(frozen=True)
class WorstCase:
    value: float
    exact: bool
    u: np.ndarray
    witness: Witness | None
    method: str


# --- the reduced problem: max ||z + u||_p over ||u||_r <= rho ---------------

def _sign(x):
    return np.where(np.asarray(x) < 0, -1.0, 1.0)


def _norm_rows(M, p):
    A = np.abs(M)
    if p == INF:
        return A.max(axis=1)
    if p == 1:
        return A.sum(axis=1)
    top = A.max(axis=1, keepdims=True)
    top[top == 0] = 1.0
    return top[:, 0] * np.sum((A / top) ** p, axis=1) ** (1.0 / p)


def _linmax_rows(G, r):
    """Maximizer of ``<g, w>`` over the unit l_r ball for each row ``g``."""
    S = _sign(G)
    A = np.abs(G)
    if r == INF:
        return S
    if r == 1:
        W = np.zeros_like(G)
        idx = np.argmax(A, axis=1)
        W[np.arange(len(G)), idx] = S[np.arange(len(G)), idx]
        return W
    rs = dual_exponent(r)
    top = A.max(axis=1, keepdims=True)
    top[top == 0] = 1.0
    W = S * (A / top) ** (rs - 1.0)
    return W / _norm_rows(W, r)[:, None]


def _grad_rows(M, p):
    """A subgradient direction of ``||.||_p`` at each row (positive scaling)."""
    S = _sign(M)
    if p == 1:
        return S
    A = np.abs(M)
    if p == INF:
        G = np.zeros_like(M)
        idx = np.argmax(A, axis=1)
        G[np.arange(len(M)), idx] = S[np.arange(len(M)), idx]
        return G
    top = A.max(axis=1, keepdims=True)
    top[top == 0] = 1.0
    return S * (A / top) ** (p - 1.0)


def ascent_worst_case(z, rho, p, r, *, starts=64, seed=0, max_iter=2000):
    """Multi-start conditional-gradient ascent on ``max ||z + u||_p, ||u||_r <= rho``.

    Each step replaces ``u`` by the ball point maximizing the linearization
    of the convex objective, so values never decrease. Starts are ``u``
    aligned with ``z``, the signed vertices, all sign patterns when
    ``m <= 4`` and ``starts`` random points. Returns ``(value, u)``; the
    value is a lower bound on the supremum.
    """
    z = np.asarray(z, dtype=float).ravel()
    m = z.size
    if rho == 0:
        return vec_norm(z, p), np.zeros(m)
    rng = np.random.default_rng(seed)
    cands = [np.eye(m), -np.eye(m), rng.standard_normal((starts, m))]
    if np.any(z):
        cands.append(z[None, :])
        cands.append(_sign(z)[None, :])
    if m <= 4:
        cands.append(np.array(list(itertools.product((-1.0, 1.0), repeat=m))))
    U = np.vstack(cands)
    U = rho * U / _norm_rows(U, r)[:, None]
    vals = _norm_rows(z + U, p)
    scale = max(1.0, vec_norm(z, p) + rho)
    for _ in range(max_iter):
        W = rho * _linmax_rows(_grad_rows(z + U, p), r)
        new = _norm_rows(z + W, p)
        better = new > vals + 1e-15 * scale
        if not better.any():
            break
        U[better] = W[better]
        vals[better] = new[better]
    k = int(np.argmax(vals))
    return float(vals[k]), U[k].copy()


def reduced_worst_case(z, rho, p, r, *, starts=64, seed=0):
    """Solve ``max ||z + u||_p`` over ``||u||_r <= rho``.

    Returns ``(value, u, exact, method)``. Closed forms cover ``r = inf``,
    ``r = 1``, ``z = 0`` and the equality regimes ``p = r`` and
    ``p in {1, inf}``; other cases fall back on :func:`ascent_worst_case`.
    """
    z = np.asarray(z, dtype=float).ravel()
    p, r = check_exponent(p), check_exponent(r)
    m = z.size
    if rho < 0:
        raise ValueError("budget must be nonnegative")
    if rho == 0:
        return vec_norm(z, p), np.zeros(m), True, "zero-budget"
    if r == INF:
        u = rho * _sign(z)
        return vec_norm(z + u, p), u, True, "sign-aligned"
    if r == 1:
        best, u_best = -1.0, None
        for i in range(m):
            for s in (1.0, -1.0):
                u = np.zeros(m)
                u[i] = s * rho
                v = vec_norm(z + u, p)
                if v > best:
                    best, u_best = v, u
        return best, u_best, True, "vertex-enumeration"
    if not np.any(z):
        d = delta(m, p, r)
        u = rho * d.witness
        return vec_norm(u, p), u, True, "zero-residual"
    if p == r:
        u = rho * z / vec_norm(z, p)
        return vec_norm(z + u, p), u, True, "aligned"
    if p == 1:
        u = rho * _sign(z) * float(m) ** (-1.0 / r)
        return vec_norm(z + u, p), u, True, "uniform-sign"
    if p == INF:
        k = int(np.argmax(np.abs(z)))
        u = np.zeros(m)
        u[k] = rho * _sign(z[k])
        return vec_norm(z + u, p), u, True, "peak"
    val, u = ascent_worst_case(z, rho, p, r, starts=starts, seed=seed)
    return val, u, False, "ascent"


def _lift(u, beta, U: UncertaintySet):
    """Rank-one ``Delta`` in ``U`` with ``Delta @ beta = u``."""
    phi, psi = U.factors
    v = dual_witness(beta, dual_exponent(psi))
    return np.outer(u, v) / vec_norm(beta, psi)


def _check_dims(z, beta, U):
    z = np.asarray(z, dtype=float).ravel()
    beta = np.asarray(beta, dtype=float).ravel()
    if z.size != U.rows or beta.size != U.cols:
        raise ValueError(
            f"expected z of length {U.rows} and beta of length {U.cols}, "
            f"got {z.size} and {beta.size}"
        )
    return z, beta


def worst_case_loss(z, beta, U: UncertaintySet, p, *, starts=64, seed=0) -> WorstCase:
    """``sup_{Delta in U} ||z + Delta beta||_p`` with a rank-one attainer."""
    z, beta = _check_dims(z, beta, U)
    p = check_exponent(p)
    if not np.any(beta):
        W = Witness(np.zeros((U.rows, U.cols)), vec_norm(z, p))
        return WorstCase(vec_norm(z, p), True, np.zeros(U.rows), W, "zero-coefficients")
    phi, psi = U.factors
    r = dual_exponent(phi)
    rho = U.radius * vec_norm(beta, psi)
    val, u, exact, method = reduced_worst_case(z, rho, p, r, starts=starts, seed=seed)
    D = _lift(u, beta, U)
    W = Witness(D, vec_norm(z + D @ beta, p))
    return WorstCase(val, exact, u, W, method)


def _witness_norm(D, u, beta, U):
    """Norm of the lifted witness, via the rank-one formula when available."""
    phi, psi = U.factors
    v = dual_witness(beta, dual_exponent(psi)) / vec_norm(beta, psi)
    if isinstance(U.shape, (FrobeniusP, SchattenP, Induced, RowWise)):
        return rank_one_norm(u, v, U.shape)
    return U.norm(D)


def adversarial_witness(z, beta, U: UncertaintySet, p) -> Witness:
    """Explicit perturbation attaining ``||z||_p + h_bar(beta)``.

    Only available where the equivalence is exact, or at ``z = 0`` where the
    upper bound is always attained. Raises ``ValueError`` otherwise.
    """
    z, beta = _check_dims(z, beta, U)
    p = check_exponent(p)
    verdict = classify_equivalence(p, U)
    if not verdict.exact and np.any(z):
        raise ValueError(
            f"no equality witness: loss l_{p:g} over the {spec_label(U.shape)} ball "
            "is not in an equality regime and z is nonzero"
        )
    wc = worst_case_loss(z, beta, U, p)
    target = vec_norm(z, p) + verdict.penalty(beta)
    D = wc.witness.perturbation
    size = _witness_norm(D, wc.u, beta, U) if np.any(beta) else 0.0
    if size > U.radius * (1 + 1e-9) + 1e-12:
        raise ArithmeticError(f"witness norm {size} exceeds the radius {U.radius}")
    attained = vec_norm(z + D @ beta, p)
    if abs(attained - target) > 1e-8 * max(1.0, target):
        raise ArithmeticError(f"witness attains {attained}, expected {target}")
    return Witness(D, attained)


# --- classification ---------------------------------------------------------

def classify_equivalence(p, U: UncertaintySet) -> EquivalenceVerdict:
    """Whether the robust loss equals ``||z||_p + h_bar(beta)`` for all ``z``.

    Returns the penalty ``h_bar`` (always an upper bound on the excess loss)
    together with a lower bound coefficient.
    """
    p = check_exponent(p)
    lam, m, shape = U.radius, U.rows, U.shape
    if isinstance(shape, Induced):
        r, expo = shape.g, shape.h
        exact = p == r or p in (1, INF)
    elif isinstance(shape, FrobeniusP):
        r, expo = shape.p, dual_exponent(shape.p)
        exact = p == shape.p or p in (1, INF)
    elif isinstance(shape, SchattenP):
        r, expo = 2.0, 2.0
        exact = p in (1, 2, INF)
    elif isinstance(shape, RowWise):
        r, expo = INF, dual_exponent(shape.q)
        exact = p in (1, INF)
    else:
        raise ValueError(f"cannot classify sets of shape {spec_label(shape)}")
    if m == 1:
        exact = True
    upper = lam * delta_value(m, p, r)
    lower = lam / delta_value(m, r, p)
    if exact:
        lower = upper
    return EquivalenceVerdict("Exact" if exact else "BoundsOnly", upper, expo, lower, upper)


# --- probes -----------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    fraction_strict: float
    min_gap: float
    max_gap: float
    sandwich_violations: int
    trials: int


def strictness_probe(p, q, m, trials=200, *, n=3, lam=1.0, seed=0, threshold=1e-6):
    """Fraction of random ``(z, beta)`` where the ``F_q`` upper bound is strict.

    Also counts violations of ``lower <= worst case <= upper``.
    """
    p, q = check_exponent(p), check_exponent(q)
    if p in (1, INF) or p == q:
        raise ValueError("equality regime: the upper bound is attained for every z")
    if m < 2:
        raise ValueError("strictness needs m >= 2")
    U = UncertaintySet(FrobeniusP(q), lam, m, n)
    verdict = classify_equivalence(p, U)
    rng = np.random.default_rng(seed)
    gaps, violations = [], 0
    for _ in range(trials):
        z = rng.standard_normal(m)
        beta = rng.standard_normal(n)
        wc = worst_case_loss(z, beta, U, p, seed=int(rng.integers(2**31)))
        base = vec_norm(z, p)
        hi = base + verdict.upper_penalty(beta)
        lo = base + verdict.lower_penalty(beta)
        tol = 1e-9 * max(1.0, hi)
        if wc.value > hi + tol or wc.value < lo - tol:
            violations += 1
        gaps.append(hi - wc.value)
    gaps = np.array(gaps)
    return ProbeResult(
        float(np.mean(gaps > threshold)), float(gaps.min()), float(gaps.max()), violations, trials
    )


def probe_trial(p, U: UncertaintySet, seed):
    """One random ``(z, beta)`` draw: returns ``(gap, sandwich_violated)``.

    ``gap`` is ``||z||_p + h_bar(beta)`` minus the worst case. In an Exact
    regime the witness is also checked and a failed check counts as a
    violation.
    """
    p = check_exponent(p)
    rng = np.random.default_rng(seed)
    verdict = classify_equivalence(p, U)
    z = rng.standard_normal(U.rows)
    beta = rng.standard_normal(U.cols)
    wc = worst_case_loss(z, beta, U, p, seed=int(rng.integers(2**31)))
    base = vec_norm(z, p)
    hi = base + verdict.upper_penalty(beta)
    lo = base + verdict.lower_penalty(beta)
    tol = 1e-9 * max(1.0, hi)
    bad = wc.value > hi + tol or wc.value < lo - tol
    if verdict.exact:
        try:
            adversarial_witness(z, beta, U, p)
        except ArithmeticError:
            bad = True
    return hi - wc.value, bad


def equivalence_probe(p, U: UncertaintySet, trials=200, *, seed=0, threshold=1e-6, map_fn=map):
    """Run ``trials`` independent :func:`probe_trial` draws.

    Trial ``i`` uses the ``i``-th child of ``SeedSequence(seed)``, so the
    result does not depend on how ``map_fn`` schedules the work.
    """
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]
    out = list(map_fn(probe_trial, [p] * trials, [U] * trials, seeds))
    gaps = np.array([g for g, _ in out])
    violations = sum(bool(b) for _, b in out)
    return ProbeResult(
        float(np.mean(gaps > threshold)), float(gaps.min()), float(gaps.max()), violations, trials
    )


def scaling_gap_limit(z, beta, q, p, lam=1.0) -> float:
    """Limit of ``worst case at alpha z - ||alpha z||_p`` as ``alpha -> inf``.

    The ball is ``F_q`` of radius ``lam``; the limit is the directional
    derivative ``lam ||beta||_{q*} ||z^{p-1}||_{q*} / ||z||_p^{p-1}``.
    """
    z = np.asarray(z, dtype=float).ravel()
    p, q = check_exponent(p), check_exponent(q)
    if not np.any(z):
        raise ValueError("z must be nonzero")
    if p in (1, INF):
        raise ValueError("p must lie strictly between 1 and inf")
    qs = dual_exponent(q)
    zn = vec_norm(z, p)
    grad = np.sign(z) * (np.abs(z) / zn) ** (p - 1.0)
    return lam * vec_norm(beta, qs) * vec_norm(grad, qs)


def scaling_gap_sweep(z, beta, q, p, lam=1.0, alphas=(1, 10, 100, 1000, 10_000), seed=0):
    """Excess worst-case loss at ``alpha z`` for each ``alpha``."""
    z = np.asarray(z, dtype=float).ravel()
    beta = np.asarray(beta, dtype=float).ravel()
    U = UncertaintySet(FrobeniusP(q), lam, z.size, beta.size)
    out = []
    for a in alphas:
        wc = worst_case_loss(a * z, beta, U, p, seed=seed)
        out.append(wc.value - vec_norm(a * z, p))
    return np.array(out)


def uncertainty_membership(D, which, lam, p=2.0, *, samples=200, seed=0, tol=1e-9) -> bool:
    """Membership of ``D`` in the three descriptions of the Lasso ball.

    ``"U"`` is the induced ``(1, 2)`` ball; ``"Uprime"`` asks for
    ``||D b||_2 <= lam ||b||_0`` whenever ``||b||_p <= 1``, checked on every
    basis vector and on ``samples`` random sparse vectors of unit l_p norm;
    ``"Udoubleprime"`` bounds every column by ``lam`` in l_2.
    """
    D = np.asarray(D, dtype=float)
    bound = lam * (1 + tol) + tol
    if which == "U":
        return mat_norm(D, Induced(1, 2), require_exact=True) <= bound
    if which == "Udoubleprime":
        return all(np.linalg.norm(D[:, j]) <= bound for j in range(D.shape[1]))
    if which != "Uprime":
        raise ValueError(f"unknown set {which!r}")
    n = D.shape[1]
    # basis vectors have unit l_p norm and one nonzero, so this is exact
    basis_ok = all(np.linalg.norm(D[:, j]) <= bound for j in range(n))
    rng = np.random.default_rng(seed)
    sample_ok = True
    for _ in range(samples):
        k = int(rng.integers(1, n + 1))
        b = np.zeros(n)
        idx = rng.choice(n, size=k, replace=False)
        b[idx] = rng.standard_normal(k)
        b /= vec_norm(b, p)
        if np.linalg.norm(D @ b) > lam * k * (1 + tol) + tol:
            sample_ok = False
            break
    return basis_ok and sample_ok
