"""Matrix regression under linear uncertainty on the unknown matrix.

The nominal problem is ``min_X g(Y - X)``. An uncertainty model is a set of
linear maps ``Delta: R^{m x n} -> R^{m x n}`` and the robust problem is

    min_X max_{Delta in U} g(Y - X - Delta(X)).

Maps are stored in one of three forms (general coefficient tensors,
rank-one maps ``Z -> s <Q, Z> D`` and column-wise blocks). Each can be
flattened to an ``mn x mn`` matrix acting on row-major ``vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discrepancy import delta_value
from .norms import (
    INF,
    FrobeniusP,
    ProjectedF2,
    SchattenP,
    check_exponent,
    dual_exponent,
    dual_witness,
    mat_norm,
    spec_label,
    vec_norm,
)
from .robustify import EquivalenceVerdict, UncertaintySet, classify_equivalence, worst_case_loss

__all__ = [
    "GeneralMap",
    "RankOneInducedMap",
    "ColumnWiseMap",
    "apply_map",
    "InducedMaps",
    "RepresentationBall",
    "ColumnWiseBalls",
    "RankInduced",
    "MatrixVerdict",
    "MatrixWorstCase",
    "dual_maximizer",
    "induced_map_norm",
    "sample_induced_map",
    "matrix_worst_case",
    "matrix_classify",
    "CompletionProblem",
    "SolverResult",
    "mc_nuclear_solve",
    "pca_truncate",
    "robust_pca_solve",
    "descent_audit",
    "CharacterizationResult",
    "robust_pca_characterization_check",
    "nuclear_induced_norm",
    "rank_ratio",
    "RankMembership",
    "rank_set_membership",
]


# --- linear maps ------------------------------------------------------------

@dataclass(frozen=True)
class GeneralMap:
    """``[Delta(X)]_ij = <C[i, j], X>`` for a coefficient tensor ``C`` of shape (m, n, m, n)."""

    coeffs: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.coeffs, dtype=float)
        if C.ndim != 4 or C.shape[:2] != C.shape[2:]:
            raise ValueError("coefficients must have shape (m, n, m, n)")
        object.__setattr__(self, "coeffs", C)

    @property
    def shape(self):
        return self.coeffs.shape[:2]

    def apply(self, X):
        return np.einsum("ijkl,kl->ij", self.coeffs, X)

    def matrix(self):
        m, n = self.shape
        return self.coeffs.reshape(m * n, m * n)

    @classmethod
    def from_matrix(cls, M, shape):
        m, n = shape
        return cls(np.asarray(M, dtype=float).reshape(m, n, m, n))

    @classmethod
    def identity(cls, shape):
        m, n = shape
        return cls.from_matrix(np.eye(m * n), shape)


@dataclass(frozen=True)
class RankOneInducedMap:
    """``Z -> scale * <Q, Z> * direction``."""

    Q: np.ndarray
    direction: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        D = np.asarray(self.direction, dtype=float)
        if Q.shape != D.shape or Q.ndim != 2:
            raise ValueError("Q and direction must be matrices of the same shape")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "direction", D)

    @property
    def shape(self):
        return self.Q.shape

    def apply(self, X):
        return self.scale * float(np.sum(self.Q * X)) * self.direction

    def matrix(self):
        return self.scale * np.outer(self.direction.ravel(), self.Q.ravel())


@dataclass(frozen=True)
class ColumnWiseMap:
    """Column ``j`` of ``Delta(X)`` is ``blocks[j] @ X[:, j]``."""

    blocks: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.blocks, dtype=float)
        if B.ndim != 3 or B.shape[1] != B.shape[2]:
            raise ValueError("blocks must have shape (n, m, m)")
        object.__setattr__(self, "blocks", B)

    @property
    def shape(self):
        return self.blocks.shape[1], self.blocks.shape[0]

    def apply(self, X):
        return np.einsum("jab,bj->aj", self.blocks, X)

    def matrix(self):
        m, n = self.shape
        M = np.zeros((m, n, m, n))
        for j in range(n):
            M[:, j, :, j] = self.blocks[j]
        return M.reshape(m * n, m * n)


def apply_map(D, X):
    """Evaluate the linear map ``D`` at ``X``."""
    X = np.asarray(X, dtype=float)
    if X.shape != tuple(D.shape):
        raise ValueError(f"map acts on {D.shape} matrices, got {X.shape}")
    return D.apply(X)


# --- uncertainty sets ---------------------------------------------------------

@dataclass(frozen=True)
class InducedMaps:
    """Maps with ``g(Delta(X)) <= lam h(X)`` for every ``X``."""

    h: object
    g: object
    lam: float


@dataclass(frozen=True)
class RepresentationBall:
    """Maps whose ``mn x mn`` matrix lies in a ``spec`` ball of radius ``lam``."""

    spec: object
    lam: float


@dataclass(frozen=True)
class ColumnWiseBalls:
    """Column-wise maps with block ``j`` in the ``F_{q_j}`` ball of radius ``lam``."""

    qs: tuple
    lam: float


@dataclass(frozen=True)
class RankInduced:
    """Maps with ``g(Delta(X)) <= lam rank(X)`` on the unit ``sigma_p`` ball."""

    p: float
    g: object
    lam: float


@dataclass(frozen=True)
class MatrixVerdict:
    status: str
    regularizer: str
    penalty: object = field(repr=False)        # X -> h_bar(X)
    lower_penalty: object = field(repr=False)  # X -> lower bound on the excess loss

    @property
    def exact(self):
        return self.status == "Exact"


@dataclass(frozen=True)
class MatrixWorstCase:
    value: float
    exact: bool
    witness: object = None
    bracket: tuple | None = None


def _inner(A, B):
    return float(np.sum(A * B))


def dual_maximizer(X, h):
    """``Q`` with ``h*(Q) = 1`` and ``<Q, X> = h(X)`` for entrywise or Schatten ``h``."""
    X = np.asarray(X, dtype=float)
    if isinstance(h, FrobeniusP):
        return dual_witness(X.ravel(), dual_exponent(h.p)).reshape(X.shape)
    if isinstance(h, SchattenP):
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        w = dual_witness(s, dual_exponent(h.p))
        return (U * w) @ Vt
    raise ValueError(f"no dual maximizer for {spec_label(h)}")


def _dual_norm(Q, h):
    if isinstance(h, FrobeniusP):
        return mat_norm(Q, FrobeniusP(dual_exponent(h.p)))
    if isinstance(h, SchattenP):
        return mat_norm(Q, SchattenP(dual_exponent(h.p)))
    raise ValueError(f"no dual norm for {spec_label(h)}")


def induced_map_norm(D, h, g):
    """``max_X g(D(X)) / h(X)`` for rank-one maps: ``|s| g(direction) h*(Q)``."""
    if isinstance(D, RankOneInducedMap):
        return abs(D.scale) * mat_norm(D.direction, g) * _dual_norm(D.Q, h)
    raise ValueError("closed form only for rank-one maps")


def sample_induced_map(U: InducedMaps, shape, rng, *, terms=3) -> GeneralMap:
    """A random member of ``U``: a sum of rank-one maps with total weight ``lam``.

    Each term ``Z -> s_k <Q_k, Z> D_k`` has induced norm ``|s_k| g(D_k) h*(Q_k)``,
    so by the triangle inequality the sum lies in the set.
    """
    weights = rng.dirichlet(np.ones(terms)) * rng.uniform(0.5, 1.0)
    M = np.zeros((shape[0] * shape[1],) * 2)
    for w in weights:
        Q = rng.standard_normal(shape)
        D = rng.standard_normal(shape)
        size = mat_norm(D, U.g) * _dual_norm(Q, U.h)
        if size == 0:
            continue
        M += RankOneInducedMap(Q, D, U.lam * w / size).matrix()
    return GeneralMap.from_matrix(M, shape)


def _unit_direction(g, shape):
    """Some ``Z`` with ``g(Z) = 1``."""
    Z = np.zeros(shape)
    if isinstance(g, ProjectedF2):
        idx = np.argwhere(g.mask)
        if idx.size == 0:
            raise ValueError("the seminorm vanishes identically")
        Z[tuple(idx[0])] = 1.0
    else:
        Z[0, 0] = 1.0
    return Z / mat_norm(Z, g)


def _vector_set(U: RepresentationBall, shape):
    m, n = shape
    return UncertaintySet(U.spec, U.lam, m * n, m * n)


def matrix_worst_case(Y, X, U, loss) -> MatrixWorstCase:
    """``max_{Delta in U} g(Y - X - Delta(X))`` with an attaining map where possible."""
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if Y.shape != X.shape:
        raise ValueError("Y and X must have the same shape")
    Z = Y - X
    if isinstance(U, InducedMaps):
        if U.g != loss:
            base = mat_norm(Z, loss)
            return MatrixWorstCase(float("nan"), False, None, (base, float("inf")))
        gz = mat_norm(Z, loss)
        hx = mat_norm(X, U.h)
        value = gz + U.lam * hx
        if hx == 0:
            return MatrixWorstCase(value, True, RankOneInducedMap(np.zeros_like(X), np.zeros_like(X), 0.0))
        Q = dual_maximizer(X, U.h)
        if gz > 0:
            W = RankOneInducedMap(Q, X - Y, U.lam / gz)
        else:
            W = RankOneInducedMap(Q, _unit_direction(loss, X.shape), U.lam)
        return MatrixWorstCase(value, True, W)
    if isinstance(U, RepresentationBall):
        if not isinstance(loss, FrobeniusP):
            raise ValueError("representation balls pair with entrywise losses")
        VU = _vector_set(U, X.shape)
        wc = worst_case_loss(Z.ravel(), X.ravel(), VU, loss.p)
        verdict = classify_equivalence(loss.p, VU)
        # the vector witness maximizes ||z + D beta||; the map subtracts
        W = GeneralMap.from_matrix(-wc.witness.perturbation, X.shape)
        base = vec_norm(Z, loss.p)
        bracket = None if wc.exact else (base + verdict.lower_penalty(X.ravel()),
                                         base + verdict.upper_penalty(X.ravel()))
        return MatrixWorstCase(wc.value, wc.exact, W, bracket)
    if isinstance(U, ColumnWiseBalls):
        if not isinstance(loss, FrobeniusP):
            raise ValueError("column-wise balls pair with entrywise losses")
        m, n = X.shape
        if len(U.qs) != n:
            raise ValueError("need one exponent per column")
        p = loss.p
        vals, blocks, exact = [], [], True
        for j in range(n):
            VU = UncertaintySet(FrobeniusP(U.qs[j]), U.lam, m, m)
            wc = worst_case_loss(Z[:, j], X[:, j], VU, p)
            vals.append(wc.value)
            blocks.append(-wc.witness.perturbation)
            exact = exact and wc.exact
        value = vec_norm(vals, p)
        return MatrixWorstCase(value, exact, ColumnWiseMap(np.array(blocks)))
    raise ValueError(f"unsupported uncertainty set {U!r}")


def _column_penalty(U, p):
    def h(X):
        X = np.asarray(X, dtype=float)
        m = X.shape[0]
        terms = [delta_value(m, p, q) * vec_norm(X[:, j], dual_exponent(q)) for j, q in enumerate(U.qs)]
        return U.lam * vec_norm(terms, p)
    return h


def matrix_classify(loss, U) -> MatrixVerdict:
    """Whether ``max_Delta g(Z + Delta(X)) = g(Z) + h_bar(X)`` for all ``Z, X``."""
    if isinstance(U, InducedMaps):
        if U.g != loss:
            raise ValueError("induced sets are exact only for their own loss")
        pen = lambda X: U.lam * mat_norm(X, U.h)
        return MatrixVerdict("Exact", f"{U.lam:g} * {spec_label(U.h)}", pen, pen)
    if isinstance(U, RepresentationBall):
        if not isinstance(loss, FrobeniusP):
            raise ValueError("representation balls pair with entrywise losses")

        def verdict_for(X):
            m, n = np.shape(X)
            return classify_equivalence(loss.p, UncertaintySet(U.spec, U.lam, m * n, m * n))

        def pen(X):
            return verdict_for(X).penalty(np.ravel(X))

        def low(X):
            return verdict_for(X).lower_penalty(np.ravel(X))

        # the status depends on mn only through mn >= 2
        v = classify_equivalence(loss.p, UncertaintySet(U.spec, U.lam, 2, 2))
        expo = v.exponent
        return MatrixVerdict(v.status, f"lam * delta_mn * F_{'inf' if expo == INF else f'{expo:g}'}",
                             pen, low)
    if isinstance(U, ColumnWiseBalls):
        if not isinstance(loss, FrobeniusP):
            raise ValueError("column-wise balls pair with entrywise losses")
        p = loss.p
        n = len(U.qs)
        # columns are perturbed independently, so the worst case is the l_p
        # combination of per-column worst cases; it splits as g(Z) + h_bar(X)
        # for every Z only when p = 1, or with a single column under the
        # vector rule
        exact = p == 1 or (n == 1 and (p == INF or p == U.qs[0]))
        pen = _column_penalty(U, p)
        if exact:
            low = pen
        else:
            low = lambda X: 0.0
        return MatrixVerdict("Exact" if exact else "BoundsOnly", "column-wise", pen, low)
    raise ValueError(f"unsupported uncertainty set {U!r}")


# --- solvers ------------------------------------------------------------------

@dataclass(frozen=True)
class CompletionProblem:
    Y: np.ndarray
    mask: np.ndarray
    lam: float

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        M = np.asarray(self.mask, dtype=bool)
        if Y.shape != M.shape:
            raise ValueError("mask shape does not match Y")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        # unobserved entries carry no information; store them as zero
        Y = np.where(M, Y, 0.0)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "mask", M)

    def objective(self, X):
        R = (self.Y - X)[self.mask]
        return float(np.linalg.norm(R)) + self.lam * float(np.linalg.svd(X, compute_uv=False).sum())


@dataclass
class SolverResult:
    X: np.ndarray
    objective: float
    iterations: int
    converged: bool
    audit_improvement: float | None = None


def _svt(A, tau):
    # LAPACK SVD: this runs once per iteration
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return (U * np.maximum(s - tau, 0.0)) @ Vt


def mc_nuclear_solve(prob: CompletionProblem, *, rho=1.0, max_iter=10_000, tol=1e-8,
                     audit=True, audit_trials=10_000, seed=0) -> SolverResult:
    """Minimize ``||Y - X||_P(F2) + lam ||X||_sigma1`` by ADMM on ``X = Z``.

    The ``X`` step is singular value thresholding; the ``Z`` step is the
    proximal map of the projected Frobenius loss (block soft-thresholding
    on observed entries, identity elsewhere). The returned ``X`` is the
    thresholded iterate.
    """
    Y, M, lam = prob.Y, prob.mask, prob.lam
    if lam == 0:
        X = Y.copy()
        return SolverResult(X, prob.objective(X), 0, True, 0.0 if audit else None)
    Z = Y.copy()
    U = np.zeros_like(Y)
    X = Z
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        X = _svt(Z - U, lam / rho)
        W = X + U
        Z_old = Z
        Z = W.copy()
        V = (W - Y)[M]
        nv = np.linalg.norm(V)
        shrink = max(0.0, 1.0 - (1.0 / rho) / nv) if nv > 0 else 0.0
        Z[M] = Y[M] + shrink * V
        U = U + X - Z
        r_primal = np.linalg.norm(X - Z)
        r_dual = rho * np.linalg.norm(Z - Z_old)
        scale = 1.0 + np.linalg.norm(X)
        if r_primal <= tol * scale and r_dual <= tol * scale:
            converged = True
            break
    X = _best_of(prob.objective, [X, Z, np.zeros_like(X)])
    res = SolverResult(X, prob.objective(X), k, converged)
    if audit:
        res.audit_improvement = descent_audit(prob.objective, X, trials=audit_trials, seed=seed)
    return res


def _best_of(f, cands):
    vals = [f(c) for c in cands]
    return cands[int(np.argmin(vals))]


def pca_truncate(Y, k):
    """Best rank-``k`` approximation: keep the ``k`` leading singular triples."""
    Y = np.asarray(Y, dtype=float)
    if not 0 <= k <= min(Y.shape):
        raise ValueError("k out of range")
    from .numerics import svd

    U, s, V = svd(Y)
    return (U[:, :k] * s[:k]) @ V[:, :k].T


def robust_pca_solve(Y, lam, *, rho=1.0, max_iter=10_000, tol=1e-8, audit=True,
                     audit_trials=10_000, seed=0) -> SolverResult:
    """Minimize ``||Y - X||_F1 + lam ||X||_sigma1`` by ADMM on ``X + E = Y``.

    Alternates singular value thresholding for ``X``, entrywise
    soft-thresholding for ``E`` and a dual ascent step.
    """
    Y = np.asarray(Y, dtype=float)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    f = lambda X: float(np.abs(Y - X).sum()) + lam * float(np.linalg.svd(X, compute_uv=False).sum())
    E = np.zeros_like(Y)
    L = np.zeros_like(Y)
    X = np.zeros_like(Y)
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        X = _svt(Y - E + L, lam / rho)
        E_old = E
        T = Y - X + L
        E = np.sign(T) * np.maximum(np.abs(T) - 1.0 / rho, 0.0)
        L = L + Y - X - E
        r_primal = np.linalg.norm(Y - X - E)
        r_dual = rho * np.linalg.norm(E - E_old)
        scale = 1.0 + np.linalg.norm(Y)
        if r_primal <= tol * scale and r_dual <= tol * scale:
            converged = True
            break
    X = _best_of(f, [X, Y - E, np.zeros_like(X)])
    res = SolverResult(X, f(X), k, converged)
    if audit:
        res.audit_improvement = descent_audit(f, X, trials=audit_trials, seed=seed)
    return res


def descent_audit(f, X, *, trials=10_000, max_rank=3, steps=(1e-2, 1e-4, 1e-6), seed=0,
                  batch=2000) -> float:
    """Largest relative decrease of ``f`` found along random low-rank directions.

    Directions have rank at most ``max_rank`` and unit Frobenius norm; each is
    tried at the given step sizes (scaled by ``1 + ||X||_F``). A value at or
    below ``1e-6`` certifies that none of the sampled directions descends.
    """
    X = np.asarray(X, dtype=float)
    m, n = X.shape
    f0 = f(X)
    rng = np.random.default_rng(seed)
    scale = 1.0 + np.linalg.norm(X)
    best = 0.0
    kmax = min(max_rank, m, n)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        ranks = rng.integers(1, kmax + 1, size=b)
        A = rng.standard_normal((b, m, kmax))
        B = rng.standard_normal((b, n, kmax))
        keep = (np.arange(kmax)[None, :] < ranks[:, None]).astype(float)
        D = np.einsum("bik,bjk->bij", A * keep[:, None, :], B)
        D /= np.linalg.norm(D, axis=(1, 2), keepdims=True)
        for t in steps:
            vals = _batched_objective(f, X[None] + t * scale * D)
            best = max(best, float(((f0 - vals) / max(abs(f0), 1.0)).max()))
        done += b
    return best


def _batched_objective(f, stack):
    if hasattr(f, "batched"):
        return f.batched(stack)
    return np.array([f(S) for S in stack])


# --- robust PCA characterization ------------------------------------------------

@dataclass(frozen=True)
class CharacterizationResult:
    holds: bool
    counterexample: tuple | None  # (Y, X, mismatch)
    trials: int


def robust_pca_characterization_check(loss, *, trials=10_000, lam=1.0, shape=(3, 3), seed=0):
    """Can some induced uncertainty model turn ``min g(Y - X)`` into robust PCA?

    With ``g = F_1`` the induced set ``(sigma_1, F_1)`` does it, and this is
    confirmed on random pairs. For any other loss the identity already fails
    at ``X = 0``, where every uncertainty set gives ``g(Y)``: the search
    looks for ``Y`` with ``|g(Y) - ||Y||_F1| > 1e-6``.
    """
    rng = np.random.default_rng(seed)
    m, n = shape
    f1 = FrobeniusP(1)
    if loss == f1:
        U = InducedMaps(SchattenP(1), f1, lam)
        for _ in range(min(trials, 200)):
            Y = rng.standard_normal(shape)
            X = rng.standard_normal(shape)
            wc = matrix_worst_case(Y, X, U, f1)
            target = mat_norm(Y - X, f1) + lam * mat_norm(X, SchattenP(1))
            attained = mat_norm(Y - X - apply_map(wc.witness, X), f1)
            if abs(attained - target) > 1e-8 * max(1.0, target):
                return CharacterizationResult(False, (Y, X, abs(attained - target)), trials)
        return CharacterizationResult(True, None, trials)
    for t in range(1, trials + 1):
        Y = rng.standard_normal(shape)
        X = np.zeros(shape)
        mismatch = abs(mat_norm(Y, loss) - mat_norm(Y, f1))
        if mismatch > 1e-6:
            return CharacterizationResult(False, (Y, X, mismatch), t)
    return CharacterizationResult(True, None, trials)


# --- rank-based uncertainty ------------------------------------------------------

def _map_matrix(D):
    return D.matrix()


def _seminorm_grad(A, g):
    """``G`` with ``<G, A> = g(A)`` and ``g*(G) <= 1``."""
    if not np.any(A):
        return np.zeros_like(A)
    if isinstance(g, FrobeniusP):
        return dual_witness(A.ravel(), dual_exponent(g.p)).reshape(A.shape)
    if isinstance(g, SchattenP):
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        return (U * dual_witness(s, dual_exponent(g.p))) @ Vt
    if isinstance(g, ProjectedF2):
        B = np.where(g.mask, A, 0.0)
        nb = np.linalg.norm(B)
        return B / nb if nb > 0 else np.zeros_like(A)
    raise ValueError(f"unsupported loss {spec_label(g)}")


def _rank_lmo(G, r, p):
    """Maximize ``<G, X>`` over ``rank(X) <= r``, ``||X||_sigma_p <= 1``."""
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    s = s[:r]
    if not np.any(s):
        X = np.zeros_like(G)
        X[0, 0] = 1.0
        return X
    w = dual_witness(s, p)  # ||w||_p = 1, w . s = ||s||_{p*}
    return (U[:, :r] * w) @ Vt[:r]


def _ascent_over_rank(D, g, r, p, starts, rng, iters=300):
    m, n = D.shape
    M = _map_matrix(D)
    best, best_X = 0.0, None
    for _ in range(starts):
        X = _rank_lmo(rng.standard_normal((m, n)), r, p)
        val = mat_norm((M @ X.ravel()).reshape(m, n), g)
        for _ in range(iters):
            G = _seminorm_grad((M @ X.ravel()).reshape(m, n), g)
            Xn = _rank_lmo((M.T @ G.ravel()).reshape(m, n), r, p)
            new = mat_norm((M @ Xn.ravel()).reshape(m, n), g)
            if new <= val * (1 + 1e-13):
                break
            X, val = Xn, new
        if val > best:
            best, best_X = val, X
    return best, best_X


def nuclear_induced_norm(D, g, *, starts=32, seed=0):
    """``max g(D(X))`` over ``||X||_sigma1 <= 1``: exact for rank-one maps, else ascent."""
    if isinstance(D, RankOneInducedMap):
        return induced_map_norm(D, SchattenP(1), g), True
    rng = np.random.default_rng(seed)
    # the nuclear ball's extreme points are unit rank-one matrices
    val, _ = _ascent_over_rank(D, g, 1, 1.0, starts, rng)
    return val, False


def rank_ratio(D, g, p, *, starts=32, seed=0):
    """Estimate ``max g(D(X)) / rank(X)`` over ``||X||_sigma_p <= 1``, rank by rank."""
    m, n = D.shape
    rng = np.random.default_rng(seed)
    best = 0.0
    for r in range(1, min(m, n) + 1):
        val, X = _ascent_over_rank(D, g, r, check_exponent(p), starts, rng)
        if X is None:
            continue
        s = np.linalg.svd(X, compute_uv=False)
        rank = max(1, int(np.sum(s > 1e-10 * max(s[0], 1e-300))))
        best = max(best, val / rank)
    return best


@dataclass(frozen=True)
class RankMembership:
    rank_verdict: str      # "member", "non-member" or "inconclusive"
    nuclear_verdict: str
    rank_value: float
    nuclear_value: float

    @property
    def agree(self):
        return self.rank_verdict == self.nuclear_verdict


def _verdict(value, lam, margin):
    if value <= lam * (1 - margin):
        return "member"
    if value >= lam * (1 + margin):
        return "non-member"
    return "inconclusive"


def rank_set_membership(D, p, lam, loss, *, starts=32, seed=0, margin=1e-6) -> RankMembership:
    """Membership of ``D`` in the rank-based set and in the nuclear-induced set.

    Both sup values are estimated by ascent (the nuclear one is exact for
    rank-one maps). Values within ``margin`` of ``lam`` are inconclusive.
    """
    m, n = D.shape
    if max(m, n) > 4:
        raise ValueError("rank-set checks are limited to 4 x 4 matrices")
    rv = rank_ratio(D, loss, p, starts=starts, seed=seed)
    nv, _ = nuclear_induced_norm(D, loss, starts=starts, seed=seed)
    return RankMembership(_verdict(rv, lam, margin), _verdict(nv, lam, margin), rv, nv)
