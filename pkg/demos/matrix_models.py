"""Matrix completion, robust PCA and where the column-wise rule breaks.

Run:  python3 demos/matrix_models.py
"""
import numpy as np

from robreg.matrix_reg import (
    ColumnWiseBalls,
    CompletionProblem,
    InducedMaps,
    apply_map,
    matrix_classify,
    matrix_worst_case,
    mc_nuclear_solve,
    robust_pca_characterization_check,
    robust_pca_solve,
)
from robreg.norms import FrobeniusP, ProjectedF2, SchattenP, mat_norm, vec_norm

rng = np.random.default_rng(3)
L = rng.standard_normal((6, 1)) @ rng.standard_normal((1, 5))
mask = rng.random(L.shape) < 0.7

# Nuclear-norm completion is a worst case over maps with P(D(X)) <= lam ||X||_nuclear.
lam = 0.1
res = mc_nuclear_solve(CompletionProblem(L, mask, lam), seed=0)
print(f"completion: objective {res.objective:.6f}, {res.iterations} iterations, "
      f"audit improvement {res.audit_improvement:.1e}")
print(f"  relative error on unobserved entries: "
      f"{np.linalg.norm((res.X - L)[~mask]) / np.linalg.norm(L[~mask]):.3f}")
g = ProjectedF2(mask)
wc = matrix_worst_case(L, res.X, InducedMaps(SchattenP(1), g, lam), g)
print(f"  worst-case loss {wc.value:.6f} equals the objective; "
      f"witness attains {mat_norm(L - res.X - apply_map(wc.witness, res.X), g):.6f}")

# Robust PCA: sparse corruption of a low-rank matrix.
S = np.zeros_like(L)
S[0, 0], S[3, 2] = 8.0, -6.0
# Small lambda keeps X = Y; larger lambda trades l1 residual for lower rank.
for lam in (0.5, 1.5, 3.0):
    out = robust_pca_solve(L + S, lam, seed=0)
    print(f"robust PCA, lambda={lam}: objective {out.objective:.6f}, rank {np.linalg.matrix_rank(out.X, 1e-6)}, "
          f"distance to the clean matrix {np.linalg.norm(out.X - L) / np.linalg.norm(L):.3f}")
for loss in (FrobeniusP(1), FrobeniusP(2)):
    chk = robust_pca_characterization_check(loss, trials=2000)
    print(f"  does some uncertainty model give robust PCA with loss {loss}? {chk.holds}")

# Column-wise balls: exact only for l1 loss in general.
Z, X = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
U = ColumnWiseBalls((2.0, 2.0), 1.0)
wc = matrix_worst_case(Z + X, X, U, FrobeniusP(2))
v = matrix_classify(FrobeniusP(2), U)
print(f"column-wise, l2 loss: worst case {wc.value:.6f}, while loss + column penalty is "
      f"{vec_norm(Z.ravel(), 2) + v.penalty(X):.6f} ({v.status})")
