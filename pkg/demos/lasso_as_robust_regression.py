"""Lasso is robust least squares against column-bounded perturbations.

Run:  python3 demos/lasso_as_robust_regression.py
"""
import numpy as np

from robreg.norms import FrobeniusP, Induced, vec_norm
from robreg.robustify import UncertaintySet, adversarial_witness, classify_equivalence, worst_case_loss
from robreg.solvers import RegressionProblem, robust_objective_audit, solve_regularized, solve_robust

rng = np.random.default_rng(0)
m, n, lam = 20, 5, 0.8
X = rng.standard_normal((m, n))
beta_true = np.array([2.0, 0.0, -1.0, 0.0, 0.0])
y = X @ beta_true + 0.3 * rng.standard_normal(m)
prob = RegressionProblem(X, y, 2)

# Perturbations D with ||D b||_2 <= lam ||b||_1: every column has l2 norm at most lam.
U = UncertaintySet(Induced(1, 2), lam, m, n)
verdict = classify_equivalence(2, U)
print(f"verdict for l2 loss over {U.label()}: {verdict.status}, penalty {verdict.coefficient:g} * ||beta||_1")

robust = solve_robust(prob, U)
lasso = solve_regularized(prob, lam, 1)
print("robust beta:", np.round(robust.beta, 6))
print("lasso beta: ", np.round(lasso.beta, 6))
print(f"objectives: robust {robust.objective:.10f}, lasso {lasso.objective:.10f}")

# The adversary that attains the worst case, and a sampled check that nobody does better.
z = y - X @ robust.beta
w = adversarial_witness(z, robust.beta, U, 2)
print(f"witness attains {w.attained_value:.10f}; its largest column norm is "
      f"{np.linalg.norm(w.perturbation, axis=0).max():.6f}")
audit = robust_objective_audit(robust.beta, prob, U, 2000, seed=1)
print(f"2000 random perturbations: best {audit.sampled_max:.6f} <= analytic {audit.analytic:.6f}")

# Outside the equality regime: l3 loss over a Frobenius ball only gives a bracket.
prob3 = RegressionProblem(X, y, 3)
U2 = UncertaintySet(FrobeniusP(2), lam, m, n)
res = solve_robust(prob3, U2)
print(f"l3 loss over {U2.label()}: {classify_equivalence(3, U2).status}, "
      f"optimum in [{res.bracket[0]:.6f}, {res.bracket[1]:.6f}], attained {res.objective:.6f}")
wc = worst_case_loss(y - X @ res.beta, res.beta, U2, 3)
print(f"worst case at the returned beta: {wc.value:.6f} (nominal loss {vec_norm(y - X @ res.beta, 3):.6f})")
