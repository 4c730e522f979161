"""Least quantile of squares with gross outliers, nominal and robust.

Run:  python3 demos/robust_least_quantile.py
"""
import numpy as np

from robreg.lqs import LqsProblem, RobustSpec, lqs_mio, lqs_oracle, sampled_adversary_audit

rng = np.random.default_rng(2)
m = 8
t = np.linspace(-1, 1, m)
X = np.column_stack([np.ones(m), t])
y = 1.0 + 2.0 * t + 0.05 * rng.standard_normal(m)
y[[1, 6]] += [6.0, -5.0]  # two gross outliers

q = 5  # minimize the 5th smallest absolute residual
nominal = lqs_mio(LqsProblem(X, y, q))
print(f"nominal LQS: beta {np.round(nominal.beta, 4)}, value {nominal.value:.6f}, "
      f"{nominal.nodes} nodes, status {nominal.status}")
print(f"subset enumeration agrees: {lqs_oracle(LqsProblem(X, y, q))[1]:.6f}")

least_squares = np.linalg.lstsq(X, y, rcond=None)[0]
print(f"least squares, pulled by the outliers: {np.round(least_squares, 4)}")

for lam in (0.05, 0.2):
    prob = LqsProblem(X, y, q, RobustSpec(np.inf, 1, lam))
    res = lqs_mio(prob)
    audit = sampled_adversary_audit(prob, res.beta, 1000, seed=0)
    print(f"robust LQS, lambda={lam}: beta {np.round(res.beta, 4)}, value {res.value:.6f}, "
          f"sampled adversary {audit:.6f}")
