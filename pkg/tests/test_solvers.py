import numpy as np
import pytest
from numpy.testing import assert_allclose

from robreg.discrepancy import delta_value
from robreg.norms import INF, FrobeniusP, Induced, SchattenP, vec_norm
from robreg.robustify import UncertaintySet, adversarial_witness, worst_case_loss
from robreg.solvers import (
    RegressionProblem,
    min_norm_subgradient,
    regularized_objective,
    robust_objective_audit,
    solve_regularized,
    solve_robust,
)


def test_unpenalized_identity():
    res = solve_regularized(RegressionProblem(np.eye(2), [1, 2], 2), 0.0)
    assert_allclose(res.beta, [1, 2], atol=1e-7)
    assert res.objective < 1e-7


def test_lasso_soft_threshold():
    # squared loss (y - b)^2 + 0.5 |b| is minimized at b = y - 0.25
    res = solve_regularized(RegressionProblem([[1.0]], [1.0], 2), 0.5, 1, squared=True)
    assert_allclose(res.beta, [0.75], atol=1e-7)


@pytest.mark.parametrize("c", [5.0, 6.0, 20.0])
def test_penalty_dominates(c):
    res = solve_regularized(RegressionProblem(np.eye(2), [3, 4], 2), c, 2)
    assert_allclose(res.beta, [0, 0], atol=1e-6)
    assert_allclose(res.objective, 5, atol=1e-7)


def test_zero_threshold_is_one_for_identity_design():
    # with X = I the loss subgradient at 0 is -y/||y||, of norm 1
    prob = RegressionProblem(np.eye(2), [3, 4], 2)
    assert np.linalg.norm(solve_regularized(prob, 1.2, 2).beta) < 1e-6
    assert np.linalg.norm(solve_regularized(prob, 0.8, 2).beta) > 1e-3


def test_robust_lasso_matches_regularized():
    rng = np.random.default_rng(0)
    X, y = rng.standard_normal((8, 3)), rng.standard_normal(8)
    prob = RegressionProblem(X, y, 2)
    rob = solve_robust(prob, UncertaintySet(Induced(1, 2), 0.3, 8, 3))
    reg = solve_regularized(prob, 0.3, 1)
    assert_allclose(rob.beta, reg.beta, atol=1e-5)
    assert_allclose(rob.objective, reg.objective, atol=1e-7)


def test_robust_bracket_coefficients():
    rng = np.random.default_rng(1)
    m, n = 6, 2
    X, y = rng.standard_normal((m, n)), rng.standard_normal(m)
    prob = RegressionProblem(X, y, 3)
    res = solve_robust(prob, UncertaintySet(FrobeniusP(2), 1.0, m, n))
    lo = solve_regularized(prob, 1.0 / delta_value(m, 2, 3), 2)
    hi = solve_regularized(prob, delta_value(m, 3, 2), 2)
    assert_allclose(res.bracket, (lo.objective, hi.objective), rtol=1e-9)
    assert res.bracket[0] - 1e-9 <= res.objective <= res.bracket[1] + 1e-9


def test_subgradient_method_agrees_with_conic():
    rng = np.random.default_rng(2)
    X, y = rng.standard_normal((6, 2)), rng.standard_normal(6)
    prob = RegressionProblem(X, y, 1.5)
    a = solve_regularized(prob, 0.4, 2)
    b = solve_regularized(prob, 0.4, 2, method="subgradient", max_iter=20_000)
    assert b.objective >= a.objective - 1e-9
    assert b.objective <= a.objective + 1e-4
    hist = np.array(b.history)
    assert np.all(np.diff(np.minimum.accumulate(hist)) <= 0)


@pytest.mark.parametrize("p,h", [(1, 1), (2, 2), (3, 1.5), (INF, 1), (1.5, INF)])
def test_certificates(p, h):
    rng = np.random.default_rng(int(10 * min(p, 9)))
    for _ in range(3):
        X, y = rng.standard_normal((7, 3)), rng.standard_normal(7)
        res = solve_regularized(RegressionProblem(X, y, p), rng.uniform(0.1, 1), h)
        assert res.certificate <= 1e-4
        assert res.converged


def test_pointwise_robust_equals_regularized():
    rng = np.random.default_rng(3)
    X, y = rng.standard_normal((5, 3)), rng.standard_normal(5)
    prob = RegressionProblem(X, y, 2)
    U = UncertaintySet(SchattenP(3), 0.7, 5, 3)
    for _ in range(100):
        beta = rng.standard_normal(3)
        robust = worst_case_loss(y - X @ beta, beta, U, 2).value
        assert abs(robust - regularized_objective(prob, beta, 0.7, 2)) <= 1e-9


def test_ridge_homogeneity():
    rng = np.random.default_rng(4)
    X, y = rng.standard_normal((6, 2)), rng.standard_normal(6)
    U = UncertaintySet(FrobeniusP(2), 0.5, 6, 2)
    a = solve_robust(RegressionProblem(X, y, 2), U)
    b = solve_robust(RegressionProblem(X, 3 * y, 2), U)
    assert_allclose(b.objective, 3 * a.objective, rtol=1e-6)


def test_lambda_zero_limit_is_nominal():
    rng = np.random.default_rng(5)
    X, y = rng.standard_normal((6, 2)), rng.standard_normal(6)
    prob = RegressionProblem(X, y, 2)
    res = solve_robust(prob, UncertaintySet(Induced(1, 2), 1e-12, 6, 2))
    ls = np.linalg.lstsq(X, y, rcond=None)[0]
    assert_allclose(res.beta, ls, atol=1e-5)
    a = robust_objective_audit(res.beta, prob, UncertaintySet(Induced(1, 2), 1e-12, 6, 2), 100)
    assert_allclose(a.analytic, a.sampled_max, atol=1e-9)


def test_audit_with_witness():
    rng = np.random.default_rng(6)
    X, y = rng.standard_normal((5, 3)), rng.standard_normal(5)
    prob = RegressionProblem(X, y, 2)
    U = UncertaintySet(Induced(1, 2), 0.4, 5, 3)
    beta = rng.standard_normal(3)
    plain = robust_objective_audit(beta, prob, U, 1000)
    assert plain.sampled_max <= plain.analytic + 1e-9
    w = adversarial_witness(y - X @ beta, beta, U, 2)
    full = robust_objective_audit(beta, prob, U, 10, witness=w.perturbation)
    assert_allclose(full.sampled_max, full.analytic, atol=1e-8)


def test_min_norm_subgradient_detects_non_optimal():
    prob = RegressionProblem(np.eye(2), [3, 4], 2)
    assert min_norm_subgradient(prob, np.array([1.0, 1.0]), 0.5, 2) > 1e-2
