import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from robreg.discrepancy import delta_value
from robreg.norms import INF, FrobeniusP, Induced, RowWise, SchattenP, dual_exponent, mat_norm, rank_one_norm, vec_norm
from robreg.robustify import (
    UncertaintySet,
    adversarial_witness,
    ascent_worst_case,
    classify_equivalence,
    equivalence_probe,
    scaling_gap_limit,
    scaling_gap_sweep,
    strictness_probe,
    uncertainty_membership,
    worst_case_loss,
)


def _sampled_worst_case(z, beta, U, p, rng, trials=4000):
    # brute force: random perturbations scaled onto the boundary of the ball
    best = vec_norm(z, p)
    for _ in range(trials):
        u, v = rng.standard_normal(U.rows), rng.standard_normal(U.cols)
        if isinstance(U.shape, Induced) or rng.random() < 0.5:
            # rank-one norms are exact for every shape
            D = U.radius * np.outer(u, v) / rank_one_norm(u, v, U.shape)
        else:
            D = rng.standard_normal((U.rows, U.cols))
            D *= U.radius / mat_norm(D, U.shape)
        best = max(best, vec_norm(z + D @ beta, p))
    return best


def test_lasso_example():
    U = UncertaintySet(Induced(1, 2), 0.5, 2, 2)
    wc = worst_case_loss([1, 0], [1, -2], U, 2)
    assert_allclose(wc.value, 2.5)
    # independent ascent over ||u||_2 <= 1.5
    val, _ = ascent_worst_case(np.array([1.0, 0.0]), 1.5, 2, 2)
    assert_allclose(val, 2.5)


def test_zero_beta():
    U = UncertaintySet(FrobeniusP(3), 2.0, 3, 2)
    z = np.array([1.0, -2.0, 0.5])
    assert vec_norm(z, 1.5) == worst_case_loss(z, [0, 0], U, 1.5).value


def test_rowwise_example():
    U = UncertaintySet(RowWise(2), 1.0, 2, 2)
    z, beta = np.array([1.0, -1.0]), np.array([3.0, 4.0])
    assert_allclose(worst_case_loss(z, beta, U, 1).value, 12)
    # per-row perturbation d_i @ beta ranges over [-5, 5]: enumerate the signs
    best = max(np.abs(z + 5 * np.array(s)).sum() for s in itertools.product([-1, 1], repeat=2))
    assert_allclose(best, 12)


def test_witness_examples():
    U = UncertaintySet(Induced(1, 2), 1.0, 2, 2)
    w = adversarial_witness([2, 0], [1, 0], U, 2)
    assert_allclose(w.perturbation, np.outer([2, 0], [1, 0]) / 2)
    assert_allclose(w.attained_value, 3)
    w = adversarial_witness([0, 0], [1, 1], UncertaintySet(FrobeniusP(2), 1.0, 2, 2), 2)
    assert_allclose(w.attained_value, np.sqrt(2))
    w = adversarial_witness([1, 1], [0, 3], UncertaintySet(FrobeniusP(1), 2.0, 2, 2), 1)
    assert_allclose(w.attained_value, 8)


def test_witness_refused_outside_equality():
    with pytest.raises(ValueError):
        adversarial_witness([1, 2], [1, 0], UncertaintySet(FrobeniusP(2), 1.0, 2, 2), 3)


def test_classification_examples():
    U = UncertaintySet(FrobeniusP(2), 0.7, 4, 3)
    v = classify_equivalence(2, U)
    assert v.exact and v.exponent == 2
    assert_allclose(v.coefficient, 0.7)
    for q in (1, 2, 5, INF):
        v = classify_equivalence(2, UncertaintySet(SchattenP(q), 0.7, 4, 3))
        assert v.exact and v.exponent == 2
    v = classify_equivalence(3, U)
    assert v.status == "BoundsOnly"
    assert_allclose(v.upper_coefficient, 0.7 * delta_value(4, 3, 2))
    assert_allclose(v.lower_coefficient, 0.7 / delta_value(4, 2, 3))


SETS = [
    (Induced(1, 2), [2.0, 1.0, INF]),
    (Induced(2, 3), [3.0, 1.0, INF]),
    (FrobeniusP(1.5), [1.5, 1.0, INF]),
    (FrobeniusP(3), [3.0, 1.0, INF]),
    (SchattenP(1), [1.0, 2.0, INF]),
    (SchattenP(4), [1.0, 2.0, INF]),
    (RowWise(2), [1.0, INF]),
]


@pytest.mark.parametrize("shape,ps", SETS, ids=lambda s: str(s))
def test_equality_regimes_against_sampling(shape, ps):
    rng = np.random.default_rng(0)
    for p in ps:
        for _ in range(5):
            m, n = rng.integers(2, 5, size=2)
            U = UncertaintySet(shape, rng.uniform(0.1, 2), m, n)
            z, beta = rng.standard_normal(m), rng.standard_normal(n)
            v = classify_equivalence(p, U)
            assert v.exact
            wc = worst_case_loss(z, beta, U, p)
            assert_allclose(wc.value, vec_norm(z, p) + v.penalty(beta), rtol=1e-10)
            sampled = _sampled_worst_case(z, beta, U, p, rng, 500)
            assert sampled <= wc.value + 1e-9
            w = adversarial_witness(z, beta, U, p)
            assert_allclose(w.attained_value, wc.value, rtol=1e-9)
            if not isinstance(shape, Induced):
                assert mat_norm(w.perturbation, U.shape) <= U.radius * (1 + 1e-9)


@pytest.mark.parametrize("p,q", [(2, 1), (3, 2), (1.5, 3), (3, INF)])
def test_sandwich_and_sampling(p, q):
    rng = np.random.default_rng(1)
    for _ in range(10):
        m, n = rng.integers(2, 5, size=2)
        U = UncertaintySet(FrobeniusP(q), 1.0, m, n)
        z, beta = rng.standard_normal(m), rng.standard_normal(n)
        v = classify_equivalence(p, U)
        wc = worst_case_loss(z, beta, U, p)
        base = vec_norm(z, p)
        assert base + v.lower_penalty(beta) - 1e-9 <= wc.value <= base + v.upper_penalty(beta) + 1e-9
        assert _sampled_worst_case(z, beta, U, p, rng, 1000) <= wc.value + 1e-9


@pytest.mark.parametrize("r", [1.0, INF])
def test_reduction_closed_forms_against_vertices(r):
    # r = 1 or inf: the ball in u-space is a polytope, so the maximum of a
    # convex function sits at a vertex; enumerate them
    rng = np.random.default_rng(2)
    from robreg.robustify import reduced_worst_case
    for p in (1.0, 1.5, 2.0, 3.0, INF):
        for _ in range(10):
            m = int(rng.integers(1, 5))
            z = rng.standard_normal(m)
            rho = rng.uniform(0.1, 2)
            if r == 1:
                verts = [s * rho * e for e in np.eye(m) for s in (-1, 1)]
            else:
                verts = [rho * np.array(s) for s in itertools.product([-1, 1], repeat=m)]
            best = max(vec_norm(z + u, p) for u in verts)
            val, u, exact, _ = reduced_worst_case(z, rho, p, r)
            assert exact
            assert_allclose(val, best, rtol=1e-12)
            assert_allclose(vec_norm(u, r), rho, rtol=1e-12)


def test_monotone_affine_in_lambda():
    rng = np.random.default_rng(3)
    z, beta = rng.standard_normal(4), rng.standard_normal(3)
    vals = [worst_case_loss(z, beta, UncertaintySet(Induced(2, 2), lam, 4, 3), 2).value
            for lam in (0.5, 1.0, 1.5, 2.0)]
    d = np.diff(vals)
    assert np.all(d >= 0)
    assert_allclose(d, d[0], rtol=1e-10)


def test_strictness_examples():
    assert strictness_probe(2, 1, 3, 200).fraction_strict == 1.0
    with pytest.raises(ValueError):
        strictness_probe(1, 2, 3)


def test_probe_equality_regime():
    res = equivalence_probe(2, UncertaintySet(Induced(1, 2), 1.0, 5, 3), 100)
    assert max(abs(res.min_gap), abs(res.max_gap)) < 1e-8
    assert res.sandwich_violations == 0


def test_probe_independent_of_scheduling():
    U = UncertaintySet(FrobeniusP(2), 1.0, 3, 2)
    a = equivalence_probe(3, U, 20, seed=5)

    def backwards(f, *its):
        # evaluate the trials last to first, return them in order
        args = list(zip(*its))
        out = [f(*t) for t in reversed(args)]
        return out[::-1]

    b = equivalence_probe(3, U, 20, seed=5, map_fn=backwards)
    assert a == b


def test_gap_limit_equality_case():
    assert_allclose(scaling_gap_limit([1, 1], [1, 0], 2, 2), 1)


def test_gap_limit_minimizer():
    # the uniform z minimizes ||z^{p-1}||_{q*} / ||z||_p^{p-1} when q < p
    m, p, q, lam = 3, 3.0, 1.5, 2.0
    beta = np.array([1.0, -2.0])
    lim = scaling_gap_limit(np.ones(m), beta, q, p, lam)
    assert_allclose(lim, lam * vec_norm(beta, dual_exponent(q)) / delta_value(m, q, p))


def test_gap_limit_sweep_converges():
    z, beta = np.array([1.0, 2.0]), np.array([0.0, 1.0])
    lim = scaling_gap_limit(z, beta, 1.5, 3, 2.0)
    gaps = scaling_gap_sweep(z, beta, 1.5, 3, 2.0)
    err = np.abs(gaps - lim)
    assert np.all(np.diff(err) <= 1e-12)
    assert err[-1] <= 1e-3 * lim


def test_membership_examples():
    lam = 0.8
    D = np.zeros((3, 3))
    D[0, 0] = lam
    for which in ("U", "Uprime", "Udoubleprime"):
        assert uncertainty_membership(D, which, lam)
    D = np.zeros((3, 3))
    D[:, 1] = 1.01 * lam / np.sqrt(3)
    for which in ("U", "Uprime", "Udoubleprime"):
        assert not uncertainty_membership(D, which, lam)


def test_membership_agrees_on_random():
    rng = np.random.default_rng(4)
    for _ in range(100):
        D = rng.standard_normal((3, 4)) * rng.uniform(0.1, 0.6)
        verdicts = {uncertainty_membership(D, w, 1.0, seed=1) for w in ("U", "Uprime", "Udoubleprime")}
        assert len(verdicts) == 1
