import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linprog

from robreg.norms import FrobeniusP, SchattenP, mat_norm
from robreg.numerics import LpProblem, bisect, solve_lp, svd


def test_svd_diagonal():
    U, s, V = svd(np.diag([3.0, 1.0]))
    assert_allclose(s, [3, 1], atol=1e-15)


def test_svd_zero():
    U, s, V = svd(np.zeros((2, 2)))
    assert_allclose(s, [0, 0])
    assert_allclose(U.T @ U, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_svd_round_trip(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 9, size=2)
    A = rng.standard_normal((m, n))
    U, s, V = svd(A)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    assert np.linalg.norm(U * s @ V.T - A) <= 1e-9 * (1 + np.linalg.norm(A))
    # LAPACK as an independent reference for the spectrum
    assert_allclose(s, np.linalg.svd(A, compute_uv=False), atol=1e-10)


def test_schatten2_is_frobenius():
    rng = np.random.default_rng(0)
    for _ in range(100):
        A = rng.standard_normal(rng.integers(1, 7, size=2))
        assert abs(mat_norm(A, SchattenP(2)) - mat_norm(A, FrobeniusP(2))) <= 1e-9


def test_lp_trivial():
    res = solve_lp(LpProblem([1.0], [[1.0]], [">="], [1.0]))
    assert res.status == "optimal"
    assert_allclose(res.x, [1.0])
    assert_allclose(res.value, 1.0)


def test_lp_unbounded():
    res = solve_lp(LpProblem([-1.0], np.zeros((0, 1)), [], []))
    assert res.status == "unbounded"


def test_lp_infeasible():
    res = solve_lp(LpProblem([1.0], [[1.0], [1.0]], ["<=", ">="], [1.0, 2.0]))
    assert res.status == "infeasible"


def _vertex_enumeration(c, A, b, upper):
    # all points where n of the hyperplanes {A x = b, x = 0, x = upper} meet
    n = c.size
    H = np.vstack([A, np.eye(n), np.eye(n)])
    h = np.concatenate([b, np.zeros(n), upper])
    best = np.inf
    for rows in itertools.combinations(range(H.shape[0]), n):
        M = H[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if np.all(A @ x <= b + 1e-9) and np.all(x >= -1e-9) and np.all(x <= upper + 1e-9):
            best = min(best, c @ x)
    return best


@pytest.mark.parametrize("seed", range(10))
def test_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, k = 5, 8
    c = rng.standard_normal(n)
    A = rng.standard_normal((k, n))
    b = rng.uniform(0.5, 2.0, k)  # x = 0 is feasible
    upper = rng.uniform(0.5, 3.0, n)
    res = solve_lp(LpProblem(c, A, ["<="] * k, b, np.zeros(n), upper))
    assert res.status == "optimal"
    assert_allclose(res.value, _vertex_enumeration(c, A, b, upper), atol=1e-9)


@pytest.mark.parametrize("seed", range(40))
def test_lp_matches_highs(seed):
    rng = np.random.default_rng(100 + seed)
    n, k = rng.integers(2, 7), rng.integers(1, 7)
    c = rng.standard_normal(n)
    A = rng.standard_normal((k, n))
    senses = list(rng.choice(["<=", ">=", "="], size=k, p=[0.5, 0.3, 0.2]))
    x0 = rng.uniform(0, 1, n)
    b = A @ x0  # feasible by construction
    lower = np.where(rng.random(n) < 0.3, -np.inf, 0.0)
    upper = np.where(rng.random(n) < 0.5, np.inf, 2.0)
    res = solve_lp(LpProblem(c, A, senses, b, lower, upper))
    A_ub = [A[i] if s == "<=" else -A[i] for i, s in enumerate(senses) if s != "="]
    b_ub = [b[i] if s == "<=" else -b[i] for i, s in enumerate(senses) if s != "="]
    eq = [i for i, s in enumerate(senses) if s == "="]
    ref = linprog(c, A_ub=np.array(A_ub).reshape(-1, n), b_ub=b_ub,
                  A_eq=A[eq].reshape(-1, n), b_eq=b[eq],
                  bounds=list(zip(lower, upper)), method="highs")
    if ref.status == 0:
        assert res.status == "optimal"
        assert_allclose(res.value, ref.fun, atol=1e-7, rtol=1e-7)
    else:
        # HiGHS sometimes reports "infeasible" for an unbounded problem;
        # the instance is feasible by construction, so it must be unbounded
        assert res.status == "unbounded"


def test_bisect_examples():
    assert_allclose(bisect(lambda x: x - 2, 0, 4), 2)
    assert_allclose(bisect(lambda x: x ** 3 - 8, 0, 4, tol=1e-10), 2, atol=1e-9)
    f = lambda v: max(v - 2, 0) + max(v - 3, 0) - 1
    assert_allclose(bisect(f, 2, 4), 3, atol=1e-10)


def test_bisect_bad_bracket():
    with pytest.raises(ValueError):
        bisect(lambda x: x + 1, 0, 1)
