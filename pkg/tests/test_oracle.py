import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skipfree.errors import SingularSystem, TooSmall
from skipfree.model import RateProfile, TailRule, build_model, homogeneous
from skipfree.oracle import (
    compare,
    convergence_study,
    gaussian_solve,
    solve_embedded_stationary,
    solve_stationary,
    truncate,
    truncated_embedded,
)

from conftest import stable_models


def test_truncate_rows(r2):
    q = truncate(r2, 20)
    g = r2.generator_row(7)
    assert q.Q[7, 7] == g.diagonal
    for j, rate in g.entries.items():
        assert q.Q[7, j] == rate
    # site N-1: the +2 jump overshoots N and is lumped onto N
    assert q.Q[19, 20] == 2.0
    np.testing.assert_allclose(q.Q.sum(axis=1), 0.0, atol=1e-14)
    assert np.all(q.Q - np.diag(np.diag(q.Q)) >= 0)


def test_truncation_too_small(r2):
    with pytest.raises(TooSmall):
        truncate(r2, 2)
    with pytest.raises(TooSmall):
        truncated_embedded(r2, 2)


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_gaussian_solve_matches_numpy(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + n * np.eye(n)
    b = rng.normal(size=n)
    np.testing.assert_allclose(gaussian_solve(A, b), np.linalg.solve(A, b), rtol=1e-10, atol=1e-12)


def test_gaussian_solve_pivots():
    # zero in the (0, 0) slot needs a row swap
    A = np.array([[0.0, 1.0], [2.0, 3.0]])
    np.testing.assert_allclose(gaussian_solve(A, [1.0, 8.0]), [2.5, 1.0])
    with pytest.raises(SingularSystem):
        gaussian_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 2.0])


def test_two_state_balance():
    m = build_model(RateProfile(1, [(0, 3), (2, 0)], TailRule("constant")))
    psi = solve_stationary(truncate(m, 2))
    expected = np.array([1 / 3, 1 / 2, 0.0])
    np.testing.assert_allclose(psi, expected / expected.sum(), atol=1e-15)


def test_mm1_geometric(mm1):
    psi = solve_stationary(truncate(mm1, 100))
    np.testing.assert_allclose(psi, 0.5 * 0.5 ** np.arange(101), rtol=0, atol=1e-10)
    pi = solve_embedded_stationary(mm1, 100)
    assert pi[0] == pytest.approx(0.25, abs=1e-12)
    assert np.all(pi >= 0) and pi.sum() == pytest.approx(1.0, abs=1e-15)


@given(stable_models())
@settings(max_examples=25, deadline=None)
def test_solution_is_null_vector(m):
    q = truncate(m, 80)
    psi = solve_stationary(q)
    assert np.max(np.abs(psi @ q.Q)) <= 1e-10
    assert np.all(psi >= 0)


@given(stable_models())
@settings(max_examples=20, deadline=None)
def test_embedded_and_continuous_link(m):
    N = 80
    psi = solve_stationary(truncate(m, N))
    pi = solve_embedded_stationary(m, N)
    rates = np.array([m.total_rate(k) for k in range(N + 1)])
    nu = pi / rates
    np.testing.assert_allclose(nu / nu.sum(), psi, rtol=0, atol=1e-9)


def test_compare_mm1(mm1):
    rep = compare(mm1, 100, kmax=60)
    assert rep.tv_distance <= 1e-10


def test_compare_csv_layout(r2):
    rep = compare(r2, 200, kmax=30)
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["k", "psi_formula", "psi_oracle", "abs_diff"]
    assert len(rows) == 1 + 31 + 2
    assert rows[-2] == ["N", "sup_norm", "tv_distance"]
    assert float(rows[-1][1]) == rep.sup_norm
    for k, row in enumerate(rows[1:32]):
        assert int(row[0]) == k and float(row[1]) == rep.psi_formula[k]


@pytest.mark.parametrize("fixture", ["r2", "r2_unit", "mm1"])
def test_convergence_is_monotone(fixture, request):
    m = request.getfixturevalue(fixture)
    errs = [r.sup_norm for r in convergence_study(m, kmax=40)]
    assert all(b <= a + 1e-13 for a, b in zip(errs, errs[1:]))


def test_near_critical_convergence():
    # tail ratio 0.99: truncation error decays slowly but monotonically
    m = homogeneous(1, (0, 1), (1, 0.99))
    reports = convergence_study(m, levels=(50, 100, 200, 400), kmax=40)
    errs = [r.sup_norm for r in reports]
    assert all(b <= a + 1e-13 for a, b in zip(errs, errs[1:]))
    assert errs[0] > 1e-4 and errs[-1] < errs[0] / 2
