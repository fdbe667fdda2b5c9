import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skipfree.branching import (
    count_crossings,
    enumerate_offspring,
    expected_type_counts,
    occupation_counts,
    occupation_identity_holds,
    offspring_mean_row,
    offspring_pmf,
)
from skipfree.errors import NotAnExcursion
from skipfree.linalg import a_product_mass, matrix_A
from skipfree.model import homogeneous

from conftest import models


def test_pmf_geometric():
    m = homogeneous(1, (0, 1), (1, 1))
    for k in range(10):
        assert offspring_pmf(m, 3, 1, [k]) == pytest.approx(0.5 ** (k + 1), rel=1e-14)


def test_pmf_examples(r2):
    assert offspring_pmf(r2, 1, 2, [0, 0]) == 0.0
    # multinomial: 2! (1/6)(1/6)(4/6) = 8/216
    assert offspring_pmf(r2, 1, 1, [1, 1]) == pytest.approx(1 / 27, rel=1e-14)
    assert offspring_pmf(r2, 1, 2, [2, 1]) == pytest.approx(1 / 27, rel=1e-14)
    assert offspring_pmf(r2, 1, 1, [1, 1]) == pytest.approx(
        math.comb(2, 1) * (1 / 6) * (1 / 6) * (4 / 6), rel=1e-14
    )


def test_pmf_argument_errors(r2):
    with pytest.raises(ValueError):
        offspring_pmf(r2, 0, 1, [0, 0])
    with pytest.raises(ValueError):
        offspring_pmf(r2, 1, 3, [0, 0])
    with pytest.raises(ValueError):
        offspring_pmf(r2, 1, 1, [0])


def test_mean_rows(mm1, r2):
    np.testing.assert_array_equal(offspring_mean_row(mm1, 1, 1), [0.5])
    np.testing.assert_array_equal(offspring_mean_row(r2, 1, 2), [1.25, 0.25])


@pytest.mark.parametrize("parent", [1, 2])
def test_enumeration_matches_mean_row(r2, parent):
    pairs, omitted = enumerate_offspring(r2, 1, parent)
    mass = math.fsum(p for _, p in pairs)
    assert mass >= 1 - 1e-10
    assert mass + omitted == pytest.approx(1.0, abs=1e-14)
    mean = sum(np.array(u) * p for u, p in pairs)
    np.testing.assert_allclose(mean, matrix_A(r2, 1)[parent - 1], atol=1e-8)


@st.composite
def offspring_sites(draw):
    """Single-row models where the death rate dominates, so the support stays small."""
    R = draw(st.integers(1, 3))
    lam = [draw(st.floats(0.1, 2.0)) for _ in range(R)]
    mu = draw(st.floats(1.0, 10.0)) + sum(lam)
    return homogeneous(R, (0.0, *lam), (mu, *lam))


@given(offspring_sites(), st.integers(1, 6), st.data())
@settings(max_examples=30, deadline=None)
def test_enumeration_random_sites(m, i, data):
    parent = data.draw(st.integers(1, m.R))
    pairs, omitted = enumerate_offspring(m, i, parent)
    mass = math.fsum(p for _, p in pairs)
    assert mass >= 1 - 1e-10 and omitted <= 1e-12
    mean = sum(np.array(u, dtype=float) * p for u, p in pairs)
    np.testing.assert_allclose(mean, offspring_mean_row(m, i, parent), atol=1e-8)


def test_expected_type_counts_examples(mm1, r2, r2_unit):
    np.testing.assert_array_equal(expected_type_counts(r2_unit, 1), [1.0, 0.0])
    assert expected_type_counts(mm1, 3)[0] == pytest.approx(0.25, rel=1e-15)
    np.testing.assert_allclose(expected_type_counts(r2_unit, 2), [0.25, 0.25], rtol=1e-15)
    # first jump +1 or +2 with equal odds
    np.testing.assert_allclose(expected_type_counts(r2, 1), [0.5, 0.5], rtol=1e-15)


@given(models(), st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_expected_counts_total_is_product_mass(m, i):
    if m.unit_entry:
        assert math.isclose(expected_type_counts(m, i).sum(), float(a_product_mass(m, i)), rel_tol=1e-12)


def test_count_crossings_examples():
    U = count_crossings([0, 1, 0], 2)
    np.testing.assert_array_equal(U, [[1, 0]])
    U = count_crossings([0, 2, 1, 0], 2)
    np.testing.assert_array_equal(U, [[0, 1], [1, 0]])
    # 0 -> 1 -> 3 -> 2 -> 1 -> 0 with R = 2
    U = count_crossings([0, 1, 3, 2, 1, 0], 2)
    np.testing.assert_array_equal(U, [[1, 0], [0, 1], [1, 0]])


@pytest.mark.parametrize("path", [[0], [1, 0], [0, 1], [0, 1, 0, 1, 0], [0, 3, 2, 1, 0], [0, 1, 3, 2, 0]])
def test_count_crossings_rejects(path):
    with pytest.raises(NotAnExcursion):
        count_crossings(path, 2)


@st.composite
def excursions(draw):
    R = draw(st.integers(1, 4))
    path = [0]
    state = 0
    steps = draw(st.lists(st.integers(-1, R), min_size=1, max_size=60))
    for s in steps:
        if s == 0:
            continue
        nxt = state + s
        if nxt <= 0:
            break
        path.append(nxt)
        state = nxt
    if state == 0:
        path.append(1)
        state = 1
    path.extend(range(state - 1, -1, -1))
    return R, path


@given(excursions())
@settings(max_examples=300, deadline=None)
def test_occupation_identity(case):
    R, path = case
    assert occupation_identity_holds(path, R)
    U = count_crossings(path, R)
    visits = occupation_counts(path)
    assert visits[0] == 1
    # an excursion enters level 1 exactly once
    assert U.sum(axis=1)[0] == 1
