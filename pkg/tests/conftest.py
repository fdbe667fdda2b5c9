from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from skipfree.model import RateProfile, TailRule, build_model, homogeneous

MODELS = Path(__file__).resolve().parents[1] / "models"


@pytest.fixture
def models_dir() -> Path:
    return MODELS


@pytest.fixture
def mm1():
    return homogeneous(1, (0, 1), (2, 1))


@pytest.fixture
def r2():
    """mu=4, lambda=(1,1) at every site >= 1; site 0 jumps +1 or +2 at rate 1 each."""
    return homogeneous(2, (0, 1, 1), (4, 1, 1))


@pytest.fixture
def r2_unit():
    """Same bulk as ``r2`` but site 0 only steps to 1 (rate 2)."""
    return homogeneous(2, (0, 2, 0), (4, 1, 1))


def random_model(rng: np.random.Generator, R: int, L: int | None = None, p: int | None = None, lo=0.1, hi=10.0):
    """Random valid model with rates drawn uniformly from [lo, hi]."""
    L = int(rng.integers(1, 5)) if L is None else L
    p = int(rng.integers(1, 4)) if p is None else p
    rows = [tuple([0.0] + list(rng.uniform(lo, hi, R)))]
    rows += [tuple(rng.uniform(lo, hi, R + 1)) for _ in range(L - 1)]
    block = tuple(tuple(rng.uniform(lo, hi, R + 1)) for _ in range(p))
    return build_model(RateProfile(R, tuple(rows), TailRule("periodic", block)))


rate = st.floats(min_value=0.1, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def models(draw, R=st.sampled_from([1, 2, 3]), max_prefix=4, max_period=3):
    r = draw(R)
    L = draw(st.integers(1, max_prefix))
    p = draw(st.integers(1, max_period))
    row0 = (0.0,) + tuple(draw(rate) for _ in range(r))
    rows = [row0] + [tuple(draw(rate) for _ in range(r + 1)) for _ in range(L - 1)]
    block = [tuple(draw(rate) for _ in range(r + 1)) for _ in range(p)]
    return build_model(RateProfile(r, tuple(rows), TailRule("periodic", tuple(block))))


@st.composite
def stable_models(draw, R=st.sampled_from([1, 2, 3])):
    """Homogeneous-tail models with strong downward drift (sum_r r*lambda^r < mu/2)."""
    r = draw(R)
    lam = [draw(st.floats(0.1, 2.0)) for _ in range(r)]
    drift = sum((k + 1) * x for k, x in enumerate(lam))
    mu = draw(st.floats(2.0, 4.0)) * drift
    row0 = (0.0,) + tuple(draw(st.floats(0.1, 3.0)) for _ in range(r))
    return homogeneous(r, row0, (mu, *lam))


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
