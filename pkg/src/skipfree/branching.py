"""The multi-type branching process hidden in an excursion from 0.

Level ``i`` records every upward crossing into ``[i, inf)`` from below ``i``;
a crossing that lands on ``i + r - 1`` has type ``r``.  ``U_i`` counts the
crossings of each type.  Given a type-1 parent at level ``i``, the children at
level ``i + 1`` form a multinomial-geometric vector; a type-``l`` parent
(``l >= 2``) has the same children plus one extra of type ``l - 1``.
"""

from __future__ import annotations

import math
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .errors import NotAnExcursion
from .linalg import a_product_row, matrix_A
from .model import ProcessModel


def _offspring_params(model: ProcessModel, i: int) -> tuple[np.ndarray, float]:
    mu, lam = model.rates_at(i)
    total = mu + sum(lam)
    return np.asarray(lam, dtype=float) / total, mu / total


def offspring_pmf(model: ProcessModel, i: int, parent_type: int, children: Sequence[int]) -> float:
    """P(children at level ``i + 1`` | one parent of ``parent_type`` at level ``i``).

    Vectors outside the support (a type-``l`` parent with no child of type
    ``l - 1``) get probability 0.
    """
    R = model.R
    if i < 1:
        raise ValueError("offspring laws are defined for levels i >= 1")
    if not 1 <= parent_type <= R:
        raise ValueError(f"parent_type must be in 1..{R}")
    u = [int(x) for x in children]
    if len(u) != R or any(x < 0 for x in u):
        raise ValueError(f"children must be {R} nonnegative integers")
    if parent_type >= 2:
        if u[parent_type - 2] < 1:
            return 0.0
        u[parent_type - 2] -= 1

    p_up, p_down = _offspring_params(model, i)
    n = sum(u)
    log_p = math.lgamma(n + 1) + math.log(p_down)
    for count, p in zip(u, p_up):
        if count:
            if p == 0.0:
                return 0.0
            log_p += count * math.log(p) - math.lgamma(count + 1)
    return math.exp(log_p)


def offspring_mean_row(model: ProcessModel, i: int, parent_type: int) -> np.ndarray:
    """Mean offspring vector of a ``parent_type`` parent at level ``i``: row of ``A_i``."""
    if not 1 <= parent_type <= model.R:
        raise ValueError(f"parent_type must be in 1..{model.R}")
    return np.array(matrix_A(model, i)[parent_type - 1])


def _compositions(total: int, parts: int) -> Iterator[tuple]:
    # stars and bars
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


def offspring_support_cap(model: ProcessModel, i: int, tail: float = 1e-12) -> int:
    """Smallest ``m`` with P(more than ``m`` free children) below ``tail``.

    The free-children count is geometric with ratio ``q = sum(lambda)/total``,
    so the tail beyond ``m`` is exactly ``q**(m+1)``.
    """
    p_up, _ = _offspring_params(model, i)
    q = float(p_up.sum())
    if q == 0.0:
        return 0
    return max(0, math.ceil(math.log(tail) / math.log(q)) - 1)


def enumerate_offspring(model: ProcessModel, i: int, parent_type: int, tail: float = 1e-12):
    """Truncated support of the offspring law: ``(children, probability)`` pairs.

    Returns the pairs plus the exact omitted mass ``q**(cap+1)``.
    """
    cap = offspring_support_cap(model, i, tail)
    R = model.R
    pairs = []
    for m in range(cap + 1):
        for u in _compositions(m, R):
            u = list(u)
            if parent_type >= 2:
                u[parent_type - 2] += 1
            pairs.append((tuple(u), offspring_pmf(model, i, parent_type, u)))
    q = float(_offspring_params(model, i)[0].sum())
    return pairs, q ** (cap + 1)


def expected_type_counts(model: ProcessModel, i: int) -> np.ndarray:
    """``E U_i``: the law of the first jump out of 0 times ``A_1 ... A_{i-1}``.

    The first-jump law is ``e1`` when site 0 only steps to site 1, which gives
    ``e1 A_1 ... A_{i-1}``.
    """
    if i < 1:
        raise ValueError("levels start at 1")
    return a_product_row(model, model.entry_law(), i).to_array()


def count_crossings(path: Sequence[int], R: int) -> np.ndarray:
    """Crossing counts ``U_1, U_2, ...`` of one excursion, as rows of a ``(levels, R)`` array.

    ``path`` must start at 0, end at its first return to 0, and move by -1 or
    by +1..+R at each step.  Row ``i - 1`` holds ``U_i``; levels run up to the
    path maximum.
    """
    path = [int(x) for x in path]
    if len(path) < 2 or path[0] != 0 or path[-1] != 0:
        raise NotAnExcursion("an excursion starts and ends at 0")
    if any(x == 0 for x in path[1:-1]):
        raise NotAnExcursion("the path revisits 0 before its end")
    top = max(path)
    U = np.zeros((max(top, 1), R), dtype=np.int64)
    for x, y in zip(path, path[1:]):
        step = y - x
        if step == -1:
            continue
        if not 1 <= step <= R:
            raise NotAnExcursion(f"invalid step {x} -> {y}")
        for level in range(x + 1, y + 1):
            U[level - 1, y - level] += 1
    return U


def occupation_counts(path: Sequence[int]) -> np.ndarray:
    """Visits to each site by ``X_0, ..., X_{T-1}``."""
    return np.bincount(np.asarray(path[:-1], dtype=np.int64))


def occupation_identity_holds(path: Sequence[int], R: int) -> bool:
    """Check that visits to ``i >= 1`` equal ``U_{i,1} + sum(U_{i+1})`` for every level."""
    U = count_crossings(path, R)
    visits = occupation_counts(path)
    levels = U.shape[0]
    for i in range(1, max(levels, visits.size)):
        seen = int(visits[i]) if i < visits.size else 0
        first = int(U[i - 1, 0]) if i - 1 < levels else 0
        above = int(U[i].sum()) if i < levels else 0
        if seen != first + above:
            return False
    return True
