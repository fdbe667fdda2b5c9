"""Small nonnegative matrices and overflow-safe products of them.

``M_i`` has first row ``a_i^k = sum_{l>=k} lambda_i^l / mu_i`` and ones on the
subdiagonal.  ``A_i`` is the mean-offspring matrix: every row equals
``b_i^r = lambda_i^r / mu_i`` and row ``l >= 2`` has an extra 1 in column
``l - 1``.

Products are evaluated as a row vector times one matrix at a time, with the
vector rescaled by an exact power of two after each step.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NoConvergence
from .model import ProcessModel


@functools.total_ordering
@dataclass(frozen=True)
class ScaledScalar:
    """Nonnegative number ``mantissa * 2**exponent`` with mantissa in [1, 2).

    Zero is stored as ``(0.0, 0)``.
    """

    mantissa: float
    exponent: int

    @classmethod
    def from_float(cls, x: float, exponent: int = 0) -> "ScaledScalar":
        if x < 0 or not math.isfinite(x):
            raise ValueError(f"ScaledScalar needs a finite nonnegative value, got {x}")
        if x == 0:
            return ZERO
        m, e = math.frexp(x)
        return cls(2.0 * m, exponent + e - 1)

    def __float__(self) -> float:
        try:
            return math.ldexp(self.mantissa, self.exponent)
        except OverflowError:
            return math.inf

    def log2(self) -> float:
        if self.mantissa == 0:
            return -math.inf
        return math.log2(self.mantissa) + self.exponent

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def __mul__(self, other):
        if not isinstance(other, ScaledScalar):
            other = ScaledScalar.from_float(float(other))
        if self.is_zero() or other.is_zero():
            return ZERO
        return ScaledScalar.from_float(self.mantissa * other.mantissa, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, ScaledScalar):
            other = ScaledScalar.from_float(float(other))
        if other.is_zero():
            raise ZeroDivisionError("division by zero ScaledScalar")
        if self.is_zero():
            return ZERO
        return ScaledScalar.from_float(self.mantissa / other.mantissa, self.exponent - other.exponent)

    def __add__(self, other):
        if not isinstance(other, ScaledScalar):
            other = ScaledScalar.from_float(float(other))
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        big, small = (self, other) if self.exponent >= other.exponent else (other, self)
        shift = small.exponent - big.exponent
        return ScaledScalar.from_float(big.mantissa + math.ldexp(small.mantissa, shift), big.exponent)

    __radd__ = __add__

    def __lt__(self, other):
        if not isinstance(other, ScaledScalar):
            other = ScaledScalar.from_float(float(other))
        if self.is_zero() or other.is_zero():
            return self.mantissa < other.mantissa
        return (self.exponent, self.mantissa) < (other.exponent, other.mantissa)


ZERO = ScaledScalar(0.0, 0)
ONE = ScaledScalar(1.0, 0)


@dataclass(frozen=True)
class ScaledVector:
    """Nonnegative vector ``direction * 2**exponent``.

    After normalisation the largest direction entry lies in [1, 2); the
    scaling is a power of two, so it is exact.
    """

    direction: np.ndarray
    exponent: int = 0

    @classmethod
    def normalized(cls, v: np.ndarray, exponent: int = 0) -> "ScaledVector":
        v = np.asarray(v, dtype=float)
        top = float(v.max()) if v.size else 0.0
        if top == 0.0:
            return cls(np.zeros_like(v), 0)
        _, e = math.frexp(top)
        return cls(np.ldexp(v, -(e - 1)), exponent + e - 1)

    @property
    def scale(self) -> ScaledScalar:
        return ScaledScalar(1.0, self.exponent) if self.direction.any() else ZERO

    def is_zero(self) -> bool:
        return not self.direction.any()

    def entry(self, k: int) -> ScaledScalar:
        return ScaledScalar.from_float(float(self.direction[k]), self.exponent)

    def dot(self, w: np.ndarray) -> ScaledScalar:
        return ScaledScalar.from_float(float(self.direction @ w), self.exponent)

    def times(self, m: np.ndarray) -> "ScaledVector":
        """Row vector times matrix."""
        return ScaledVector.normalized(self.direction @ m, self.exponent)

    def left_times(self, m: np.ndarray) -> "ScaledVector":
        """Matrix times column vector."""
        return ScaledVector.normalized(m @ self.direction, self.exponent)

    def to_array(self) -> np.ndarray:
        return np.ldexp(self.direction, self.exponent)


def unit_vector(R: int, k: int = 0) -> ScaledVector:
    e = np.zeros(R)
    e[k] = 1.0
    return ScaledVector(e, 0)


# ---------------------------------------------------------------------------
# M_i and A_i


def _companion(first_row: np.ndarray) -> np.ndarray:
    R = first_row.size
    m = np.zeros((R, R))
    m[0] = first_row
    if R > 1:
        m[np.arange(1, R), np.arange(0, R - 1)] = 1.0
    return m


def _tail_sums(lam: tuple) -> np.ndarray:
    # sum_{l >= k} lambda^l for k = 1..R, accumulated from the right
    return np.cumsum(np.asarray(lam, dtype=float)[::-1])[::-1]


@functools.lru_cache(maxsize=4096)
def _matrix_M_canonical(model: ProcessModel, site: int) -> np.ndarray:
    mu, lam = model.rates_at(site)
    m = _companion(_tail_sums(lam) / mu)
    m.setflags(write=False)
    return m


@functools.lru_cache(maxsize=4096)
def _matrix_A_canonical(model: ProcessModel, site: int) -> np.ndarray:
    mu, lam = model.rates_at(site)
    R = model.R
    a = np.tile(np.asarray(lam, dtype=float) / mu, (R, 1))
    if R > 1:
        a[np.arange(1, R), np.arange(0, R - 1)] += 1.0
    a.setflags(write=False)
    return a


def matrix_M(model: ProcessModel, i: int) -> np.ndarray:
    if i < 1:
        raise ValueError("M_i is defined for sites i >= 1; use entry_matrix for site 0")
    return _matrix_M_canonical(model, model.canonical_site(i))


def matrix_A(model: ProcessModel, i: int) -> np.ndarray:
    if i < 1:
        raise ValueError("A_i is defined for sites i >= 1")
    return _matrix_A_canonical(model, model.canonical_site(i))


@functools.lru_cache(maxsize=256)
def entry_matrix(model: ProcessModel) -> np.ndarray:
    """``M_0``: the M-matrix of site 0 with ``mu_0`` replaced by the total up-rate.

    Its first row is ``(1, P(first jump >= 2), ..., P(first jump = R))``, so
    ``e1 @ M_0 == e1`` whenever site 0 only steps to site 1.
    """
    lam0 = model.rates_at(0)[1]
    m = _companion(_tail_sums(lam0) / math.fsum(lam0))
    m[0, 0] = 1.0
    m.setflags(write=False)
    return m


def clear_caches() -> None:
    """Drop cached matrices (used to time computations from a cold start)."""
    _matrix_M_canonical.cache_clear()
    _matrix_A_canonical.cache_clear()
    entry_matrix.cache_clear()


# ---------------------------------------------------------------------------
# product sequences


def row_products(model: ProcessModel, start: ScaledVector, first_site: int) -> Iterator[ScaledVector]:
    """Yield ``start``, ``start M_{f}``, ``start M_f M_{f+1}``, ...  with f = first_site."""
    v = start
    yield v
    i = first_site
    R1 = model.R == 1
    while True:
        m = matrix_M(model, i)
        if R1:
            v = ScaledVector.normalized(v.direction * m[0, 0], v.exponent)
        else:
            v = v.times(m)
        yield v
        i += 1


def phi_states(model: ProcessModel) -> Iterator[ScaledVector]:
    """Row vectors ``e1 M_1 ... M_n`` for n = 0, 1, 2, ..."""
    return row_products(model, unit_vector(model.R), 1)


def boundary_states(model: ProcessModel) -> Iterator[ScaledVector]:
    """Row vectors ``e1 M_0 M_1 ... M_n`` for n = 0, 1, 2, ...

    These weight the excursion from 0 by the law of its first jump.  They
    coincide with :func:`phi_states` when ``model.unit_entry``.
    """
    start = ScaledVector.normalized(entry_matrix(model)[0].copy())
    return row_products(model, start, 1)


def phi(model: ProcessModel, n: int) -> ScaledScalar:
    """``e1 M_1 ... M_n e1^T``; the empty product (n = 0) gives 1."""
    if n < 0:
        raise ValueError("n must be >= 0")
    for k, v in enumerate(phi_states(model)):
        if k == n:
            return v.entry(0)


def boundary_phi(model: ProcessModel, n: int) -> ScaledScalar:
    """``e1 M_0 M_1 ... M_n e1^T``; equals ``phi(n)`` when site 0 only steps by +1."""
    if n < 0:
        raise ValueError("n must be >= 0")
    for k, v in enumerate(boundary_states(model)):
        if k == n:
            return v.entry(0)


def phi_sequence(model: ProcessModel, n: int, boundary: bool = False) -> list[ScaledScalar]:
    """``[phi_0, ..., phi_n]`` (or the boundary-weighted variant)."""
    states = boundary_states(model) if boundary else phi_states(model)
    out = []
    for v in states:
        out.append(v.entry(0))
        if len(out) > n:
            return out


def window_column_sums(model: ProcessModel, lo: int, b: int) -> list[ScaledScalar]:
    """``[e1 M_j ... M_{b-1} e1^T for j = lo .. b]``, evaluated right to left.

    Suffix products are shared, so the cost is linear in ``b - lo``.
    """
    col = unit_vector(model.R)
    out = [col.entry(0)]  # j = b, empty product
    for j in range(b - 1, lo - 1, -1):
        col = col.left_times(matrix_M(model, j))
        out.append(col.entry(0))
    out.reverse()
    return out


def phi_window(model: ProcessModel, j: int, b: int) -> ScaledScalar:
    """``e1 M_j ... M_{b-1} e1^T`` for ``1 <= j <= b``."""
    if not 1 <= j <= b:
        raise ValueError(f"need 1 <= j <= b, got j={j}, b={b}")
    return window_column_sums(model, j, b)[0]


def a_product_mass(model: ProcessModel, n: int) -> ScaledScalar:
    """``e1 A_1 ... A_{n-1} 1``; equals 1 for n = 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = unit_vector(model.R)
    for i in range(1, n):
        v = v.times(matrix_A(model, i))
    return v.dot(np.ones(model.R))


def a_product_row(model: ProcessModel, start: np.ndarray, n: int) -> ScaledVector:
    """``start A_1 ... A_{n-1}`` as a scaled row vector."""
    v = ScaledVector.normalized(np.asarray(start, dtype=float))
    for i in range(1, n):
        v = v.times(matrix_A(model, i))
    return v


def period_matrix(model: ProcessModel, blocks: int = 1) -> np.ndarray:
    """Product of ``M_i`` over ``blocks`` tail periods, starting at the first tail site.

    No rescaling happens here, so callers keep ``blocks`` small.
    """
    L = max(model.prefix_length, 1)
    R = model.R
    p = np.eye(R)
    for i in range(L, L + blocks * model.period):
        p = p @ matrix_M(model, i)
    return p


# ---------------------------------------------------------------------------
# Perron root


def _power_iteration(m: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray] | None:
    x = np.ones(m.shape[0])
    for _ in range(max_iter):
        y = m @ x
        top = float(y.max())
        if top == 0.0:
            return 0.0, x
        if np.all(x > 0):
            ratios = y / x
            lo, hi = float(ratios.min()), float(ratios.max())
            if hi - lo <= tol * hi:
                return 0.5 * (lo + hi), y / top
        elif float(np.max(np.abs(y / top - x))) <= tol:
            # x has zeros: accept only a genuine eigenvector
            return top, y / top
        x = y / top
    return None


def perron_pair(m: np.ndarray, tol: float = 1e-13, max_iter: int = 1_000_000) -> tuple[float, np.ndarray]:
    """Perron root and eigenvector of an irreducible nonnegative matrix.

    Power iteration from the all-ones vector, stopped when the Collatz-Wielandt
    bracket ``[min (Mx)/x, max (Mx)/x]`` is narrower than ``tol`` relative.
    Imprimitive matrices make the iteration oscillate; the fallback iterates
    on ``M + s I``, which has the same eigenvector and a root shifted by ``s``.
    """
    m = _check_square_nonnegative(m)
    if not m.any():
        return 0.0, np.ones(m.shape[0])

    found = _power_iteration(m, tol, min(max_iter, 2000))
    if found is not None:
        return found
    shift = float(m.sum(axis=1).max())
    found = _power_iteration(m + shift * np.eye(m.shape[0]), tol * 0.5, max_iter)
    if found is None:
        raise NoConvergence(max_iter)
    root, vec = found
    return max(root - shift, 0.0), vec


def _check_square_nonnegative(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("square matrix required")
    if np.any(m < 0):
        raise ValueError("nonnegative matrix required")
    return m


def strongly_connected_blocks(m: np.ndarray) -> list[list[int]]:
    """Index sets of the strongly connected components of the graph of ``m > 0``."""
    count, labels = connected_components(csr_matrix(m > 0), directed=True, connection="strong")
    return [np.flatnonzero(labels == c).tolist() for c in range(count)]


def spectral_radius(m: np.ndarray, tol: float = 1e-13, max_iter: int = 1_000_000) -> float:
    """Perron root of a nonnegative matrix.

    The root of a reducible matrix is the largest root among its irreducible
    diagonal blocks, so each strongly connected block is iterated separately.
    """
    m = _check_square_nonnegative(m)
    best = 0.0
    for block in strongly_connected_blocks(m):
        sub = m[np.ix_(block, block)]
        if len(block) == 1:
            best = max(best, float(sub[0, 0]))
        else:
            best = max(best, perron_pair(sub, tol, max_iter)[0])
    return best
