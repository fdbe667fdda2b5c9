"""Finite truncations solved by direct elimination, as an independent check.

The generator is restricted to ``{0, ..., N}``; any jump that would overshoot
``N`` is redirected to ``N`` so rows stay conservative.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularSystem, TooSmall
from .model import ProcessModel

NEGATIVE_CLAMP = 1e-12
PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class TruncatedGenerator:
    N: int
    Q: np.ndarray
    boundary: str = "lump"


def truncate(model: ProcessModel, N: int) -> TruncatedGenerator:
    if N < model.R + 1:
        raise TooSmall(f"truncation level N={N} must be at least R+1={model.R + 1}")
    Q = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        row = model.generator_row(i)
        for j, rate in row.entries.items():
            Q[i, min(j, N)] += rate
        Q[i, i] = 0.0
        Q[i, i] = -Q[i].sum()
    return TruncatedGenerator(N, Q)


def truncated_embedded(model: ProcessModel, N: int) -> np.ndarray:
    """Jump-chain transition matrix on ``{0..N}`` with the same lumping."""
    if N < model.R + 1:
        raise TooSmall(f"truncation level N={N} must be at least R+1={model.R + 1}")
    P = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        for j, p in model.embedded_row(i).items():
            P[i, min(j, N)] += p
    return P


def gaussian_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    x = np.array(b, dtype=float)
    n = A.shape[0]
    scale = float(np.abs(A).max()) or 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) <= PIVOT_FLOOR + 1e-14 * scale:
            raise SingularSystem(f"zero pivot in column {k}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            x[[k, p]] = x[[p, k]]
        factors = A[k + 1 :, k] / A[k, k]
        A[k + 1 :, k:] -= np.outer(factors, A[k, k:])
        x[k + 1 :] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1 :] @ x[k + 1 :]) / A[k, k]
    return x


def _null_vector(M: np.ndarray) -> np.ndarray:
    """Probability vector ``v`` with ``v M = 0``: the last equation becomes ``sum(v) = 1``."""
    n = M.shape[0]
    A = M.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    v = gaussian_solve(A, rhs)
    if np.any(v < -NEGATIVE_CLAMP):
        raise SingularSystem("solution has negative entries; truncation is likely reducible")
    v = np.where(v < 0, 0.0, v)
    return v / v.sum()


def solve_stationary(q: TruncatedGenerator) -> np.ndarray:
    """Stationary vector of the truncated generator (``psi Q = 0``, ``sum psi = 1``)."""
    return _null_vector(q.Q)


def solve_embedded_stationary(model: ProcessModel, N: int) -> np.ndarray:
    """Stationary vector of the truncated jump chain (``pi (P - I) = 0``)."""
    P = truncated_embedded(model, N)
    return _null_vector(P - np.eye(N + 1))


@dataclass
class ComparisonReport:
    N: int
    kmax: int
    psi_formula: np.ndarray
    psi_oracle: np.ndarray
    pi_formula: np.ndarray
    pi_oracle: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def psi_diff(self) -> np.ndarray:
        return np.abs(self.psi_formula - self.psi_oracle)

    @property
    def pi_diff(self) -> np.ndarray:
        return np.abs(self.pi_formula - self.pi_oracle)

    @property
    def sup_norm(self) -> float:
        return float(self.psi_diff.max())

    @property
    def tv_distance(self) -> float:
        return 0.5 * float(self.psi_diff.sum())

    @property
    def pi_sup_norm(self) -> float:
        return float(self.pi_diff.max())

    @property
    def pi_tv_distance(self) -> float:
        return 0.5 * float(self.pi_diff.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "psi_formula", "psi_oracle", "abs_diff"])
        for k in range(self.kmax + 1):
            w.writerow([k, fmt(self.psi_formula[k]), fmt(self.psi_oracle[k]), fmt(self.psi_diff[k])])
        w.writerow(["N", "sup_norm", "tv_distance"])
        w.writerow([self.N, fmt(self.sup_norm), fmt(self.tv_distance)])
        return buf.getvalue()


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def compare(model: ProcessModel, N: int, kmax: int | None = None) -> ComparisonReport:
    """Closed-form laws against the truncated solves on ``0..kmax`` (default ``kmax = N``)."""
    from .stationary import psi_stationary

    if kmax is None:
        kmax = N
    kmax = min(kmax, N)
    res = psi_stationary(model, kmax=kmax)
    psi_o = solve_stationary(truncate(model, N))
    pi_o = solve_embedded_stationary(model, N)
    k = min(kmax, res.kmax)
    return ComparisonReport(
        N=N,
        kmax=k,
        psi_formula=res.psi[: k + 1],
        psi_oracle=psi_o[: k + 1],
        pi_formula=res.pi[: k + 1],
        pi_oracle=pi_o[: k + 1],
    )


def convergence_study(model: ProcessModel, levels=(50, 100, 200, 400), kmax: int | None = None) -> list[ComparisonReport]:
    """Reports for increasing ``N``, compared on a common range ``0..kmax``."""
    if kmax is None:
        kmax = min(levels)
    return [compare(model, N, kmax) for N in levels]
