"""Closed-form exit probabilities, return times and stationary laws.

Every excursion quantity is a weighted sum of ``theta_n = e1 M_0 M_1 ... M_n e1^T``
where ``M_0`` encodes the first jump out of site 0 (see
:func:`skipfree.linalg.entry_matrix`).  When site 0 only steps to site 1,
``theta_n`` is exactly ``e1 M_1 ... M_n e1^T``.

* expected visits to ``n >= 1`` per excursion of the embedded chain:
  ``(total_n / mu_n) * theta_{n-1}``
* ``E T = 1 + sum_n (total_n / mu_n) theta_{n-1}``
* ``E eta = 1 / sum(lambda_0) + sum_n theta_{n-1} / mu_n``
* ``pi_k`` = visits / ``E T``; ``psi_k = (theta_{k-1} / mu_k) / E eta``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import (
    POSITIVE_RECURRENT,
    SeriesWalk,
    classify,
    tail_certificate,
    walk_series,
)
from .errors import BadWindow, NotPositiveRecurrent
from .linalg import ScaledScalar, boundary_phi, boundary_states, window_column_sums
from .model import ProcessModel

KMAX_TAIL_MASS = 1e-12
KMAX_CAP = 10_000
DEFAULT_N_MAX = 100_000


# ---------------------------------------------------------------------------
# exit problems of the embedded chain


def _check_window(a: int, k: int, b: int) -> None:
    if not 0 <= a < k < b:
        raise BadWindow(f"need 0 <= a < k < b, got a={a}, k={k}, b={b}")


def _ratio(num: ScaledScalar, den: ScaledScalar) -> float:
    return float(num / den)


def _sum(values) -> ScaledScalar:
    total = ScaledScalar(0.0, 0)
    for v in values:
        total = total + v
    return total


def exit_up_probability(model: ProcessModel, a: int, b: int, k: int) -> float:
    """P(embedded chain started at ``k`` leaves ``[a+1, b-1]`` at or above ``b``)."""
    _check_window(a, k, b)
    w = window_column_sums(model, a + 1, b)  # w[j - a - 1] = e1 M_j...M_{b-1} e1^T
    return _ratio(_sum(w[: k - a]), _sum(w))


def exit_down_probability(model: ProcessModel, a: int, b: int, k: int) -> float:
    """Complement of :func:`exit_up_probability`, from the complementary window sums."""
    _check_window(a, k, b)
    w = window_column_sums(model, a + 1, b)
    return _ratio(_sum(w[k - a :]), _sum(w))


def hit_below_before(model: ProcessModel, k: int, b: int) -> float:
    """P(embedded chain started at ``k`` hits ``k-1`` before ``[b, inf)``)."""
    if not 1 <= k < b:
        raise BadWindow(f"need 1 <= k < b, got k={k}, b={b}")
    w = window_column_sums(model, k, b)  # j = k .. b
    return 1.0 - _ratio(w[0], _sum(w))


# ---------------------------------------------------------------------------
# excursion series


@dataclass(frozen=True)
class ExcursionSums:
    """``theta_0 .. theta_{K-1}`` with the two return-time series they feed."""

    theta: np.ndarray
    eta_sum: float
    eta_residual: float
    T_sum: float
    T_residual: float
    certified: bool

    @property
    def n_terms(self) -> int:
        return self.theta.size


def _require_positive_recurrent(model: ProcessModel) -> None:
    verdict = classify(model).verdict
    if verdict != POSITIVE_RECURRENT:
        raise NotPositiveRecurrent(f"positive recurrence not certified (verdict: {verdict})")


def excursion_sums(model: ProcessModel, n_min: int = 0, n_max: int = DEFAULT_N_MAX) -> ExcursionSums:
    _require_positive_recurrent(model)
    inv_mu = lambda n: 1.0 / model.rates_at(n)[0]  # noqa: E731
    visit = lambda n: model.total_rate(n) / model.rates_at(n)[0]  # noqa: E731
    walk: SeriesWalk = walk_series(
        boundary_states(model), [inv_mu, visit], tail_certificate(model), n_max, n_min=n_min
    )
    return ExcursionSums(
        theta=np.array(walk.s),
        eta_sum=walk.sums[0],
        eta_residual=walk.residuals[0],
        T_sum=walk.sums[1],
        T_residual=walk.residuals[1],
        certified=walk.certified,
    )


def expected_occupation_embedded(model: ProcessModel, n: int) -> float:
    """Expected visits to ``n`` by the embedded chain during one excursion from 0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    _require_positive_recurrent(model)
    mu = model.rates_at(n)[0]
    return model.total_rate(n) / mu * float(boundary_phi(model, n - 1))


def embedded_return_time(model: ProcessModel, n_max: int = DEFAULT_N_MAX) -> float:
    """``E T``: expected number of jumps of an excursion from 0."""
    return 1.0 + excursion_sums(model, n_max=n_max).T_sum


def continuous_return_time(model: ProcessModel, n_max: int = DEFAULT_N_MAX) -> float:
    """``E eta``: expected time to return to 0, counting the initial holding time."""
    return 1.0 / model.up_rate(0) + excursion_sums(model, n_max=n_max).eta_sum


# ---------------------------------------------------------------------------
# stationary laws


@dataclass(frozen=True)
class StationaryResult:
    psi: np.ndarray
    pi: np.ndarray
    ET: float
    Eeta: float
    kmax: int
    tail_mass_bound: float
    pi_tail_mass_bound: float
    ET_residual: float
    Eeta_residual: float
    certified: bool

    @property
    def nu(self) -> np.ndarray:
        """Unnormalised invariant measure ``psi * E eta``."""
        return self.psi * self.Eeta


def _tail_bounds(terms: np.ndarray, residual: float, norm: float) -> np.ndarray:
    """``out[k] = (sum_{n > k} terms[n] + residual) / norm`` for k = 0..len-1."""
    suffix = np.concatenate([np.cumsum(terms[::-1])[::-1][1:], [0.0]])
    return (suffix + residual) / norm


def psi_stationary(
    model: ProcessModel,
    kmax: int | None = None,
    n_max: int = DEFAULT_N_MAX,
) -> StationaryResult:
    """Stationary laws of the process and of its embedded chain up to ``kmax``.

    Without ``kmax``, the smallest ``k`` whose certified tail mass is below
    ``1e-12`` is used (capped at 10^4).  ``psi`` is not renormalised over the
    truncation; ``tail_mass_bound`` reports what lies beyond ``kmax``.
    """
    sums = excursion_sums(model, n_min=0 if kmax is None else kmax, n_max=max(n_max, kmax or 0))
    K = sums.n_terms
    sites = np.arange(1, K + 1)
    mu = np.array([model.rates_at(int(i))[0] for i in sites])
    total = np.array([model.total_rate(int(i)) for i in sites])

    Eeta = 1.0 / model.up_rate(0) + sums.eta_sum
    ET = 1.0 + sums.T_sum

    nu = np.concatenate([[1.0 / model.up_rate(0)], sums.theta / mu])
    visits = np.concatenate([[1.0], sums.theta * total / mu])
    psi_all = nu / Eeta
    pi_all = visits / ET
    psi_tail = _tail_bounds(psi_all * Eeta, sums.eta_residual, Eeta)
    pi_tail = _tail_bounds(pi_all * ET, sums.T_residual, ET)

    if kmax is None:
        below = np.nonzero(psi_tail < KMAX_TAIL_MASS)[0]
        kmax = int(below[0]) if below.size else min(K, KMAX_CAP)
        kmax = min(kmax, KMAX_CAP)
    kmax = min(kmax, K)

    return StationaryResult(
        psi=psi_all[: kmax + 1].copy(),
        pi=pi_all[: kmax + 1].copy(),
        ET=ET,
        Eeta=Eeta,
        kmax=kmax,
        tail_mass_bound=float(psi_tail[kmax]),
        pi_tail_mass_bound=float(pi_tail[kmax]),
        ET_residual=sums.T_residual,
        Eeta_residual=sums.eta_residual,
        certified=sums.certified,
    )


def pi_embedded(model: ProcessModel, kmax: int | None = None, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """``pi_0 .. pi_kmax`` of the embedded chain."""
    return psi_stationary(model, kmax, n_max).pi
