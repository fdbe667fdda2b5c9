"""Recurrence classification and certified summation of the M-product series.

Two sufficient conditions are checked: the products ``e1 M_1...M_n e1^T``
tend to 0 (recurrence), and ``sum_n (1/mu_n) e1 M_1...M_{n-1} e1^T`` is
finite (positive recurrence).  Nothing here ever reports transience.

Tail remainders are certified with a Collatz-Wielandt vector ``w > 0`` for a
block ``P`` of tail matrices: ``P w <= rate * w`` with ``rate < 1`` bounds every
later product geometrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import Diverged
from .linalg import (
    ScaledScalar,
    ScaledVector,
    boundary_states,
    matrix_M,
    perron_pair,
    phi_states,
    spectral_radius,
)
from .model import ProcessModel

POSITIVE_RECURRENT = "positive_recurrent"
RECURRENT = "recurrent"
INCONCLUSIVE = "inconclusive"

# stop summing once the certified remainder is below double resolution
STOP_RELATIVE = 2.0**-56
MAX_CERT_BLOCKS = 64
PERRON_NUDGE = 1e-12

Weight = Callable[[int], float]


def default_n_max(model: ProcessModel) -> int:
    return 10 * (model.prefix_length + model.period) + 1000


def _to_float(v: ScaledVector, k: int = 0) -> float:
    try:
        return math.ldexp(float(v.direction[k]), v.exponent)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class TailCertificate:
    """Geometric bound on products of tail matrices.

    For any row state ``v`` reached after site ``n`` with ``n + 1`` aligned to
    the tail period, the first entry of ``v M_{n+1} ... M_{n+m}`` is at most
    ``(v . w) * c[m mod block] * rate**(m // block)``.
    """

    start: int
    period: int
    block: int
    rate: float
    w: np.ndarray
    c: np.ndarray

    def aligned(self, n: int) -> bool:
        return n + 1 >= self.start and (n + 1 - self.start) % self.period == 0

    def remainder(self, state: ScaledVector, n: int, weight: Weight) -> float:
        """Bound on ``sum_{m >= n} weight(m + 1) * (state_m e1^T)``."""
        if state.is_zero():
            return 0.0
        ws = np.array([weight(n + 1 + s) for s in range(self.block)])
        vw = _to_float(ScaledVector(np.atleast_1d(state.direction @ self.w), state.exponent))
        return vw * float(self.c @ ws) / (1.0 - self.rate)


def _block_product(model: ProcessModel, start: int, length: int) -> tuple[np.ndarray, float]:
    """``M_start ... M_{start+length-1}`` as ``(matrix, log_scale)``; value = matrix * exp(log_scale)."""
    q = np.eye(model.R)
    log_scale = 0.0
    for s in range(length):
        q = q @ matrix_M(model, start + s)
        top = float(q.max())
        if top == 0.0:
            return q, 0.0
        if not 1e-100 < top < 1e100:
            q = q / top
            log_scale += math.log(top)
    return q, log_scale


def tail_certificate(model: ProcessModel) -> TailCertificate | None:
    """Search blocks of 1, 2, 4, ... tail periods for a contraction certificate."""
    start = max(model.prefix_length, 1)
    p = model.period
    blocks = 1
    while blocks <= MAX_CERT_BLOCKS:
        length = blocks * p
        q, log_scale = _block_product(model, start, length)
        if log_scale > 0:
            return None
        big = q * math.exp(log_scale)
        if not big.any():
            w = np.ones(model.R)
            rate = 0.0
        else:
            _, w = perron_pair(big + PERRON_NUDGE * float(big.max()))
            w = np.maximum(w / w.max(), 1e-300)
            rate = float(np.max((big @ w) / w))
        if rate < 1.0:
            cols = []
            q = np.eye(model.R)
            for s in range(length):
                cols.append(q[:, 0].copy())
                q = q @ matrix_M(model, start + s)
            c = np.array([float(np.max(col / w)) for col in cols])
            return TailCertificate(start, p, length, rate, w, c)
        blocks *= 2
    return None


def tail_spectral_radius(model: ProcessModel) -> float:
    """Perron root of the product of ``M_i`` over one tail period."""
    q, log_scale = _block_product(model, max(model.prefix_length, 1), model.period)
    rho = spectral_radius(q)
    try:
        return rho * math.exp(log_scale)
    except OverflowError:
        return math.inf


@dataclass
class SeriesWalk:
    """Values ``s_n`` of a product sequence and weighted partial sums of it.

    ``sums[j] = sum_{n=1}^{len(s)} weights[j](n) * s_{n-1}``; ``residuals[j]``
    bounds the omitted terms (certified when ``certified`` is True, otherwise
    it is just the last term).
    """

    s: list
    sums: list
    residuals: list
    certified: bool
    last_state: ScaledVector | None = None


def _fsum(terms: list[float]) -> float:
    try:
        return math.fsum(terms)
    except OverflowError:
        return math.inf


def walk_series(
    states: Iterator[ScaledVector],
    weights: Sequence[Weight],
    cert: TailCertificate | None,
    n_max: int,
    n_min: int = 0,
    stop_relative: float = STOP_RELATIVE,
) -> SeriesWalk:
    s: list[float] = []
    terms: list[list[float]] = [[] for _ in weights]
    last = None
    for n, v in enumerate(states):
        last = v
        zero = v.is_zero()
        if n >= n_min and (zero or (cert is not None and cert.aligned(n))):
            partial = [_fsum(t) for t in terms]
            rems = [0.0 if zero else cert.remainder(v, n, w) for w in weights]
            if zero or n >= n_max or all(r <= stop_relative * p for r, p in zip(rems, partial)):
                return SeriesWalk(s, partial, rems, True, v)
        if n >= n_max and (cert is None or n >= n_max + cert.period):
            break
        value = _to_float(v)
        s.append(value)
        for t, w in zip(terms, weights):
            t.append(w(n + 1) * value)
    partial = [_fsum(t) for t in terms]
    rems = [t[-1] if t else math.inf for t in terms]
    return SeriesWalk(s, partial, rems, False, last)


@dataclass(frozen=True)
class SeriesValue:
    value: ScaledScalar
    residual_bound: float
    certified: bool
    n_terms: int

    def __iter__(self):
        # unpacks as (value, residual_bound)
        return iter((self.value, self.residual_bound))


@dataclass(frozen=True)
class ClassificationResult:
    """Verdict plus the numbers it rests on.

    ``partial_sum``/``tail_bound`` refer to the series weighted by the law of
    the first jump out of 0 (it enters the return-time formulas);
    ``plain_partial_sum``/``plain_tail_bound`` to the plain ``e1 M_1...`` one.
    They coincide when site 0 only steps to site 1.
    """

    verdict: str
    rho_tail: float
    rho_step: float
    phi_last: float
    n_used: int
    partial_sum: float
    tail_bound: float
    plain_partial_sum: float
    plain_tail_bound: float
    certified: bool
    phi_to_zero_certified: bool
    numerically_decided: bool = False
    certificate_rate: float | None = None
    trajectory: tuple = field(default=(), repr=False)
    note: str = ""


def inverse_mu(model: ProcessModel) -> Weight:
    return lambda n: 1.0 / model.rates_at(n)[0]


def classify(model: ProcessModel, tol: float = 1e-10, n_max: int | None = None) -> ClassificationResult:
    if n_max is None:
        n_max = default_n_max(model)
    if n_max < model.prefix_length + model.period:
        raise ValueError("n_max must cover the prefix and one tail period")

    rho_tail = tail_spectral_radius(model)
    rho_step = rho_tail ** (1.0 / model.period)
    cert = tail_certificate(model)
    w = inverse_mu(model)

    walk = walk_series(boundary_states(model), [w], cert, n_max)
    plain = walk_series(phi_states(model), [w], cert, n_max)
    traj = tuple(plain.s[:: max(1, len(plain.s) // 64)])
    phi_last = plain.s[-1] if plain.s else 1.0

    common = dict(
        rho_tail=rho_tail,
        rho_step=rho_step,
        phi_last=phi_last,
        n_used=len(walk.s),
        partial_sum=walk.sums[0],
        tail_bound=walk.residuals[0],
        plain_partial_sum=plain.sums[0],
        plain_tail_bound=plain.residuals[0],
        certificate_rate=None if cert is None else cert.rate,
        trajectory=traj,
    )

    if walk.certified and plain.certified:
        return ClassificationResult(
            POSITIVE_RECURRENT, certified=True, phi_to_zero_certified=True, **common
        )

    last = walk.s[-1] if walk.s else 1.0
    if abs(rho_tail - 1.0) <= tol or rho_tail < 1.0:
        if last < tol:
            return ClassificationResult(
                RECURRENT,
                certified=False,
                phi_to_zero_certified=False,
                numerically_decided=True,
                note=f"products fell below tol={tol:g} by n={len(walk.s)}; tail radius ~ 1",
                **common,
            )
        return ClassificationResult(
            INCONCLUSIVE,
            certified=False,
            phi_to_zero_certified=False,
            note="tail radius ~ 1 and products do not vanish numerically",
            **common,
        )
    return ClassificationResult(
        INCONCLUSIVE,
        certified=False,
        phi_to_zero_certified=False,
        note="tail radius > 1: neither sufficient condition applies",
        **common,
    )


def series_S(
    model: ProcessModel,
    tol: float = 1e-10,
    n_max: int | None = None,
    boundary: bool = True,
) -> SeriesValue:
    """``sum_{n>=1} (1/mu_n) e1 [M_0] M_1 ... M_{n-1} e1^T`` with a remainder bound.

    With ``boundary=True`` the products start with the site-0 matrix, which
    makes the sum equal to ``E eta - 1/sum(lambda_0)`` for every entry law.
    """
    if n_max is None:
        n_max = default_n_max(model)
    cert = tail_certificate(model)
    if cert is None:
        rho = tail_spectral_radius(model)
        if rho > 1.0 + tol:
            raise Diverged(f"tail spectral radius {rho:.6g} > 1; the series diverges")
    states = boundary_states(model) if boundary else phi_states(model)
    walk = walk_series(states, [inverse_mu(model)], cert, n_max)
    if not math.isfinite(walk.sums[0]):
        raise Diverged("partial sums overflowed")
    return SeriesValue(
        ScaledScalar.from_float(walk.sums[0]),
        walk.residuals[0],
        walk.certified,
        len(walk.s),
    )
