"""Rate profiles for birth-death processes with right jumps of size 1..R.

A site ``i`` carries a rate row ``(mu_i, lambda_i^1, ..., lambda_i^R)``: the
process steps to ``i - 1`` at rate ``mu_i`` and to ``i + r`` at rate
``lambda_i^r``.  Infinitely many sites are described by a finite prefix plus a
constant or periodic tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    EmptyPrefix,
    Mu0NotZero,
    NegativeRate,
    NonFiniteRate,
    RowShapeError,
    TailRuleError,
    ZeroDeathRate,
    ZeroTotalRate,
)

Row = tuple  # (mu, lambda_1, ..., lambda_R)

# relative margin used to turn the exact inf/sup of total rates into strict bounds
RATE_BOUND_MARGIN = 1e-9


def _as_row(row: Sequence[float]) -> Row:
    return tuple(float(x) for x in row)


@dataclass(frozen=True)
class TailRule:
    """How rows are generated for sites beyond the prefix.

    ``constant``: one row repeats forever.  It is ``block[0]`` when a block of
    length one is given, otherwise the last prefix row.
    ``periodic``: site ``i >= len(prefix)`` uses ``block[(i - len(prefix)) % p]``.
    """

    kind: str = "constant"
    block: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "block", tuple(_as_row(r) for r in self.block))
        if self.kind == "constant":
            if len(self.block) > 1:
                raise TailRuleError("constant tail takes at most one block row")
        elif self.kind == "periodic":
            if not self.block:
                raise TailRuleError("periodic tail needs a non-empty block")
        else:
            raise TailRuleError(f"unknown tail kind {self.kind!r}")

    @property
    def period(self) -> int:
        return max(len(self.block), 1)


@dataclass(frozen=True)
class RateProfile:
    R: int
    prefix: tuple
    tail: TailRule = field(default_factory=TailRule)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(_as_row(r) for r in self.prefix))

    @property
    def prefix_length(self) -> int:
        return len(self.prefix)

    @property
    def period(self) -> int:
        return self.tail.period

    def canonical_site(self, i: int) -> int:
        """Smallest site whose row equals the row at ``i``.

        Prefix sites map to themselves; tail sites fold into the first tail
        period ``[L, L + p)``.
        """
        L = len(self.prefix)
        if i < L:
            return i
        return L + (i - L) % self.period

    def row(self, i: int) -> Row:
        if i < 0:
            raise IndexError(f"negative site {i}")
        L = len(self.prefix)
        if i < L:
            return self.prefix[i]
        if self.tail.block:
            return self.tail.block[(i - L) % self.period]
        return self.prefix[-1]


@dataclass(frozen=True)
class GeneratorRow:
    site: int
    diagonal: float
    entries: dict  # target site -> nonnegative rate

    def as_dict(self) -> dict:
        out = dict(self.entries)
        out[self.site] = self.diagonal
        return out


@dataclass(frozen=True)
class ProcessModel:
    """A validated rate profile together with its condition-(C) bounds.

    ``rate_inf``/``rate_sup`` are the exact extreme total rates over all sites;
    ``kappa``/``bigK`` widen them by ``RATE_BOUND_MARGIN`` so that
    ``kappa < total_rate(i) < bigK`` strictly.
    """

    profile: RateProfile
    kappa: float
    bigK: float
    rate_inf: float
    rate_sup: float

    @property
    def R(self) -> int:
        return self.profile.R

    @property
    def prefix_length(self) -> int:
        return self.profile.prefix_length

    @property
    def period(self) -> int:
        return self.profile.period

    def canonical_site(self, i: int) -> int:
        return self.profile.canonical_site(i)

    def rates_at(self, i: int) -> tuple[float, tuple]:
        """``(mu_i, (lambda_i^1, ..., lambda_i^R))``."""
        row = self.profile.row(i)
        return row[0], row[1:]

    def total_rate(self, i: int) -> float:
        return math.fsum(self.profile.row(i))

    def up_rate(self, i: int) -> float:
        return math.fsum(self.profile.row(i)[1:])

    def embedded_transition(self, i: int, j: int) -> float:
        mu, lam = self.rates_at(i)
        total = mu + sum(lam)
        if j == i - 1:
            return mu / total
        k = j - i
        if 1 <= k <= self.R:
            return lam[k - 1] / total
        return 0.0

    def embedded_row(self, i: int) -> dict:
        mu, lam = self.rates_at(i)
        total = mu + sum(lam)
        out = {}
        if i >= 1:
            out[i - 1] = mu / total
        for r, rate in enumerate(lam, start=1):
            if rate > 0:
                out[i + r] = rate / total
        return out

    def generator_row(self, i: int) -> GeneratorRow:
        mu, lam = self.rates_at(i)
        entries = {}
        if i >= 1:
            entries[i - 1] = mu
        for r, rate in enumerate(lam, start=1):
            entries[i + r] = rate
        return GeneratorRow(site=i, diagonal=-(mu + sum(lam)), entries=entries)

    def entry_law(self) -> np.ndarray:
        """Distribution of the first jump size out of site 0."""
        lam0 = np.array(self.rates_at(0)[1], dtype=float)
        return lam0 / lam0.sum()

    @property
    def unit_entry(self) -> bool:
        """True when site 0 can only jump to site 1."""
        return all(x == 0.0 for x in self.rates_at(0)[1][1:])


def _check_row(row: Row, R: int, site: int) -> None:
    if len(row) != R + 1:
        raise RowShapeError(f"row for site {site} has {len(row)} entries, expected {R + 1}")
    for x in row:
        if not math.isfinite(x):
            raise NonFiniteRate(f"non-finite rate at site {site}")
        if x < 0:
            raise NegativeRate(f"negative rate at site {site}")


def build_model(profile: RateProfile) -> ProcessModel:
    """Validate ``profile`` and compute its total-rate bounds.

    Checking the prefix and one tail period covers every site because rows
    beyond that repeat.
    """
    if not isinstance(profile.R, int) or profile.R < 1:
        raise RowShapeError(f"R must be an integer >= 1, got {profile.R!r}")
    if not profile.prefix:
        raise EmptyPrefix("prefix must contain at least the row for site 0")

    L = profile.prefix_length
    sites = list(range(L + profile.period))
    for i in sites:
        _check_row(profile.row(i), profile.R, i)
    if profile.prefix[0][0] != 0.0:
        raise Mu0NotZero("mu at site 0 must be 0")

    totals = []
    for i in sites:
        row = profile.row(i)
        total = math.fsum(row)
        if total == 0.0:
            raise ZeroTotalRate(i)
        if i >= 1 and row[0] == 0.0:
            raise ZeroDeathRate(i)
        totals.append(total)

    lo, hi = min(totals), max(totals)
    return ProcessModel(
        profile=profile,
        kappa=lo * (1.0 - RATE_BOUND_MARGIN),
        bigK=hi * (1.0 + RATE_BOUND_MARGIN),
        rate_inf=lo,
        rate_sup=hi,
    )


def homogeneous(R: int, row0: Sequence[float], row: Sequence[float]) -> ProcessModel:
    """Model whose sites ``i >= 1`` all share ``row``."""
    return build_model(RateProfile(R, (row0, row), TailRule("constant")))
