"""Seeded event-driven simulation of the process and of its embedded chain.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence(seed,
spawn_key=...)``.  Jumps and holding times use separate streams, so the
embedded chain simulated with the same seed visits exactly the states of the
continuous-time path.  Excursions are grouped in fixed-size blocks, each with
its own streams; results are reduced in block order, so the output does not
depend on the number of worker threads.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .branching import count_crossings, occupation_identity_holds
from .errors import ExcursionBudgetExceeded
from .model import ProcessModel

# stream ids under a given seed
PATH_JUMPS, PATH_HOLDS = 0, 1
EXC_JUMPS, EXC_HOLDS = 2, 3

BUFFER = 4096


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    max_events: int | None = None
    max_time: float | None = None
    excursions: int = 10_000
    initial_state: int = 0
    workers: int = 1
    step_guard: int = 10_000_000
    block_size: int = 256

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.max_events is not None and self.max_events <= 0:
            raise ValueError("max_events must be positive")
        if self.max_time is not None and self.max_time <= 0:
            raise ValueError("max_time must be positive")
        if self.excursions <= 0 or self.workers <= 0 or self.step_guard <= 0 or self.block_size <= 0:
            raise ValueError("excursions, workers, step_guard and block_size must be positive")
        if self.initial_state < 0:
            raise ValueError("initial_state must be >= 0")


def stream(seed: int, *key: int) -> np.random.PCG64:
    return np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key))


class Uniforms:
    """Open-interval (0, 1) uniforms drawn from a bit generator in batches."""

    def __init__(self, bitgen: np.random.PCG64):
        self._bitgen = bitgen
        self._buf: list = []
        self._pos = 0

    def _refill(self) -> None:
        raw = self._bitgen.random_raw(BUFFER) >> np.uint64(11)
        self._buf = ((raw.astype(np.float64) + 0.5) * 2.0**-53).tolist()
        self._pos = 0

    def __call__(self) -> float:
        if self._pos == len(self._buf):
            self._refill()
        u = self._buf[self._pos]
        self._pos += 1
        return u


def exponential(u: float, rate: float) -> float:
    return -math.log(u) / rate


class JumpTable:
    """Per-site jump lookup: down-probability, cumulative up-probabilities, total rate."""

    def __init__(self, model: ProcessModel):
        self.L = model.prefix_length
        self.p = model.period
        self.R = model.R
        self.down = []
        self.cum = []
        self.total = []
        for i in range(self.L + self.p):
            mu, lam = model.rates_at(i)
            tot = mu + sum(lam)
            acc = mu / tot
            cum = []
            for x in lam:
                acc += x / tot
                cum.append(acc)
            cum[-1] = 1.0
            self.down.append(mu / tot)
            self.cum.append(cum)
            self.total.append(tot)

    def site(self, i: int) -> int:
        return i if i < self.L else self.L + (i - self.L) % self.p

    def jump(self, i: int, u: float) -> int:
        c = i if i < self.L else self.L + (i - self.L) % self.p
        if u < self.down[c]:
            return i - 1
        return i + 1 + min(bisect_right(self.cum[c], u), self.R - 1)

    def rate(self, i: int) -> float:
        return self.total[i if i < self.L else self.L + (i - self.L) % self.p]


# ---------------------------------------------------------------------------
# single long path


@dataclass
class PathSummary:
    """Occupation statistics of one path.

    ``return_times``/``return_steps`` hold, for each completed cycle from an
    entry into 0 to the next one, its duration and its number of jumps.
    """

    occupation_time: np.ndarray | None
    visit_counts: np.ndarray
    total_time: float
    events: int
    excursions: int
    return_times: np.ndarray
    return_steps: np.ndarray
    final_state: int
    states: list | None = None


def _grow(arr: list, i: int, fill) -> None:
    if i >= len(arr):
        arr.extend([fill] * (i + 1 - len(arr)))


def _run_path(model: ProcessModel, cfg: SimConfig, timed: bool, record: bool) -> PathSummary:
    if cfg.max_events is None and (cfg.max_time is None or not timed):
        raise ValueError("a horizon is required: max_events, or max_time for timed runs")
    tab = JumpTable(model)
    ju = Uniforms(stream(cfg.seed, PATH_JUMPS))
    hu = Uniforms(stream(cfg.seed, PATH_HOLDS)) if timed else None
    state = cfg.initial_state
    t = 0.0
    events = 0
    occ: list = []
    visits: list = []
    etas: list = []
    steps: list = []
    cycle_t = 0.0 if state == 0 else None
    cycle_n = 0
    states = [state] if record else None
    max_events = cfg.max_events if cfg.max_events is not None else math.inf
    max_time = cfg.max_time if (timed and cfg.max_time is not None) else math.inf

    while events < max_events:
        _grow(visits, state, 0)
        if timed:
            _grow(occ, state, 0.0)
            h = exponential(hu(), tab.rate(state))
            if t + h >= max_time:
                occ[state] += max_time - t
                t = max_time
                break
            occ[state] += h
            t += h
        visits[state] += 1
        state = tab.jump(state, ju())
        events += 1
        if record:
            states.append(state)
        if state == 0:
            if cycle_t is not None:
                etas.append(t - cycle_t)
                steps.append(events - cycle_n)
            cycle_t, cycle_n = t, events

    return PathSummary(
        occupation_time=np.array(occ) if timed else None,
        visit_counts=np.array(visits, dtype=np.int64),
        total_time=t,
        events=events,
        excursions=len(steps),
        return_times=np.array(etas) if timed else np.array([]),
        return_steps=np.array(steps, dtype=np.int64),
        final_state=state,
        states=states,
    )


def simulate_ctmc(model: ProcessModel, cfg: SimConfig, record_path: bool = False) -> PathSummary:
    """Simulate the continuous-time process up to ``max_events`` jumps or ``max_time``."""
    return _run_path(model, cfg, timed=True, record=record_path)


def simulate_embedded(model: ProcessModel, cfg: SimConfig, record_path: bool = False) -> PathSummary:
    """Simulate the jump chain for ``max_events`` steps using the same jump stream."""
    return _run_path(model, cfg, timed=False, record=record_path)


# ---------------------------------------------------------------------------
# independent excursions from 0


def _excursion(tab: JumpTable, ju: Uniforms, hu: Uniforms | None, guard: int, index: int, start: int = 0,
               stop: Callable[[int], bool] | None = None, record: bool = False):
    state = start
    t = 0.0
    n = 0
    path = [state] if record else None
    while True:
        if hu is not None:
            t += exponential(hu(), tab.rate(state))
        state = tab.jump(state, ju())
        n += 1
        if record:
            path.append(state)
        if (state == 0) if stop is None else stop(state):
            return n, t, path, state
        if n >= guard:
            raise ExcursionBudgetExceeded(index, n)


def _blocks(cfg: SimConfig) -> list[tuple[int, int]]:
    return [
        (b, min(cfg.block_size, cfg.excursions - b * cfg.block_size))
        for b in range(math.ceil(cfg.excursions / cfg.block_size))
    ]


def _map_blocks(cfg: SimConfig, work: Callable[[int, int], object]) -> list:
    blocks = _blocks(cfg)
    if cfg.workers == 1:
        return [work(b, n) for b, n in blocks]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda bn: work(*bn), blocks))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()) if x.size else math.nan, math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass(frozen=True)
class ReturnTimeEstimate:
    mean_T: float
    se_T: float
    mean_eta: float
    se_eta: float
    n: int


def excursion_samples(model: ProcessModel, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Jump counts ``T`` and durations ``eta`` of ``cfg.excursions`` excursions from 0."""
    tab = JumpTable(model)

    def work(block: int, count: int):
        ju = Uniforms(stream(cfg.seed, EXC_JUMPS, block))
        hu = Uniforms(stream(cfg.seed, EXC_HOLDS, block))
        T = np.empty(count, dtype=np.int64)
        eta = np.empty(count)
        for j in range(count):
            T[j], eta[j], _, _ = _excursion(tab, ju, hu, cfg.step_guard, block * cfg.block_size + j)
        return T, eta

    parts = _map_blocks(cfg, work)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def estimate_return_times(model: ProcessModel, cfg: SimConfig) -> ReturnTimeEstimate:
    T, eta = excursion_samples(model, cfg)
    mT, sT = _mean_se(T)
    me, se = _mean_se(eta)
    return ReturnTimeEstimate(mT, sT, me, se, int(T.size))


@dataclass(frozen=True)
class BranchingEstimate:
    levels: tuple
    mean: np.ndarray  # (len(levels), R)
    se: np.ndarray
    identity_violations: int
    n: int


def collect_branching_counts(model: ProcessModel, cfg: SimConfig, levels: Sequence[int]) -> BranchingEstimate:
    """Empirical mean crossing vectors ``U_i`` for the requested levels.

    Every simulated excursion is also checked against the pathwise identity
    visits(i) = U_{i,1} + sum(U_{i+1}).
    """
    tab = JumpTable(model)
    R = model.R
    levels = tuple(int(i) for i in levels)

    def work(block: int, count: int):
        ju = Uniforms(stream(cfg.seed, EXC_JUMPS, block))
        out = np.zeros((count, len(levels), R))
        bad = 0
        for j in range(count):
            _, _, path, _ = _excursion(tab, ju, None, cfg.step_guard, block * cfg.block_size + j, record=True)
            U = count_crossings(path, R)
            for k, lev in enumerate(levels):
                if lev <= U.shape[0]:
                    out[j, k] = U[lev - 1]
            if not occupation_identity_holds(path, R):
                bad += 1
        return out, bad

    parts = _map_blocks(cfg, work)
    samples = np.concatenate([p[0] for p in parts])
    n = samples.shape[0]
    return BranchingEstimate(
        levels=levels,
        mean=samples.mean(axis=0),
        se=samples.std(axis=0, ddof=1) / math.sqrt(n),
        identity_violations=sum(p[1] for p in parts),
        n=n,
    )


@dataclass(frozen=True)
class ExitEstimate:
    frequency: float
    se: float
    n: int


def estimate_exit_up(model: ProcessModel, cfg: SimConfig, a: int, b: int, k: int) -> ExitEstimate:
    """Fraction of embedded paths from ``k`` that leave ``[a+1, b-1]`` at or above ``b``."""
    if not 0 <= a < k < b:
        raise ValueError(f"need 0 <= a < k < b, got a={a}, k={k}, b={b}")
    tab = JumpTable(model)
    outside = lambda s: s <= a or s >= b  # noqa: E731

    def work(block: int, count: int):
        ju = Uniforms(stream(cfg.seed, EXC_JUMPS, block))
        ups = 0
        for j in range(count):
            _, _, _, end = _excursion(tab, ju, None, cfg.step_guard, block * cfg.block_size + j,
                                      start=k, stop=outside)
            ups += end >= b
        return ups

    n = cfg.excursions
    p = sum(_map_blocks(cfg, work)) / n
    return ExitEstimate(p, math.sqrt(p * (1 - p) / n), n)
