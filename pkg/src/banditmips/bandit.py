"""Successive elimination over atoms with a shared coordinate stream.

Every round draws one coordinate ``J`` shared by all active atoms, folds
``q_J * v_iJ`` (times the sampler's scale) into each running mean, and drops
every atom whose upper confidence bound falls strictly below the round's
threshold lower bound (the best one for plain MIPS, the k-th best for k-MIPS).
When the coordinate budget runs out with too many survivors, the survivors
are resolved with exact dot products.

Rounds are evaluated in vectorized blocks: a block of pre-drawn coordinates is
scored for every active atom, the first round that eliminates anything is
located, and the unused tail of the block is pushed back onto the stream. The
result is identical to evaluating one round at a time, and the ledger only
counts multiplications of rounds the algorithm actually executes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (
    BanditConfig,
    MipsInstance,
    MipsResult,
    SampleLedger,
    exact_products,
    make_rng,
    rank_desc,
    validate,
)
from .weights import UniformSampler

_MIN_BLOCK = 16
_MAX_BLOCK = 4096
_BLOCK_CELLS = 1 << 20
WARM_CACHE_STREAM = 1


@dataclass
class SolveOutcome:
    result: MipsResult
    rounds: int
    survivors_at_fallback: int


@dataclass(frozen=True)
class WarmCache:
    coords: np.ndarray
    products: np.ndarray  # atom values v_iJ, shape (n, len(coords))


@dataclass(frozen=True)
class EliminationEvent:
    """Passed to the ``on_eliminate`` hook once per round that drops atoms.

    ``thresholds[j]`` is the value atom ``eliminated[j]`` was found to be
    strictly below, and ``upper_bounds[j]`` its bound at that round.
    """

    round: int
    d_used: int
    width: float
    best_lower_bound: float
    eliminated: np.ndarray
    upper_bounds: np.ndarray
    thresholds: np.ndarray


def confidence_width(d_used: int, n: int, delta: float, sigma: float) -> float:
    """Half-width ``sigma * sqrt(2 ln(4 n d_used^2 / delta) / (d_used + 1))``.

    ``delta == 0`` means no elimination ever, so the width is infinite (this
    takes precedence over ``sigma == 0``).
    """
    if delta == 0:
        return math.inf
    if d_used < 1:
        raise ValueError("d_used must be at least 1; d_used = 0 is the infinite initial width")
    if sigma == 0:
        return 0.0
    return sigma * math.sqrt(2.0 * math.log(4.0 * n * d_used * d_used / delta) / (d_used + 1))


def _widths(d_used: np.ndarray, n: int, delta: float, sigma: float) -> np.ndarray:
    out = np.full(d_used.shape[0], math.inf)
    if delta == 0:
        return out
    ok = d_used >= 1
    if sigma == 0:
        out[ok] = 0.0
        return out
    du = d_used[ok].astype(np.float64)
    out[ok] = sigma * np.sqrt(2.0 * np.log(4.0 * n * du * du / delta) / (du + 1.0))
    return out


class _Pushback:
    """Stream wrapper that lets the engine return unused coordinates."""

    def __init__(self, stream):
        self.stream = stream
        self.coords = np.empty(0, dtype=np.intp)
        self.scales = np.empty(0)

    def take(self, k):
        if self.coords.shape[0] < k:
            c, s = self.stream.take(k - self.coords.shape[0])
            self.coords = np.concatenate([self.coords, c])
            self.scales = np.concatenate([self.scales, s])
        c, s = self.coords[:k], self.scales[:k]
        self.coords, self.scales = self.coords[k:], self.scales[k:]
        return c, s

    def give_back(self, coords, scales):
        self.coords = np.concatenate([coords, self.coords])
        self.scales = np.concatenate([scales, self.scales])

    @property
    def exhausted(self):
        return self.coords.shape[0] == 0 and self.stream.exhausted


def _kth_largest(values: np.ndarray, k: int) -> np.ndarray:
    """Column-wise k-th largest of a (rows, cols) array."""
    if k == 1:
        return values.max(axis=0)
    return -np.partition(-values, k - 1, axis=0)[k - 1]


def kth_bound_rule(k: int):
    """Drop atoms whose upper bound is below the k-th largest lower bound."""

    def rule(means, width, active):
        thr = _kth_largest(means - width, k)
        ucb = means + width
        return ucb < thr, ucb, np.broadcast_to(thr, means.shape)

    return rule


def run_elimination(
    instance: MipsInstance,
    k: int,
    config: BanditConfig,
    stream,
    ledger: SampleLedger,
    rule=None,
    sums: np.ndarray | None = None,
    d_used: int = 0,
    on_eliminate: Callable[[EliminationEvent], None] | None = None,
) -> tuple[MipsResult, int, int]:
    """Shared elimination engine.

    ``rule(means, width, active)`` receives the running means of the active
    atoms for a block of rounds (rows follow ``active``, one column per round)
    and the per-round widths, and returns ``(drop, upper, threshold)`` arrays of
    the same shape. Returns ``(result, rounds, survivors_at_fallback)``.
    """
    n, d = instance.n, instance.d
    atoms, query = instance.atoms, instance.query
    rule = kth_bound_rule(k) if rule is None else rule
    run = SampleLedger()
    active = np.arange(n)
    sums = np.zeros(n) if sums is None else np.array(sums, dtype=np.float64)

    def eliminate(col, before, means, width, drop, upper, thr):
        nonlocal active
        gone = drop[:, col]
        if on_eliminate is not None:
            on_eliminate(EliminationEvent(
                rounds, int(before), float(width[col]), float(np.max(means[:, col] - width[col])),
                active[gone], upper[gone, col], thr[gone, col],
            ))
        active = active[~gone]

    rounds = 0
    # warm-started state: one elimination pass before the loop
    if d_used > 0 and n > k:
        width = _widths(np.array([d_used]), n, config.delta, config.sigma)
        means = (sums / d_used)[:, None]
        drop, upper, thr = rule(means, width, active)
        if drop.any():
            eliminate(0, d_used, means, width, drop, upper, thr)

    source = _Pushback(stream)
    block = _MIN_BLOCK
    while active.shape[0] > k and d_used < d and not source.exhausted:
        size = min(block, d - d_used, max(1, _BLOCK_CELLS // active.shape[0]))
        coords, scales = source.take(size)
        size = coords.shape[0]
        if size == 0:
            break
        weighted_q = query[coords] * scales
        prods = atoms[np.ix_(active, coords)] * weighted_q
        csum = np.cumsum(prods, axis=1)
        csum += sums[active][:, None]
        before = d_used + np.arange(size)
        means = csum / (before + 1)
        width = _widths(before, n, config.delta, config.sigma)
        drop, upper, thr = rule(means, width, active)
        hit = np.flatnonzero(drop.any(axis=0))
        used = size if hit.shape[0] == 0 else int(hit[0]) + 1
        if used < size:
            source.give_back(coords[used:], scales[used:])

        run.charge(active.shape[0] * used)
        sums[active] = csum[:, used - 1]
        d_used += used
        rounds += used
        if hit.shape[0]:
            eliminate(used - 1, before[used - 1], means, width, drop, upper, thr)
            block = _MIN_BLOCK
        else:
            block = min(2 * block, _MAX_BLOCK)

    survivors = active.shape[0]
    fallback = survivors > k or (d_used == 0 and survivors > 1)
    if fallback:
        final = exact_products(instance, active, run) / d
    elif d_used > 0:
        final = sums[active] / d_used
    else:
        final = np.zeros(survivors)
    top = rank_desc(final, active)[:k]
    estimates = {int(i): float(v) for i, v in zip(active, final)}
    ledger.charge(run.mults)
    best = int(top[0]) if k == 1 else tuple(int(i) for i in top)
    return MipsResult(best, estimates, run, fallback), rounds, survivors


def banditmips(
    instance: MipsInstance,
    config: BanditConfig | None = None,
    sampler=None,
    ledger: SampleLedger | None = None,
    on_eliminate: Callable[[EliminationEvent], None] | None = None,
) -> SolveOutcome:
    """Find ``argmax_i v_i . q`` with probability at least ``1 - delta``.

    ``sampler`` defaults to uniform sampling with replacement; the run's random
    stream is ``make_rng(config.seed)``.
    """
    config = BanditConfig() if config is None else config
    validate(instance)
    sampler = UniformSampler(instance.d) if sampler is None else sampler
    ledger = SampleLedger() if ledger is None else ledger
    result, rounds, survivors = run_elimination(
        instance, 1, config, sampler.stream(make_rng(config.seed)), ledger,
        on_eliminate=on_eliminate,
    )
    return SolveOutcome(result, rounds, survivors)


def banditmips_topk(
    instance: MipsInstance,
    k: int,
    config: BanditConfig | None = None,
    sampler=None,
    ledger: SampleLedger | None = None,
    on_eliminate: Callable[[EliminationEvent], None] | None = None,
) -> MipsResult:
    """k-MIPS: eliminate against the k-th largest lower bound.

    Returns the k indices ordered by final estimate (exact when the fallback
    ran), ties by index.
    """
    config = BanditConfig() if config is None else config
    validate(instance)
    if not 1 <= k <= instance.n:
        raise ValueError(f"invalid-k: k={k} with n={instance.n}")
    sampler = UniformSampler(instance.d) if sampler is None else sampler
    ledger = SampleLedger() if ledger is None else ledger
    result, _, _ = run_elimination(
        instance, k, config, sampler.stream(make_rng(config.seed)), ledger,
        on_eliminate=on_eliminate,
    )
    if k == 1:
        result.best = (result.best,)
    return result


def build_warm_cache(instance: MipsInstance, cache_size: int, rng, ledger: SampleLedger) -> WarmCache:
    if not 0 <= cache_size <= instance.d:
        raise ValueError(f"cache_size must lie in [0, d], got {cache_size}")
    coords = rng.integers(0, instance.d, size=cache_size)
    products = instance.atoms[:, coords]
    products.setflags(write=False)
    ledger.charge(instance.n * cache_size)
    return WarmCache(coords, products)


def warm_start_batch(
    instance: MipsInstance,
    queries: Sequence,
    cache_size: int,
    config: BanditConfig | None = None,
    ledger: SampleLedger | None = None,
    k: int = 1,
) -> list[SolveOutcome]:
    """Solve MIPS for a batch of queries against one set of atoms.

    A cache of ``cache_size`` uniformly drawn coordinates is built once and its
    ``n * cache_size`` cost charged once to ``ledger``. Each query starts from
    the cached estimates (``d_used = cache_size``) and continues on its own
    stream ``make_rng(config.seed)``, so a single query with an empty cache is
    the same run as :func:`banditmips`. Each outcome's ledger holds only that
    query's own work; ``ledger`` receives the cache plus every query.
    """
    config = BanditConfig() if config is None else config
    ledger = SampleLedger() if ledger is None else ledger
    if len(queries) == 0:
        return []
    cache = build_warm_cache(instance, cache_size, make_rng(config.seed, WARM_CACHE_STREAM), ledger)
    outcomes = []
    for query in queries:
        inst = instance.with_query(query)
        validate(inst)
        sums = cache.products @ inst.query[cache.coords] if cache_size else None
        result, rounds, survivors = run_elimination(
            inst, k, config, UniformSampler(inst.d).stream(make_rng(config.seed)), ledger,
            sums=sums, d_used=cache_size,
        )
        outcomes.append(SolveOutcome(result, rounds, survivors))
    return outcomes
