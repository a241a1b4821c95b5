"""Bucket_AE: norm-binned elimination with a cross-bin norm cap.

Atoms are sorted by a cheap estimate of their squared norm and cut into bins
of ``bin_size``. The search then runs one shared coordinate stream over all
atoms, and an atom leaves the active set when either

* its upper confidence bound is below the best lower bound overall, or
* its Cauchy-Schwarz cap ``sqrt(est_norm_i) * ||q|| / d`` is below the best
  lower bound found in another bin. The atom holding the overall best lower
  bound is never pruned this way.

Because the cap uses estimated norms it can undershoot; the bins only change
which atoms are compared against which bound, not the confidence widths.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bandit import SolveOutcome, run_elimination
from .core import BanditConfig, MipsInstance, SampleLedger, make_rng, rank_desc, validate
from .weights import UniformSampler

DEFAULT_BIN_SIZE = 30
DEFAULT_M_PROBE = 32
NORM_PROBE_STREAM = 2


@dataclass(frozen=True)
class NormBins:
    bins: list
    est_norms: np.ndarray
    m_probe: int
    bin_size: int

    @property
    def bin_of(self) -> np.ndarray:
        out = np.empty(self.est_norms.shape[0], dtype=np.intp)
        for b, members in enumerate(self.bins):
            out[members] = b
        return out


def estimate_norms(
    instance: MipsInstance,
    m_probe: int,
    seed: int,
    ledger: SampleLedger | None = None,
    full_sweep: bool = False,
) -> np.ndarray:
    """Squared-norm estimates ``(d / m) * sum_J v_iJ**2`` from ``m_probe``
    uniformly drawn coordinates per atom (shared across atoms).

    ``full_sweep`` draws without replacement, so ``m_probe = d`` is exact.
    """
    d = instance.d
    if not 1 <= m_probe <= d:
        raise ValueError(f"m_probe must lie in [1, {d}], got {m_probe}")
    rng = make_rng(seed, NORM_PROBE_STREAM)
    if full_sweep:
        coords = rng.permutation(d)[:m_probe]
    else:
        coords = rng.integers(0, d, size=m_probe)
    if ledger is not None:
        ledger.charge(instance.n * m_probe)
    sub = instance.atoms[:, coords]
    return np.einsum("ij,ij->i", sub, sub) * (d / m_probe)


def build_bins(estimates, bin_size: int = DEFAULT_BIN_SIZE, m_probe: int = 0) -> NormBins:
    if bin_size < 1:
        raise ValueError("bin_size must be positive")
    est = np.asarray(estimates, dtype=np.float64)
    order = rank_desc(est)
    bins = [order[i:i + bin_size] for i in range(0, order.shape[0], bin_size)]
    return NormBins(bins, est, m_probe, bin_size)


def _bucket_rule(bin_of: np.ndarray, caps: np.ndarray):
    def rule(means, width, active):
        lcb = means - width
        ucb = means + width
        cols = means.shape[1]
        b = bin_of[active]
        order = np.argsort(b, kind="stable")
        sb = b[order]
        starts = np.flatnonzero(np.r_[True, sb[1:] != sb[:-1]])
        counts = np.diff(np.r_[starts, sb.shape[0]])
        groups = starts.shape[0]
        bin_best = np.maximum.reduceat(lcb[order], starts, axis=0)
        row_group = np.empty(active.shape[0], dtype=np.intp)
        row_group[order] = np.repeat(np.arange(groups), counts)

        thr = np.broadcast_to(lcb.max(axis=0), means.shape)
        within = ucb < thr

        if groups > 1:
            top = np.argmax(bin_best, axis=0)
            first = bin_best[top, np.arange(cols)]
            second = -np.partition(-bin_best, 1, axis=0)[1]
            other = np.where(row_group[:, None] == top[None, :], second[None, :], first[None, :])
        else:
            other = np.full(means.shape, -np.inf)
        cap = np.broadcast_to(caps[active][:, None], means.shape)
        pruned = other > cap
        pruned[np.argmax(lcb, axis=0), np.arange(cols)] = False

        drop = within | pruned
        upper = np.where(within, ucb, cap)
        bound = np.where(within, thr, other)
        return drop, upper, bound

    return rule


def norm_caps(instance: MipsInstance, bins: NormBins, ledger: SampleLedger | None = None) -> np.ndarray:
    """Upper bounds on each normalized inner product from the estimated norms."""
    if ledger is not None:
        ledger.charge(instance.d)
    qnorm = float(np.sqrt(instance.query @ instance.query))
    return np.sqrt(bins.est_norms) * qnorm / instance.d


def bucket_ae(
    instance: MipsInstance,
    config: BanditConfig,
    bins: NormBins,
    ledger: SampleLedger | None = None,
    preprocessing_ledger: SampleLedger | None = None,
    on_eliminate=None,
) -> SolveOutcome:
    validate(instance)
    if bins.est_norms.shape[0] != instance.n:
        raise ValueError("bins were built for a different number of atoms")
    ledger = SampleLedger() if ledger is None else ledger
    caps = norm_caps(instance, bins, preprocessing_ledger)
    rule = _bucket_rule(bins.bin_of, caps)
    stream = UniformSampler(instance.d).stream(make_rng(config.seed))
    result, rounds, survivors = run_elimination(
        instance, 1, config, stream, ledger, rule=rule, on_eliminate=on_eliminate,
    )
    return SolveOutcome(result, rounds, survivors)


def bucket_search(
    instance: MipsInstance,
    config: BanditConfig,
    bin_size: int = DEFAULT_BIN_SIZE,
    m_probe: int = DEFAULT_M_PROBE,
    ledger: SampleLedger | None = None,
    preprocessing_ledger: SampleLedger | None = None,
) -> SolveOutcome:
    """Probe norms, bin, and search. Norm probes are charged to ``ledger``."""
    ledger = SampleLedger() if ledger is None else ledger
    probe = SampleLedger()
    est = estimate_norms(instance, min(m_probe, instance.d), config.seed, probe)
    bins = build_bins(est, bin_size, m_probe)
    out = bucket_ae(instance, config, bins, ledger, preprocessing_ledger)
    ledger.charge(probe.mults)
    out.result.ledger.charge(probe.mults)
    return out
