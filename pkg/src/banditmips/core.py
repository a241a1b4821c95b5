"""Domain types, validation and the brute-force oracle.

Everything is 0-based and float64. The unit of cost throughout the package is
one coordinate-wise multiplication ``q_j * v_ij``, tallied in a
:class:`SampleLedger`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MipsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MipsError, ValueError):
    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class DegenerateInstanceError(MipsError, ValueError):
    kind = "degenerate-instance"


def _frozen(values) -> np.ndarray:
    # already read-only float64 arrays are shared, everything else is copied
    arr = np.asarray(values, dtype=np.float64)
    if arr.flags.writeable or not arr.flags.c_contiguous:
        arr = np.array(arr, order="C")
    return arr


@dataclass(frozen=True)
class MipsInstance:
    """Read-only atom matrix (one atom per row) and a query vector."""

    atoms: np.ndarray
    query: np.ndarray

    def __post_init__(self):
        atoms = _frozen(self.atoms)
        query = _frozen(self.query).ravel()
        if atoms.ndim == 1:
            atoms = atoms[None, :]
        atoms.setflags(write=False)
        query.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "query", query)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def with_query(self, query) -> "MipsInstance":
        return MipsInstance(self.atoms, query)


@dataclass(frozen=True)
class BanditConfig:
    """Tuning knobs for the successive-elimination solvers.

    ``beta = math.inf`` selects the sorted-order (alpha) sampler in the
    drivers; ``delta = 0`` disables elimination entirely.
    """

    delta: float = 1e-3
    sigma: float = 1.0
    beta: float = 0.0
    seed: int = 0
    tie_break: str = "lowest-index"

    def __post_init__(self):
        if not (0.0 <= self.delta < 1.0):
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if not self.sigma >= 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.beta >= 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.tie_break != "lowest-index":
            raise ValueError(f"unsupported tie_break policy {self.tie_break!r}")


@dataclass
class SampleLedger:
    """Monotone counter of coordinate-wise multiplications."""

    mults: int = 0

    def charge(self, count) -> None:
        count = int(count)
        if count < 0:
            raise ValueError("ledger charges must be nonnegative")
        self.mults += count

    def merge(self, other: "SampleLedger") -> "SampleLedger":
        return SampleLedger(self.mults + other.mults)

    def __int__(self):
        return self.mults


@dataclass
class ArmState:
    mu_hat: float = 0.0
    active: bool = True


@dataclass
class CandidateSet:
    """Snapshot of the elimination state: per-arm estimates, shared pull count."""

    arms: list[ArmState]
    d_used: int = 0
    ci_width: float = math.inf

    @classmethod
    def from_arrays(cls, mu_hat, active, d_used, ci_width) -> "CandidateSet":
        arms = [ArmState(float(m), bool(a)) for m, a in zip(mu_hat, active)]
        return cls(arms, int(d_used), float(ci_width))

    @property
    def active_indices(self) -> list[int]:
        return [i for i, arm in enumerate(self.arms) if arm.active]


@dataclass
class MipsResult:
    """Outcome of one search.

    ``best`` is an ``int`` for plain MIPS and a tuple of indices for top-k.
    ``estimates`` maps each surviving atom to its final (normalized) estimate.
    """

    best: int | tuple[int, ...]
    estimates: dict[int, float] = field(default_factory=dict)
    ledger: SampleLedger = field(default_factory=SampleLedger)
    exact_fallback_used: bool = False


@dataclass(frozen=True)
class GapProfile:
    mu: np.ndarray
    gaps: np.ndarray
    min_gap: float


def validate(instance: MipsInstance) -> None:
    """Raise :class:`ValidationError` unless ``instance`` is well formed."""
    atoms, query = instance.atoms, instance.query
    if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
        raise ValidationError("empty-instance", f"atom matrix has shape {atoms.shape}")
    if query.shape[0] != atoms.shape[1]:
        raise ValidationError(
            "dimension-mismatch",
            f"query has length {query.shape[0]} but atoms have {atoms.shape[1]} columns",
        )
    bad = ~np.isfinite(atoms)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise ValidationError("non-finite-entry", f"atoms[{row}, {col}] = {atoms[row, col]}")
    bad = ~np.isfinite(query)
    if bad.any():
        col = int(np.flatnonzero(bad)[0])
        raise ValidationError("non-finite-entry", f"query[{col}] = {query[col]}")


def argmax_lowest(values) -> int:
    # np.argmax already returns the first maximal index
    return int(np.argmax(np.asarray(values)))


def rank_desc(values, indices=None) -> np.ndarray:
    """Indices sorted by value descending, ties by ascending index."""
    values = np.asarray(values, dtype=np.float64)
    if indices is None:
        indices = np.arange(values.shape[0])
    indices = np.asarray(indices)
    order = np.lexsort((indices, -values))
    return indices[order]


def exact_products(instance: MipsInstance, rows, ledger: SampleLedger) -> np.ndarray:
    """Full dot products ``v_i . q`` for the given rows, charged at ``d`` each."""
    rows = np.asarray(rows, dtype=np.intp)
    ledger.charge(rows.shape[0] * instance.d)
    return instance.atoms[rows] @ instance.query


def naive_mips(instance: MipsInstance, ledger: SampleLedger | None = None) -> MipsResult:
    validate(instance)
    ledger = SampleLedger() if ledger is None else ledger
    run = SampleLedger()
    products = exact_products(instance, np.arange(instance.n), run)
    ledger.charge(run.mults)
    best = argmax_lowest(products)
    return MipsResult(best, {best: float(products[best]) / instance.d}, run, True)


def naive_topk(instance: MipsInstance, k: int, ledger: SampleLedger | None = None) -> MipsResult:
    validate(instance)
    if not 1 <= k <= instance.n:
        raise ValueError(f"invalid-k: k={k} with n={instance.n}")
    ledger = SampleLedger() if ledger is None else ledger
    run = SampleLedger()
    products = exact_products(instance, np.arange(instance.n), run)
    ledger.charge(run.mults)
    top = rank_desc(products)[:k]
    estimates = {int(i): float(products[i]) / instance.d for i in top}
    return MipsResult(tuple(int(i) for i in top), estimates, run, True)


def gap_profile(instance: MipsInstance) -> GapProfile:
    validate(instance)
    if instance.n < 2:
        raise DegenerateInstanceError("gap profile needs at least two atoms")
    mu = (instance.atoms @ instance.query) / instance.d
    best = argmax_lowest(mu)
    gaps = mu[best] - mu
    gaps[best] = 0.0
    return GapProfile(mu, gaps, float(np.min(np.delete(gaps, best))))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for a sub-run (e.g. one MP step)."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """The single generator a solver run draws from.

    ``make_rng(seed)`` is the stream of a plain solve; extra ``keys`` give
    independent side streams (warm-start cache, norm probes).
    """
    if keys:
        return np.random.default_rng([int(seed), *map(int, keys)])
    return np.random.default_rng(int(seed))
