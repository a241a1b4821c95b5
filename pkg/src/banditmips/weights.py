"""Coordinate samplers and sampling-weight constructions.

A sampler is immutable; each solver run opens its own :class:`CoordinateStream`
with ``sampler.stream(rng)``. A stream hands out blocks of coordinate indices
together with the factor that turns ``q_J * v_iJ`` into the sampler's
estimator of the normalized inner product.
"""
from __future__ import annotations

import math

import numpy as np

from .core import MipsError, MipsInstance, SampleLedger


class DegenerateWeightsError(MipsError, ValueError):
    kind = "degenerate-weights"


def _normalize(raw: np.ndarray) -> np.ndarray:
    total = math.fsum(raw)
    if not total > 0.0 or not math.isfinite(total):
        raise DegenerateWeightsError("sampling weights have no positive mass")
    w = raw / total
    # fold the rounding residue into the largest entry so the sum is 1 to ~1 ulp
    w[int(np.argmax(w))] += 1.0 - math.fsum(w)
    return w


def optimal_weights(instance: MipsInstance, ledger: SampleLedger | None = None) -> np.ndarray:
    """Variance-minimizing weights ``w_j ∝ |q_j| * ||column j||``.

    Costs ``n*d`` multiplications (the column norms); charge them to a
    preprocessing ledger if one is given.
    """
    if ledger is not None:
        ledger.charge(instance.n * instance.d)
    col_sq = np.einsum("ij,ij->j", instance.atoms, instance.atoms)
    raw = np.sqrt(instance.query**2 * col_sq)
    return _normalize(raw)


def query_only_weights(query, beta: float) -> np.ndarray:
    """Tempered weights ``w_j ∝ |q_j|**(2*beta)``.

    Evaluated in log space so that large ``beta`` concentrates mass instead of
    overflowing. ``beta = 0`` is uniform over all coordinates.
    """
    q = np.abs(np.asarray(query, dtype=np.float64))
    if not math.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be finite and nonnegative, got {beta}")
    if not np.any(q > 0):
        raise DegenerateWeightsError("all-zero query")
    if beta == 0:
        return np.full(q.shape[0], 1.0 / q.shape[0])
    with np.errstate(divide="ignore"):
        logw = 2.0 * beta * np.log(q)
    logw -= logw.max()
    return _normalize(np.exp(logw))


def alpha_order(query) -> np.ndarray:
    """Coordinates by ``q_j**2`` descending, ties by ascending index."""
    q = np.asarray(query, dtype=np.float64)
    return np.lexsort((np.arange(q.shape[0]), -(q * q)))


def combined_variance(instance: MipsInstance, weights) -> float:
    """Sum over atoms of Var[q_J v_iJ / (d w_J)] with ``J ~ weights``."""
    w = np.asarray(weights, dtype=np.float64)
    d = instance.d
    num = (instance.query**2) * np.einsum("ij,ij->j", instance.atoms, instance.atoms)
    if np.any((w <= 0) & (num > 0)):
        return math.inf
    support = w > 0
    second = np.sum(num[support] / (d * d * w[support]))
    mu = (instance.atoms @ instance.query) / d
    return float(second - np.sum(mu * mu))


def estimator_mean_identity(instance: MipsInstance, weights) -> np.ndarray:
    """Exact expectation of the weighted estimator, per atom.

    ``sum_j w_j * q_j v_ij / (d w_j)`` over the support of ``w``; equals the
    normalized inner product whenever ``w`` covers the support of ``q * v_i``.
    """
    w = np.asarray(weights, dtype=np.float64)
    support = np.flatnonzero(w > 0)
    x = instance.atoms[:, support] * instance.query[support] / (instance.d * w[support])
    return x @ w[support]


class CoordinateStream:
    """Per-run source of coordinates. ``take`` may return fewer than asked
    only when the sampler is exhausted."""

    def take(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def exhausted(self) -> bool:
        return False


class _UniformStream(CoordinateStream):
    def __init__(self, d, rng):
        self.d, self.rng = d, rng

    def take(self, k):
        return self.rng.integers(0, self.d, size=k), np.ones(k)


class _WeightedStream(CoordinateStream):
    def __init__(self, sampler, rng):
        self.s, self.rng = sampler, rng

    def take(self, k):
        s = self.s
        u = self.rng.random(k)
        pos = np.minimum(np.searchsorted(s.cdf, u, side="right"), s.support.shape[0] - 1)
        coords = s.support[pos]
        return coords, s.scale[pos]


class _AlphaStream(CoordinateStream):
    def __init__(self, order):
        self.order = order
        self.cursor = 0

    def take(self, k):
        chunk = self.order[self.cursor:self.cursor + k]
        self.cursor += chunk.shape[0]
        return chunk, np.ones(chunk.shape[0])

    @property
    def exhausted(self):
        return self.cursor >= self.order.shape[0]


class UniformSampler:
    kind = "uniform"

    def __init__(self, d: int):
        self.d = int(d)

    def stream(self, rng) -> CoordinateStream:
        return _UniformStream(self.d, rng)


class WeightedSampler:
    """Inverse-CDF sampling from a fixed probability vector.

    Zero-weight coordinates are dropped from the support. Building the
    cumulative table costs ``d`` operations, charged to ``ledger`` if given.
    """

    kind = "weighted"

    def __init__(self, weights, ledger: SampleLedger | None = None):
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite nonnegative vector")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        self.d = w.shape[0]
        self.weights = w
        self.support = np.flatnonzero(w > 0)
        self.cdf = np.cumsum(w[self.support])
        self.cdf[-1] = 1.0
        self.scale = 1.0 / (self.d * w[self.support])
        if ledger is not None:
            ledger.charge(self.d)

    def stream(self, rng) -> CoordinateStream:
        return _WeightedStream(self, rng)


class AlphaSampler:
    """Deterministic traversal of the coordinates in sorted-query order,
    without replacement. The estimator is the plain running mean."""

    kind = "alpha"

    def __init__(self, order):
        self.order = np.asarray(order, dtype=np.intp)
        self.d = self.order.shape[0]

    @classmethod
    def for_query(cls, query) -> "AlphaSampler":
        return cls(alpha_order(query))

    def stream(self, rng=None) -> CoordinateStream:
        return _AlphaStream(self.order)


def sampler_for(instance: MipsInstance, beta: float, ledger: SampleLedger | None = None):
    """Sampler implied by a temperature: 0 uniform, inf alpha, else tempered."""
    if beta == 0:
        return UniformSampler(instance.d)
    if math.isinf(beta):
        return AlphaSampler.for_query(instance.query)
    return WeightedSampler(query_only_weights(instance.query, beta), ledger)
