"""Adaptive-sampling maximum inner product search."""
from .bandit import (
    SolveOutcome,
    banditmips,
    banditmips_topk,
    confidence_width,
    warm_start_batch,
)
from .bucket import bucket_ae, bucket_search
from .core import (
    BanditConfig,
    DegenerateInstanceError,
    MipsError,
    MipsInstance,
    MipsResult,
    SampleLedger,
    ValidationError,
    gap_profile,
    naive_mips,
    naive_topk,
)
from .mp import PursuitStep, matching_pursuit
from .weights import AlphaSampler, UniformSampler, WeightedSampler, optimal_weights, query_only_weights

__all__ = [
    "AlphaSampler", "BanditConfig", "DegenerateInstanceError", "MipsError", "MipsInstance",
    "MipsResult", "PursuitStep", "SampleLedger", "SolveOutcome", "UniformSampler",
    "ValidationError", "WeightedSampler", "banditmips", "banditmips_topk", "bucket_ae",
    "bucket_search", "confidence_width", "gap_profile", "matching_pursuit", "naive_mips",
    "naive_topk", "optimal_weights", "query_only_weights", "warm_start_batch",
]
