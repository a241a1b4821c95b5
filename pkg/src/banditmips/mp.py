"""Matching pursuit with a pluggable MIPS solver for atom selection.

Selection maximizes ``|<r, v>|`` by running the signed solver over the
dictionary stacked with its negation (``2n`` arms): arm ``j < n`` is atom
``j``, arm ``n + j`` is ``-v_j``. Only the selection is approximate; the
projection coefficient and the residual update are exact.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bandit import banditmips
from .core import BanditConfig, MipsError, MipsInstance, SampleLedger, derive_seed, naive_mips, validate
from .datasets import SongSpec
from .weights import AlphaSampler, UniformSampler

SOLVERS = ("naive", "bandit", "bandit-alpha")


class InvalidDictionaryError(MipsError, ValueError):
    kind = "invalid-dictionary"


@dataclass(frozen=True)
class PursuitStep:
    """One MP iterate.

    ``ledger_delta`` is the selection cost (the MIPS call); the exact
    projection adds ``projection_mults = 2d`` on top of it.
    """

    atom_index: int
    coefficient: float
    residual_norm: float
    ledger_delta: int
    projection_mults: int = 0
    arm: int = -1
    residual_sq_before: float = 0.0
    atom_norm_sq: float = 0.0


def _select(instance: MipsInstance, solver: str, config: BanditConfig) -> tuple[int, int]:
    run = SampleLedger()
    if solver == "naive":
        best = naive_mips(instance, run).best
    elif solver == "bandit":
        best = banditmips(instance, config, UniformSampler(instance.d), run).result.best
    elif solver == "bandit-alpha":
        best = banditmips(instance, config, AlphaSampler.for_query(instance.query), run).result.best
    else:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    return best, run.mults


def matching_pursuit(
    instance: MipsInstance,
    iterations: int,
    solver: str = "bandit",
    config: BanditConfig | None = None,
    ledger: SampleLedger | None = None,
    tol: float = 1e-9,
) -> list[PursuitStep]:
    """Greedy decomposition of ``instance.query`` over ``instance.atoms``.

    Step ``s`` solves its MIPS with seed ``derive_seed(config.seed, s)``.
    Stops early once a step's contribution ``|c| * ||v|| / ||r_0||`` drops
    below ``tol`` (that step is still reported) or the residual vanishes.
    """
    config = BanditConfig() if config is None else config
    ledger = SampleLedger() if ledger is None else ledger
    validate(instance)
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    atoms = instance.atoms
    n, d = instance.n, instance.d
    zero = np.flatnonzero(~np.any(atoms != 0, axis=1))
    if zero.shape[0]:
        raise InvalidDictionaryError(f"invalid-dictionary: atom {int(zero[0])} has zero norm")

    augmented = np.concatenate([atoms, -atoms])
    augmented.setflags(write=False)
    residual = np.array(instance.query)
    r0 = float(np.sqrt(residual @ residual))
    if r0 == 0.0:
        return []

    steps = []
    for s in range(iterations):
        r_sq = float(residual @ residual)
        if s > 0 and np.sqrt(r_sq) <= tol * r0:
            break
        frozen = residual.copy()
        frozen.setflags(write=False)
        step_config = replace(config, seed=derive_seed(config.seed, s))
        arm, cost = _select(MipsInstance(augmented, frozen), solver, step_config)
        i = arm % n
        v = atoms[i]
        v_sq = float(v @ v)
        c = float(residual @ v) / v_sq
        residual -= c * v
        ledger.charge(cost + 2 * d)
        steps.append(PursuitStep(
            i, c, float(np.sqrt(residual @ residual)), cost, 2 * d, arm, r_sq, v_sq,
        ))
        if abs(c) * np.sqrt(v_sq) / r0 < tol:
            break
    return steps


def song_coefficients(steps, spec: SongSpec | None = None) -> dict[str, float]:
    """Cumulative coefficient per selected atom, keyed by note name."""
    names = (SongSpec() if spec is None else spec).atom_names
    out: dict[str, float] = {}
    for step in steps:
        name = names[step.atom_index]
        out[name] = out.get(name, 0.0) + step.coefficient
    return out
