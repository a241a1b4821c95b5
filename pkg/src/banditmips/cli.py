"""Experiment driver: scaling sweeps, accuracy/speedup tradeoffs, MP runs.

Every trial is reported in multiplications (hardware independent); wall time
is recorded for information only. Exit codes: 0 ok, 2 usage, 3 data error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import datasets
from .bandit import banditmips, banditmips_topk
from .bucket import DEFAULT_BIN_SIZE, DEFAULT_M_PROBE, bucket_search
from .core import BanditConfig, MipsError, MipsInstance, SampleLedger, naive_mips, naive_topk
from .mp import SOLVERS, matching_pursuit
from .weights import AlphaSampler, sampler_for

ALGORITHMS = ("naive", "bandit", "bandit-alpha", "bucket")
TRIAL_HEADER = ["dataset", "n", "d", "algo", "delta", "beta", "seed", "mults", "correct", "wall_nanos"]
SUMMARY_HEADER = ["dataset", "n", "d", "algo", "delta", "beta", "trials", "mean_mults", "speedup", "accuracy"]
MP_HEADER = [
    "dataset", "t", "d", "algo", "delta", "sigma", "seed", "step", "atom", "note",
    "coefficient", "residual_norm", "mults", "projection_mults",
]
SYNTHETIC_SIGMA = 1.0
LOADED_SIGMA = 25.0
SONG_SIGMA = 2.5


@dataclass
class TrialRecord:
    dataset: str
    n: int
    d: int
    algo: str
    delta: float
    beta: float
    seed: int
    mults: int
    correct: bool | None
    wall_nanos: int

    def row(self) -> list:
        correct = "" if self.correct is None else str(self.correct).lower()
        return [self.dataset, self.n, self.d, self.algo, repr(self.delta), _fmt_beta(self.beta),
                self.seed, self.mults, correct, self.wall_nanos]


def _fmt_beta(beta):
    return "inf" if math.isinf(beta) else repr(float(beta))


def precision_at_k(returned, truth, k: int) -> float:
    returned, truth = set(returned), set(truth)
    if len(returned) != k or len(truth) != k:
        raise ValueError(f"size-mismatch: expected {k} distinct indices, got {len(returned)} and {len(truth)}")
    return len(returned & truth) / k


def solve(instance: MipsInstance, algo: str, config: BanditConfig, k: int = 1,
          bin_size: int = DEFAULT_BIN_SIZE, m_probe: int = DEFAULT_M_PROBE):
    """Run one algorithm; returns ``(indices, mults)`` with ``indices`` a tuple."""
    ledger = SampleLedger()
    if algo == "naive":
        best = naive_topk(instance, k, ledger).best
    elif algo in ("bandit", "bandit-alpha"):
        if algo == "bandit-alpha":
            sampler = AlphaSampler.for_query(instance.query)
        else:
            sampler = sampler_for(instance, config.beta)
        if k == 1:
            best = (banditmips(instance, config, sampler, ledger).result.best,)
        else:
            best = banditmips_topk(instance, k, config, sampler, ledger).best
    elif algo == "bucket":
        if k != 1:
            raise ValueError("bucket supports k = 1 only")
        best = (bucket_search(instance, config, bin_size, m_probe, ledger).result.best,)
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    return tuple(best), ledger.mults


class InstanceSource:
    """Builds the instance for a (d, seed) trial, synthetic or from a file."""

    def __init__(self, dataset: str, n: int, matrix=None, query=None, tag=None):
        self.dataset = dataset
        self.n = n
        self.matrix = matrix
        self.query = query
        self.tag = tag or dataset

    def __call__(self, d: int, seed: int) -> MipsInstance:
        if self.matrix is None:
            return datasets.generate(self.dataset, self.n, d, seed)
        rng = np.random.default_rng(int(seed))
        m = self.matrix
        if self.query is None:
            inst = datasets.instance_from_matrix(m, seed)
            atoms, query = inst.atoms, inst.query
        else:
            atoms, query = m, self.query
        if self.n and self.n < atoms.shape[0]:
            atoms = atoms[np.sort(rng.choice(atoms.shape[0], self.n, replace=False))]
        if d > atoms.shape[1]:
            raise ValueError(f"requested d={d} but the matrix has {atoms.shape[1]} columns")
        if d < atoms.shape[1]:
            cols = np.sort(rng.choice(atoms.shape[1], d, replace=False))
            atoms, query = atoms[:, cols], query[cols]
        return MipsInstance(atoms, query)


def _trial(source, d, seed, algo, config, k, **opts) -> TrialRecord:
    inst = source(d, seed)
    cfg = replace(config, seed=seed, beta=math.inf if algo == "bandit-alpha" else config.beta)
    start = time.perf_counter_ns()
    best, mults = solve(inst, algo, cfg, k, **opts)
    wall = time.perf_counter_ns() - start
    truth = naive_topk(inst, k).best
    return TrialRecord(source.tag, inst.n, inst.d, algo, cfg.delta, cfg.beta, seed, mults,
                       set(best) == set(truth), wall)


def run_scaling(source, d_list, algo, config, seeds, k=1, **opts) -> list[TrialRecord]:
    if list(d_list) != sorted(d_list):
        raise ValueError("d-list must be ascending")
    return [_trial(source, d, s, algo, config, k, **opts) for d in d_list for s in seeds]


def run_tradeoff(source, d, algo, deltas, seeds, config, k=1, **opts):
    rows = [
        _trial(source, d, s, algo, replace(config, delta=delta), k, **opts)
        for delta in deltas for s in seeds
    ]
    return rows, summarize(rows)


def summarize(rows) -> list[dict]:
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.dataset, r.n, r.d, r.algo, r.delta, _fmt_beta(r.beta)), []).append(r)
    out = []
    for (dataset, n, d, algo, delta, beta), rs in groups.items():
        mean = float(np.mean([r.mults for r in rs]))
        out.append({
            "dataset": dataset, "n": n, "d": d, "algo": algo, "delta": delta, "beta": beta,
            "trials": len(rs), "mean_mults": mean,
            "speedup": n * d / mean if mean > 0 else math.inf,
            "accuracy": float(np.mean([bool(r.correct) for r in rs])),
        })
    return out


def run_mp(instance: MipsInstance, iterations: int, solver: str, config: BanditConfig,
           dataset: str = "SIMPLE_SONG", t: int = 0, names=None) -> list[list]:
    ledger = SampleLedger()
    steps = matching_pursuit(instance, iterations, solver, config, ledger)
    rows = []
    for s, step in enumerate(steps):
        note = names[step.atom_index] if names else ""
        rows.append([dataset, t, instance.d, solver, repr(config.delta), repr(config.sigma), config.seed,
                     s, step.atom_index, note, repr(step.coefficient), repr(step.residual_norm),
                     step.ledger_delta, step.projection_mults])
    return rows


# ---------------------------------------------------------------------------
# argument handling


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline=""), True


def _write_csv(path, header, rows):
    f, close = _open_out(path)
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            f.close()


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _beta(text):
    value = float(text)
    if math.isnan(value) or value < 0:
        raise argparse.ArgumentTypeError("beta must be nonnegative (or inf)")
    return value


def _add_common(p, with_data=True):
    p.add_argument("--dataset", default="NORMAL_CUSTOM", type=str.upper,
                   choices=datasets.DATASETS, help="synthetic generator (ignored with --data)")
    p.add_argument("--n", type=_positive_int, default=100, help="number of atoms")
    p.add_argument("--algo", default="bandit", choices=ALGORITHMS)
    p.add_argument("--beta", type=_beta, default=0.0,
                   help="sampling temperature for --algo bandit (0 = uniform)")
    p.add_argument("--sigma", type=float, default=None,
                   help=f"sub-Gaussian parameter (default {SYNTHETIC_SIGMA} synthetic, {LOADED_SIGMA} loaded)")
    p.add_argument("--seeds", type=_positive_int, default=10, help="trials use seeds 0..N-1")
    p.add_argument("--k", type=_positive_int, default=1, help="report the top k atoms")
    p.add_argument("--bin-size", type=_positive_int, default=DEFAULT_BIN_SIZE)
    p.add_argument("--m-probe", type=_positive_int, default=DEFAULT_M_PROBE)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--format", default="csv", choices=["csv"])
    if with_data:
        p.add_argument("--data", default=None, help="matrix file (csv or bin) instead of a generator")
        p.add_argument("--query", default=None, help="query vector file; default: a seeded row of --data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="banditmips", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scaling", help="sample complexity as d grows")
    _add_common(p)
    p.add_argument("--d", type=_positive_int, nargs="+", required=True, help="ascending list of dimensions")
    p.add_argument("--delta", type=float, default=1e-3)

    p = sub.add_parser("tradeoff", help="accuracy vs speedup as delta varies")
    _add_common(p)
    p.add_argument("--d", type=_positive_int, default=10_000)
    p.add_argument("--delta", type=float, nargs="+", default=[1e-3])
    p.add_argument("--summary", default=None, help="summary CSV path (default stderr)")

    p = sub.add_parser("mp", help="matching pursuit on SimpleSong or a loaded dictionary")
    p.add_argument("--t", type=_positive_int, nargs="+", default=[1], help="song repetitions")
    p.add_argument("--iterations", type=_positive_int, default=5)
    p.add_argument("--algo", default="bandit", choices=SOLVERS)
    p.add_argument("--delta", type=float, default=1e-4)
    p.add_argument("--sigma", type=float, default=None, help=f"default {SONG_SIGMA} for the song")
    p.add_argument("--seeds", type=_positive_int, default=1)
    p.add_argument("--interval-samples", type=_positive_int, default=datasets.SAMPLE_RATE)
    p.add_argument("--data", default=None, help="dictionary matrix file; needs --query")
    p.add_argument("--query", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="csv", choices=["csv"])

    p = sub.add_parser("gen", help="write a synthetic instance to matrix files")
    p.add_argument("--dataset", default="NORMAL_CUSTOM", type=str.upper, choices=datasets.DATASETS)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="atoms file (.csv or .bin)")
    p.add_argument("--query-out", default=None, help="query file; default: appended as the last row")
    return parser


def _load_vector(path):
    v = datasets.load_matrix(path)
    return v.ravel() if 1 in v.shape else v[0]


def _source(args):
    if args.data is None:
        return InstanceSource(args.dataset, args.n), SYNTHETIC_SIGMA
    matrix = datasets.load_matrix(args.data)
    query = _load_vector(args.query) if args.query else None
    return InstanceSource("FILE", args.n, matrix, query, tag=Path(args.data).stem), LOADED_SIGMA


def _config(args, default_sigma, delta):
    sigma = default_sigma if args.sigma is None else args.sigma
    return BanditConfig(delta=delta, sigma=sigma, beta=getattr(args, "beta", 0.0))


def _cmd_scaling(args):
    source, sigma = _source(args)
    config = _config(args, sigma, args.delta)
    rows = run_scaling(source, args.d, args.algo, config, range(args.seeds), args.k,
                       bin_size=args.bin_size, m_probe=args.m_probe)
    _write_csv(args.out, TRIAL_HEADER, [r.row() for r in rows])


def _cmd_tradeoff(args):
    source, sigma = _source(args)
    config = _config(args, sigma, args.delta[0])
    rows, summary = run_tradeoff(source, args.d, args.algo, args.delta, range(args.seeds), config,
                                 args.k, bin_size=args.bin_size, m_probe=args.m_probe)
    _write_csv(args.out, TRIAL_HEADER, [r.row() for r in rows])
    srows = [[s[h] if h != "delta" else repr(s[h]) for h in SUMMARY_HEADER] for s in summary]
    if args.summary is None:
        w = csv.writer(sys.stderr, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(srows)
    else:
        _write_csv(args.summary, SUMMARY_HEADER, srows)


def _cmd_mp(args):
    rows = []
    if args.data is not None:
        if args.query is None:
            raise ValueError("--data needs --query for matching pursuit")
        inst = MipsInstance(datasets.load_matrix(args.data), _load_vector(args.query))
        config = _config(args, LOADED_SIGMA, args.delta)
        for seed in range(args.seeds):
            rows += run_mp(inst, args.iterations, args.algo, replace(config, seed=seed),
                           dataset=Path(args.data).stem)
    else:
        config = _config(args, SONG_SIGMA, args.delta)
        for t in args.t:
            spec = datasets.SongSpec(t=t, interval_samples=args.interval_samples)
            inst = datasets.gen_simple_song(spec)
            for seed in range(args.seeds):
                rows += run_mp(inst, args.iterations, args.algo, replace(config, seed=seed),
                               t=t, names=spec.atom_names)
    _write_csv(args.out, MP_HEADER, rows)


def _cmd_gen(args):
    inst = datasets.generate(args.dataset, args.n, args.d, args.seed)
    if args.query_out:
        datasets.save_matrix(args.out, inst.atoms)
        datasets.save_matrix(args.query_out, inst.query[None, :])
    else:
        datasets.save_matrix(args.out, np.vstack([inst.atoms, inst.query]))


COMMANDS = {"scaling": _cmd_scaling, "tradeoff": _cmd_tradeoff, "mp": _cmd_mp, "gen": _cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (MipsError, OSError) as exc:
        print(f"banditmips: data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"banditmips: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
