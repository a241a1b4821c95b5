"""Seeded synthetic instances and matrix file I/O.

Gaussian draws come from numpy's PCG64 ``Generator.standard_normal``
(ziggurat). Per-atom latent parameters are drawn from a stream separate from
the coordinate noise, so for a fixed seed the latent structure (and hence
the gaps between atoms) is the same at every dimension ``d``.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import MipsError, MipsInstance

SAMPLE_RATE = 44_100
NOTE_FREQS = {"C4": 256, "E4": 330, "G4": 392, "C5": 512, "E5": 660, "G5": 784}
CHORD_A = {"C4": 1.0, "E4": 2.0, "G4": 3.0}
CHORD_B = {"G4": 3.0, "C5": 2.5, "E5": 1.5}
DISTRACTOR_FREQS = (294, 440, 523, 587, 698, 880)

DATASETS = ("NORMAL_CUSTOM", "CORRELATED_NORMAL_CUSTOM", "SYMMETRIC_NORMAL")

# stream keys
_LATENT, _ATOMS, _QUERY = 0, 1, 2


def _streams(seed):
    children = np.random.SeedSequence(int(seed)).spawn(3)
    return [np.random.default_rng(c) for c in children]


def gen_normal_custom(n: int, d: int, seed: int) -> MipsInstance:
    """Atom i has coordinates ~ N(theta_i, 1) with theta_i ~ N(0, 1); the
    query is drawn the same way with its own theta."""
    latent, atoms_rng, query_rng = _streams(seed)
    theta = latent.standard_normal(n)
    theta_q = latent.standard_normal()
    atoms = atoms_rng.standard_normal((n, d))
    atoms += theta[:, None]
    query = query_rng.standard_normal(d) + theta_q
    return MipsInstance(atoms, query)


def gen_correlated_normal_custom(n: int, d: int, seed: int, noise_sigma: float = 1.0) -> MipsInstance:
    """Query ~ N(theta, 1) coordinate-wise; atom i = w_i * q + N(0, noise_sigma^2)."""
    latent, atoms_rng, query_rng = _streams(seed)
    theta_q = latent.standard_normal()
    w = latent.standard_normal(n)
    query = query_rng.standard_normal(d) + theta_q
    atoms = atoms_rng.standard_normal((n, d))
    atoms *= noise_sigma
    atoms += w[:, None] * query[None, :]
    return MipsInstance(atoms, query)


def gen_symmetric_normal(n: int, d: int, seed: int) -> MipsInstance:
    _, atoms_rng, query_rng = _streams(seed)
    return MipsInstance(atoms_rng.standard_normal((n, d)), query_rng.standard_normal(d))


def generate(dataset: str, n: int, d: int, seed: int, **kwargs) -> MipsInstance:
    key = dataset.upper().replace("-", "_")
    if key == "NORMAL_CUSTOM":
        return gen_normal_custom(n, d, seed)
    if key == "CORRELATED_NORMAL_CUSTOM":
        return gen_correlated_normal_custom(n, d, seed, **kwargs)
    if key in ("SYMMETRIC_NORMAL", "SYMMETRICNORMAL"):
        return gen_symmetric_normal(n, d, seed)
    raise ValueError(f"unknown dataset {dataset!r}")


@dataclass(frozen=True)
class SongSpec:
    """A repeated two-chord song. Intervals default to one second."""

    t: int = 1
    interval_samples: int = SAMPLE_RATE
    sample_rate: int = SAMPLE_RATE
    note_freqs: dict = field(default_factory=lambda: dict(NOTE_FREQS))
    chord_a: dict = field(default_factory=lambda: dict(CHORD_A))
    chord_b: dict = field(default_factory=lambda: dict(CHORD_B))
    extra_freqs: tuple = DISTRACTOR_FREQS

    def __post_init__(self):
        if self.t < 1 or self.interval_samples < 1 or self.sample_rate < 1:
            raise ValueError("t, interval_samples and sample_rate must be positive")

    @property
    def d(self) -> int:
        return 2 * self.t * self.interval_samples

    @property
    def atom_names(self) -> list[str]:
        return list(self.note_freqs) + [f"{f}Hz" for f in self.extra_freqs]

    @property
    def atom_freqs(self) -> list[float]:
        return list(self.note_freqs.values()) + list(self.extra_freqs)


def _tone(freq, samples, rate):
    return np.sin(2.0 * np.pi * freq * (np.arange(samples) / rate))


def gen_simple_song(spec: SongSpec | None = None) -> MipsInstance:
    """Query: ``t`` repetitions of an A interval then a B interval. Atoms:
    unit sine waves over the whole song, one per note plus the distractors."""
    spec = SongSpec() if spec is None else spec
    period = 2 * spec.interval_samples
    block = np.zeros(period)
    for chord, offset in ((spec.chord_a, 0), (spec.chord_b, spec.interval_samples)):
        for note, amp in chord.items():
            wave = _tone(spec.note_freqs[note], period, spec.sample_rate)
            block[offset:offset + spec.interval_samples] += amp * wave[offset:offset + spec.interval_samples]
    query = np.tile(block, spec.t)
    atoms = np.stack([_tone(f, spec.d, spec.sample_rate) for f in spec.atom_freqs])
    return MipsInstance(atoms, query)


# ---------------------------------------------------------------------------
# matrix files

BIN_MAGIC = b"BMIPSB01"
_HEADER = struct.Struct("<8sQQ")
_MAX_CELLS = (2**63 - 1 - _HEADER.size) // 8


class DataFormatError(MipsError, ValueError):
    def __init__(self, kind: str, message: str, position: int | None = None):
        where = "" if position is None else f" (at {position})"
        super().__init__(f"{kind}: {message}{where}")
        self.kind = kind
        self.position = position


def _infer_format(path, fmt):
    if fmt is not None:
        return fmt
    return "csv" if str(path).lower().endswith(".csv") else "bin"


def save_matrix(path, matrix, fmt: str | None = None) -> None:
    """Write ``matrix`` as ``csv`` (header ``"n d"``) or ``bin`` (magic,
    little-endian u64 n and d, row-major little-endian float64)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    fmt = _infer_format(path, fmt)
    if fmt == "bin":
        with open(path, "wb") as f:
            f.write(_HEADER.pack(BIN_MAGIC, m.shape[0], m.shape[1]))
            f.write(m.astype("<f8").tobytes(order="C"))
    elif fmt == "csv":
        with open(path, "w") as f:
            f.write(f"{m.shape[0]} {m.shape[1]}\n")
            np.savetxt(f, m, delimiter=",", fmt="%.17g")
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def load_matrix(path, fmt: str | None = None) -> np.ndarray:
    fmt = _infer_format(path, fmt)
    if fmt == "bin":
        return _load_bin(path)
    if fmt == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown matrix format {fmt!r}")


def _load_bin(path) -> np.ndarray:
    size = os.path.getsize(path)
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < len(BIN_MAGIC):
            raise DataFormatError("truncated-file", "missing magic", len(head))
        if head[:8] != BIN_MAGIC:
            raise DataFormatError("bad-magic", f"expected {BIN_MAGIC!r}, found {head[:8]!r}", 0)
        if len(head) < _HEADER.size:
            raise DataFormatError("truncated-file", "header shorter than 24 bytes", len(head))
        _, n, d = _HEADER.unpack(head)
        if n == 0 or d == 0 or n > _MAX_CELLS // max(d, 1):
            raise DataFormatError("dimension-overflow", f"n={n}, d={d} is not a storable shape", 8)
        expected = _HEADER.size + 8 * n * d
        if size < expected:
            raise DataFormatError("truncated-file", f"need {expected} bytes, file has {size}", size)
        if size > expected:
            raise DataFormatError("parse-error", f"{size - expected} trailing bytes", expected)
        data = np.frombuffer(f.read(8 * n * d), dtype="<f8")
    return data.astype(np.float64).reshape(n, d)


def _load_csv(path) -> np.ndarray:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].strip():
        raise DataFormatError("truncated-file", "empty file", 1)
    parts = lines[0].split()
    try:
        n, d = (int(p) for p in parts)
    except ValueError:
        raise DataFormatError("parse-error", f"bad header {lines[0]!r}", 1) from None
    if n < 1 or d < 1 or n > _MAX_CELLS // d:
        raise DataFormatError("dimension-overflow", f"n={n}, d={d} is not a storable shape", 1)
    rows = [ln for ln in lines[1:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) < n:
        raise DataFormatError("truncated-file", f"expected {n} rows, found {len(rows)}", len(rows) + 2)
    if len(rows) > n:
        raise DataFormatError("parse-error", f"expected {n} rows, found {len(rows)}", n + 2)
    out = np.empty((n, d))
    for i, row in enumerate(rows):
        fields = row.split(",")
        if len(fields) != d:
            raise DataFormatError("parse-error", f"expected {d} values, found {len(fields)}", i + 2)
        try:
            out[i] = [float(x) for x in fields]
        except ValueError as exc:
            raise DataFormatError("parse-error", str(exc), i + 2) from None
    return out


def instance_from_matrix(matrix, seed: int, query_row: int | None = None) -> MipsInstance:
    """Split a loaded matrix into atoms and a query.

    One row becomes the query (chosen by ``seed`` unless ``query_row`` is
    given) and the remaining rows are the atoms.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape[0] < 2:
        raise ValueError("need at least two rows to split into atoms and a query")
    if query_row is None:
        query_row = int(np.random.default_rng(int(seed)).integers(m.shape[0]))
    return MipsInstance(np.delete(m, query_row, axis=0), m[query_row])
