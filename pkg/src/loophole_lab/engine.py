"""Seeded event-by-event experiment runner.

Randomness comes from Philox, a counter-based generator. A stream is
identified by ``(seed, sub_experiment, purpose, block)``: the key holds
seed and sub-experiment, the counter's high words hold purpose and block.
Events are grouped into fixed blocks of ``BLOCK_SIZE``, so event ``i`` always
draws from the same place regardless of how blocks are spread over workers.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .models import (DetectorMode, DetectorModel, Outcome, SourceModel,
                     outcomes, sample_lambdas)

BLOCK_SIZE = 1 << 16
THREADS_ENV = "LOOPHOLE_LAB_THREADS"

# counter word 1 selects what the stream is used for
_LAMBDA, _DARK_A, _DARK_B, _STOCH_A, _STOCH_B = range(5)

CELLS = ("nn", "ss", "ns", "sn", "a_only_n", "a_only_s",
         "b_only_n", "b_only_s", "neither", "invalid")
JSON_NAMES = {"a_only_n": "aOnlyN", "a_only_s": "aOnlyS",
              "b_only_n": "bOnlyN", "b_only_s": "bOnlyS"}


class ConfigError(ValueError):
    """An experiment configuration violates its invariants."""


def stream(seed: int, sub_experiment: int, purpose: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        key=[seed, sub_experiment], counter=[0, purpose, block, 0]))


@dataclass(frozen=True)
class ExperimentConfig:
    n_pairs: int
    seed: int
    detector_a: DetectorModel
    detector_b: DetectorModel
    source: SourceModel = field(default_factory=SourceModel)
    identical_spins: bool = True
    dark_rate: float = 0.0
    # reuse one event stream for every sub-experiment (common random numbers)
    shared_stream: bool = False

    def __post_init__(self):
        if isinstance(self.n_pairs, bool) or not isinstance(self.n_pairs, (int, np.integer)) or self.n_pairs < 1:
            raise ConfigError(f"nPairs must be a positive integer, got {self.n_pairs!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if not (0.0 <= self.dark_rate < 1.0):
            raise ConfigError(f"darkRate must lie in [0, 1), got {self.dark_rate!r}")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class CountsTable:
    """Tallies for one sub-experiment. Cells are ints, or floats after accidental subtraction."""

    nn: float = 0
    ss: float = 0
    ns: float = 0
    sn: float = 0
    a_only_n: float = 0
    a_only_s: float = 0
    b_only_n: float = 0
    b_only_s: float = 0
    neither: float = 0
    invalid: float = 0
    emitted: int = 0

    @property
    def like(self):
        return self.nn + self.ss

    @property
    def unlike(self):
        return self.ns + self.sn

    @property
    def coincidences(self):
        return self.nn + self.ss + self.ns + self.sn

    @property
    def valid(self):
        return self.emitted - self.invalid

    def cell_sum(self):
        return sum(getattr(self, c) for c in CELLS)

    def check(self) -> "CountsTable":
        if any(getattr(self, c) < 0 for c in CELLS):
            raise AssertionError(f"negative cell in {self}")
        if self.cell_sum() != self.emitted:
            raise AssertionError(f"cells sum to {self.cell_sum()}, emitted {self.emitted}")
        return self

    def __add__(self, other: "CountsTable") -> "CountsTable":
        return CountsTable(**{f.name: getattr(self, f.name) + getattr(other, f.name)
                              for f in dataclasses.fields(self)})

    def to_dict(self) -> dict:
        out = {JSON_NAMES.get(c, c): _plain(getattr(self, c)) for c in CELLS}
        out["emitted"] = int(self.emitted)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CountsTable":
        inv = {v: k for k, v in JSON_NAMES.items()}
        return cls(**{inv.get(k, k): v for k, v in d.items()})


def _plain(x):
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return int(x) if x.is_integer() else x


@dataclass(frozen=True)
class ScanEntry:
    a: float
    b: float
    table: CountsTable

    @property
    def phi(self) -> float:
        return self.b - self.a


@dataclass
class ScanResult:
    entries: list[ScanEntry] = field(default_factory=list)
    config: ExperimentConfig | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[ScanEntry]:
        return iter(self.entries)


@dataclass(frozen=True)
class ChshRun:
    """The four sub-experiment tables in CHSH order: (a,b), (a,b'), (a',b), (a',b')."""

    settings: tuple[float, float, float, float]
    tables: tuple[CountsTable, CountsTable, CountsTable, CountsTable]

    @property
    def labels(self) -> tuple[tuple[float, float], ...]:
        a, ap, b, bp = self.settings
        return ((a, b), (a, bp), (ap, b), (ap, bp))

    def __iter__(self):
        return iter(self.tables)

    def __getitem__(self, i):
        return self.tables[i]

    def __len__(self):
        return 4


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


def _apply_dark(codes: np.ndarray, rate: float, rng: np.random.Generator,
                mode: DetectorMode) -> np.ndarray:
    u = rng.random((2, codes.shape[0]))
    hit = u[0] < rate
    if mode is DetectorMode.ANALYSER_REMOVED:
        spurious = np.full(codes.shape[0], Outcome.DETECT, dtype=np.int8)
    elif mode is DetectorMode.SINGLE_CHANNEL_N:
        spurious = np.full(codes.shape[0], Outcome.N, dtype=np.int8)
    else:
        spurious = np.where(u[1] < 0.5, Outcome.N, Outcome.S).astype(np.int8)
    out = codes.copy()
    quiet = codes == Outcome.NO_DETECT
    out[hit & quiet] = spurious[hit & quiet]
    out[hit & ~quiet] = Outcome.INVALID
    return out


# index = 4*code_a + code_b with DETECT folded onto N
_CELL_OF = {
    (1, 1): "nn", (2, 2): "ss", (1, 2): "ns", (2, 1): "sn",
    (1, 0): "a_only_n", (2, 0): "a_only_s", (0, 1): "b_only_n", (0, 2): "b_only_s",
    (0, 0): "neither",
}


def _block_counts(config: ExperimentConfig, det_a: DetectorModel, det_b: DetectorModel,
                  sub: int, block: int, count: int) -> np.ndarray:
    seed = int(config.seed)
    lam = sample_lambdas(config.source, stream(seed, sub, _LAMBDA, block), count)
    lam_b = lam if config.identical_spins else -lam
    code_a = outcomes(lam, det_a, stream(seed, sub, _STOCH_A, block) if det_a.stochastic else None)
    code_b = outcomes(lam_b, det_b, stream(seed, sub, _STOCH_B, block) if det_b.stochastic else None)
    if config.dark_rate > 0.0:
        code_a = _apply_dark(code_a, config.dark_rate, stream(seed, sub, _DARK_A, block), det_a.mode)
        code_b = _apply_dark(code_b, config.dark_rate, stream(seed, sub, _DARK_B, block), det_b.mode)
    code_a = np.where(code_a == Outcome.DETECT, Outcome.N, code_a)
    code_b = np.where(code_b == Outcome.DETECT, Outcome.N, code_b)
    return np.bincount(code_a.astype(np.int64) * 4 + code_b, minlength=16)


def _tally(hist: np.ndarray, emitted: int) -> CountsTable:
    cells = {name: int(hist[4 * a + b]) for (a, b), name in _CELL_OF.items()}
    invalid = emitted - sum(cells.values())
    return CountsTable(**cells, invalid=invalid, emitted=emitted).check()


def run_pair(config: ExperimentConfig, setting_a: float, setting_b: float,
             sub_experiment: int = 0) -> CountsTable:
    """Run ``config.n_pairs`` events at one pair of settings."""
    sub = 0 if config.shared_stream else sub_experiment
    det_a = config.detector_a.at(setting_a)
    det_b = config.detector_b.at(setting_b)
    n = int(config.n_pairs)
    blocks = [(k, min(BLOCK_SIZE, n - k * BLOCK_SIZE)) for k in range(math.ceil(n / BLOCK_SIZE))]

    def work(job):
        return _block_counts(config, det_a, det_b, sub, *job)

    workers = min(worker_count(), len(blocks))
    if workers <= 1:
        parts = map(work, blocks)
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, blocks))
    return _tally(sum(parts), n)


def _strictly_increasing(grid: Sequence[float], name: str) -> list[float]:
    grid = [float(x) for x in grid]
    if any(not math.isfinite(x) for x in grid):
        raise ValueError(f"{name} contains a non-finite angle")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"{name} must be strictly increasing (no duplicates)")
    return grid


def run_scan(config: ExperimentConfig, phi_grid: Sequence[float], fixed_a: float = 0.0) -> ScanResult:
    """One sub-experiment per phi with setting_b = fixed_a + phi."""
    phis = _strictly_increasing(phi_grid, "phi grid")
    entries = [ScanEntry(fixed_a, fixed_a + phi, run_pair(config, fixed_a, fixed_a + phi, i))
               for i, phi in enumerate(phis)]
    return ScanResult(entries, config)


def run_grid_ab(config: ExperimentConfig, a_grid: Sequence[float], b_grid: Sequence[float]) -> ScanResult:
    """Cartesian product of settings, ordered by (a, b)."""
    a_vals = _strictly_increasing(a_grid, "a grid")
    b_vals = _strictly_increasing(b_grid, "b grid")
    entries = []
    for i, a in enumerate(a_vals):
        for j, b in enumerate(b_vals):
            entries.append(ScanEntry(a, b, run_pair(config, a, b, i * len(b_vals) + j)))
    return ScanResult(entries, config)


def run_chsh(config: ExperimentConfig, a: float, a_prime: float, b: float, b_prime: float) -> ChshRun:
    pairs = ((a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime))
    tables = tuple(run_pair(config, x, y, k) for k, (x, y) in enumerate(pairs))
    return ChshRun((a, a_prime, b, b_prime), tables)
