"""Guessing-entropy curves, computed two ways, plus a timing harness.

``ge_curve_optimized`` is the block-wise path used in training loops.
``ge_curve_naive`` walks traces, keys and checkpoints one value at a time
and exists as an oracle: both share permutations and accumulation order,
so their outputs are bit-identical.
"""

from __future__ import annotations

import csv
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import numpy.typing as npt

from ge_sentinel.core import (
    DEFAULT_LOG_FLOOR,
    AttackSet,
    DomainError,
    StructureError,
    build_key_table,
    derive_rng,
    label_log_probs,
    sbox_table,
)

THREADS_ENV = "GE_SENTINEL_THREADS"


@dataclass(frozen=True)
class GEConfig:
    n_attacks: int = 10
    max_traces: int = 5000
    step: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_attacks < 1:
            raise DomainError(f"n_attacks must be >= 1, got {self.n_attacks}")
        if self.step < 1:
            raise DomainError(f"step must be >= 1, got {self.step}")
        if self.step > self.max_traces:
            raise StructureError(f"step {self.step} exceeds max_traces {self.max_traces}")

    def checkpoints(self) -> npt.NDArray[np.int64]:
        """``step, 2*step, ...`` up to ``max_traces`` (always included)."""
        pts = np.arange(self.step, self.max_traces + 1, self.step, dtype=np.int64)
        if pts[-1] != self.max_traces:
            pts = np.append(pts, self.max_traces)
        return pts

    def check_against(self, attack: AttackSet) -> None:
        if self.max_traces > attack.n_traces:
            raise StructureError(
                f"max_traces {self.max_traces} exceeds the {attack.n_traces} available attack traces")


@dataclass(frozen=True, eq=False)
class GECurve:
    """Mean rank of the true key at each checkpoint."""

    checkpoints: npt.NDArray[np.int64]
    values: npt.NDArray[np.float64]
    n_attacks: int

    def __post_init__(self) -> None:
        cps = np.asarray(self.checkpoints, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if cps.ndim != 1 or cps.shape != vals.shape:
            raise StructureError("checkpoints and values must be 1-D of equal length")
        if cps.size and np.any(np.diff(cps) <= 0):
            raise StructureError("checkpoints must be strictly increasing")
        object.__setattr__(self, "checkpoints", cps)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.checkpoints.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GECurve):
            return NotImplemented
        return (self.n_attacks == other.n_attacks
                and np.array_equal(self.checkpoints, other.checkpoints)
                and np.array_equal(self.values, other.values))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["n_traces", "ge"])
            for n, v in zip(self.checkpoints.tolist(), self.values.tolist()):
                w.writerow([n, repr(v)])

    @classmethod
    def from_csv(cls, path: str | Path, n_attacks: int = 1) -> GECurve:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        return cls(np.array([int(r["n_traces"]) for r in rows]),
                   np.array([float(r["ge"]) for r in rows]), n_attacks)


def resolve_workers(workers: int | None = None) -> int:
    """Thread count for repetition parallelism; the environment wins."""
    env = os.environ.get(THREADS_ENV)
    if env:
        workers = int(env)
    if workers is None or workers < 1:
        workers = os.cpu_count() or 1
    return workers


def attack_order(n_traces: int, seed: int, repetition: int) -> npt.NDArray[np.intp]:
    """Fisher-Yates shuffle of trace indices for one attack repetition."""
    return derive_rng(seed, "ge-attack", repetition).permutation(n_traces)


ACCUMULATE_CHUNK = 256


def _checkpoint_ranks(table: npt.NDArray[np.float64], order: npt.NDArray[np.intp],
                      checkpoints: npt.NDArray[np.int64], key: int) -> npt.NDArray[np.int64]:
    """Rank of ``key`` at each checkpoint of one attack.

    Scores are a running sum over ``order``, built chunk by chunk with
    ``cumsum`` (a strictly sequential add), carrying the previous chunk's
    last row in. The result is the same float sequence as adding one trace
    at a time; chunking only keeps the working set in cache.
    """
    n_keys = table.shape[1]
    acc = np.zeros(n_keys)
    at_checkpoint = np.empty((checkpoints.shape[0], n_keys))
    j = 0
    for start in range(0, order.shape[0], ACCUMULATE_CHUNK):
        block = np.take(table, order[start:start + ACCUMULATE_CHUNK], axis=0)
        block[0] += acc
        np.cumsum(block, axis=0, out=block)
        acc = block[-1]
        end = start + block.shape[0]
        while j < checkpoints.shape[0] and checkpoints[j] <= end:
            at_checkpoint[j] = block[checkpoints[j] - 1 - start]
            j += 1
    return np.count_nonzero(at_checkpoint > at_checkpoint[:, key, None], axis=1)


def ge_curve_optimized(attack: AttackSet, cfg: GEConfig,
                       log_floor: float = DEFAULT_LOG_FLOOR,
                       workers: int | None = None) -> GECurve:
    cfg.check_against(attack)
    table = build_key_table(attack, log_floor).rows
    checkpoints = cfg.checkpoints()
    key = attack.true_key

    def ranks_for(rep: int) -> npt.NDArray[np.int64]:
        order = attack_order(attack.n_traces, cfg.seed, rep)[:cfg.max_traces]
        return _checkpoint_ranks(table, order, checkpoints, key)

    n_workers = min(resolve_workers(workers), cfg.n_attacks)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            per_rep = list(pool.map(ranks_for, range(cfg.n_attacks)))
    else:
        per_rep = [ranks_for(r) for r in range(cfg.n_attacks)]
    totals = np.sum(per_rep, axis=0, dtype=np.int64)
    return GECurve(checkpoints, totals / cfg.n_attacks, cfg.n_attacks)


def ge_curve_naive(attack: AttackSet, cfg: GEConfig,
                   log_floor: float = DEFAULT_LOG_FLOOR) -> GECurve:
    cfg.check_against(attack)
    logp = label_log_probs(attack, log_floor).tolist()
    plaintexts = attack.plaintexts.tolist()
    sbox = sbox_table(attack.keyspace_size).tolist()
    n_keys = attack.keyspace_size
    key = attack.true_key
    checkpoints = cfg.checkpoints().tolist()
    totals = [0] * len(checkpoints)

    for rep in range(cfg.n_attacks):
        order = attack_order(attack.n_traces, cfg.seed, rep)[:cfg.max_traces].tolist()
        scores = [0.0] * n_keys
        c = 0
        for n, i in enumerate(order, start=1):
            row = logp[i]
            p = plaintexts[i]
            for k in range(n_keys):
                scores[k] += row[sbox[p ^ k]]
            if n == checkpoints[c]:
                ref = scores[key]
                rank = 0
                for k in range(n_keys):
                    if k != key and scores[k] > ref:
                        rank += 1
                totals[c] += rank
                c += 1
    return GECurve(np.array(checkpoints), np.array([t / cfg.n_attacks for t in totals]),
                   cfg.n_attacks)


@dataclass
class BenchReport:
    rows: list[tuple[str, int, float]]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["impl", "n_traces", "seconds"])
            for impl, n, sec in self.rows:
                w.writerow([impl, n, f"{sec:.6g}"])

    def seconds(self, impl: str) -> dict[int, float]:
        return {n: s for i, n, s in self.rows if i == impl}


IMPLEMENTATIONS: dict[str, Callable[[AttackSet, GEConfig], GECurve]] = {
    "optimized": ge_curve_optimized,
    "naive": ge_curve_naive,
}


def bench_ge(attack: AttackSet, cfg: GEConfig, trials: int = 10,
             impls: Iterable[str] = ("optimized", "naive")) -> BenchReport:
    """Median wall-clock time of a full GE curve up to each checkpoint count.

    For every checkpoint ``n`` each implementation computes a curve with
    ``max_traces = n`` and the configured step.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    cfg.check_against(attack)
    rows = []
    for impl in impls:
        fn = IMPLEMENTATIONS[impl]
        for n in cfg.checkpoints().tolist():
            sub = GEConfig(cfg.n_attacks, n, min(cfg.step, n), cfg.seed)
            times = []
            for _ in range(trials):
                t0 = time.perf_counter()
                fn(attack, sub)
                times.append(time.perf_counter() - t0)
            rows.append((impl, n, statistics.median(times)))
    return BenchReport(rows)
