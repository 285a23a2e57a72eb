"""Persistence and patience: per-epoch hit detection on GE curves and the
consecutive-hit counter that decides when training stops."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from ge_sentinel.core import (
    DEFAULT_LOG_FLOOR,
    AttackSet,
    DomainError,
    StructureError,
    UsageError,
)
from ge_sentinel.engine import GEConfig, GECurve, ge_curve_optimized


@dataclass(frozen=True)
class Full:
    """Every checkpoint of the window must lie inside the area."""


@dataclass(frozen=True)
class Binary:
    """At least ``fraction`` of the window's checkpoints must lie inside."""

    fraction: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction <= 1.0:
            raise DomainError(f"binary fraction must be in (0, 1], got {self.fraction}")


PersistenceMode = Union[Full, Binary]


@dataclass(frozen=True)
class Soft:
    """``v`` is found per epoch where the curve enters the area."""


@dataclass(frozen=True)
class Greedy:
    """``v`` is fixed up front: the curve must already be inside at ``v``."""

    v: int

    def __post_init__(self) -> None:
        if self.v <= 0:
            raise DomainError(f"greedy v must be positive, got {self.v}")


PersistenceCase = Union[Soft, Greedy]


@dataclass(frozen=True)
class PersistenceConfig:
    mode: PersistenceMode = field(default_factory=Full)
    case: PersistenceCase = field(default_factory=Soft)


@dataclass(frozen=True)
class AreaOfHit:
    """The rectangle ``[v, n_a] x [0, w]`` in (traces, GE) space.

    ``v`` is None in the soft case.
    """

    w: float
    n_a: int
    v: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_a < 1:
            raise DomainError(f"n_a must be positive, got {self.n_a}")
        if self.v is not None and not 0 < self.v <= self.n_a:
            raise StructureError(f"v must satisfy 0 < v <= n_a, got v={self.v}, n_a={self.n_a}")


def _inside_fraction_ok(inside: np.ndarray, mode: PersistenceMode) -> bool:
    if inside.size == 0:
        return False
    if isinstance(mode, Full):
        return bool(inside.all())
    return np.count_nonzero(inside) / inside.size >= mode.fraction


def _window(curve: GECurve, n_a: int | None) -> tuple[np.ndarray, np.ndarray]:
    if n_a is None:
        return curve.checkpoints, curve.values
    keep = curve.checkpoints <= n_a
    return curve.checkpoints[keep], curve.values[keep]


def compute_v_soft(curve: GECurve, w: float, mode: PersistenceMode = Full(),
                   n_a: int | None = None) -> int | None:
    """Smallest checkpoint from which the curve persists inside ``[0, w]``.

    Only checkpoints up to ``n_a`` (default: the whole curve) count. In
    binary mode the returned checkpoint must itself be inside the area.
    Returns None if no such checkpoint exists.
    """
    if len(curve) == 0:
        raise StructureError("empty GE curve")
    cps, vals = _window(curve, n_a)
    inside = vals <= w
    # inside counts of every suffix, so each candidate start is O(1)
    suffix_in = np.cumsum(inside[::-1])[::-1]
    for j in range(cps.shape[0]):
        if not inside[j]:
            continue
        total = cps.shape[0] - j
        if isinstance(mode, Full):
            ok = suffix_in[j] == total
        else:
            ok = suffix_in[j] / total >= mode.fraction
        if ok:
            return int(cps[j])
    return None


def _greedy_v(area: AreaOfHit, cfg: PersistenceConfig) -> int:
    assert isinstance(cfg.case, Greedy)
    if area.v is not None and area.v != cfg.case.v:
        raise StructureError(f"area v={area.v} disagrees with greedy v={cfg.case.v}")
    if cfg.case.v > area.n_a:
        raise StructureError(f"greedy v={cfg.case.v} exceeds n_a={area.n_a}")
    return cfg.case.v


def persistence_hit(curve: GECurve, area: AreaOfHit,
                    cfg: PersistenceConfig) -> tuple[bool, int | None]:
    """Whether one epoch's GE curve persists inside the area of hit.

    Returns ``(hit, v_used)``. In the soft case ``v_used`` is the entry
    point found on this curve (None on a miss); in the greedy case it is
    the fixed ``v``.
    """
    if len(curve) == 0 or area.n_a > curve.checkpoints[-1]:
        raise StructureError(
            f"n_a={area.n_a} beyond the last GE checkpoint "
            f"{curve.checkpoints[-1] if len(curve) else None}")
    if isinstance(cfg.case, Soft):
        if area.v is not None:
            raise StructureError("soft case takes no fixed v")
        v = compute_v_soft(curve, area.w, cfg.mode, area.n_a)
        return v is not None, v

    v = _greedy_v(area, cfg)
    in_window = (curve.checkpoints >= v) & (curve.checkpoints <= area.n_a)
    if not in_window.any():
        raise StructureError(f"no GE checkpoint inside [{v}, {area.n_a}]")
    return _inside_fraction_ok(curve.values[in_window] <= area.w, cfg.mode), v


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    hit: bool
    v: int | None
    consecutive_hits: int


@dataclass(frozen=True)
class Decision:
    stop: bool
    epoch: int

    def __bool__(self) -> bool:
        return self.stop


@dataclass
class MonitorState:
    """Patience counter. Epochs are numbered from 1."""

    patience: int
    consecutive_hits: int = 0
    epoch_log: list[EpochRecord] = field(default_factory=list)
    stopped_at: int | None = None

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise DomainError(f"patience must be >= 1, got {self.patience}")

    def record(self, hit: bool, v: int | None = None, epoch: int | None = None) -> Decision:
        """Feed one epoch's hit flag through the counter."""
        if self.stopped_at is not None:
            raise UsageError(f"monitor already stopped at epoch {self.stopped_at}")
        last = self.epoch_log[-1].epoch if self.epoch_log else 0
        if epoch is None:
            epoch = last + 1
        elif epoch <= last:
            raise UsageError(f"epoch {epoch} observed after epoch {last}")
        self.consecutive_hits = self.consecutive_hits + 1 if hit else 0
        self.epoch_log.append(EpochRecord(epoch, hit, v, self.consecutive_hits))
        if self.consecutive_hits == self.patience:
            self.stopped_at = epoch
            return Decision(True, epoch)
        return Decision(False, epoch)


def observe_epoch(state: MonitorState, curve: GECurve, area: AreaOfHit,
                  cfg: PersistenceConfig, epoch: int | None = None) -> Decision:
    hit, v = persistence_hit(curve, area, cfg)
    return state.record(hit, v, epoch)


@dataclass
class MonitorReport:
    curves: list[GECurve]
    epochs: list[EpochRecord]
    stopped_at: int | None
    patience: int

    @property
    def hit_epochs(self) -> list[int]:
        return [r.epoch for r in self.epochs if r.hit]

    def write(self, run_dir: str | Path) -> Path:
        """Write ``run_dir/monitor.csv`` and ``run_dir/<epoch>/ge.csv``."""
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        for rec, curve in zip(self.epochs, self.curves):
            d = run_dir / str(rec.epoch)
            d.mkdir(exist_ok=True)
            curve.to_csv(d / "ge.csv")
        with open(run_dir / "monitor.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "hit", "v", "consecutive_hits", "stopped"])
            for rec in self.epochs:
                w.writerow([rec.epoch, int(rec.hit), "" if rec.v is None else rec.v,
                            rec.consecutive_hits, int(rec.epoch == self.stopped_at)])
        return run_dir


def check_monitor_setup(ge_cfg: GEConfig, area: AreaOfHit, cfg: PersistenceConfig) -> None:
    """Reject configurations that could never trigger a stop."""
    if area.n_a > ge_cfg.max_traces:
        raise StructureError(f"n_a={area.n_a} exceeds GE max_traces={ge_cfg.max_traces}")
    if isinstance(cfg.case, Greedy):
        _greedy_v(area, cfg)
    elif area.v is not None:
        raise StructureError("soft case takes no fixed v")


def monitor_training(epoch_source: Iterable[AttackSet], ge_cfg: GEConfig, area: AreaOfHit,
                     cfg: PersistenceConfig, patience: int,
                     log_floor: float = DEFAULT_LOG_FLOOR,
                     workers: int | None = None) -> MonitorReport:
    """Run the early stopper over a stream of per-epoch attack predictions.

    The source is consumed lazily and abandoned at the stop epoch, so a
    generator that trains one epoch per ``next`` is trained no further.

    Raises:
        StructureError: ``n_a`` beyond the traces the GE config draws, or
            beyond what an epoch's attack set holds.
    """
    check_monitor_setup(ge_cfg, area, cfg)
    state = MonitorState(patience)
    curves = []
    for attack in epoch_source:
        curve = ge_curve_optimized(attack, ge_cfg, log_floor, workers)
        curves.append(curve)
        if observe_epoch(state, curve, area, cfg):
            break
    if not curves:
        raise StructureError("epoch source yielded no epochs")
    return MonitorReport(curves, list(state.epoch_log), state.stopped_at, patience)
