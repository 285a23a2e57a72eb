"""Grid search that ends as soon as one training run meets the stop rule."""

from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

from ge_sentinel.core import DEFAULT_LOG_FLOOR, AttackSet, StructureError
from ge_sentinel.earlystop import (
    AreaOfHit,
    MonitorReport,
    PersistenceConfig,
    check_monitor_setup,
    monitor_training,
)
from ge_sentinel.engine import GEConfig

log = logging.getLogger(__name__)

GridPoint = dict[str, Any]
Trainer = Callable[[GridPoint], Iterable[AttackSet]]


@dataclass(frozen=True)
class HyperSpace:
    axes: tuple[tuple[str, tuple[Any, ...]], ...]

    def __post_init__(self) -> None:
        axes = tuple((str(name), tuple(values)) for name, values in self.axes)
        if not axes:
            raise StructureError("hyper-parameter space has no axes")
        names = [n for n, _ in axes]
        if len(set(names)) != len(names):
            raise StructureError(f"duplicate axis names in {names}")
        for name, values in axes:
            if not values:
                raise StructureError(f"axis {name!r} has no values")
        object.__setattr__(self, "axes", axes)

    @property
    def size(self) -> int:
        n = 1
        for _, values in self.axes:
            n *= len(values)
        return n

    @classmethod
    def from_dict(cls, d: dict) -> HyperSpace:
        try:
            return cls(tuple((a["name"], a["values"]) for a in d["axes"]))
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed hyper-parameter space: {exc!r}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> HyperSpace:
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise StructureError(f"{path}: {exc}") from exc
        if not isinstance(d, dict):
            raise StructureError(f"{path}: expected a JSON object")
        return cls.from_dict(d)


def enumerate_grid(space: HyperSpace) -> list[GridPoint]:
    """All grid points, last axis varying fastest."""
    names = [n for n, _ in space.axes]
    return [dict(zip(names, combo))
            for combo in itertools.product(*(values for _, values in space.axes))]


class StopReason(Enum):
    FOUND_WINNER = "found_winner"
    EXHAUSTED = "exhausted"


@dataclass
class PointResult:
    index: int  # 1-based position in the grid
    params: GridPoint
    report: Optional[MonitorReport]
    error: Optional[str] = None

    @property
    def stopped_at(self) -> int | None:
        return self.report.stopped_at if self.report else None


@dataclass
class SearchOutcome:
    evaluated: list[PointResult]
    winner: Optional[PointResult]
    stop_reason: StopReason

    def write(self, out_dir: str | Path) -> Path:
        """One ``<point_index>/`` run directory per evaluated point plus ``search.csv``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "search.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["point_index", "params", "stopped_at", "hit_epochs"])
            for res in self.evaluated:
                point_dir = out_dir / str(res.index)
                if res.report is not None:
                    res.report.write(point_dir)
                else:
                    point_dir.mkdir(exist_ok=True)
                    (point_dir / "error.txt").write_text((res.error or "") + "\n")
                hits = res.report.hit_epochs if res.report else []
                w.writerow([res.index, json.dumps(res.params, sort_keys=True),
                            "" if res.stopped_at is None else res.stopped_at,
                            ";".join(map(str, hits))])
        return out_dir


def search(space: HyperSpace, trainer: Trainer, ge_cfg: GEConfig, area: AreaOfHit,
           persistence: PersistenceConfig, patience: int,
           log_floor: float = DEFAULT_LOG_FLOOR, workers: int | None = None) -> SearchOutcome:
    """Train grid points in order until one of them triggers the early stop.

    A point whose trainer raises is recorded with its error and the search
    moves on.
    """
    check_monitor_setup(ge_cfg, area, persistence)
    evaluated = []
    for index, point in enumerate(enumerate_grid(space), start=1):
        try:
            report = monitor_training(trainer(point), ge_cfg, area, persistence, patience,
                                      log_floor, workers)
        except Exception as exc:  # noqa: BLE001 -- one bad point must not end the campaign
            log.warning("grid point %d %s failed: %s", index, point, exc)
            evaluated.append(PointResult(index, point, None, f"{type(exc).__name__}: {exc}"))
            continue
        res = PointResult(index, point, report)
        evaluated.append(res)
        if report.stopped_at is not None:
            return SearchOutcome(evaluated, res, StopReason.FOUND_WINNER)
    return SearchOutcome(evaluated, None, StopReason.EXHAUSTED)
