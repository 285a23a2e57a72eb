"""Synthetic stand-in for a training loop.

Each epoch yields softmax predictions whose logit for the true label is
boosted by that epoch's signal strength, on top of Gaussian noise. The
plaintexts of a run never change, so epoch-to-epoch GE differences come
only from the simulated model quality.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ge_sentinel.core import AttackSet, DomainError, StructureError, derive_rng, sbox_table


@dataclass(frozen=True)
class LeakageSchedule:
    n_epochs: int
    signal: tuple[float, ...]
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "signal", tuple(float(s) for s in self.signal))
        if len(self.signal) != self.n_epochs:
            raise StructureError(f"{len(self.signal)} signal values for {self.n_epochs} epochs")
        if any(s < 0 for s in self.signal):
            raise DomainError("signal strengths must be >= 0")
        if self.noise_sigma < 0:
            raise DomainError("noise_sigma must be >= 0")

    def with_seed(self, seed: int) -> LeakageSchedule:
        return LeakageSchedule(self.n_epochs, self.signal, self.noise_sigma, seed)

    def to_json(self, path: str | Path) -> None:
        d = asdict(self)
        d["signal"] = list(self.signal)
        Path(path).write_text(json.dumps(d, indent=2) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> LeakageSchedule:
        d = json.loads(Path(path).read_text())
        try:
            return cls(int(d["n_epochs"]), d["signal"], float(d.get("noise_sigma", 1.0)),
                       int(d.get("seed", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"{path}: bad schedule ({exc})") from exc


@dataclass(frozen=True)
class EpochBatch:
    epoch: int
    attack: AttackSet


def run_plaintexts(seed: int, n_traces: int, keyspace: int) -> np.ndarray:
    return derive_rng(seed, "plaintexts").integers(0, keyspace, n_traces, dtype=np.uint8)


def generate_epoch(schedule: LeakageSchedule, epoch: int, n_traces: int,
                   keyspace: int = 256, true_key: int = 0) -> EpochBatch:
    """Predictions of the simulated model after ``epoch`` (0-based).

    Trace ``i`` gets logits ``theta * onehot(true_label_i) + noise_sigma * z_i``
    with ``z_i`` standard normal, then a softmax. Noise rows are drawn in
    trace order from a per-epoch stream, so trace ``i`` does not depend on
    ``n_traces``.
    """
    if not 0 <= epoch < schedule.n_epochs:
        raise DomainError(f"epoch {epoch} outside [0, {schedule.n_epochs})")
    sbox = sbox_table(keyspace)
    if not 0 <= true_key < keyspace:
        raise DomainError(f"true_key {true_key} outside keyspace {keyspace}")
    plaintexts = run_plaintexts(schedule.seed, n_traces, keyspace)
    labels = sbox[plaintexts.astype(np.intp) ^ true_key]

    logits = derive_rng(schedule.seed, "epoch-noise", epoch).standard_normal((n_traces, keyspace))
    logits *= schedule.noise_sigma
    logits[np.arange(n_traces), labels] += schedule.signal[epoch]
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return EpochBatch(epoch, AttackSet(logits.astype(np.float32), plaintexts, true_key, keyspace))


def epoch_stream(schedule: LeakageSchedule, n_traces: int, keyspace: int = 256,
                 true_key: int = 0) -> Iterator[AttackSet]:
    """Lazily yields one attack set per epoch, as a training loop would."""
    for e in range(schedule.n_epochs):
        yield generate_epoch(schedule, e, n_traces, keyspace, true_key).attack


def overfit_schedule(n_epochs: int, peak_epoch: int, theta_max: float, plateau: int = 10,
                     noise_sigma: float = 1.0, seed: int = 0) -> LeakageSchedule:
    """Linear ramp to ``theta_max`` at ``peak_epoch``, hold, then linear decay.

    ``signal[peak_epoch : peak_epoch + plateau + 1]`` all equal ``theta_max``;
    the decay reaches ``theta_max / remaining`` at the last epoch.
    """
    if not 0 < peak_epoch < n_epochs:
        raise DomainError(f"peak_epoch must be in (0, {n_epochs}), got {peak_epoch}")
    if plateau < 0:
        raise DomainError("plateau must be >= 0")
    hold_end = min(peak_epoch + plateau, n_epochs - 1)
    remaining = n_epochs - hold_end
    signal = []
    for e in range(n_epochs):
        if e < peak_epoch:
            signal.append(theta_max * e / peak_epoch)
        elif e <= hold_end:
            signal.append(theta_max)
        else:
            signal.append(theta_max * (1 - (e - hold_end) / remaining))
    return LeakageSchedule(n_epochs, signal, noise_sigma, seed)


def ramp_schedule(n_epochs: int, theta_max: float, noise_sigma: float = 1.0,
                  seed: int = 0) -> LeakageSchedule:
    """Linear improvement from no signal to ``theta_max`` at the last epoch."""
    if n_epochs < 2:
        return LeakageSchedule(n_epochs, [theta_max] * n_epochs, noise_sigma, seed)
    return LeakageSchedule(n_epochs, [theta_max * e / (n_epochs - 1) for e in range(n_epochs)],
                           noise_sigma, seed)


def flat_schedule(n_epochs: int, theta: float = 0.0, noise_sigma: float = 1.0,
                  seed: int = 0) -> LeakageSchedule:
    return LeakageSchedule(n_epochs, [theta] * n_epochs, noise_sigma, seed)


@dataclass(frozen=True)
class Preset:
    """A named schedule together with the attack geometry it was tuned for.

    ``n_traces`` is the size of each epoch's attack set; each GE repetition
    draws ``max_traces`` of them. A large pool with many short attacks
    makes the hit/miss boundary in signal strength narrow.
    """

    name: str
    n_epochs: int
    theta: float
    noise_sigma: float = 1.0
    peak_epoch: int = 10
    plateau: int = 10
    n_traces: int = 10_000
    max_traces: int = 100
    step: int = 10
    n_attacks: int = 100

    def schedule(self, seed: int = 0, **overrides) -> LeakageSchedule:
        p = {"n_epochs": self.n_epochs, "theta": self.theta, "noise_sigma": self.noise_sigma,
             "peak_epoch": self.peak_epoch, "plateau": self.plateau}
        p.update({k: v for k, v in overrides.items() if v is not None})
        if self.name == "overfit":
            return overfit_schedule(int(p["n_epochs"]), int(p["peak_epoch"]), float(p["theta"]),
                                    int(p["plateau"]), float(p["noise_sigma"]), seed)
        if self.name == "ramp":
            return ramp_schedule(int(p["n_epochs"]), float(p["theta"]), float(p["noise_sigma"]),
                                 seed)
        return flat_schedule(int(p["n_epochs"]), float(p["theta"]), float(p["noise_sigma"]), seed)


# overfit: with 100 attacks of 100 traces, a soft/Full/w=0 hit is ~99% likely
# at theta 0.66 and ~1% at 0.7 * 0.66, so three hits in a row land on the plateau.
PRESETS: dict[str, Preset] = {
    "overfit": Preset("overfit", n_epochs=50, theta=0.66),
    "ramp": Preset("ramp", n_epochs=30, theta=1.0, n_attacks=10),
    "flat": Preset("flat", n_epochs=20, theta=0.0, n_attacks=10),
}
