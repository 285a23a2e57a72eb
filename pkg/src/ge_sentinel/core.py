"""Domain types shared by every other module: attack sets, the AES S-box,
key-hypothesis reindexing and the key-rank primitive."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

DEFAULT_LOG_FLOOR = 1e-36

# FIPS-197 forward S-box.
AES_SBOX = np.array([
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
], dtype=np.uint8)


class GESentinelError(Exception):
    """Base class for errors raised by this package."""


class StructureError(GESentinelError, ValueError):
    """Shapes or configurations that do not fit together."""


class DomainError(GESentinelError, ValueError):
    """A scalar argument outside its valid range."""


class UsageError(GESentinelError, RuntimeError):
    """An operation called in a state that does not allow it."""


def aes_sbox(x: int) -> int:
    if not 0 <= x <= 255:
        raise DomainError(f"byte out of range: {x}")
    return int(AES_SBOX[x])


def sbox_table(keyspace: int) -> npt.NDArray[np.intp]:
    """Substitution table used to label traces for a given keyspace size.

    The full byte keyspace uses the AES S-box. Smaller power-of-two
    keyspaces (test instances) use the identity permutation so that XOR
    stays closed over the keyspace.
    """
    if keyspace == 256:
        return AES_SBOX.astype(np.intp)
    if keyspace < 2 or keyspace & (keyspace - 1):
        raise DomainError(f"keyspace must be a power of two in [2, 256], got {keyspace}")
    return np.arange(keyspace, dtype=np.intp)


def derive_rng(seed: int, label: str, *index: int) -> np.random.Generator:
    """Independent generator for a named sub-stream of a run seed.

    Every random draw in the package goes through here, so any sub-result
    can be reproduced from ``(seed, label, index...)`` alone.
    """
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(label.encode())]
    words.extend(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(words))


@dataclass(frozen=True, eq=False)
class AttackSet:
    """Model predictions on attack traces plus what is needed to label them.

    Attributes:
        predictions: ``(n_traces, keyspace)`` probabilities, one distribution
            per row.
        plaintexts: ``(n_traces,)`` plaintext bytes combined with the key.
        true_key: the correct key byte.
        keyspace_size: number of key hypotheses (and label classes).
    """

    predictions: npt.NDArray[np.floating]
    plaintexts: npt.NDArray[np.uint8]
    true_key: int
    keyspace_size: int = 256

    def __post_init__(self) -> None:
        preds = np.asarray(self.predictions)
        pts = np.asarray(self.plaintexts)
        if preds.ndim != 2:
            raise StructureError(f"predictions must be 2-D, got shape {preds.shape}")
        if pts.ndim != 1 or pts.shape[0] != preds.shape[0]:
            raise StructureError(
                f"{pts.shape[0] if pts.ndim else 0} plaintexts for {preds.shape[0]} prediction rows")
        if preds.shape[1] != self.keyspace_size:
            raise StructureError(
                f"predictions have {preds.shape[1]} classes, keyspace is {self.keyspace_size}")
        sbox_table(self.keyspace_size)
        if not 0 <= self.true_key < self.keyspace_size:
            raise DomainError(f"true_key {self.true_key} outside keyspace {self.keyspace_size}")
        if pts.size and (pts.min() < 0 or pts.max() >= self.keyspace_size):
            raise DomainError("plaintext bytes outside keyspace")
        if preds.size:
            if preds.min() < 0:
                raise DomainError("negative probability in predictions")
            sums = preds.sum(axis=1, dtype=np.float64)
            if np.max(np.abs(sums - 1.0)) > 1e-6:
                raise DomainError("prediction rows must sum to 1 within 1e-6")
        object.__setattr__(self, "predictions", preds)
        object.__setattr__(self, "plaintexts", pts.astype(np.uint8, copy=False))
        object.__setattr__(self, "true_key", int(self.true_key))

    @property
    def n_traces(self) -> int:
        return self.predictions.shape[0]

    @property
    def true_labels(self) -> npt.NDArray[np.intp]:
        sbox = sbox_table(self.keyspace_size)
        return sbox[self.plaintexts.astype(np.intp) ^ self.true_key]


@dataclass(frozen=True, eq=False)
class KeyLogLikelihoodTable:
    """``rows[i, k]`` is the clamped log-probability trace ``i`` gives to key ``k``."""

    rows: npt.NDArray[np.float64]


def label_log_probs(attack: AttackSet,
                    log_floor: float = DEFAULT_LOG_FLOOR) -> npt.NDArray[np.float64]:
    """Clamped natural log of the predictions, still indexed by label.

    Both GE paths take their logarithms from this one pass, so they see
    identical per-value inputs.
    """
    if not log_floor > 0:
        raise DomainError(f"log_floor must be positive, got {log_floor}")
    return np.log(np.maximum(attack.predictions.astype(np.float64), log_floor))


def build_key_table(attack: AttackSet,
                    log_floor: float = DEFAULT_LOG_FLOOR) -> KeyLogLikelihoodTable:
    """Reindex every trace's log-probabilities from label space to key space.

    All key hypotheses of a trace are handled at once: the plaintext byte is
    XORed against the whole key vector and pushed through the S-box as one
    array operation.
    """
    logp = label_log_probs(attack, log_floor)
    n, n_keys = logp.shape
    keys = np.arange(n_keys, dtype=np.intp)
    # label_lut[p, k] = Sbox(p ^ k); one row per possible plaintext byte
    label_lut = sbox_table(n_keys)[np.bitwise_xor.outer(keys, keys)]
    flat_idx = label_lut[attack.plaintexts] + (np.arange(n, dtype=np.intp) * n_keys)[:, None]
    return KeyLogLikelihoodTable(rows=np.take(logp.ravel(), flat_idx))


def rank_of_key(scores: npt.ArrayLike, key: int) -> int:
    """Number of other keys scoring strictly higher than ``key`` (0 is best)."""
    s = np.asarray(scores)
    if not 0 <= key < s.shape[0]:
        raise DomainError(f"key {key} outside keyspace of size {s.shape[0]}")
    return int(np.count_nonzero(s > s[key]))


# ---------------------------------------------------------------------------
# On-disk format: JSON header + little-endian float32 predictions (row-major)
# + raw plaintext bytes.

PREDICTIONS_FILE = "predictions.f32"
PLAINTEXTS_FILE = "plaintexts.u8"


def save_attack_set(attack: AttackSet, header_path: str | Path) -> Path:
    header_path = Path(header_path)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    stem = header_path.parent
    header = {
        "n_traces": attack.n_traces,
        "keyspace": attack.keyspace_size,
        "true_key": attack.true_key,
        "predictions_file": PREDICTIONS_FILE,
        "plaintexts_file": PLAINTEXTS_FILE,
    }
    attack.predictions.astype("<f4").tofile(stem / PREDICTIONS_FILE)
    attack.plaintexts.astype(np.uint8).tofile(stem / PLAINTEXTS_FILE)
    header_path.write_text(json.dumps(header, indent=2) + "\n")
    return header_path


def load_attack_set(header_path: str | Path) -> AttackSet:
    """Read an attack set from its JSON header.

    The binary files default to ``predictions.f32`` and ``plaintexts.u8``
    next to the header; the header may name others.

    Raises:
        FileNotFoundError: the header or a binary file is missing.
        StructureError: file sizes disagree with the header.
    """
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    try:
        n = int(header["n_traces"])
        keyspace = int(header["keyspace"])
        true_key = int(header["true_key"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"{header_path}: bad header ({exc})") from exc
    pred_path = header_path.parent / header.get("predictions_file", PREDICTIONS_FILE)
    pt_path = header_path.parent / header.get("plaintexts_file", PLAINTEXTS_FILE)
    for p in (pred_path, pt_path):
        if not p.exists():
            raise FileNotFoundError(f"missing attack-set file: {p}")
    preds = np.fromfile(pred_path, dtype="<f4")
    pts = np.fromfile(pt_path, dtype=np.uint8)
    if preds.size != n * keyspace:
        raise StructureError(f"{pred_path}: expected {n * keyspace} floats, found {preds.size}")
    if pts.size != n:
        raise StructureError(f"{pt_path}: expected {n} bytes, found {pts.size}")
    return AttackSet(preds.reshape(n, keyspace).astype(np.float32), pts, true_key, keyspace)
