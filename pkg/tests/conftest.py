import numpy as np
import pytest

from ge_sentinel.core import AttackSet


def random_attack(rng: np.random.Generator, n: int, keyspace: int, key: int | None = None,
                  sharpness: float = 1.0) -> AttackSet:
    """Random softmax predictions; not tied to the true labels."""
    logits = sharpness * rng.standard_normal((n, keyspace))
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    if key is None:
        key = int(rng.integers(keyspace))
    pts = rng.integers(0, keyspace, n).astype(np.uint8)
    return AttackSet(p.astype(np.float32), pts, key, keyspace)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
