"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary and on
stdout with ``-s``) before asserting, so a failing criterion still reports
its measured numbers.
"""

import os
import statistics
import time

import numpy as np
import pytest

from ge_sentinel.earlystop import (
    AreaOfHit,
    Binary,
    Full,
    Greedy,
    MonitorState,
    PersistenceConfig,
    Soft,
    monitor_training,
    observe_epoch,
    persistence_hit,
)
from ge_sentinel.engine import GEConfig, GECurve, ge_curve_naive, ge_curve_optimized
from ge_sentinel.grid import HyperSpace, StopReason, enumerate_grid, search
from ge_sentinel.sim import PRESETS, LeakageSchedule, epoch_stream, flat_schedule, generate_epoch

from conftest import ACCEPTANCE_LINES


def report(n: int, ok: bool | None, detail: str) -> None:
    status = "INFO" if ok is None else "PASS" if ok else "FAIL"
    line = f"criterion {n}: {status}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def scan_stop(hits: str, patience: int):
    """1-based end of the first run of `patience` hits, or None."""
    i = hits.find("H" * patience)
    return None if i < 0 else i + patience


def curve(values, step=100):
    values = np.asarray(values, dtype=float)
    return GECurve(step * np.arange(1, len(values) + 1), values, 1)


# -- 1 -------------------------------------------------------------------------

def test_c1_oracle_equivalence():
    rng = np.random.default_rng(2024)
    mismatches = []
    t0 = time.perf_counter()
    for i in range(100):
        keyspace = int(rng.choice([4, 16, 256]))
        n = int(rng.integers(1, 1001))
        max_traces = int(rng.integers(1, n + 1))
        step = int(rng.integers(1, max_traces + 1))
        n_attacks = int(rng.integers(1, 11))
        # large noise drives float32 softmax entries to 0, so floor ties occur too
        sched = LeakageSchedule(1, [float(rng.uniform(0, 3))], float(rng.choice([0.5, 2.0, 40.0])),
                                seed=i)
        attack = generate_epoch(sched, 0, n, keyspace, int(rng.integers(keyspace))).attack
        cfg = GEConfig(n_attacks, max_traces, step, seed=i)
        if ge_curve_optimized(attack, cfg) != ge_curve_naive(attack, cfg):
            mismatches.append(i)
    dt = time.perf_counter() - t0
    ok = not mismatches and dt < 120
    report(1, ok, f"100 configs, mismatches={mismatches}, {dt:.1f}s (limit 120s)")
    assert not mismatches
    assert dt < 120


# -- 2 -------------------------------------------------------------------------

@pytest.mark.slow
def test_c2_performance_envelope():
    limit = 2.0 if os.environ.get("CI") else 1.0
    # 10 attacks of 5000 traces each, drawn from a 10000-trace attack set
    attack = generate_epoch(flat_schedule(1, 0.3, 1.0, seed=7), 0, 10_000).attack
    cfg = GEConfig(10, 5000, 100, 0)
    ge_curve_optimized(attack, cfg)  # warm-up
    fast = []
    for _ in range(5):
        t0 = time.perf_counter()
        ge_curve_optimized(attack, cfg)
        fast.append(time.perf_counter() - t0)
    slow = []
    for _ in range(2):
        t0 = time.perf_counter()
        ge_curve_naive(attack, cfg)
        slow.append(time.perf_counter() - t0)
    t_fast, t_slow = statistics.median(fast), statistics.median(slow)
    ratio = t_slow / t_fast
    ok = t_fast < limit and ratio >= 10
    report(2, ok, f"optimized {t_fast:.3f}s (limit {limit}s), naive {t_slow:.2f}s, "
                  f"ratio {ratio:.1f}x (need >= 10x)")
    assert t_fast < limit
    assert ratio >= 10


# -- 3 -------------------------------------------------------------------------

def test_c3_monitor_matches_string_scan():
    rng = np.random.default_rng(3)
    hit_curve, miss_curve = curve([3, 0, 0]), curve([3, 2, 1])
    area, cfg = AreaOfHit(0, 300), PersistenceConfig(Full(), Soft())
    wrong = []
    for i in range(200):
        patience = int(rng.integers(1, 11))
        hits = "".join(rng.choice(["H", "M"], size=int(rng.integers(0, 60)), p=[0.7, 0.3]))
        state = MonitorState(patience)
        for ch in hits:
            if observe_epoch(state, hit_curve if ch == "H" else miss_curve, area, cfg).stop:
                break
        if state.stopped_at != scan_stop(hits, patience):
            wrong.append((hits, patience))
    report(3, not wrong, f"200 strings, disagreements={len(wrong)}")
    assert not wrong


# -- 4 -------------------------------------------------------------------------

def _random_curve(rng):
    n = int(rng.integers(1, 30))
    # noisy decreasing GE with occasional zeros
    vals = np.maximum(0, np.linspace(rng.uniform(0, 100), 0, n) + rng.normal(0, 3, n))
    vals[rng.random(n) < 0.3] = 0
    return curve(np.round(vals, 1))


def _random_case(rng, c):
    if rng.random() < 0.5:
        return None, Soft()
    v = int(rng.choice(c.checkpoints))
    return v, Greedy(v)


def test_c4_persistence_mode_properties():
    rng = np.random.default_rng(4)
    bad = {"binary1": 0, "w": 0, "f": 0}
    for _ in range(1000):
        c = _random_curve(rng)
        v, case = _random_case(rng, c)
        area = AreaOfHit(float(rng.uniform(0, 10)), int(c.checkpoints[-1]), v)
        if (persistence_hit(c, area, PersistenceConfig(Binary(1.0), case))
                != persistence_hit(c, area, PersistenceConfig(Full(), case))):
            bad["binary1"] += 1
    for _ in range(1000):
        c = _random_curve(rng)
        v, case = _random_case(rng, c)
        mode = Full() if rng.random() < 0.5 else Binary(float(rng.uniform(0.05, 1)))
        w_lo, w_hi = sorted(rng.uniform(0, 10, 2))
        n_a = int(c.checkpoints[-1])
        lo = persistence_hit(c, AreaOfHit(w_lo, n_a, v), PersistenceConfig(mode, case))[0]
        hi = persistence_hit(c, AreaOfHit(w_hi, n_a, v), PersistenceConfig(mode, case))[0]
        bad["w"] += int(lo and not hi)
    for _ in range(1000):
        c = _random_curve(rng)
        v, case = _random_case(rng, c)
        f_lo, f_hi = sorted(rng.uniform(0.01, 1, 2))
        area = AreaOfHit(float(rng.uniform(0, 10)), int(c.checkpoints[-1]), v)
        hi = persistence_hit(c, area, PersistenceConfig(Binary(f_hi), case))[0]
        lo = persistence_hit(c, area, PersistenceConfig(Binary(f_lo), case))[0]
        bad["f"] += int(hi and not lo)
    # 20 checkpoints, one of them outside: 19/20 = 95% inside
    excursion = curve([0] * 9 + [4] + [0] * 10)
    area = AreaOfHit(0, 2000, 100)
    binary_hit = persistence_hit(excursion, area, PersistenceConfig(Binary(0.95), Greedy(100)))[0]
    full_hit = persistence_hit(excursion, area, PersistenceConfig(Full(), Greedy(100)))[0]
    ok = not any(bad.values()) and binary_hit and not full_hit
    report(4, ok, f"violations={bad}, excursion: Binary(0.95) hit={binary_hit}, "
                  f"Full hit={full_hit}")
    assert not any(bad.values())
    assert binary_hit and not full_hit


# -- 5 -------------------------------------------------------------------------

@pytest.mark.slow
def test_c5_overfit_stop_on_plateau():
    p = PRESETS["overfit"]
    ge_cfg = GEConfig(p.n_attacks, p.max_traces, p.step)
    area, cfg = AreaOfHit(0, p.max_traces), PersistenceConfig(Full(), Soft())
    # plateau epochs in 1-based monitor numbering
    first, last = p.peak_epoch + 1, p.peak_epoch + p.plateau + 1
    t0 = time.perf_counter()
    results = []
    for seed in range(10):
        sched = p.schedule(seed)
        cfg_s = GEConfig(ge_cfg.n_attacks, ge_cfg.max_traces, ge_cfg.step, seed)
        stop = monitor_training(epoch_stream(sched, p.n_traces), cfg_s, area, cfg, 3).stopped_at
        # offline oracle: every epoch's curve, then a string scan; with w=0
        # a soft/Full hit means the final GE value is 0
        hits = "".join("H" if ge_curve_optimized(a, cfg_s).values[-1] <= 0 else "M"
                       for a in epoch_stream(sched, p.n_traces))
        results.append((seed, stop, scan_stop(hits, 3)))
    dt = time.perf_counter() - t0
    in_window = all(s is not None and first <= s <= last for _, s, _ in results)
    matches = all(s == o for _, s, o in results)
    ok = in_window and matches and dt < 180
    report(5, ok, f"stops={[s for _, s, _ in results]}, oracle={[o for _, _, o in results]}, "
                  f"window=[{first}, {last}], {dt:.0f}s (limit 180s)")
    assert in_window and matches
    assert dt < 180


# -- 6 -------------------------------------------------------------------------

SPACE = HyperSpace((
    ("architecture", ("model_v1", "model_v2")),
    ("batch_size", (50, 100)),
    ("epochs", (50, 100)),
    ("optimizer", ("rmsprop", "adam")),
))


def _trainer(winner):
    points = enumerate_grid(SPACE)

    def train(point):
        idx = points.index(point) + 1
        return epoch_stream(flat_schedule(6, 3.0 if idx == winner else 0.0, 1.0, seed=idx), 1000)
    return train


def test_c6_grid_search_early_termination():
    ge_cfg = GEConfig(5, 200, 10, 0)
    area = AreaOfHit(0, 200, 100)
    persistence = PersistenceConfig(Binary(0.95), Greedy(100))
    t0 = time.perf_counter()
    first = search(SPACE, _trainer(1), ge_cfg, area, persistence, patience=3)
    fourth = search(SPACE, _trainer(4), ge_cfg, area, persistence, patience=3)
    dt = time.perf_counter() - t0
    ok = (len(first.evaluated) == 1 and first.stop_reason is StopReason.FOUND_WINNER
          and len(fourth.evaluated) == 4 and fourth.winner.index == 4 and dt < 120)
    report(6, ok, f"winner at 1: evaluated {len(first.evaluated)} of {SPACE.size}; "
                  f"winner at 4: evaluated {len(fourth.evaluated)}; {dt:.1f}s")
    assert len(first.evaluated) == 1 and first.winner.index == 1
    assert len(fourth.evaluated) == 4 and fourth.winner.index == 4
    assert dt < 120


# -- 7 -------------------------------------------------------------------------

@pytest.mark.slow
def test_c7_more_attacks_stop_later():
    p = PRESETS["ramp"]
    area, cfg = AreaOfHit(0, p.max_traces), PersistenceConfig(Full(), Soft())
    t0 = time.perf_counter()
    medians = {}
    for n_attacks in (1, 5, 25):
        stops = []
        for seed in range(10):
            r = monitor_training(epoch_stream(p.schedule(seed), p.n_traces),
                                 GEConfig(n_attacks, p.max_traces, p.step, seed), area, cfg, 3)
            # a run that never stops counts as stopping after the last epoch
            stops.append(r.stopped_at if r.stopped_at is not None else p.n_epochs + 1)
        medians[n_attacks] = statistics.median(stops)
    dt = time.perf_counter() - t0
    trend = medians[1] <= medians[5] <= medians[25]
    ok = trend and dt < 300
    report(7, ok, f"median stop epoch by n_attacks {medians}, {dt:.0f}s (limit 300s)")
    assert trend
    assert dt < 300


# -- 8 -------------------------------------------------------------------------

def test_c8_real_data_results_out_of_scope():
    report(8, None, "results that need a trained network on real traces are not "
                    "reproduced; criteria 5-7 cover their mechanisms")
    pytest.skip("requires real-trace training data; documented only")
