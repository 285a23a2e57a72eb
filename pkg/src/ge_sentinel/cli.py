"""``ge-sentinel`` command line: bench, simulate, monitor, gridsearch.

Exit codes: 0 success (or stopped), 1 internal failure, 2 usage or input
error, 3 finished without the early stop firing.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import zlib
from pathlib import Path
from typing import Iterator, Sequence

from ge_sentinel.core import (
    DEFAULT_LOG_FLOOR,
    AttackSet,
    GESentinelError,
    derive_rng,
    load_attack_set,
    save_attack_set,
)
from ge_sentinel.earlystop import (
    AreaOfHit,
    Binary,
    Full,
    Greedy,
    PersistenceConfig,
    Soft,
    monitor_training,
)
from ge_sentinel.engine import GEConfig, bench_ge
from ge_sentinel.grid import HyperSpace, StopReason, search
from ge_sentinel.sim import PRESETS, LeakageSchedule, epoch_stream, generate_epoch

log = logging.getLogger("ge_sentinel")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NO_STOP = 0, 1, 2, 3


class InputError(GESentinelError):
    """Bad command-line input that argparse cannot catch."""


def derive_seed(seed: int, label: str, *index: int) -> int:
    return int(derive_rng(seed, label, *index).integers(2**63))


# --- shared argument groups -------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", type=Path, default=Path("run"), help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="threads for GE repetitions (default: all cores; "
                        "GE_SENTINEL_THREADS overrides)")
    p.add_argument("--log-floor", type=float, default=DEFAULT_LOG_FLOOR)


def _add_schedule(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=sorted(PRESETS), default=None)
    g.add_argument("--schedule", type=Path, help="schedule JSON file")
    p.add_argument("--theta", type=float, help="override the preset's peak signal")
    p.add_argument("--noise", type=float, help="override the preset's noise sigma")
    p.add_argument("--epochs", type=int, help="number of epochs to run")
    p.add_argument("--traces", type=int, help="attack traces generated per epoch")
    p.add_argument("--keyspace", type=int, default=256)
    p.add_argument("--true-key", type=int, default=0)


def _add_monitor(p: argparse.ArgumentParser) -> None:
    p.add_argument("--attacks", type=int, nargs="+", help="GE attack repetitions")
    p.add_argument("--max-traces", type=int, help="traces per attack")
    p.add_argument("--step", type=int, help="GE checkpoint spacing")
    p.add_argument("--w", type=float, default=0.0, help="highest acceptable GE")
    p.add_argument("--n-a", type=int, help="upper trace bound of the area (default max-traces)")
    p.add_argument("--v", type=int, help="fixed lower trace bound (greedy case)")
    p.add_argument("--case", choices=["soft", "greedy"], default="soft")
    p.add_argument("--mode", choices=["full", "binary"], default="full")
    p.add_argument("--fraction", type=float, default=0.95, help="binary-mode fraction")
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--plot", action="store_true", help="also render PNG figures")


def _schedule(args, seed: int, **params) -> LeakageSchedule:
    if args.schedule is not None:
        if not args.schedule.exists():
            raise FileNotFoundError(f"schedule file not found: {args.schedule}")
        sched = LeakageSchedule.from_json(args.schedule)
    else:
        preset = PRESETS[params.pop("preset", None) or args.preset or "overfit"]
        sched = preset.schedule(
            seed,
            n_epochs=params.get("n_epochs", args.epochs),
            theta=params.get("theta", args.theta),
            noise_sigma=params.get("noise_sigma", args.noise),
            peak_epoch=params.get("peak_epoch"),
            plateau=params.get("plateau"),
        )
    if args.epochs is not None and args.epochs < sched.n_epochs:
        sched = LeakageSchedule(args.epochs, sched.signal[:args.epochs], sched.noise_sigma,
                                sched.seed)
    return sched


def _geometry(args) -> tuple[int, int, int, list[int]]:
    preset = PRESETS[args.preset or "overfit"]
    traces = args.traces or preset.n_traces
    max_traces = args.max_traces or min(preset.max_traces, traces)
    step = args.step or min(preset.step, max_traces)
    attacks = args.attacks or [preset.n_attacks]
    return traces, max_traces, step, attacks


def _area_and_persistence(args, max_traces: int) -> tuple[AreaOfHit, PersistenceConfig]:
    n_a = args.n_a or max_traces
    mode = Full() if args.mode == "full" else Binary(args.fraction)
    if args.case == "greedy":
        if args.v is None:
            raise InputError("--case greedy needs --v")
        if not 0 < args.v <= n_a:
            raise InputError(f"--v {args.v} must be in (0, n_a={n_a}]")
        return AreaOfHit(args.w, n_a, args.v), PersistenceConfig(mode, Greedy(args.v))
    if args.v is not None:
        raise InputError("--v only applies to --case greedy")
    return AreaOfHit(args.w, n_a), PersistenceConfig(mode, Soft())


# --- subcommands --------------------------------------------------------------

def cmd_bench(args) -> int:
    if args.attack is not None:
        attack = load_attack_set(args.attack)
    else:
        sched = LeakageSchedule(1, [args.theta], 1.0, args.seed)
        attack = generate_epoch(sched, 0, args.traces, args.keyspace, args.true_key).attack
    max_traces = args.max_traces or attack.n_traces
    cfg = GEConfig(args.attacks, max_traces, min(args.step, max_traces), args.seed)
    impls = ["optimized", "naive"] if args.impl == "both" else [args.impl]
    report = bench_ge(attack, cfg, args.trials, impls)
    args.out.mkdir(parents=True, exist_ok=True)
    report.to_csv(args.out / "bench.csv")
    if args.plot:
        from ge_sentinel.plotting import plot_bench
        plot_bench(report, args.out / "bench.png")
    print(f"wrote {args.out / 'bench.csv'} ({len(report.rows)} rows)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    sched = _schedule(args, args.seed)
    traces = args.traces or PRESETS[args.preset or "overfit"].n_traces
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        sched.to_json(args.out / "schedule.json")
        for e in range(sched.n_epochs):
            batch = generate_epoch(sched, e, traces, args.keyspace, args.true_key)
            save_attack_set(batch.attack, args.out / str(e + 1) / "attack.json")
    except OSError as exc:
        raise InputError(f"cannot write to {args.out}: {exc}") from exc
    print(f"wrote {sched.n_epochs} epochs to {args.out}")
    return EXIT_OK


def _epochs_from_dir(path: Path) -> Iterator[AttackSet]:
    if not path.is_dir():
        raise FileNotFoundError(f"epoch directory not found: {path}")
    dirs = sorted((d for d in path.iterdir() if d.is_dir() and d.name.isdigit()),
                  key=lambda d: int(d.name))
    if not dirs:
        raise InputError(f"no epoch subdirectories in {path}")
    for d in dirs:
        yield load_attack_set(d / "attack.json")


def cmd_monitor(args) -> int:
    traces, max_traces, step, attacks = _geometry(args)
    area, persistence = _area_and_persistence(args, max_traces)
    ge_cfg = GEConfig(attacks[0], max_traces, step, args.seed)
    if args.epochs_dir is not None:
        source = _epochs_from_dir(args.epochs_dir)
    else:
        sched = _schedule(args, args.seed)
        source = epoch_stream(sched, traces, args.keyspace, args.true_key)
    report = monitor_training(source, ge_cfg, area, persistence, args.patience,
                              args.log_floor, args.threads)
    report.write(args.out)
    if args.plot:
        from ge_sentinel.plotting import plot_monitor
        plot_monitor(report, args.out / "monitor.png")
    if report.stopped_at is None:
        print("no stop")
        return EXIT_NO_STOP
    print(f"stopped at epoch {report.stopped_at}")
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    if not args.space.exists():
        raise FileNotFoundError(f"space file not found: {args.space}")
    space = HyperSpace.from_json(args.space)
    traces, max_traces, step, attacks = _geometry(args)
    area, persistence = _area_and_persistence(args, max_traces)

    def trainer(point):
        params = {k: v for k, v in point.items()
                  if k in ("preset", "theta", "noise_sigma", "n_epochs", "peak_epoch", "plateau")}
        key = zlib.crc32(json.dumps(point, sort_keys=True).encode())
        sched = _schedule(args, derive_seed(args.seed, "grid-point", key), **params)
        return epoch_stream(sched, traces, args.keyspace, args.true_key)

    any_winner = False
    for r in range(args.repeat):
        n_attacks = attacks[r % len(attacks)]
        seed = args.seed if args.repeat == 1 else derive_seed(args.seed, "repeat", r)
        outcome = search(space, trainer, GEConfig(n_attacks, max_traces, step, seed), area,
                         persistence, args.patience, args.log_floor, args.threads)
        out = args.out if args.repeat == 1 else args.out / f"repeat_{r + 1}"
        outcome.write(out)
        if args.plot:
            from ge_sentinel.plotting import plot_ge_curves
            done = [res for res in outcome.evaluated if res.report is not None]
            if done:
                plot_ge_curves([res.report.curves[-1] for res in done], out / "search.png",
                               area, [f"point {res.index}" for res in done])
        tag = f"[attacks={n_attacks}] " if args.repeat > 1 else ""
        if outcome.stop_reason is StopReason.FOUND_WINNER:
            any_winner = True
            w = outcome.winner
            print(f"{tag}winner: point {w.index} {json.dumps(w.params)} "
                  f"stopped at epoch {w.stopped_at} after {len(outcome.evaluated)} of {space.size}")
        else:
            print(f"{tag}exhausted")
    return EXIT_OK if any_winner else EXIT_NO_STOP


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ge-sentinel",
        description="Guessing-entropy early stopping for profiled side-channel attacks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="time optimized vs naive GE")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--attack", type=Path, help="attack-set JSON header")
    src.add_argument("--synthetic", action="store_true",
                     help="benchmark on simulated predictions (default)")
    p.add_argument("--traces", type=int, default=5000)
    p.add_argument("--max-traces", type=int)
    p.add_argument("--keyspace", type=int, default=256)
    p.add_argument("--true-key", type=int, default=0)
    p.add_argument("--theta", type=float, default=0.3, help="signal of synthetic predictions")
    p.add_argument("--step", type=int, default=100)
    p.add_argument("--attacks", type=int, default=10)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--impl", choices=["both", "optimized", "naive"], default="both")
    p.add_argument("--plot", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="write simulated per-epoch attack sets")
    _add_schedule(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("monitor", help="run the early stopper over one training run")
    _add_schedule(p)
    p.add_argument("--epochs-dir", type=Path,
                   help="read epochs from a `simulate` output directory instead")
    _add_monitor(p)
    _add_common(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("gridsearch", help="grid search that ends at the first early stop")
    p.add_argument("--space", type=Path, required=True, help="hyper-parameter space JSON")
    p.add_argument("--repeat", type=int, default=1,
                   help="repeat the search, cycling through --attacks values")
    _add_schedule(p)
    _add_monitor(p)
    _add_common(p)
    p.set_defaults(func=cmd_gridsearch)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GESentinelError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.exception("internal failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
