"""Fast guessing-entropy estimation and a persistence/patience early stopper
for deep-learning profiled side-channel attacks."""

from ge_sentinel.core import (
    AES_SBOX,
    AttackSet,
    DomainError,
    GESentinelError,
    KeyLogLikelihoodTable,
    StructureError,
    UsageError,
    aes_sbox,
    build_key_table,
    load_attack_set,
    rank_of_key,
    save_attack_set,
)
from ge_sentinel.engine import (
    BenchReport,
    GEConfig,
    GECurve,
    bench_ge,
    ge_curve_naive,
    ge_curve_optimized,
)
from ge_sentinel.earlystop import (
    AreaOfHit,
    Binary,
    Full,
    Greedy,
    MonitorReport,
    MonitorState,
    PersistenceConfig,
    Soft,
    compute_v_soft,
    monitor_training,
    observe_epoch,
    persistence_hit,
)
from ge_sentinel.sim import (
    PRESETS,
    EpochBatch,
    LeakageSchedule,
    epoch_stream,
    flat_schedule,
    generate_epoch,
    overfit_schedule,
    ramp_schedule,
)
from ge_sentinel.grid import HyperSpace, SearchOutcome, enumerate_grid, search

__version__ = "0.1.0"
