"""Adversarially robust turnstile F_p-moment estimation."""

from .core import (
    ConfigError,
    MomentTracker,
    RangeError,
    SparseVector,
    StreamConfig,
    Update,
    apply_update,
    auto_threshold,
    density,
    flip_number,
    is_approx,
    moment,
    read_stream,
    write_stream,
)
from .dpmedian import (
    DatabaseTooSmallError,
    MedianParams,
    ValueGrid,
    private_median,
    round_to_grid,
)
from .estimators import (
    F0Sketch,
    F2Sketch,
    StableSketch,
    UnsupportedMomentError,
    deserialize_sketch,
    make_estimator,
    serialize_sketch,
    stable_abs_median,
)
from .harness import (
    Adversary,
    BareSketchAlgorithm,
    DensityOscillator,
    ExactOracleAlgorithm,
    FlipAttack,
    GameTranscript,
    RandomOblivious,
    RunSummary,
    SketchAttack,
    StreamReplay,
    run_game,
    wilson_interval,
)
from .recovery import RecoveryError, RecoverySketch
from .robust import (
    AUTO,
    DENSE,
    SPARSE,
    EstimatorParams,
    RobustMomentEstimator,
    make_robust_estimator,
    regime_interval,
)
from .wrapper import QueryBudgetError, RobustWrapper, WrapperParams, make_wrapper

__all__ = [
    "AUTO",
    "Adversary",
    "BareSketchAlgorithm",
    "ConfigError",
    "DENSE",
    "DatabaseTooSmallError",
    "DensityOscillator",
    "EstimatorParams",
    "ExactOracleAlgorithm",
    "F0Sketch",
    "F2Sketch",
    "FlipAttack",
    "GameTranscript",
    "MedianParams",
    "MomentTracker",
    "QueryBudgetError",
    "RandomOblivious",
    "RangeError",
    "RecoveryError",
    "RecoverySketch",
    "RobustMomentEstimator",
    "RobustWrapper",
    "RunSummary",
    "SPARSE",
    "SketchAttack",
    "SparseVector",
    "StableSketch",
    "StreamConfig",
    "StreamReplay",
    "Update",
    "ValueGrid",
    "WrapperParams",
    "apply_update",
    "auto_threshold",
    "density",
    "deserialize_sketch",
    "flip_number",
    "is_approx",
    "make_estimator",
    "make_robust_estimator",
    "make_wrapper",
    "moment",
    "private_median",
    "read_stream",
    "regime_interval",
    "round_to_grid",
    "run_game",
    "serialize_sketch",
    "stable_abs_median",
    "wilson_interval",
    "write_stream",
]
