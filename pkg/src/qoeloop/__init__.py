"""Closed-loop quality-of-experience planning for segmented streaming.

The package simulates fluid playback of bitrate plans over throughput
traces, scores sessions with five quality metrics, searches for plans that
maximize a weighted score, learns the weights from user feedback, and ties
everything into a closed plan/score/retrain loop with a synthetic feedback
oracle, file reports, and a command-line interface.
"""

from .errors import (
    InfeasibleError,
    QoELoopError,
    SearchSpaceError,
    TraceFormatError,
    ValidationError,
)
from .feedback import (
    FeedbackDataset,
    QoECategory,
    build_dataset,
    classify,
    load_dataset,
    ordering_key,
    priority_weights,
    sample_score,
    save_dataset,
)
from .learner import (
    LearnerConfig,
    TrainResult,
    TrainingSample,
    batch_loss,
    gradient,
    initial_weights,
    load_batch,
    predict,
    project_signs,
    sample_loss,
    save_batch,
    train,
)
from .loop import (
    LoopConfig,
    LoopTelemetry,
    MosEvaluation,
    evaluate_mos,
    mean_square_variation,
    run_closed_loop,
)
from .metrics import (
    Metrics,
    NUM_METRICS,
    compute_metrics,
    metrics_from_parts,
    qoe_score,
    switch_fraction,
    validate_weights,
)
from .planner import (
    CycleWindow,
    PlanResult,
    brute_force_plan,
    castle,
    enumerate_ascending_plans,
    evaluate_plan,
    maestro,
    optimal_plan,
)
from .playback import (
    BitratePlan,
    FeasibilityReport,
    PlaybackTimeline,
    SessionConfig,
    check_feasibility,
    simulate,
)
from .trace import (
    SyntheticTraceConfig,
    ThroughputTrace,
    generate_pool,
    generate_trace,
    load_trace,
    sample_pool,
    save_trace,
)

__version__ = "0.1.0"

__all__ = [
    "BitratePlan",
    "CycleWindow",
    "FeasibilityReport",
    "FeedbackDataset",
    "InfeasibleError",
    "LearnerConfig",
    "LoopConfig",
    "LoopTelemetry",
    "Metrics",
    "MosEvaluation",
    "NUM_METRICS",
    "PlanResult",
    "PlaybackTimeline",
    "QoECategory",
    "QoELoopError",
    "SearchSpaceError",
    "SessionConfig",
    "SyntheticTraceConfig",
    "ThroughputTrace",
    "TraceFormatError",
    "TrainResult",
    "TrainingSample",
    "ValidationError",
    "batch_loss",
    "brute_force_plan",
    "build_dataset",
    "castle",
    "check_feasibility",
    "classify",
    "compute_metrics",
    "enumerate_ascending_plans",
    "evaluate_mos",
    "evaluate_plan",
    "generate_pool",
    "generate_trace",
    "gradient",
    "initial_weights",
    "load_batch",
    "load_dataset",
    "load_trace",
    "maestro",
    "mean_square_variation",
    "metrics_from_parts",
    "optimal_plan",
    "ordering_key",
    "predict",
    "priority_weights",
    "project_signs",
    "qoe_score",
    "run_closed_loop",
    "sample_loss",
    "sample_pool",
    "sample_score",
    "save_batch",
    "save_dataset",
    "save_trace",
    "simulate",
    "switch_fraction",
    "train",
    "validate_weights",
]
