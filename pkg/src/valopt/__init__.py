"""valopt: validation-aligned multi-task weighting with a bidding benchmark."""

from .params import ParamVector, load_checkpoint, save_checkpoint, zeros_like
from .model import ModelConfig, SharedBottomModel, fd_gradient
from .weighting import (
    AlignmentStats,
    GradientBundle,
    TaskWeights,
    alignment_certificate,
    alignment_stats,
    combine,
    dwa_weights,
    entropy_objective,
    log_sum_exp_bounds,
    marginal_gains,
    pcgrad_combine,
    simplex_grid_search,
    softmax_weights,
)
from .temporal import (
    HistoryWindow,
    PeriodDecomposition,
    PeriodFeatureParams,
    augment_state,
    period_features,
    reshape_period,
    spectrum,
    top_periods,
)
from .simulator import (
    AuctionDay,
    BehaviorSpec,
    BidState,
    EnvConfig,
    TaskSpec,
    Trajectory,
    generate_dataset,
    generate_day,
    rollout,
    step,
)
from .dataset import Batch, BatchSampler, FeaturePipeline, SplitDataset, temporal_split
from .trainer import (
    RunDiagnostics,
    TrainConfig,
    TrainResult,
    convergence_envelope,
    first_order_check,
    train,
    train_problem,
)
from .metrics import BenchmarkResult, TaskMetrics, delta_m
from .benchmark import BenchConfig, default_bench, default_env, evaluate_policy, run_benchmark

__version__ = "0.1.0"
