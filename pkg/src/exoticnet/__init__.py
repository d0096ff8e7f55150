"""exoticnet: from-scratch sigmoid MLP pipeline for weighted
signal/background event selection with AMS threshold optimization."""

from .backend import active_backend, set_backend
from .core import Prng, gaussian_matrix, matmul, sigmoid
from .dataset import (
    Dataset,
    Event,
    FeatureScaler,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    missingness_signature,
    partition_by_missingness,
    split_stratified,
    subsample_stratified,
)
from .evaluation import (
    AmsConfig,
    SelectionStats,
    ams,
    ensemble_average,
    select_and_score,
    sweep_threshold,
    write_submission,
)
from .network import (
    Architecture,
    Network,
    backward,
    ce_loss,
    forward,
    init_network,
    load_network,
    predict_scores,
    save_network,
)
from .training import (
    OptimizerConfig,
    OptimizerState,
    PretrainConfig,
    TrainHistory,
    early_stop_update,
    lr_at,
    momentum_at,
    pretrain_stack,
    sgd_step,
    train_loop,
)
from .analysis import FeatureStatsRow, PcaResult, feature_stats, jacobi_eigh, pca

__version__ = "0.1.0"
