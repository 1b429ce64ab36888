"""Prototype-based information-bottleneck brain-network classifier with MCTS explanations."""

from ._pime import (  # noqa: F401
    DataError,
    NumericalError,
    activations_from_distances,
    default_target_size,
    kl_diag_gaussian,
    pearson_fc,
    run_cli,
    run_gradcheck,
    score_from_distance,
    stability,
    synth_dataset_to_dir,
    threshold_topk,
)
