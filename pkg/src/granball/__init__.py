"""Granular-ball graph coarsening and block-diagonal minibatch GCN training.

Re-exports are lazy so the CLI can pin thread counts before numpy loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "Graph": ".graph",
    "induced_subgraph": ".graph",
    "laplacian_quadratic": ".graph",
    "load_edge_list": ".datasets",
    "load_features": ".datasets",
    "load_labels": ".datasets",
    "load_roles": ".datasets",
    "random_roles": ".datasets",
    "Labels": ".datasets",
    "TRAIN": ".datasets",
    "VAL": ".datasets",
    "TEST": ".datasets",
    "Matching": ".partition",
    "WeightedGraph": ".partition",
    "PartitionAssignment": ".partition",
    "heavy_edge_matching": ".partition",
    "contract": ".partition",
    "initial_bisection": ".partition",
    "fm_refine": ".partition",
    "partition_k": ".partition",
    "Ball": ".balls",
    "BallPartition": ".balls",
    "CoarsenConfig": ".balls",
    "CoarsenResult": ".balls",
    "ball_quality": ".balls",
    "ball_purity": ".balls",
    "pick_split_centers": ".balls",
    "dual_bfs_split": ".balls",
    "adaptive_should_split": ".balls",
    "split_ball_recursive": ".balls",
    "coarsen": ".balls",
    "CoarsenedGraph": ".supergraph",
    "build_supergraph": ".supergraph",
    "project_up": ".supergraph",
    "coarse_laplacian_quadratic": ".supergraph",
    "rayleigh_report": ".supergraph",
    "TrainConfig": ".gcn",
    "ModelParams": ".gcn",
    "Batch": ".gcn",
    "normalize_adjacency": ".gcn",
    "make_epoch_schedule": ".gcn",
    "build_batch": ".gcn",
    "forward": ".gcn",
    "loss_and_grads": ".gcn",
    "adam_step": ".gcn",
    "train": ".gcn",
    "evaluate": ".gcn",
    "micro_f1_from_counts": ".gcn",
    "er_graph": ".synth",
    "sbm_graph": ".synth",
    "sbm_features": ".synth",
    "cycle_graph": ".synth",
    "path_graph": ".synth",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    if name in _EXPORTS:
        return getattr(import_module(_EXPORTS[name], __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
