"""Graph-network training stack with stochastic feature/gradient scaling.

From-scratch reverse-mode autodiff, three message-passing layer families
(Graphsage, GAT, GatedGCN), a row-wise stochastic scaling regularizer,
oversmoothing diagnostics, synthetic desk-scale datasets, and a
config-driven experiment harness.
"""

from .autodiff import (
    BatchNormState,
    Parameter,
    Tensor,
    backward,
    batch_norm,
    l1_loss,
    softmax_cross_entropy,
)
from .data import (
    DatasetFile,
    GraphRecord,
    RegressionSpec,
    SbmGraphSpec,
    SbmSpec,
    canonical_json,
    gen_regression_task,
    gen_sbm_graph_task,
    gen_sbm_node_task,
    load_dataset,
    save_dataset,
    to_graph,
)
from .diagnostics import (
    SmoothnessReport,
    distance_to_stationary,
    mad,
    mean_pairwise_distance,
    power_smooth,
    smoothness_report,
    stationary_pi,
)
from .errors import ConfigError, DataFormatError, ShapeError
from .graph import Graph, add_self_loops, batch_graphs, normalized_adjacency
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    MetricsRecord,
    PlateauState,
    adam_init,
    adam_step,
    class_weights_from_counts,
    config_from_dict,
    config_to_dict,
    eval_with_scale,
    evaluate,
    load_checkpoint,
    loss,
    mae,
    plateau_update,
    run_experiment,
    save_checkpoint,
    weighted_accuracy,
)
from .layers import LayerConfig, LayerParams, gat_layer, gatedgcn_layer, init_layer, sage_layer
from .model import GraphModel, ModelConfig, prepare_graph, readout
from .rng import RngHub, stream
from .sampling import beta_sample, beta_variates, gamma_variates
from .ssfg import (
    DropoutConfig,
    FactorSample,
    ScalingSite,
    SsfgConfig,
    cumulated_factor,
    cumulated_factors,
    dropout_apply,
    sample_lambda,
    ssfg_apply,
)

__version__ = "0.1.0"
