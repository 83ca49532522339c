"""Soft hypergraph neural network block with manual backpropagation,
sparse hyperedge selection, classical baselines and benchmarks."""

from .baselines import AttnParams, Incidence, eps_hypergraph, hgnn_conv, knn_hypergraph, self_attention
from .errors import ConfigError, DegenerateStructureError, EmptyInputError, NumericError, ShapeError
from .message import BlockGrads, BlockOutput, aggregate_v_to_e, disseminate_e_to_v, softhgnn_backward, softhgnn_forward
from .ses import SeSConfig, SeSState, activation_scores, build_participation_ses, record_and_balance, select_topk
from .softhg import (
    Activation,
    NormMode,
    Participation,
    SoftHGParams,
    dynamic_prototypes,
    global_context,
    init_params,
    normalize,
    participation_scores,
)
from .tensor import matmul, softmax_cols, softmax_rows

__version__ = "0.1.0"
