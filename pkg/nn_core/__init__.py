"""Layer-named parameter storage, two tiny language models, and SGD.

Both models run on plain numpy with exact hand-written gradients in float64,
which keeps finite-difference checks and bitwise reproducibility practical.
"""

from nn_core.batch import Batch, batches_from_sequences
from nn_core.config import ModelConfig
from nn_core.models import backward, build_schema, forward_loss, init_model, loss_and_gradient, predict_logits
from nn_core.params import LayerSchema, ParamVector, read_param_vector, write_param_vector
from nn_core.training import sgd_epochs

__all__ = [
    "Batch",
    "LayerSchema",
    "ModelConfig",
    "ParamVector",
    "backward",
    "batches_from_sequences",
    "build_schema",
    "forward_loss",
    "init_model",
    "loss_and_gradient",
    "predict_logits",
    "read_param_vector",
    "sgd_epochs",
    "write_param_vector",
]
