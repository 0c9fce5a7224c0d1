from . import ops
from .network import (
    CONV2D,
    DENSE,
    FLATTEN,
    KINDS,
    MAXPOOL2,
    RELU,
    RESIDUAL_ADD,
    SOFTMAX_CE_HEAD,
    LayerSpec,
    Network,
    Shape4,
    conv,
    dense,
    infer_shapes,
    sgd_step,
)
from .ops import softmax_cross_entropy
