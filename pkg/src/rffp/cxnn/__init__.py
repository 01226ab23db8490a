"""Complex-valued 1-D CNN built directly on numpy."""

from .layers import (
    AbsSquared,
    ComplexConv1d,
    CReLU,
    Dropout,
    ModReLU,
    RealConv1d,
    RealDense,
    Softmax,
    TemporalAverage,
    softmax,
    softmax_xent,
)
from .network import (
    NetworkParams,
    NetworkSpec,
    backward,
    build_adsb_complex,
    build_adsb_real,
    build_wifi_complex,
    build_wifi_real,
    count_parameters,
    params_real_count,
    forward,
    init_params,
    layer_param_count,
    load_checkpoint,
    propagate_shapes,
    save_checkpoint,
)
from .train import (
    AdamState,
    TrainConfig,
    adam_step,
    evaluate,
    loss_and_grads,
    predict_proba,
    train,
)
from .visualize import receptive_field, visualize_filter

__all__ = [
    "AbsSquared", "ComplexConv1d", "CReLU", "Dropout", "ModReLU", "RealConv1d",
    "RealDense", "Softmax", "TemporalAverage", "softmax", "softmax_xent",
    "NetworkParams", "NetworkSpec", "backward", "build_adsb_complex", "build_adsb_real",
    "build_wifi_complex", "build_wifi_real", "count_parameters", "params_real_count", "forward", "init_params",
    "layer_param_count", "load_checkpoint", "propagate_shapes", "save_checkpoint",
    "AdamState", "TrainConfig", "adam_step", "evaluate", "loss_and_grads",
    "predict_proba", "train", "receptive_field", "visualize_filter",
]
