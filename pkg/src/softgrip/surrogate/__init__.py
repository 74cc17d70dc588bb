from .model_io import load_model, save_model
from .net import (
    N_OUTPUT,
    N_STIFF,
    SurrogateModel,
    grad_wrt_stiffness,
    opt_loss_and_grad,
)
from .timing import timing_ratio
from .train import Adam, TrainConfig, TrainResult, train

__all__ = [
    "N_OUTPUT", "N_STIFF", "SurrogateModel", "grad_wrt_stiffness",
    "opt_loss_and_grad", "timing_ratio", "Adam", "TrainConfig",
    "TrainResult", "train", "save_model", "load_model",
]
