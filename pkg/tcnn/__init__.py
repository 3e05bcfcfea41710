from .checkpoint import load_checkpoint, save_checkpoint
from .model import (
    TCNN,
    NetworkConfig,
    backward,
    build_network,
    count_parameters,
    feature_maps,
    forward,
    mse_loss,
    normalize_speckle,
)
from .train import TrainState, adam_step, init_state, lr_at, next_epoch, speckle_tensors, train, write_curves
