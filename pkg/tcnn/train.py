from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
import torch
from torch import Tensor
from torch.utils.data import DataLoader, TensorDataset
from tqdm import tqdm

from other_optim import Adam
from train_utils import ExponentialLRSchedule, get_grad_norm

from .model import TCNN, NetworkConfig, backward, forward, mse_loss, normalize_speckle

CURVE_COLUMNS = ["epoch", "training_error", "validation_error", "lr"]


@dataclass
class TrainState:
    optim: Adam
    schedule: ExponentialLRSchedule
    step: int = 0
    epoch: int = 0
    generator: torch.Generator = field(default_factory=torch.Generator)
    curves: list[dict] = field(default_factory=list)

    @property
    def current_lr(self) -> float:
        return self.optim.param_groups[0]["lr"].item()


def lr_at(epoch: int, lr0: float = 1e-3, decay: float = 0.85) -> float:
    return ExponentialLRSchedule(lr0, decay).get_lr(epoch)


def init_state(net: TCNN, lr: float = 1e-3, lr_decay: float = 0.85, seed: int = 0) -> TrainState:
    optim = Adam(net.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)
    return TrainState(optim, ExponentialLRSchedule(lr, lr_decay), generator=torch.Generator().manual_seed(seed))


def adam_step(state: TrainState, grads: dict[str, Tensor], params: dict[str, Tensor]):
    if grads.keys() != params.keys():
        raise ValueError(f"gradients for {sorted(grads.keys() ^ params.keys())} do not match the parameters")
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise ValueError(f"gradient shape {tuple(grads[name].shape)} does not match {name} {tuple(p.shape)}")
        p.grad = grads[name].to(p.dtype)

    state.optim.step()
    state.optim.zero_grad()
    state.step += 1


def next_epoch(state: TrainState):
    state.epoch += 1
    state.schedule.set_lr(state.epoch, state.optim)


@torch.no_grad()
def _per_sample_mse(net: TCNN, speckles: Tensor, targets: Tensor, batch_size: int = 256) -> Tensor:
    errors = []
    for i in range(0, speckles.shape[0], batch_size):
        pred = forward(net, speckles[i : i + batch_size], training=False)
        errors.append((pred - targets[i : i + batch_size]).square().flatten(1).mean(1))
    return torch.cat(errors)


def train(
    net: TCNN,
    train_set: tuple[Tensor, Tensor],
    val_set: tuple[Tensor, Tensor],
    epochs: int,
    batch_size: int,
    seed: int,
    lr: float = 1e-3,
    lr_decay: float = 0.85,
    run=None,
    pbar: bool = True,
) -> tuple[TCNN, TrainState]:
    """Mini-batch ADAM on MSE. Sets are (speckles (N, 1, S, S), targets (N, 1, O, O)) pairs.

    Per epoch, training_error is the MSE of one randomly chosen training sample and
    validation_error the mean MSE over the validation set, both in inference mode.
    `run` is an optional wandb run.
    """
    if len(train_set[0]) == 0 or len(val_set[0]) == 0:
        raise ValueError(f"empty training or validation set: {len(train_set[0])=}, {len(val_set[0])=}")
    if epochs < 0 or batch_size < 1:
        raise ValueError(f"invalid {epochs=} or {batch_size=}")

    state = init_state(net, lr, lr_decay, seed)
    params = dict(net.named_parameters())
    dloader = DataLoader(TensorDataset(*train_set), batch_size=batch_size, shuffle=True, generator=state.generator)
    log_interval = 10

    for epoch_idx in range(epochs):
        progress = tqdm(dloader, dynamic_ncols=True, desc=f"Epoch {epoch_idx + 1}/{epochs}", disable=not pbar)

        for speckles, targets in progress:
            pred = forward(net, speckles, training=True)
            loss, loss_grad = mse_loss(pred, targets)
            grads = backward(net, loss_grad)

            if run is not None and state.step % log_interval == 0:
                run.log(dict(loss=loss, grad_norm=get_grad_norm(net), lr=state.current_lr), step=state.step)
            progress.set_postfix(loss=loss)
            adam_step(state, grads, params)

        idx = torch.randint(len(train_set[0]), (1,), generator=state.generator).item()
        training_error = _per_sample_mse(net, train_set[0][idx : idx + 1], train_set[1][idx : idx + 1]).item()
        validation_error = _per_sample_mse(net, *val_set).mean().item()
        state.curves.append(
            dict(
                epoch=state.epoch,
                training_error=training_error,
                validation_error=validation_error,
                lr=state.current_lr,
            )
        )
        if run is not None:
            run.log(dict(training_error=training_error, validation_error=validation_error), step=state.step)
        print(f"Epoch {epoch_idx + 1}/{epochs}: {training_error=:.4e}, {validation_error=:.4e}")
        next_epoch(state)

    return net, state


def write_curves(path: str | Path, state: TrainState):
    pd.DataFrame(state.curves, columns=CURVE_COLUMNS).to_csv(path, index=False)


def speckle_tensors(intensities: Tensor, signals: Tensor, mode: str, cfg: NetworkConfig) -> tuple[Tensor, Tensor]:
    """Network inputs and targets for a set of SLM images: normalized speckles and {0, 1} pixel grids."""
    if mode == "amplitude":
        pixels = signals.real if signals.is_complex() else signals
    elif mode == "phase":
        pixels = (1.0 - signals.real) / 2
    else:
        raise ValueError(f"learned inverse needs SLM images, got {mode=}")

    O = cfg.output_side
    if pixels.shape[-1] != O * O:
        raise ValueError(f"signals of length {pixels.shape[-1]} do not form {O}x{O} images")
    speckles = normalize_speckle(intensities, cfg.input_side)
    return speckles, pixels.to(torch.float64).reshape(-1, 1, O, O)
