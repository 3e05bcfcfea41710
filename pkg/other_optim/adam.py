import torch
from torch import Tensor
from torch.optim.optimizer import Optimizer, ParamsT


class Adam(Optimizer):
    """Plain Adam (no weight decay) with states kept in the parameter dtype.

    lr is stored as a Tensor so a schedule can update it in place with
    `optim.param_groups[0]["lr"].fill_(new_lr)`.
    """

    def __init__(
        self,
        params: ParamsT,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ) -> None:
        if lr <= 0:
            raise ValueError(f"Invalid {lr=}")
        if not (0 <= betas[0] < 1 and 0 <= betas[1] < 1):
            raise ValueError(f"Invalid {betas=}")
        defaults = dict(lr=torch.as_tensor(lr, dtype=torch.float64), betas=betas, eps=eps)
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()

        for group in self.param_groups:
            if not isinstance(group["lr"], Tensor):
                raise RuntimeError(
                    "lr was changed to a non-Tensor object. If you want to update lr, please use "
                    "optim.param_groups[0]['lr'].fill_(new_lr)"
                )

            for p in group["params"]:
                if p.grad is None:
                    continue

                state = self.state[p]
                if len(state) == 0:
                    state["step"] = torch.tensor(0.0, dtype=torch.float64)
                    state["exp_avg"] = torch.zeros_like(p)
                    state["exp_avg_sq"] = torch.zeros_like(p)

                state["step"] += 1
                adam(
                    p,
                    p.grad,
                    state["step"],
                    state["exp_avg"],
                    state["exp_avg_sq"],
                    group["lr"],
                    group["betas"][0],
                    group["betas"][1],
                    group["eps"],
                )

        return loss


def adam(
    p: Tensor,
    grad: Tensor,
    step: Tensor,
    exp_avg: Tensor,
    exp_avg_sq: Tensor,
    lr: Tensor,
    beta1: float,
    beta2: float,
    eps: float,
):
    bias_correction1 = 1 - beta1**step
    bias_correction2 = 1 - beta2**step

    exp_avg.lerp_(grad, 1 - beta1)
    exp_avg_sq.lerp_(grad.square(), 1 - beta2)

    denom = exp_avg_sq.sqrt() / bias_correction2.sqrt() + eps
    numer = exp_avg / bias_correction1
    p.sub_(lr.to(p.dtype) * numer / denom)
