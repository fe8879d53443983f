"""Uncertainty-weighted two-task loss, parameterized by log-variances s = log(sigma^2)."""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import NumericError


def _check(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise NumericError(f"{name} is not finite: {value}")


def uncertainty_loss(L_dia, L_det, s_dia=0.0, s_det=0.0):
    """L/(2 sigma^2) + log sigma summed over both tasks.

    Works on python floats and on torch tensors (autograd flows through).
    With log sigma = s/2 the per-task term is 0.5 * L * exp(-s) + 0.5 * s.
    """
    if isinstance(L_dia, torch.Tensor) or isinstance(s_dia, torch.Tensor):
        for name, v in (("L_dia", L_dia), ("L_det", L_det), ("s_dia", s_dia), ("s_det", s_det)):
            if isinstance(v, torch.Tensor) and not torch.isfinite(v).all():
                raise NumericError(f"{name} is not finite")
        return (
            0.5 * L_dia * torch.exp(-torch.as_tensor(s_dia))
            + 0.5 * torch.as_tensor(s_dia)
            + 0.5 * L_det * torch.exp(-torch.as_tensor(s_det))
            + 0.5 * torch.as_tensor(s_det)
        )
    for name, v in (("L_dia", L_dia), ("L_det", L_det), ("s_dia", s_dia), ("s_det", s_det)):
        _check(name, float(v))
    if L_dia < 0 or L_det < 0:
        raise NumericError("task losses must be non-negative")
    return (
        0.5 * L_dia * math.exp(-s_dia) + 0.5 * s_dia + 0.5 * L_det * math.exp(-s_det) + 0.5 * s_det
    )


def uncertainty_grad(L_dia: float, L_det: float, s_dia: float, s_det: float) -> tuple[float, float]:
    """Closed-form d/ds of :func:`uncertainty_loss`."""
    return 0.5 - 0.5 * L_dia * math.exp(-s_dia), 0.5 - 0.5 * L_det * math.exp(-s_det)


def uncertainty_floor(L_dia: float, L_det: float) -> float:
    """Minimum over (s_dia, s_det), reached at s = log L."""
    return 0.5 * (1 + math.log(L_dia)) + 0.5 * (1 + math.log(L_det))


class UncertaintyWeighting(nn.Module):
    """Learnable (s_dia, s_det), both initialized at 0 (sigma = 1)."""

    def __init__(self):
        super().__init__()
        self.s_dia = nn.Parameter(torch.zeros(()))
        self.s_det = nn.Parameter(torch.zeros(()))

    def forward(self, L_dia: torch.Tensor, L_det: torch.Tensor) -> torch.Tensor:
        return uncertainty_loss(L_dia, L_det, self.s_dia, self.s_det)

    def state(self) -> dict[str, float]:
        return {"s_dia": float(self.s_dia.detach()), "s_det": float(self.s_det.detach())}
