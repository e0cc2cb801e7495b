"""Losses for the adversarial training: L1, hint-mask L1, WGAN critic and
generator objectives, and ground-truth hint compositing.

Tensors are channels-first: normals (B, 3, H, W) in [-1, 1], hint masks
(B, H, W) with hints = 1. All losses return scalar tensors so they can sit
on the autograd graph.
"""

from __future__ import annotations

import torch

from .errors import ShapeMismatchError


def _check_same_shape(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def _check_mask(y: torch.Tensor, mask: torch.Tensor) -> None:
    if mask.shape != (y.shape[0], *y.shape[2:]):
        raise ShapeMismatchError(
            f"mask shape {tuple(mask.shape)} does not match images {tuple(y.shape)}"
        )


def l1_loss(y: torch.Tensor, y_gen: torch.Tensor) -> torch.Tensor:
    """Mean over pixels of the per-pixel sum of absolute channel differences."""
    _check_same_shape(y, y_gen)
    return (y - y_gen).abs().sum(dim=1).mean()


def mask_loss(y: torch.Tensor, y_gen: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Per-pixel L1 restricted to hint pixels, normalized by the hint count.

    An empty mask contributes 0 rather than dividing by zero.
    """
    _check_same_shape(y, y_gen)
    _check_mask(y, mask)
    total = mask.sum()
    if total.item() == 0:
        return torch.zeros((), dtype=y.dtype, device=y.device)
    per_pixel = (y - y_gen).abs().sum(dim=1)
    return (per_pixel * mask).sum() / total


def composite_hints(y_gen: torch.Tensor, y: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Ground truth at hint pixels, generated values everywhere else."""
    _check_same_shape(y, y_gen)
    _check_mask(y, mask)
    m = mask.unsqueeze(1)
    return y * m + y_gen * (1.0 - m)


def critic_loss(d, x_cond, y, y_gen, mask) -> torch.Tensor:
    """Negated Wasserstein gap -(E[D(y|x)] - E[D(y_tilde|x)]).

    The critic always scores the hint-composited generation, per the
    training-time hint replacement step.
    """
    _check_same_shape(y, y_gen)
    y_tilde = composite_hints(y_gen, y, mask)
    real = d.critic_value(torch.cat([x_cond, y], dim=1)).mean()
    fake = d.critic_value(torch.cat([x_cond, y_tilde], dim=1)).mean()
    return -(real - fake)


def generator_loss(
    d,
    x_cond,
    y,
    y_gen,
    mask,
    lambda_l1: float = 100.0,
    lambda_mask: float = 100.0,
    composite_scope: str = "critic_only",
):
    """Generator objective: -E[D(y_tilde|x)] + lambda_l1*L1 + lambda_mask*Lmask.

    composite_scope picks which tensors see the hint replacement:
    "critic_only" (default) feeds the raw generation to the reconstruction
    losses so the mask term stays informative at hint pixels;
    "everywhere" composites before the reconstruction losses too.

    Returns (total, parts) where parts holds the detached (adv, l1, mask)
    component values.
    """
    if composite_scope not in ("critic_only", "everywhere"):
        raise ShapeMismatchError(f"unknown composite_scope {composite_scope!r}")
    y_tilde = composite_hints(y_gen, y, mask)
    y_recon = y_tilde if composite_scope == "everywhere" else y_gen
    adv = -d.critic_value(torch.cat([x_cond, y_tilde], dim=1)).mean()
    l1 = l1_loss(y, y_recon)
    lm = mask_loss(y, y_recon, mask)
    total = adv + lambda_l1 * l1 + lambda_mask * lm
    return total, (float(adv.detach()), float(l1.detach()), float(lm.detach()))
