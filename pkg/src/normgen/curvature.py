"""Curvature maps and curvature-sensitive point-hint sampling.

The curvature proxy is half the absolute divergence of the (nx, ny)
components of the normal field, computed with central differences
(one-sided at image borders). Foreground pixels whose difference stencil
touches a background pixel are zeroed: silhouette gradients are quantization
artifacts, not surface curvature.

The hint pipeline quantizes curvature to 0-255 (per-image max -> 255),
isolates the band t_lo <= value < t_hi by XOR of two >=-thresholdings, and
thins it with independent Bernoulli dropout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import NormalField, decode_normals
from .errors import EmptyForegroundError, InvalidProbabilityError, InvalidThresholdError

DEFAULT_T_HI = 127
DEFAULT_T_LO = 126
DEFAULT_KEEP_PROB = 0.05


@dataclass(frozen=True)
class PointHintMask:
    """Sparse binary hint mask plus the sampling parameters that made it."""

    bits: np.ndarray  # (H, W) bool
    seed: int
    keep_prob: float

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def to_byte_image(self) -> np.ndarray:
        """Set bits as 255, clear as 0 (the on-disk grayscale convention)."""
        return np.where(self.bits, 255, 0).astype(np.uint8)

    def to_unit_channel(self) -> np.ndarray:
        """Set bits as exactly 1.0 (the network input convention)."""
        return self.bits.astype(np.float32)


def estimate_curvature(field: NormalField) -> np.ndarray:
    """Quantized curvature magnitude of a normal field, as an (H, W) uint8 map.

    The real proxy kappa = 0.5 * |d(nx)/dx + d(ny)/dy| is rescaled so the
    foreground maximum maps to 255; background and boundary-stencil pixels
    are 0.
    """
    fg = field.foreground
    if fg.shape[0] < 3 or fg.shape[1] < 3:
        raise EmptyForegroundError("field must be at least 3x3")
    if not fg.any():
        raise EmptyForegroundError("normal field has no foreground pixels")

    nx = field.vectors[..., 0]
    ny = field.vectors[..., 1]
    kx = np.gradient(nx, axis=1)
    ky = np.gradient(ny, axis=0)
    kappa = 0.5 * np.abs(kx + ky)

    # Valid only where the full stencil stays inside the foreground.
    # Edge-padding makes out-of-bounds neighbors equal to the pixel itself,
    # which matches the one-sided differences np.gradient uses at borders.
    padded = np.pad(fg, 1, mode="edge")
    valid = (
        fg
        & padded[:-2, 1:-1]
        & padded[2:, 1:-1]
        & padded[1:-1, :-2]
        & padded[1:-1, 2:]
    )
    kappa[~valid] = 0.0

    peak = kappa.max()
    if peak > 0.0:
        quantized = np.rint(255.0 * kappa / peak)
    else:
        quantized = np.zeros_like(kappa)
    return quantized.astype(np.uint8)


def threshold_band(
    cmap: np.ndarray, t_hi: int = DEFAULT_T_HI, t_lo: int = DEFAULT_T_LO
) -> np.ndarray:
    """Raw hint band: XOR of the two >=-thresholdings, i.e. t_lo <= v < t_hi."""
    if t_hi <= t_lo:
        raise InvalidThresholdError(f"t_hi must exceed t_lo, got {t_hi} <= {t_lo}")
    cmap = np.asarray(cmap)
    return (cmap >= t_lo) ^ (cmap >= t_hi)


def dropout_mask(
    raw: np.ndarray, keep_prob: float = DEFAULT_KEEP_PROB, seed: int = 0
) -> PointHintMask:
    """Keep each raw-band bit independently with probability keep_prob.

    The stream is a seeded numpy PCG64 generator, so identical
    (raw, keep_prob, seed) triples give bitwise-identical masks on any
    platform.
    """
    if not 0.0 < keep_prob <= 1.0:
        raise InvalidProbabilityError(f"keep_prob must be in (0, 1], got {keep_prob}")
    raw = np.asarray(raw, dtype=bool)
    rng = np.random.default_rng(seed)
    keep = rng.random(raw.shape) < keep_prob
    return PointHintMask(bits=raw & keep, seed=int(seed), keep_prob=float(keep_prob))


def sample_hints(
    nmap: np.ndarray,
    keep_prob: float = DEFAULT_KEEP_PROB,
    seed: int = 0,
    t_hi: int = DEFAULT_T_HI,
    t_lo: int = DEFAULT_T_LO,
) -> PointHintMask:
    """Full hint pipeline: decode -> curvature -> band -> dropout.

    A flat (all-background) normal map yields an empty mask rather than an
    error: no curvature, no hints.
    """
    field = decode_normals(nmap)
    if not field.foreground.any():
        if not 0.0 < keep_prob <= 1.0:
            raise InvalidProbabilityError(f"keep_prob must be in (0, 1], got {keep_prob}")
        empty = np.zeros(field.foreground.shape, dtype=bool)
        return PointHintMask(bits=empty, seed=int(seed), keep_prob=float(keep_prob))
    cmap = estimate_curvature(field)
    raw = threshold_band(cmap, t_hi=t_hi, t_lo=t_lo)
    return dropout_mask(raw, keep_prob=keep_prob, seed=seed)


def write_mask_sidecar(path, mask: PointHintMask, t_hi: int, t_lo: int) -> None:
    """Plain-text key = value metadata written alongside each mask PNG."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"seed = {mask.seed}\n")
        fh.write(f"keep_prob = {mask.keep_prob}\n")
        fh.write(f"t_hi = {t_hi}\n")
        fh.write(f"t_lo = {t_lo}\n")
