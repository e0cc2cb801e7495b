"""Normal-map byte <-> vector codec and PNG helpers.

Convention: byte c encodes component v = 2*(c/255) - 1, so (128, 128, 255)
is (approximately) the flat background normal (0, 0, 1). Encoding rounds to
the nearest byte, which makes encode(decode(img)) the identity on any byte
image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import MalformedImageError

# Flat background normal and the per-component tolerance that separates
# foreground from background after quantization.
BACKGROUND_NORMAL = np.array([0.0, 0.0, 1.0])
FOREGROUND_TOL = 2.0 / 255.0


@dataclass(frozen=True)
class NormalField:
    """Decoded per-pixel unit normals plus a foreground mask.

    vectors holds the exact decoded values (no re-normalization), so the
    field round-trips back to the source bytes losslessly.
    """

    vectors: np.ndarray  # (H, W, 3) float64 in [-1, 1]
    foreground: np.ndarray  # (H, W) bool

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]


def decode_normals(image: np.ndarray) -> NormalField:
    """Decode an H×W×3 byte image into a NormalField.

    A pixel is foreground when any decoded component differs from the
    background normal (0, 0, 1) by more than 2/255.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise MalformedImageError(
            f"expected an H×W×3 byte image, got shape {image.shape}"
        )
    vectors = 2.0 * (image.astype(np.float64) / 255.0) - 1.0
    diff = np.abs(vectors - BACKGROUND_NORMAL)
    foreground = np.any(diff > FOREGROUND_TOL, axis=2)
    return NormalField(vectors=vectors, foreground=foreground)


def encode_normals(vectors: np.ndarray) -> np.ndarray:
    """Encode an (H, W, 3) float array of components in [-1, 1] to bytes."""
    bytes_f = np.rint(255.0 * (np.asarray(vectors, dtype=np.float64) + 1.0) / 2.0)
    return np.clip(bytes_f, 0, 255).astype(np.uint8)


def load_normal_png(path) -> np.ndarray:
    """Read a normal map PNG as an H×W×3 uint8 array."""
    with Image.open(path) as im:
        if im.mode != "RGB":
            raise MalformedImageError(f"{path}: expected RGB PNG, got mode {im.mode}")
        return np.asarray(im, dtype=np.uint8)


def save_normal_png(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise MalformedImageError(f"cannot save shape {image.shape} as RGB PNG")
    Image.fromarray(image, mode="RGB").save(path)


def load_gray_png(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG as an H×W uint8 array."""
    with Image.open(path) as im:
        if im.mode != "L":
            raise MalformedImageError(f"{path}: expected grayscale PNG, got mode {im.mode}")
        return np.asarray(im, dtype=np.uint8)


def save_gray_png(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise MalformedImageError(f"cannot save shape {image.shape} as grayscale PNG")
    Image.fromarray(image, mode="L").save(path)
