"""Evaluation metrics over normal regions: mean angular difference (degrees),
per-pixel vector L1 and L2 means, error heatmaps, and multi-method reports.

All metrics are restricted to the ground-truth foreground so every method is
scored on the identical pixel set. Vectors are decoded to [-1, 1] and
renormalized to unit length before the angular comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import decode_normals, load_normal_png, save_normal_png
from .dataset import DatasetManifest
from .errors import DatasetError, UndefinedMetricError


@dataclass(frozen=True)
class MetricsRecord:
    pair_id: str
    angular_deg: float
    l1: float
    l2: float
    foreground_pixels: int


def _as_vectors(y: np.ndarray) -> np.ndarray:
    """Byte images are decoded; float arrays are taken as already-decoded vectors."""
    y = np.asarray(y)
    if y.dtype == np.uint8:
        return decode_normals(y).vectors
    if y.ndim != 3 or y.shape[2] != 3:
        raise UndefinedMetricError(f"expected an H×W×3 field, got shape {y.shape}")
    return y.astype(np.float64)


def foreground_mask(y: np.ndarray) -> np.ndarray:
    """Pixels whose (decoded) normal differs from the flat background sentinel."""
    y = np.asarray(y)
    if y.dtype == np.uint8:
        return decode_normals(y).foreground
    diff = np.abs(_as_vectors(y) - np.array([0.0, 0.0, 1.0]))
    return np.any(diff > 2.0 / 255.0, axis=2)


def _decoded_pair(y, y_gen, fg):
    a = _as_vectors(y)
    b = _as_vectors(y_gen)
    if a.shape != b.shape:
        raise UndefinedMetricError(f"image shapes disagree: {a.shape} vs {b.shape}")
    if not np.any(fg):
        raise UndefinedMetricError("empty foreground: metric undefined")
    return a[fg], b[fg]


def _angles_deg(va: np.ndarray, vb: np.ndarray) -> np.ndarray:
    na = va / np.maximum(np.linalg.norm(va, axis=-1, keepdims=True), 1e-12)
    nb = vb / np.maximum(np.linalg.norm(vb, axis=-1, keepdims=True), 1e-12)
    # chord form of arccos(clip(<na, nb>)): exact at 0 and 180 degrees and
    # well-conditioned for nearly identical vectors
    half_chord = 0.5 * np.linalg.norm(na - nb, axis=-1)
    return np.degrees(2.0 * np.arcsin(np.clip(half_chord, 0.0, 1.0)))


def angular_error(y: np.ndarray, y_gen: np.ndarray, fg: np.ndarray) -> float:
    va, vb = _decoded_pair(y, y_gen, fg)
    return float(_angles_deg(va, vb).mean())


def l1_metric(y: np.ndarray, y_gen: np.ndarray, fg: np.ndarray) -> float:
    va, vb = _decoded_pair(y, y_gen, fg)
    return float(np.abs(va - vb).sum(axis=-1).mean())


def l2_metric(y: np.ndarray, y_gen: np.ndarray, fg: np.ndarray) -> float:
    va, vb = _decoded_pair(y, y_gen, fg)
    return float(np.sqrt(((va - vb) ** 2).sum(axis=-1)).mean())


# Error heatmap ramp: red intensity grows linearly from 0 at 0° and
# saturates at 90° and beyond; background stays black.
RAMP_SATURATION_DEG = 90.0


def ramp_intensity(angle_deg) -> np.ndarray:
    return np.rint(
        255.0 * np.clip(np.asarray(angle_deg, dtype=np.float64) / RAMP_SATURATION_DEG, 0.0, 1.0)
    ).astype(np.uint8)


def error_map(y: np.ndarray, y_gen: np.ndarray, fg: np.ndarray) -> np.ndarray:
    """Per-pixel angular error as an H×W×3 red-ramp heatmap image."""
    if not np.any(fg):
        raise UndefinedMetricError("empty foreground: error map undefined")
    va = _as_vectors(y)
    vb = _as_vectors(y_gen)
    angles = _angles_deg(va.reshape(-1, 3), vb.reshape(-1, 3)).reshape(fg.shape)
    out = np.zeros((*fg.shape, 3), dtype=np.uint8)
    out[fg, 0] = ramp_intensity(angles[fg])
    return out


def evaluate_pair(y: np.ndarray, y_gen: np.ndarray, pair_id: str = "") -> MetricsRecord:
    fg = foreground_mask(y)
    return MetricsRecord(
        pair_id=pair_id,
        angular_deg=angular_error(y, y_gen, fg),
        l1=l1_metric(y, y_gen, fg),
        l2=l2_metric(y, y_gen, fg),
        foreground_pixels=int(fg.sum()),
    )


@dataclass(frozen=True)
class MethodReport:
    name: str
    records: tuple
    mean_angular: float
    mean_l1: float
    mean_l2: float


def evaluate_run(
    manifest: DatasetManifest,
    method_dirs,
    split: str = "val",
    write_error_maps: bool = False,
) -> list:
    """Score one or more directories of generated normal maps.

    method_dirs maps a method name to a directory containing <pair_id>.png
    for every pair of the chosen split (falls back to all pairs when the
    split is empty). Missing images are reported together, by id.
    """
    ids = manifest.ids(split) or manifest.ids("all")
    if not ids:
        raise DatasetError("manifest has no pairs to evaluate")

    reports = []
    for name, directory in method_dirs.items():
        directory = Path(directory)
        missing = [pid for pid in ids if not (directory / f"{pid}.png").is_file()]
        if missing:
            raise DatasetError(
                f"method {name!r}: missing generated images for ids {missing}"
            )
        records = []
        for pid in ids:
            y = load_normal_png(manifest.root / manifest.entry(pid).normal_path)
            y_gen = load_normal_png(directory / f"{pid}.png")
            records.append(evaluate_pair(y, y_gen, pid))
            if write_error_maps:
                fg = foreground_mask(y)
                save_normal_png(directory / f"{pid}_error.png", error_map(y, y_gen, fg))
        reports.append(
            MethodReport(
                name=name,
                records=tuple(records),
                mean_angular=float(np.mean([r.angular_deg for r in records])),
                mean_l1=float(np.mean([r.l1 for r in records])),
                mean_l2=float(np.mean([r.l2 for r in records])),
            )
        )
    return reports


def report_table(reports) -> str:
    """Aligned plain-text comparison table, one row per method."""
    lines = [f"{'Method':<20} {'Angular':>10} {'L1':>8} {'L2':>8}"]
    for r in reports:
        lines.append(
            f"{r.name:<20} {r.mean_angular:>9.3f}° {r.mean_l1:>8.3f} {r.mean_l2:>8.3f}"
        )
    return "\n".join(lines)


def write_report(reports, out_path) -> None:
    """Tab-separated report: the method means, then per-pair records."""
    out_path = Path(out_path)
    lines = ["method\tangular_deg\tl1\tl2"]
    for r in reports:
        lines.append(f"{r.name}\t{r.mean_angular:.6f}\t{r.mean_l1:.6f}\t{r.mean_l2:.6f}")
    lines.append("")
    lines.append("method\tpair_id\tangular_deg\tl1\tl2\tforeground_pixels")
    for r in reports:
        for rec in r.records:
            lines.append(
                f"{r.name}\t{rec.pair_id}\t{rec.angular_deg:.6f}\t{rec.l1:.6f}"
                f"\t{rec.l2:.6f}\t{rec.foreground_pixels}"
            )
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
