"""Synthetic paired sketch / normal-map dataset on disk.

Layout under the dataset root:

    normals/<id>.png    encoded ground-truth normal maps
    sketches/<id>.png   grayscale sketches, 0 = stroke, 255 = blank
    masks/<id>.png      hint masks, set bits = 255
    masks/<id>.txt      sampling metadata sidecar
    manifest.tsv        id, normal, sketch, mask, seed, split

Everything is deterministic: per-pair seeds derive from the global seed via
numpy SeedSequence, so the same (specs, seed) always produces a
byte-identical tree.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import load_gray_png, load_normal_png, save_gray_png, save_normal_png
from .curvature import (
    DEFAULT_KEEP_PROB,
    DEFAULT_T_HI,
    DEFAULT_T_LO,
    sample_hints,
    write_mask_sidecar,
)
from .errors import DatasetError
from .shapes import ShapeSpec, extract_contours, render_primitive

MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ("id", "normal", "sketch", "mask", "seed", "split")


@dataclass(frozen=True)
class ManifestEntry:
    pair_id: str
    normal_path: str  # relative to the manifest directory
    sketch_path: str
    mask_path: str
    seed: int
    split: str  # "train" or "val"


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple
    global_seed: int

    def ids(self, split: str = "all"):
        if split == "all":
            return [e.pair_id for e in self.entries]
        return [e.pair_id for e in self.entries if e.split == split]

    def entry(self, pair_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.pair_id == pair_id:
                return e
        raise DatasetError(f"pair id {pair_id!r} not in manifest {self.root}")

    def path(self) -> Path:
        return self.root / MANIFEST_NAME


def pair_seed(global_seed: int, index: int) -> int:
    """Deterministic per-pair seed derived from the global seed."""
    return int(np.random.SeedSequence([global_seed, index]).generate_state(1)[0])


def build_dataset(
    specs,
    out_dir,
    seed: int = 0,
    keep_prob: float = DEFAULT_KEEP_PROB,
    val_every: int = 5,
) -> DatasetManifest:
    """Render every ShapeSpec and write the paired dataset tree.

    val_every assigns every val_every-th pair to the validation split
    (0 = everything in train).
    """
    specs = list(specs)
    if not specs:
        raise DatasetError("spec list is empty")
    root = Path(out_dir)
    for sub in ("normals", "sketches", "masks"):
        (root / sub).mkdir(parents=True, exist_ok=True)

    entries = []
    for i, spec in enumerate(specs):
        pid = f"{i:04d}_{spec.kind}"
        s = pair_seed(seed, i)
        try:
            nmap = render_primitive(spec)
            sketch = extract_contours(nmap)
            mask = sample_hints(nmap, keep_prob=keep_prob, seed=s)
            save_normal_png(root / "normals" / f"{pid}.png", nmap)
            save_gray_png(root / "sketches" / f"{pid}.png", sketch)
            save_gray_png(root / "masks" / f"{pid}.png", mask.to_byte_image())
            write_mask_sidecar(
                root / "masks" / f"{pid}.txt", mask, DEFAULT_T_HI, DEFAULT_T_LO
            )
        except OSError as exc:
            raise DatasetError(f"failed writing pair {pid} under {root}: {exc}") from exc
        split = "val" if val_every and (i + 1) % val_every == 0 else "train"
        entries.append(
            ManifestEntry(
                pair_id=pid,
                normal_path=f"normals/{pid}.png",
                sketch_path=f"sketches/{pid}.png",
                mask_path=f"masks/{pid}.png",
                seed=s,
                split=split,
            )
        )

    manifest = DatasetManifest(root=root, entries=tuple(entries), global_seed=int(seed))
    write_manifest(manifest)
    return manifest


def write_manifest(manifest: DatasetManifest) -> None:
    lines = ["\t".join(MANIFEST_COLUMNS)]
    for e in manifest.entries:
        lines.append(
            "\t".join(
                (e.pair_id, e.normal_path, e.sketch_path, e.mask_path, str(e.seed), e.split)
            )
        )
    # seed recorded as a comment so load_manifest can round-trip it
    lines.append(f"# global_seed = {manifest.global_seed}")
    manifest.path().write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise DatasetError(f"manifest not found: {path}")
    root = path.parent
    entries = []
    global_seed = 0
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            if "global_seed" in line:
                global_seed = int(line.split("=")[1])
            continue
        cells = line.split("\t")
        if cells[0] == "id":
            continue
        if len(cells) != len(MANIFEST_COLUMNS):
            raise DatasetError(f"malformed manifest row in {path}: {line!r}")
        entries.append(
            ManifestEntry(
                pair_id=cells[0],
                normal_path=cells[1],
                sketch_path=cells[2],
                mask_path=cells[3],
                seed=int(cells[4]),
                split=cells[5],
            )
        )
    return DatasetManifest(root=root, entries=tuple(entries), global_seed=global_seed)


def load_pair(manifest: DatasetManifest, pair_id: str):
    """Raw byte images (normal, sketch, mask) for one pair."""
    e = manifest.entry(pair_id)
    try:
        nmap = load_normal_png(manifest.root / e.normal_path)
        sketch = load_gray_png(manifest.root / e.sketch_path)
        mask = load_gray_png(manifest.root / e.mask_path)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"failed loading pair {pair_id!r}: {exc}") from exc
    if nmap.shape[:2] != sketch.shape or nmap.shape[:2] != mask.shape:
        raise DatasetError(f"pair {pair_id!r}: image dimensions disagree")
    return nmap, sketch, mask


def load_batch(manifest: DatasetManifest, ids, augment: bool = False):
    """Assemble a training batch as channels-first float32 arrays.

    Returns (inputs, targets, masks):
      inputs  (B, 4, H, W) - sketch replicated to 3 channels (stroke = 1,
              blank = 0) plus the hint mask as channel 4 (hint = 1)
      targets (B, 3, H, W) - decoded normals in [-1, 1]
      masks   (B, H, W)    - hint bits as 0/1 floats

    augment=True mirrors all three horizontally and flips the sign of the
    normal x component.
    """
    inputs, targets, masks = [], [], []
    for pid in ids:
        nmap, sketch, mask = load_pair(manifest, pid)
        stroke = (sketch == 0).astype(np.float32)
        hint = (mask > 127).astype(np.float32)
        normal = (2.0 * (nmap.astype(np.float32) / 255.0) - 1.0).transpose(2, 0, 1)
        if augment:
            stroke = stroke[:, ::-1]
            hint = hint[:, ::-1]
            normal = normal[:, :, ::-1].copy()
            normal[0] = -normal[0]
        inputs.append(np.stack([stroke, stroke, stroke, hint]))
        targets.append(np.ascontiguousarray(normal))
        masks.append(np.ascontiguousarray(hint))
    return (
        np.stack(inputs).astype(np.float32),
        np.stack(targets).astype(np.float32),
        np.stack(masks).astype(np.float32),
    )


def dataset_tree_digest(root) -> str:
    """Stable digest of every file under a dataset tree (for determinism checks)."""
    import hashlib

    h = hashlib.sha256()
    root = Path(root)
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()
