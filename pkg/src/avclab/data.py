"""Dataset loading and per-sample corruption for training and evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from . import corruption as cr
from . import density as density_mod
from .density import HeadAnnotations
from .errors import FormatError


@dataclass
class Sample:
    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    density: np.ndarray  # (H, W) float32, sums to count
    patch: np.ndarray  # (1, 96, 64) float32 log-mel
    count: float
    ann: HeadAnnotations
    index: int


def load_dataset(manifest_dir, limit: int | None = None) -> list[Sample]:
    """Read a generated dataset directory into memory."""
    root = Path(manifest_dir)
    manifest = root / "manifest.csv"
    if not manifest.exists():
        raise FormatError(f"no manifest.csv under {root}")
    samples: list[Sample] = []
    with open(manifest, newline="") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader):
            if limit is not None and i >= limit:
                break
            image = cr.read_ppm(root / row["image"]).astype(np.float32)
            h, w = image.shape[:2]
            ann = density_mod.read_annotations(root / row["annotations"], (w, h))
            dens = density_mod.density_from_heads(ann).astype(np.float32)
            clip = audio_mod.read_wav(root / row["audio"])
            patch = audio_mod.pipeline(clip).astype(np.float32)[None, :, :]
            count = float(row["count"])
            if abs(count - ann.count) > 1e-6:
                raise FormatError(
                    f"{manifest}: row {i} count {count} != {ann.count} annotated heads")
            samples.append(Sample(image=image, density=dens, patch=patch,
                                  count=count, ann=ann, index=i))
    return samples


def split_dataset(samples: list[Sample], n_train: int, n_val: int,
                  n_test: int) -> tuple[list[Sample], list[Sample], list[Sample]]:
    if n_train + n_val + n_test > len(samples):
        raise FormatError(
            f"split {n_train}+{n_val}+{n_test} exceeds {len(samples)} samples")
    train = samples[:n_train]
    val = samples[n_train: n_train + n_val]
    test = samples[n_train + n_val: n_train + n_val + n_test]
    return train, val, test


def corrupt_sample(sample: Sample, spec: cr.CorruptionSpec, index: int) -> Sample:
    """Apply a corruption spec; low_res also rescales the ground truth."""
    if spec.mode == "low_res":
        image = cr.low_res(sample.image, spec.target_dims).astype(np.float32)
        tw, th = spec.target_dims
        h, w = sample.image.shape[:2]
        pts = sample.ann.points.copy()
        pts[:, 0] = np.clip(pts[:, 0] * tw / w, 0.0, np.nextafter(tw, 0.0))
        pts[:, 1] = np.clip(pts[:, 1] * th / h, 0.0, np.nextafter(th, 0.0))
        ann = HeadAnnotations(points=pts, image_dims=(tw, th))
        dens = density_mod.density_from_heads(ann).astype(np.float32)
        return replace(sample, image=image, density=dens, ann=ann)
    image = cr.apply_corruption(sample.image, spec, index).astype(np.float32)
    return replace(sample, image=image)


def corrupt_dataset(samples: list[Sample], spec: cr.CorruptionSpec | None) -> list[Sample]:
    """Corrupt images with per-sample seeds derived from position in the list."""
    if spec is None:
        return list(samples)
    spec.validate()
    return [corrupt_sample(s, spec, i) for i, s in enumerate(samples)]
