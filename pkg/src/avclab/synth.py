"""Synthetic audiovisual crowd scenes with exact ground truth.

Each scene renders n soft bright blobs on a dark background (head point =
blob center) and synthesizes a 1 s ambient clip as the sum of n
independent band-limited noise bursts, normalized so the clip RMS is
per_person_rms * sqrt(n). Louder ambience therefore means more people,
and only loudness carries the count: the audio has no spatial cues.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from . import corruption as cr
from . import density as density_mod
from . import rng
from .audio import AudioClip
from .density import HeadAnnotations
from .errors import SpecError


@dataclass
class SceneSpec:
    dims: tuple[int, int] = (256, 144)  # (W, H), divisible by 8
    count_min: int = 1
    count_max: int = 40
    blob_radius: tuple[float, float] = (3.0, 6.0)
    blob_intensity: tuple[float, float] = (0.55, 0.95)
    background: float = 0.08
    per_person_rms: float = 0.05
    band_hz: tuple[float, float] = (300.0, 3000.0)
    clip_seconds: float = 1.0
    sample_rate: int = 16000
    seed: int = 0

    def validate(self) -> "SceneSpec":
        w, h = self.dims
        if w % 8 or h % 8:
            raise SpecError(f"scene dims {w}x{h} must be divisible by 8")
        if self.count_min < 0 or self.count_max < self.count_min:
            raise SpecError(f"bad count range [{self.count_min}, {self.count_max}]")
        lo, hi = self.band_hz
        if not 0.0 < lo < hi < self.sample_rate / 2:
            raise SpecError(f"audio band {self.band_hz} outside (0, Nyquist)")
        return self


def _render_blobs(spec: SceneSpec, gen: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    w, h = spec.dims
    base = spec.background * (0.75 + 0.5 * gen.uniform())
    image = np.full((h, w, 3), base)
    points = np.empty((n, 2))
    for i in range(n):
        x = min(gen.uniform(0.0, w), w - 1e-6)
        y = min(gen.uniform(0.0, h), h - 1e-6)
        radius = gen.uniform(*spec.blob_radius)
        intensity = gen.uniform(*spec.blob_intensity)
        tint = gen.uniform(0.85, 1.0, size=3)
        # profile is zero beyond 1.2*radius; render only that window
        extent = int(np.ceil(1.2 * radius)) + 1
        x0, x1 = max(0, int(x) - extent), min(w, int(x) + extent + 1)
        y0, y1 = max(0, int(y) - extent), min(h, int(y) + extent + 1)
        ys, xs = np.mgrid[y0:y1, x0:x1]
        dist = np.sqrt((xs - x) ** 2 + (ys - y) ** 2)
        profile = intensity * np.clip(1.2 - dist / radius, 0.0, 1.0)
        image[y0:y1, x0:x1] = np.maximum(
            image[y0:y1, x0:x1], profile[:, :, None] * tint[None, None, :])
        points[i] = (x, y)
    return np.clip(image, 0.0, 1.0), points


def _babble(spec: SceneSpec, gen: np.random.Generator, n: int) -> np.ndarray:
    n_samples = int(round(spec.clip_seconds * spec.sample_rate))
    if n == 0:
        return np.zeros(n_samples)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / spec.sample_rate)
    band = (freqs >= spec.band_hz[0]) & (freqs <= spec.band_hz[1])
    mix = np.zeros(n_samples)
    for _ in range(n):
        spectrum = np.fft.rfft(gen.normal(0.0, 1.0, n_samples))
        spectrum[~band] = 0.0
        mix += np.fft.irfft(spectrum, n=n_samples)
    rms = float(np.sqrt(np.mean(mix * mix)))
    target = spec.per_person_rms * np.sqrt(n)
    if rms > 0.0:
        mix *= target / rms
    return np.clip(mix, -1.0, 1.0)


def generate_scene(spec: SceneSpec, index: int) -> tuple[np.ndarray, HeadAnnotations, AudioClip]:
    """Fully determined by (spec.seed, index)."""
    spec.validate()
    gen = rng.generator(spec.seed, "scene", index)
    n = int(gen.integers(spec.count_min, spec.count_max + 1))
    image, points = _render_blobs(spec, gen, n)
    ann = HeadAnnotations(points=points, image_dims=spec.dims)
    clip = AudioClip(samples=_babble(spec, gen, n), sample_rate=spec.sample_rate)
    return image, ann, clip


def generate_dataset(spec: SceneSpec, n_scenes: int, out_dir) -> Path:
    """Write PPM/CSV/WAV files plus a manifest; returns the manifest path."""
    spec.validate()
    out = Path(out_dir)
    for sub in ("images", "ann", "audio"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image", "annotations", "audio", "count"])
        for i in range(n_scenes):
            image, ann, clip = generate_scene(spec, i)
            img_rel = f"images/{i:04d}.ppm"
            ann_rel = f"ann/{i:04d}.csv"
            wav_rel = f"audio/{i:04d}.wav"
            cr.write_ppm(out / img_rel, image)
            density_mod.write_annotations(out / ann_rel, ann)
            audio_mod.write_wav(out / wav_rel, clip)
            writer.writerow([img_rel, ann_rel, wav_rel, ann.count])
    return manifest
