"""Image degradation protocols, enhancement, and quality measurement.

Images are (H, W, 3) float arrays in [0, 1]. All randomness is drawn from
the per-spec 64-bit seed (plus a sample index), so corrupting the same
image with the same spec is reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.ndimage import convolve1d
from scipy.special import gamma as gamma_fn

from . import rng
from .errors import DimensionError, FormatError, SpecError

MODES = ("darken_noise", "fixed_noise", "occlude", "low_res")

ENHANCE_KERNEL = 11
# blur std follows the kernel-adaptive rule 0.3*((k-1)*0.5 - 1) + 0.8
ENHANCE_SIGMA = 0.3 * ((ENHANCE_KERNEL - 1) * 0.5 - 1.0) + 0.8


@dataclass
class QualityReport:
    """Full-reference PSNR plus no-reference naturalness statistics."""

    psnr: float
    brisque_features: np.ndarray
    brisque_score: float | None = None


@dataclass
class CorruptionSpec:
    """Declarative description of one degradation."""

    mode: str
    R: float | None = None
    B: float | None = None
    sigma_fixed: float | None = None
    occlusion_rate: float | None = None
    target_dims: tuple[int, int] | None = None
    seed: int = 0
    deterministic: bool = False

    def validate(self) -> "CorruptionSpec":
        if self.mode not in MODES:
            raise SpecError(f"unknown corruption mode {self.mode!r}")
        if self.mode == "darken_noise":
            if self.R is None or not 0.0 <= self.R <= 1.0:
                raise SpecError(f"darken_noise needs R in [0,1], got {self.R}")
            if self.B is None and self.sigma_fixed is None:
                raise SpecError("darken_noise needs B or sigma_fixed")
        elif self.mode == "fixed_noise":
            if self.B is None and self.sigma_fixed is None:
                raise SpecError("fixed_noise needs B or sigma_fixed")
        elif self.mode == "occlude":
            if self.occlusion_rate is None or not 0.0 <= self.occlusion_rate <= 1.0:
                raise SpecError(f"occlude needs a rate in [0,1], got {self.occlusion_rate}")
        elif self.mode == "low_res":
            if self.target_dims is None:
                raise SpecError("low_res needs target_dims")
        return self


def _check_image(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected (H,W,3) image, got {arr.shape}")
    return arr


def darken(img: np.ndarray, R: float, seed: int = 0,
           deterministic: bool = False) -> tuple[np.ndarray, float]:
    """Multiply every pixel by r; random mode draws r = R*U(0,1)."""
    img = _check_image(img)
    if not 0.0 <= R <= 1.0:
        raise SpecError(f"brightness hyperparameter R={R} outside [0,1]")
    if deterministic:
        r = float(R)
    else:
        r = float(R * rng.generator(seed).uniform())
    return img * r, r


def draw_sigma(B: float, gen: np.random.Generator) -> float:
    """Per-image noise std: sigma = sqrt(U(0,1) * (B/255)^2)."""
    if B < 0:
        raise SpecError(f"noise hyperparameter B={B} must be >= 0")
    return float(np.sqrt(gen.uniform()) * (B / 255.0))


def add_noise(img: np.ndarray, B: float | None = None,
              sigma_fixed: float | None = None, seed: int = 0) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise, clamp to [0,1].

    Fixed mode uses sigma_fixed directly; random mode draws the std per
    image via :func:`draw_sigma`.
    """
    img = _check_image(img)
    if sigma_fixed is None and B is None:
        raise SpecError("add_noise requires B or sigma_fixed")
    gen = rng.generator(seed)
    sigma = float(sigma_fixed) if sigma_fixed is not None else draw_sigma(B, gen)
    if sigma == 0.0:
        return img.copy()
    noisy = img + gen.normal(0.0, sigma, size=img.shape)
    return np.clip(noisy, 0.0, 1.0)


def occlude(img: np.ndarray, occlusion_rate: float,
            seed: int = 0) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    """Zero a random int(W*sqrt(rate)) x int(H*sqrt(rate)) rectangle."""
    img = _check_image(img)
    if not 0.0 <= occlusion_rate <= 1.0:
        raise SpecError(f"occlusion rate {occlusion_rate} outside [0,1]")
    h, w = img.shape[:2]
    rw = int(w * np.sqrt(occlusion_rate))
    rh = int(h * np.sqrt(occlusion_rate))
    if rw == 0 or rh == 0:
        return img.copy(), (0, 0, 0, 0)
    gen = rng.generator(seed)
    x = int(gen.integers(0, w - rw + 1))
    y = int(gen.integers(0, h - rh + 1))
    out = img.copy()
    out[y: y + rh, x: x + rw] = 0.0
    return out, (x, y, rw, rh)


@lru_cache(maxsize=32)
def _box_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) area-overlap weights; each row sums to one."""
    mat = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for o in range(n_out):
        lo, hi = o * scale, (o + 1) * scale
        i0, i1 = int(np.floor(lo)), int(np.ceil(hi))
        for i in range(i0, min(i1, n_in)):
            overlap = min(hi, i + 1) - max(lo, i)
            if overlap > 0:
                mat[o, i] = overlap / scale
    return mat


def low_res(img: np.ndarray, target_dims: tuple[int, int]) -> np.ndarray:
    """Area-average downsampling to (W, H) target dims."""
    img = _check_image(img)
    tw, th = target_dims
    h, w = img.shape[:2]
    if tw > w or th > h:
        raise SpecError(f"target {tw}x{th} exceeds source {w}x{h}")
    if (tw, th) == (w, h):
        return img.copy()
    rows = _box_matrix(h, th)
    cols = _box_matrix(w, tw)
    return np.einsum("oh,hwc,pw->opc", rows, img, cols, optimize=True)


@lru_cache(maxsize=8)
def _gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: np.ndarray, size: int = ENHANCE_KERNEL,
                  sigma: float = ENHANCE_SIGMA) -> np.ndarray:
    """Separable Gaussian blur per channel with reflected borders."""
    img = _check_image(img)
    k = _gaussian_kernel1d(size, sigma)
    out = convolve1d(np.asarray(img, dtype=np.float64), k, axis=0, mode="mirror")
    return convolve1d(out, k, axis=1, mode="mirror")


_LUMA = np.array([0.299, 0.587, 0.114])


def equalize_luma(img: np.ndarray) -> np.ndarray:
    """Histogram-equalize the luma channel, preserving chroma."""
    img = _check_image(img)
    luma = img @ _LUMA
    bins = np.clip(np.round(luma * 255.0).astype(np.int64), 0, 255)
    hist = np.bincount(bins.ravel(), minlength=256)
    cdf = np.cumsum(hist) / bins.size
    new_luma = cdf[bins]
    delta = new_luma - luma
    return np.clip(img + delta[:, :, None], 0.0, 1.0)


def enhance(img: np.ndarray) -> np.ndarray:
    """11x11 Gaussian blur then luma histogram equalization."""
    return equalize_luma(gaussian_blur(img))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) on the [0,1] scale; +inf for identical images."""
    a, b = _check_image(a), _check_image(b)
    if a.shape != b.shape:
        raise DimensionError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def apply_corruption(img: np.ndarray, spec: CorruptionSpec,
                     index: int = 0) -> np.ndarray:
    """Dispatch a validated spec; per-sample seed mixes spec.seed and index."""
    spec.validate()
    seed = rng.derive_seed(spec.seed, index)
    if spec.mode == "darken_noise":
        out, _ = darken(img, spec.R, seed=rng.derive_seed(seed, "darken"),
                        deterministic=spec.deterministic)
        if spec.sigma_fixed is not None or (spec.B is not None and spec.B > 0):
            out = add_noise(out, B=spec.B, sigma_fixed=spec.sigma_fixed,
                            seed=rng.derive_seed(seed, "noise"))
        return out
    if spec.mode == "fixed_noise":
        return add_noise(img, B=spec.B, sigma_fixed=spec.sigma_fixed,
                         seed=rng.derive_seed(seed, "noise"))
    if spec.mode == "occlude":
        out, _ = occlude(img, spec.occlusion_rate, seed=rng.derive_seed(seed, "occlude"))
        return out
    return low_res(img, spec.target_dims)


# ---------------------------------------------------------------------------
# BRISQUE-style naturalness features

_MSCN_WINDOW = 7
_MSCN_SIGMA = 7.0 / 6.0


def _local_gaussian_filter(gray: np.ndarray) -> np.ndarray:
    k = _gaussian_kernel1d(_MSCN_WINDOW, _MSCN_SIGMA)
    tmp = convolve1d(gray, k, axis=0, mode="mirror")
    return convolve1d(tmp, k, axis=1, mode="mirror")


def mscn_coefficients(gray: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized values with a +1 stabilizer."""
    mu = _local_gaussian_filter(gray)
    var = _local_gaussian_filter(gray * gray) - mu * mu
    sigma = np.sqrt(np.abs(var))
    return (gray - mu) / (sigma + 1.0)


_SHAPE_GRID = np.arange(0.2, 10.001, 0.001)
_GGD_RATIO = gamma_fn(1.0 / _SHAPE_GRID) * gamma_fn(3.0 / _SHAPE_GRID) / (
    gamma_fn(2.0 / _SHAPE_GRID) ** 2)
_AGGD_RATIO = (gamma_fn(2.0 / _SHAPE_GRID) ** 2) / (
    gamma_fn(1.0 / _SHAPE_GRID) * gamma_fn(3.0 / _SHAPE_GRID))


_DEGENERATE_ENERGY = 1e-24  # below this the data is rounding residue, not signal


def fit_ggd(x: np.ndarray) -> tuple[float, float]:
    """Moment-matched generalized Gaussian (shape, variance)."""
    mean_sq = float(np.mean(x * x))
    if mean_sq <= _DEGENERATE_ENERGY:
        return 0.0, 0.0
    mean_abs = float(np.mean(np.abs(x)))
    rho = mean_sq / (mean_abs * mean_abs)
    shape = float(_SHAPE_GRID[np.argmin(np.abs(_GGD_RATIO - rho))])
    return shape, mean_sq


def fit_aggd(x: np.ndarray) -> tuple[float, float, float, float]:
    """Moment-matched asymmetric GGD: (shape, mean, left var, right var)."""
    if float(np.mean(x * x)) <= _DEGENERATE_ENERGY:
        return 0.0, 0.0, 0.0, 0.0
    left = x[x < 0]
    right = x[x > 0]
    std_l = float(np.sqrt(np.mean(left * left))) if left.size else 0.0
    std_r = float(np.sqrt(np.mean(right * right))) if right.size else 0.0
    if std_l == 0.0 or std_r == 0.0:
        return 0.0, 0.0, std_l * std_l, std_r * std_r
    gamma_hat = std_l / std_r
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    r_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / ((gamma_hat**2 + 1.0) ** 2)
    shape = float(_SHAPE_GRID[np.argmin((_AGGD_RATIO - r_norm) ** 2)])
    const = np.sqrt(gamma_fn(1.0 / shape) / gamma_fn(3.0 / shape))
    mean = (std_r - std_l) * (gamma_fn(2.0 / shape) / gamma_fn(1.0 / shape)) * const
    return shape, float(mean), std_l * std_l, std_r * std_r


_PAIR_SHIFTS = ((0, 1), (1, 0), (1, 1), (1, -1))


def brisque_features(img: np.ndarray) -> np.ndarray:
    """36 naturalness statistics: 18 per scale at two scales."""
    img = _check_image(img)
    if min(img.shape[0], img.shape[1]) < 32:
        raise DimensionError(
            f"image {img.shape[1]}x{img.shape[0]} too small for feature extraction (min dim 32)")
    gray = np.asarray(img, dtype=np.float64) @ _LUMA
    features: list[float] = []
    for scale in range(2):
        mscn = mscn_coefficients(gray)
        shape, variance = fit_ggd(mscn)
        features.extend([shape, variance])
        for dy, dx in _PAIR_SHIFTS:
            product = mscn * np.roll(np.roll(mscn, dy, axis=0), dx, axis=1)
            features.extend(fit_aggd(product))
        if scale == 0:
            h2, w2 = (gray.shape[0] // 2) * 2, (gray.shape[1] // 2) * 2
            gray = gray[:h2, :w2].reshape(h2 // 2, 2, w2 // 2, 2).mean(axis=(1, 3))
    return np.array(features, dtype=np.float64)


def load_brisque_model(path) -> tuple[float, np.ndarray]:
    """Text model file: first line intercept, then 36 linear weights."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) != 37:
        raise FormatError(f"{path}: expected 37 lines (intercept + 36 weights), got {len(lines)}")
    values = [float(v) for v in lines]
    return values[0], np.array(values[1:], dtype=np.float64)


def brisque_score(features: np.ndarray, model_path) -> float:
    """Linear proxy score reported as 100 - raw (higher means better)."""
    intercept, weights = load_brisque_model(model_path)
    if features.shape != (36,):
        raise DimensionError(f"expected 36 features, got {features.shape}")
    raw = intercept + float(weights @ features)
    return 100.0 - raw


def quality_report(reference: np.ndarray, degraded: np.ndarray,
                   model_path=None) -> QualityReport:
    """Measure a degraded image against its reference."""
    feats = brisque_features(degraded)
    score = brisque_score(feats, model_path) if model_path is not None else None
    return QualityReport(psnr=psnr(reference, degraded),
                         brisque_features=feats, brisque_score=score)


# ---------------------------------------------------------------------------
# PPM image files (binary P6, 8-bit)

def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos: pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos: pos + 1] == b"#":
            while pos < len(data) and data[pos: pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos: pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P6":
        raise FormatError(f"{path}: not a binary PPM (P6) file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise FormatError(f"{path}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=pos)
    return pixels.reshape(height, width, 3).astype(np.float64) / 255.0


def write_ppm(path, img: np.ndarray):
    img = _check_image(img)
    h, w = img.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    pixels = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Path(path).write_bytes(header + pixels.tobytes())
