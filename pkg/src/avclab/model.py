"""Audiovisual counting network.

A VGG-style visual frontend downsamples the image by 8, a smaller VGG-style
CNN embeds the 96x64 log-mel patch, and six dilated-convolution fusion
blocks modulate visual features channel-wise with audio-derived scale and
shift vectors before a 1x1 head and bilinear x8 upsampling back to full
resolution. With audio disabled the modulation is the constant identity,
which is also exactly the state of a freshly initialized audio path.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import rng
from .autodiff import Tensor
from .errors import ContractError, DimensionError, FormatError

POOL = "M"

DEFAULT_VISUAL = (16, 16, POOL, 32, 32, POOL, 64, POOL)
DEFAULT_AUDIO = (16, POOL, 16, POOL, 32, POOL, 64, POOL)
DEFAULT_BACKEND = (64, 64, 64, 32, 16, 8)

AUDIO_PATCH_SHAPE = (1, 96, 64)


@dataclass
class FilmParams:
    """Per-block modulation vectors; lengths equal the block's conv width."""

    gamma: Tensor
    beta: Tensor
    block: int


@dataclass(frozen=True)
class ModelConfig:
    visual_channels: tuple = DEFAULT_VISUAL
    audio_channels: tuple = DEFAULT_AUDIO
    backend_channels: tuple = DEFAULT_BACKEND
    film_shared: bool = False
    film_hidden: int = 0
    audio_enabled: bool = True
    base_width: float = 1.0
    seed: int = 0

    def scaled(self, layers) -> tuple:
        return tuple(
            v if v == POOL else max(1, int(round(v * self.base_width))) for v in layers
        )

    @property
    def visual(self) -> tuple:
        return self.scaled(self.visual_channels)

    @property
    def audio(self) -> tuple:
        return self.scaled(self.audio_channels)

    @property
    def backend(self) -> tuple:
        return self.scaled(self.backend_channels)

    def validate(self):
        if sum(1 for v in self.visual_channels if v == POOL) != 3:
            raise ContractError("visual frontend must contain exactly 3 pooling stages")
        if len(self.backend_channels) != 6:
            raise ContractError("backend must list exactly 6 fusion block widths")
        v_widths = [v for v in self.visual if v != POOL]
        a_widths = [v for v in self.audio if v != POOL]
        if not v_widths or not a_widths:
            raise ContractError("visual and audio frontends need at least one conv layer")
        if v_widths[-1] != a_widths[-1]:
            raise ContractError(
                f"audio output channels ({a_widths[-1]}) must equal visual output channels ({v_widths[-1]})")
        if any(w < 1 for w in self.backend):
            raise ContractError("all widths must be >= 1")
        h, w = AUDIO_PATCH_SHAPE[1], AUDIO_PATCH_SHAPE[2]
        for v in self.audio_channels:
            if v == POOL:
                if h % 2 or w % 2:
                    raise ContractError("audio pooling does not divide the 96x64 patch")
                h, w = h // 2, w // 2
        return self


def _parse_layer_list(text: str) -> tuple:
    items = []
    for token in text.split(","):
        token = token.strip()
        items.append(POOL if token.upper() == POOL else int(token))
    return tuple(items)


def _format_layer_list(layers) -> str:
    return ",".join(str(v) for v in layers)


def config_to_text(cfg: ModelConfig) -> str:
    lines = [
        f"visual_channels={_format_layer_list(cfg.visual_channels)}",
        f"audio_channels={_format_layer_list(cfg.audio_channels)}",
        f"backend_channels={_format_layer_list(cfg.backend_channels)}",
        f"film_shared={'true' if cfg.film_shared else 'false'}",
        f"film_hidden={cfg.film_hidden}",
        f"audio_enabled={'true' if cfg.audio_enabled else 'false'}",
        f"base_width={cfg.base_width}",
        f"seed={cfg.seed}",
    ]
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> ModelConfig:
    cfg = ModelConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in ("visual_channels", "audio_channels", "backend_channels"):
            cfg = replace(cfg, **{key: _parse_layer_list(value)})
        elif key in ("film_shared", "audio_enabled"):
            cfg = replace(cfg, **{key: value.lower() in ("true", "1", "yes")})
        elif key == "film_hidden":
            cfg = replace(cfg, film_hidden=int(value))
        elif key == "base_width":
            cfg = replace(cfg, base_width=float(value))
        elif key == "seed":
            cfg = replace(cfg, seed=int(value))
        else:
            raise FormatError(f"config line {lineno}: unknown key {key!r}")
    return cfg.validate()


def save_config(path, cfg: ModelConfig):
    Path(path).write_text(config_to_text(cfg))


def load_config(path) -> ModelConfig:
    return config_from_text(Path(path).read_text())


class AudioVisualCounter:
    """Density regressor with optional audio-driven feature modulation."""

    def __init__(self, cfg: ModelConfig, dtype=np.float32):
        cfg.validate()
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self._build()

    # -- construction -------------------------------------------------

    def _add_param(self, name: str, shape, fan_in: int, fill: float | None = None):
        if fill is None:
            bound = float(np.sqrt(1.0 / fan_in))
            data = rng.uniform(rng.derive_seed(self.cfg.seed, name), shape, -bound, bound,
                               dtype=self.dtype)
        else:
            data = np.full(shape, fill, dtype=self.dtype)
        t = Tensor(data, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def _add_conv(self, name: str, c_in: int, c_out: int, k: int, zero_bias: bool = False):
        fan_in = c_in * k * k
        self._add_param(f"{name}.weight", (c_out, c_in, k, k), fan_in)
        # the head bias starts at zero: it adds bias*H*W to the predicted
        # count, so a fan-in-scaled draw would start training thousands of
        # counts off target; other conv biases stay random so all-black
        # images still produce features (and therefore FiLM gradients)
        self._add_param(f"{name}.bias", (c_out,), fan_in, fill=0.0 if zero_bias else None)

    def _add_fc(self, name: str, d_in: int, d_out: int, zero_weight=False, bias_fill: float | None = None):
        if zero_weight:
            self._add_param(f"{name}.weight", (d_out, d_in), d_in, fill=0.0)
        else:
            self._add_param(f"{name}.weight", (d_out, d_in), d_in)
        if bias_fill is None:
            self._add_param(f"{name}.bias", (d_out,), d_in)
        else:
            self._add_param(f"{name}.bias", (d_out,), d_in, fill=bias_fill)

    def _film_key(self, block: int) -> str:
        if self.cfg.film_shared:
            return f"c{self.cfg.backend[block]}"
        return f"b{block}"

    def _build(self):
        cfg = self.cfg
        c_in = 3
        for i, v in enumerate(cfg.visual):
            if v == POOL:
                continue
            self._add_conv(f"visual.conv{i}", c_in, v, 3)
            c_in = v
        self.visual_out = c_in

        if cfg.audio_enabled:
            a_in = 1
            for i, v in enumerate(cfg.audio):
                if v == POOL:
                    continue
                self._add_conv(f"audio.conv{i}", a_in, v, 3)
                a_in = v
            built = set()
            for block in range(6):
                key = self._film_key(block)
                if key in built:
                    continue
                built.add(key)
                c_out = cfg.backend[block]
                if cfg.film_hidden > 0:
                    self._add_fc(f"film.gamma.{key}.hidden", self.visual_out, cfg.film_hidden)
                    self._add_fc(f"film.gamma.{key}.out", cfg.film_hidden, c_out,
                                 zero_weight=True, bias_fill=1.0)
                    self._add_fc(f"film.beta.{key}.hidden", self.visual_out, cfg.film_hidden)
                    self._add_fc(f"film.beta.{key}.out", cfg.film_hidden, c_out,
                                 zero_weight=True, bias_fill=0.0)
                else:
                    self._add_fc(f"film.gamma.{key}", self.visual_out, c_out,
                                 zero_weight=True, bias_fill=1.0)
                    self._add_fc(f"film.beta.{key}", self.visual_out, c_out,
                                 zero_weight=True, bias_fill=0.0)

        c_in = self.visual_out
        for block, c_out in enumerate(cfg.backend):
            self._add_conv(f"backend.conv{block}", c_in, c_out, 3)
            c_in = c_out
        self._add_conv("head.conv", c_in, 1, 1, zero_bias=True)

    # -- parameter access ---------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state_dict(self) -> OrderedDict[str, np.ndarray]:
        return OrderedDict((name, p.data.copy()) for name, p in self.params.items())

    def load_state_dict(self, state: dict[str, np.ndarray]):
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise FormatError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in self.params.items():
            arr = np.asarray(state[name], dtype=self.dtype)
            if arr.shape != p.data.shape:
                raise DimensionError(f"{name}: checkpoint shape {arr.shape} != {p.data.shape}")
            p.data = arr.copy()
            p.grad = None

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    # -- forward passes ------------------------------------------------

    def _frontend(self, x: Tensor, layers, prefix: str) -> Tensor:
        padding = 1
        for i, v in enumerate(layers):
            if v == POOL:
                x = ad.max_pool2(x)
            else:
                x = ad.conv2d(x, self.params[f"{prefix}.conv{i}.weight"],
                              self.params[f"{prefix}.conv{i}.bias"], padding=padding)
                x = ad.relu(x)
        return x

    def visual_forward(self, image: Tensor) -> Tensor:
        if image.data.ndim != 3 or image.data.shape[0] != 3:
            raise DimensionError(f"expected image tensor (3,H,W), got {image.data.shape}")
        _, h, w = image.data.shape
        if h % 8 or w % 8:
            raise DimensionError(f"image dims must be divisible by 8, got {h}x{w}")
        return self._frontend(image, self.cfg.visual, "visual")

    def audio_forward(self, patch: Tensor) -> Tensor:
        if not self.cfg.audio_enabled:
            raise ContractError("audio path is disabled in this configuration")
        if patch.data.shape != AUDIO_PATCH_SHAPE:
            raise DimensionError(f"expected audio patch {AUDIO_PATCH_SHAPE}, got {patch.data.shape}")
        return self._frontend(patch, self.cfg.audio, "audio")

    def _fc(self, prefix: str, x: Tensor) -> Tensor:
        return ad.fully_connected(x, self.params[f"{prefix}.weight"], self.params[f"{prefix}.bias"])

    def film_params(self, a_feat: Tensor, block: int) -> FilmParams:
        """Modulation vectors for one fusion block from audio features."""
        if not 0 <= block < 6:
            raise ContractError(f"block index {block} out of range")
        pooled = ad.global_avg_pool(a_feat)
        gamma, beta = self._film_from_pooled(pooled, block)
        return FilmParams(gamma=gamma, beta=beta, block=block)

    def _film_from_pooled(self, pooled: Tensor, block: int) -> tuple[Tensor, Tensor]:
        key = self._film_key(block)
        if self.cfg.film_hidden > 0:
            hg = ad.relu(self._fc(f"film.gamma.{key}.hidden", pooled))
            gamma = self._fc(f"film.gamma.{key}.out", hg)
            hb = ad.relu(self._fc(f"film.beta.{key}.hidden", pooled))
            beta = self._fc(f"film.beta.{key}.out", hb)
        else:
            gamma = self._fc(f"film.gamma.{key}", pooled)
            beta = self._fc(f"film.beta.{key}", pooled)
        return gamma, beta

    def fusion_block(self, v: Tensor, params: FilmParams, block: int) -> Tensor:
        """Dilated conv (k=3, d=2, same size), channel-wise affine, ReLU."""
        v = ad.conv2d(v, self.params[f"backend.conv{block}.weight"],
                      self.params[f"backend.conv{block}.bias"], dilation=2, padding=2)
        v = ad.elementwise_affine(v, params.gamma, params.beta)
        return ad.relu(v)

    def forward(self, image: Tensor, patch: Tensor | None = None) -> Tensor:
        """Full pass: image (3,H,W) [+ audio patch] -> density (1,H,W)."""
        if self.cfg.audio_enabled and patch is None:
            raise ContractError("audio is enabled but no audio patch was given")
        v = self.visual_forward(image)
        pooled = None
        if self.cfg.audio_enabled:
            pooled = ad.global_avg_pool(self.audio_forward(patch))
        for block in range(6):
            if pooled is not None:
                gamma, beta = self._film_from_pooled(pooled, block)
            else:
                width = self.cfg.backend[block]
                gamma = Tensor(np.ones(width, dtype=self.dtype))
                beta = Tensor(np.zeros(width, dtype=self.dtype))
            v = self.fusion_block(v, FilmParams(gamma=gamma, beta=beta, block=block), block)
        v = ad.conv2d(v, self.params["head.conv.weight"], self.params["head.conv.bias"])
        return ad.upsample_bilinear(v, 8)

    def predict_density(self, image: np.ndarray, patch: np.ndarray | None = None) -> np.ndarray:
        """Inference helper: numpy (3,H,W) image -> numpy (H,W) density."""
        with ad.no_grad():
            patch_t = None
            if patch is not None:
                patch_t = Tensor(np.asarray(patch, dtype=self.dtype))
            out = self.forward(Tensor(np.asarray(image, dtype=self.dtype)), patch_t)
        return out.data[0]


def vision_only(cfg: ModelConfig) -> ModelConfig:
    return replace(cfg, audio_enabled=False)
