"""Training loop, model selection, and counting metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import rng
from .autodiff import Tensor
from .corruption import CorruptionSpec
from .data import Sample, corrupt_dataset
from .errors import ContractError, TrainingDiverged
from .model import AudioVisualCounter
from .optim import Adam


@dataclass
class TrainConfig:
    lr: float = 1e-5
    lr_decay: float = 0.99
    weight_decay: float = 1e-4
    batch_size: int = 4
    epochs: int = 500
    seed: int = 0
    corruption: CorruptionSpec | None = None

    def validate(self) -> "TrainConfig":
        if self.lr <= 0 or self.weight_decay < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ContractError("lr > 0, weight_decay >= 0, batch_size >= 1, epochs >= 1 required")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ContractError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        return self


@dataclass
class EvalResult:
    mae: float
    mse: float  # root form: sqrt(mean squared count error)
    per_sample: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_mae: float
    val_mse: float


def counting_metrics(pairs: list[tuple[float, float]]) -> tuple[float, float]:
    errors = np.array([c - c_hat for c, c_hat in pairs], dtype=np.float64)
    mae = float(np.mean(np.abs(errors)))
    mse = float(np.sqrt(np.mean(errors * errors)))
    return mae, mse


def evaluate(model: AudioVisualCounter, samples: list[Sample],
             corruption: CorruptionSpec | None = None) -> EvalResult:
    """Predicted count is the sum of the predicted density map."""
    if not samples:
        raise ContractError("evaluate requires a nonempty dataset")
    if corruption is not None:
        samples = corrupt_dataset(samples, corruption)
    pairs = []
    for s in samples:
        image = np.ascontiguousarray(s.image.transpose(2, 0, 1))
        patch = s.patch if model.cfg.audio_enabled else None
        dens = model.predict_density(image, patch)
        pairs.append((float(s.count), float(dens.sum())))
    mae, mse = counting_metrics(pairs)
    return EvalResult(mae=mae, mse=mse, per_sample=pairs)


def _grad_norms(model: AudioVisualCounter) -> dict[str, float]:
    return {name: float(np.linalg.norm(p.grad)) if p.grad is not None else 0.0
            for name, p in model.params.items()}


def train(model: AudioVisualCounter, train_set: list[Sample], val_set: list[Sample],
          cfg: TrainConfig) -> tuple[dict[str, np.ndarray], list[EpochRecord]]:
    """Adam with per-epoch lr decay; keeps the checkpoint with lowest val MAE."""
    cfg.validate()
    if not train_set or not val_set:
        raise ContractError("train requires nonempty train and validation sets")

    train_cs = corrupt_dataset(train_set, cfg.corruption)
    val_cs = corrupt_dataset(val_set, cfg.corruption)
    images = [np.ascontiguousarray(s.image.transpose(2, 0, 1), dtype=model.dtype) for s in train_cs]
    targets = [np.asarray(s.density[None, :, :], dtype=model.dtype) for s in train_cs]
    patches = ([np.asarray(s.patch, dtype=model.dtype) for s in train_cs]
               if model.cfg.audio_enabled else None)

    opt = Adam(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    history: list[EpochRecord] = []
    best_state: dict[str, np.ndarray] | None = None
    best_mae = float("inf")
    n = len(train_cs)

    for epoch in range(1, cfg.epochs + 1):
        opt.lr = cfg.lr * cfg.lr_decay ** (epoch - 1)
        order = rng.generator(cfg.seed, "shuffle", epoch).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start: start + cfg.batch_size]
            for idx in batch:
                patch = Tensor(patches[idx]) if patches is not None else None
                out = model.forward(Tensor(images[idx]), patch)
                loss = ad.sse_loss(out, Tensor(targets[idx]))
                loss_value = loss.item()
                if not np.isfinite(loss_value):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}",
                        epoch=epoch, batch=start // cfg.batch_size,
                        grad_norms=_grad_norms(model))
                epoch_loss += loss_value
                ad.backward(ad.scale(loss, 1.0 / len(batch)))
            opt.step()
        val = evaluate(model, val_cs)
        history.append(EpochRecord(epoch=epoch, lr=opt.lr,
                                   train_loss=epoch_loss / n,
                                   val_mae=val.mae, val_mse=val.mse))
        if val.mae < best_mae:
            best_mae = val.mae
            best_state = model.state_dict()

    assert best_state is not None
    return best_state, history


def write_history_csv(path, history: list[EpochRecord]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "lr", "train_loss", "val_mae", "val_mse"])
        for rec in history:
            writer.writerow([rec.epoch, f"{rec.lr:.10g}", f"{rec.train_loss:.8f}",
                             f"{rec.val_mae:.6f}", f"{rec.val_mse:.6f}"])


def write_eval_csv(path, result: EvalResult):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "count", "predicted"])
        for i, (c, c_hat) in enumerate(result.per_sample):
            writer.writerow([i, f"{c:.6f}", f"{c_hat:.6f}"])
        writer.writerow(["summary", f"mae={result.mae:.6f}", f"mse={result.mse:.6f}"])
