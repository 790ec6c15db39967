"""Command-line laboratory: data generation, corruption, training, sweeps.

Exit codes: 0 success, 1 usage error, 2 runtime error. Every run prints its
resolved configuration and seed, and repeated invocations with the same
flags reproduce outputs byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from . import corruption as cr
from . import density as density_mod
from . import gradcheck
from . import model as model_mod
from . import serialize
from . import synth as synth_mod
from . import train as train_mod
from .data import load_dataset, split_dataset
from .errors import AvcError
from .model import AudioVisualCounter, ModelConfig
from .synth import SceneSpec
from .train import TrainConfig


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _log_config(name: str, pairs: dict):
    print(f"[{name}] " + " ".join(f"{k}={v}" for k, v in pairs.items()))


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--model-config", type=Path, default=None,
                   help="key=value model config file (overrides width flags)")
    p.add_argument("--base-width", type=float, default=1.0)
    p.add_argument("--film-shared", action="store_true")
    p.add_argument("--film-hidden", type=int, default=0)
    p.add_argument("--no-audio", action="store_true", help="vision-only variant")


def _model_config(args, seed: int) -> ModelConfig:
    if args.model_config is not None:
        cfg = model_mod.load_config(args.model_config)
    else:
        cfg = ModelConfig(base_width=args.base_width, film_shared=args.film_shared,
                          film_hidden=args.film_hidden, seed=seed,
                          audio_enabled=not args.no_audio)
    return cfg.validate()


def _add_corruption_flags(p: argparse.ArgumentParser, prefixed: bool = True):
    # standalone `corrupt` takes --mode/--seed; commands that also train use
    # --corrupt-mode/--corrupt-seed so the training seed keeps --seed
    mode_flag = "--corrupt-mode" if prefixed else "--mode"
    seed_flag = "--corrupt-seed" if prefixed else "--seed"
    p.add_argument(mode_flag, dest="corrupt_mode", choices=cr.MODES, default=None)
    p.add_argument("--R", type=float, default=None, help="brightness decay hyperparameter")
    p.add_argument("--B", type=float, default=None, help="noise hyperparameter (8-bit scale)")
    p.add_argument("--sigma-fixed", type=float, default=None)
    p.add_argument("--or", dest="occlusion_rate", type=float, default=None,
                   help="occlusion rate in [0,1]")
    p.add_argument("--target-width", type=int, default=None)
    p.add_argument("--target-height", type=int, default=None)
    p.add_argument(seed_flag, dest="corrupt_seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true",
                   help="darken by exactly R instead of R*U(0,1)")


def _corruption_spec(args) -> cr.CorruptionSpec | None:
    if args.corrupt_mode is None:
        return None
    target = None
    if args.target_width is not None and args.target_height is not None:
        target = (args.target_width, args.target_height)
    spec = cr.CorruptionSpec(mode=args.corrupt_mode, R=args.R, B=args.B,
                             sigma_fixed=args.sigma_fixed,
                             occlusion_rate=args.occlusion_rate,
                             target_dims=target, seed=args.corrupt_seed,
                             deterministic=args.deterministic)
    return spec.validate()


# --------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    spec = SceneSpec(dims=(args.width, args.height), count_min=args.count_min,
                     count_max=args.count_max, per_person_rms=args.per_person_rms,
                     seed=args.seed).validate()
    _log_config("synth", {"out": args.out, "scenes": args.scenes, "dims": spec.dims,
                          "counts": (spec.count_min, spec.count_max), "seed": spec.seed})
    manifest = synth_mod.generate_dataset(spec, args.scenes, args.out)
    print(f"wrote {manifest}")
    return 0


def cmd_spectrogram(args) -> int:
    clip = audio_mod.read_wav(args.infile)
    patch = audio_mod.pipeline(clip)
    serialize.save_tensor(args.out, patch.astype(np.float32))
    _log_config("spectrogram", {"in": args.infile, "out": args.out, "shape": patch.shape})
    return 0


def cmd_density(args) -> int:
    ann = density_mod.read_annotations(args.ann, (args.width, args.height))
    dens = density_mod.density_from_heads(ann, sigma=args.sigma)
    serialize.save_tensor(args.out, dens.astype(np.float32))
    _log_config("density", {"ann": args.ann, "heads": ann.count,
                            "mass": f"{dens.sum():.6f}", "out": args.out})
    return 0


def cmd_corrupt(args) -> int:
    img = cr.read_ppm(args.infile)
    spec = _corruption_spec(args)
    if spec is None:
        raise _UsageError("corrupt requires --mode")
    _log_config("corrupt", {"in": args.infile, "mode": spec.mode, "seed": spec.seed,
                            "deterministic": spec.deterministic})
    out = cr.apply_corruption(img, spec, index=args.index)
    cr.write_ppm(args.out, out)
    if args.quality:
        rep = cr.quality_report(img, out, args.brisque_model)
        print(f"psnr={rep.psnr:.4f}")
        print("brisque_features=" + ",".join(f"{v:.5f}" for v in rep.brisque_features))
        if rep.brisque_score is not None:
            print(f"brisque_score={rep.brisque_score:.4f}")
    print(f"wrote {args.out}")
    return 0


def _load_splits(args):
    samples = load_dataset(args.data)
    n_test = args.test if args.test is not None else 0
    return split_dataset(samples, args.train, args.val, n_test)


def cmd_train(args) -> int:
    cfg = TrainConfig(lr=args.lr, lr_decay=args.lr_decay, weight_decay=args.weight_decay,
                      batch_size=args.batch_size, epochs=args.epochs, seed=args.seed,
                      corruption=_corruption_spec(args)).validate()
    mcfg = _model_config(args, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _log_config("train", {"data": args.data, "split": (args.train, args.val, args.test),
                          "lr": cfg.lr, "lr_decay": cfg.lr_decay, "wd": cfg.weight_decay,
                          "batch": cfg.batch_size, "epochs": cfg.epochs, "seed": cfg.seed,
                          "audio": mcfg.audio_enabled, "base_width": mcfg.base_width,
                          "corruption": cfg.corruption.mode if cfg.corruption else None})
    train_set, val_set, test_set = _load_splits(args)
    model = AudioVisualCounter(mcfg)
    best, history = train_mod.train(model, train_set, val_set, cfg)
    serialize.save_checkpoint(out_dir / "best.avck", best)
    train_mod.write_history_csv(out_dir / "history.csv", history)
    model_mod.save_config(out_dir / "model.cfg", mcfg)
    print(f"best val MAE {min(r.val_mae for r in history):.4f} after {len(history)} epochs")
    if test_set:
        model.load_state_dict(best)
        result = train_mod.evaluate(model, test_set, cfg.corruption)
        train_mod.write_eval_csv(out_dir / "test_eval.csv", result)
        print(f"test MAE {result.mae:.4f} MSE {result.mse:.4f}")
    return 0


def cmd_eval(args) -> int:
    samples = load_dataset(args.data)
    if args.offset or args.count is not None:
        end = None if args.count is None else args.offset + args.count
        samples = samples[args.offset: end]
    mcfg = _model_config(args, args.seed)
    model = AudioVisualCounter(mcfg)
    model.load_state_dict(serialize.load_checkpoint(args.checkpoint))
    spec = _corruption_spec(args)
    _log_config("eval", {"data": args.data, "n": len(samples), "checkpoint": args.checkpoint,
                         "corruption": spec.mode if spec else None, "seed": args.seed})
    result = train_mod.evaluate(model, samples, spec)
    train_mod.write_eval_csv(args.out, result)
    print(f"MAE {result.mae:.4f} MSE {result.mse:.4f} over {len(samples)} samples")
    return 0


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise _UsageError(f"bad numeric list {text!r}") from exc


def _sweep(args, settings, spec_for, label):
    """Train audiovisual + vision-only models per setting; CSV rows per pair."""
    train_set, val_set, test_set = _load_splits(args)
    if not test_set:
        raise _UsageError(f"{label} requires --test > 0")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in settings:
        spec = spec_for(value)
        cfg = TrainConfig(lr=args.lr, lr_decay=args.lr_decay,
                          weight_decay=args.weight_decay, batch_size=args.batch_size,
                          epochs=args.epochs, seed=args.seed, corruption=spec).validate()
        for audio_enabled in (True, False):
            mcfg = replace(_model_config(args, args.seed), audio_enabled=audio_enabled)
            model = AudioVisualCounter(mcfg)
            best, _ = train_mod.train(model, train_set, val_set, cfg)
            model.load_state_dict(best)
            result = train_mod.evaluate(model, test_set, spec)
            variant = "audiovisual" if audio_enabled else "vision"
            rows.append((value, variant, result.mae, result.mse))
            print(f"{label} {value}: {variant} MAE {result.mae:.4f} MSE {result.mse:.4f}")
    path = out_dir / f"{label}.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"{label},variant,mae,mse\n")
        for value, variant, mae, mse in rows:
            fh.write(f"{value},{variant},{mae:.6f},{mse:.6f}\n")
    print(f"wrote {path}")
    return 0


def cmd_sweep_r(args) -> int:
    values = _parse_float_list(args.R_values)
    if args.B is None:
        raise _UsageError("sweep-r requires --B")
    _log_config("sweep-r", {"R": values, "B": args.B, "epochs": args.epochs,
                            "seed": args.seed, "deterministic": args.deterministic})

    def spec_for(r):
        return cr.CorruptionSpec(mode="darken_noise", R=r, B=args.B,
                                 seed=args.corrupt_seed,
                                 deterministic=args.deterministic).validate()

    return _sweep(args, values, spec_for, "sweep_r")


def cmd_sweep_occlusion(args) -> int:
    values = _parse_float_list(args.or_values)
    _log_config("sweep-occlusion", {"or": values, "epochs": args.epochs, "seed": args.seed})

    def spec_for(rate):
        return cr.CorruptionSpec(mode="occlude", occlusion_rate=rate,
                                 seed=args.corrupt_seed).validate()

    return _sweep(args, values, spec_for, "sweep_occlusion")


def cmd_gradcheck(args) -> int:
    _log_config("gradcheck", {"seed": args.seed})
    op_errors = gradcheck.op_gradient_errors(seed=args.seed)
    ok = True
    for name, err in op_errors.items():
        status = "ok" if err < 1e-5 else "FAIL"
        ok &= err < 1e-5
        print(f"op {name}: max rel err {err:.3e} [{status}]")
    layer_errors = gradcheck.model_gradient_errors(seed=args.seed)
    for name, err in layer_errors.items():
        status = "ok" if err < 1e-3 else "FAIL"
        ok &= err < 1e-3
        print(f"layer {name}: max rel err {err:.3e} [{status}]")
    print(f"gradcheck {'passed' if ok else 'failed'}")
    return 0 if ok else 2


# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="avc-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic audiovisual dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--scenes", required=True, type=int)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=144)
    p.add_argument("--count-min", type=int, default=1)
    p.add_argument("--count-max", type=int, default=40)
    p.add_argument("--per-person-rms", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrogram", help="WAV clip to a 96x64 log-mel tensor")
    p.add_argument("--in", dest="infile", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("density", help="head annotations to a density-map tensor")
    p.add_argument("--ann", required=True, type=Path)
    p.add_argument("--width", required=True, type=int)
    p.add_argument("--height", required=True, type=int)
    p.add_argument("--sigma", type=float, default=density_mod.KERNEL_SIGMA)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("corrupt", help="apply a degradation to a PPM image")
    p.add_argument("--in", dest="infile", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--index", type=int, default=0, help="per-sample seed salt")
    p.add_argument("--quality", action="store_true", help="report PSNR and naturalness features")
    p.add_argument("--brisque-model", type=Path, default=None)
    _add_corruption_flags(p, prefixed=False)
    p.set_defaults(func=cmd_corrupt)

    def add_train_flags(q, with_split=True):
        q.add_argument("--data", required=True, type=Path)
        if with_split:
            q.add_argument("--train", required=True, type=int)
            q.add_argument("--val", required=True, type=int)
            q.add_argument("--test", type=int, default=None)
        q.add_argument("--lr", type=float, default=1e-5)
        q.add_argument("--lr-decay", type=float, default=0.99)
        q.add_argument("--weight-decay", type=float, default=1e-4)
        q.add_argument("--batch-size", type=int, default=4)
        q.add_argument("--epochs", type=int, default=500)
        q.add_argument("--seed", type=int, default=0)
        _add_model_flags(q)

    p = sub.add_parser("train", help="train a counting model")
    add_train_flags(p)
    _add_corruption_flags(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    _add_model_flags(p)
    _add_corruption_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-r", help="brightness sweep: audiovisual vs vision per R")
    add_train_flags(p)
    p.add_argument("--R", dest="R_values", required=True,
                   help="comma-separated brightness hyperparameters")
    p.add_argument("--B", type=float, default=None, required=True)
    p.add_argument("--corrupt-seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_sweep_r)

    p = sub.add_parser("sweep-occlusion", help="occlusion sweep: audiovisual vs vision per rate")
    add_train_flags(p)
    p.add_argument("--or", dest="or_values", required=True,
                   help="comma-separated occlusion rates")
    p.add_argument("--corrupt-seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_sweep_occlusion)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and layer")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except AvcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
