"""Offline probe for the synthetic benchmark: timing and MAE ratios."""
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from avclab import audio as audio_mod
from avclab import model as M
from avclab import synth, train as tr
from avclab.corruption import CorruptionSpec
from avclab.data import Sample, corrupt_dataset
from avclab.density import density_from_heads
from avclab.model import AudioVisualCounter, ModelConfig, vision_only


def build_samples(n, seed):
    spec = synth.SceneSpec(dims=(256, 144), count_min=1, count_max=40, seed=seed)
    out = []
    t0 = time.perf_counter()
    for i in range(n):
        image, ann, clip = synth.generate_scene(spec, i)
        patch = audio_mod.pipeline(clip).astype(np.float32)[None]
        dens = density_from_heads(ann).astype(np.float32)
        out.append(Sample(image=image.astype(np.float32), density=dens, patch=patch,
                          count=float(ann.count), ann=ann, index=i))
    print(f"built {n} samples in {time.perf_counter()-t0:.1f}s", flush=True)
    return out


def run(label, samples, corr, audio_enabled, seed, epochs, lr, base_width):
    train_set = samples[:600]
    val_set = samples[600:700]
    test_set = samples[700:800]
    cfg = tr.TrainConfig(lr=lr, lr_decay=0.99, weight_decay=1e-4, batch_size=4,
                         epochs=epochs, seed=seed, corruption=corr)
    mcfg = ModelConfig(base_width=base_width, seed=seed)
    if not audio_enabled:
        mcfg = vision_only(mcfg)
    model = AudioVisualCounter(mcfg)
    t0 = time.perf_counter()
    best, history = tr.train(model, train_set, val_set, cfg)
    t1 = time.perf_counter()
    model.load_state_dict(best)
    result = tr.evaluate(model, test_set, corr)
    t2 = time.perf_counter()
    print(f"{label}: test MAE {result.mae:.3f} MSE {result.mse:.3f} "
          f"(train {t1-t0:.0f}s eval {t2-t1:.0f}s)", flush=True)
    for rec in history:
        print(f"   epoch {rec.epoch}: loss {rec.train_loss:.4f} val_mae {rec.val_mae:.3f}", flush=True)
    return result


def main():
    seed_data = 20250809
    samples = build_samples(800, seed_data)
    counts = np.array([s.count for s in samples[700:800]])
    const = np.median(counts)
    const_mae = np.mean(np.abs(counts - const))
    print(f"test counts: mean {counts.mean():.1f}; best-constant MAE {const_mae:.3f}", flush=True)

    lr, epochs, bw = 1e-3, 5, 0.5
    corr6 = CorruptionSpec(mode="darken_noise", R=0.2, B=50, seed=77, deterministic=True)
    av = run("crit6 AV   ", samples, corr6, True, 1, epochs, lr, bw)
    vi = run("crit6 VISION", samples, corr6, False, 1, epochs, lr, bw)
    print(f"crit6 ratio: {av.mae / vi.mae:.3f} (needs <= 0.9)", flush=True)

    corr7 = CorruptionSpec(mode="darken_noise", R=0.0, B=0, seed=77, deterministic=True)
    av0 = run("crit7 AV R=0", samples, corr7, True, 1, epochs, lr, bw)
    print(f"crit7: AV {av0.mae:.3f} vs const {const_mae:.3f} "
          f"(needs <= {0.8 * const_mae:.3f})", flush=True)


if __name__ == "__main__":
    main()
