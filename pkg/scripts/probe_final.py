"""Full dress rehearsal of the learnability criteria at the final config."""
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from avclab import audio as audio_mod
from avclab import synth, train as tr
from avclab.corruption import CorruptionSpec
from avclab.data import Sample
from avclab.density import density_from_heads
from avclab.model import AudioVisualCounter, ModelConfig, vision_only

BACKEND = (64, 64, 64, 32, 32, 32)
LR = 1e-3
EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 3
SEEDS = (1, 2, 3)


def build_samples(n, seed):
    spec = synth.SceneSpec(dims=(256, 144), count_min=1, count_max=40, seed=seed)
    out = []
    for i in range(n):
        image, ann, clip = synth.generate_scene(spec, i)
        patch = audio_mod.pipeline(clip).astype(np.float32)[None]
        dens = density_from_heads(ann).astype(np.float32)
        out.append(Sample(image=image.astype(np.float32), density=dens, patch=patch,
                          count=float(ann.count), ann=ann, index=i))
    return out


samples = build_samples(800, 20250809)
train_set, val_set, test_set = samples[:600], samples[600:700], samples[700:800]
counts = np.array([s.count for s in test_set])
const_mae = float(np.mean(np.abs(counts - np.median(counts))))

corr6 = CorruptionSpec(mode="darken_noise", R=0.2, B=50, seed=77, deterministic=True)
corr7 = CorruptionSpec(mode="darken_noise", R=0.0, B=0, seed=77, deterministic=True)


def run(corr, audio_on, seed):
    cfg = tr.TrainConfig(lr=LR, lr_decay=0.99, weight_decay=1e-4, batch_size=4,
                         epochs=EPOCHS, seed=seed, corruption=corr)
    mcfg = ModelConfig(base_width=0.5, backend_channels=BACKEND, seed=seed)
    if not audio_on:
        mcfg = vision_only(mcfg)
    model = AudioVisualCounter(mcfg)
    t0 = time.perf_counter()
    best, history = tr.train(model, train_set, val_set, cfg)
    model.load_state_dict(best)
    res = tr.evaluate(model, test_set, corr)
    vals = " ".join(f"{r.val_mae:.1f}" for r in history)
    print(f"  seed {seed} {'AV ' if audio_on else 'VIS'}: test {res.mae:.3f} "
          f"val[{vals}] ({time.perf_counter()-t0:.0f}s)", flush=True)
    return res.mae


print(f"epochs={EPOCHS} lr={LR} backend={BACKEND} const_mae={const_mae:.3f}", flush=True)
av6 = [run(corr6, True, s) for s in SEEDS]
vi6 = [run(corr6, False, s) for s in SEEDS]
ratio = np.mean(av6) / np.mean(vi6)
print(f"criterion 6: av {np.mean(av6):.3f} vs vis {np.mean(vi6):.3f} ratio {ratio:.3f} (<=0.9)", flush=True)
av7 = [run(corr7, True, s) for s in SEEDS]
print(f"criterion 7: blackout av {np.mean(av7):.3f} (needs <= {0.8*const_mae:.3f})", flush=True)
