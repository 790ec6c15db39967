"""Stability probe across seeds/learning rates for the benchmark recipe."""
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
corr = CorruptionSpec(mode="darken_noise", R=0.2, B=50, seed=77, deterministic=True)

cases = []
for lr in (float(a) for a in sys.argv[1].split(",")):
    for seed in (int(s) for s in sys.argv[2].split(",")):
        for audio_on in (True, False) if len(sys.argv) < 4 else (sys.argv[3] == "av",):
            cases.append((lr, seed, audio_on))

epochs = int(sys.argv[4]) if len(sys.argv) > 4 else 5
batch = int(sys.argv[5]) if len(sys.argv) > 5 else 4
for lr, seed, audio_on in cases:
    cfg = tr.TrainConfig(lr=lr, lr_decay=0.99, weight_decay=1e-4, batch_size=batch,
                         epochs=epochs, seed=seed, corruption=corr)
    mcfg = ModelConfig(base_width=0.5, seed=seed)
    if not audio_on:
        mcfg = vision_only(mcfg)
    model = AudioVisualCounter(mcfg)
    t0 = time.perf_counter()
    best, history = tr.train(model, train_set, val_set, cfg)
    model.load_state_dict(best)
    res = tr.evaluate(model, test_set, corr)
    label = "AV " if audio_on else "VIS"
    vals = " ".join(f"{r.val_mae:.1f}" for r in history)
    print(f"lr={lr:g} seed={seed} {label}: test MAE {res.mae:.3f} "
          f"val[{vals}] ({time.perf_counter()-t0:.0f}s)", flush=True)
