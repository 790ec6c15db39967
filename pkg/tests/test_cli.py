import filecmp

import numpy as np
import pytest

from avclab import cli, corruption as cr, serialize
from avclab.density import HeadAnnotations, write_annotations


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    code = cli.main(["synth", "--out", str(root), "--scenes", "10",
                     "--width", "32", "--height", "24",
                     "--count-min", "1", "--count-max", "4", "--seed", "5"])
    assert code == 0
    return root


class TestBasicCommands:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert cli.main(["synth", "--bogus", "1"]) == 1

    def test_unknown_command_is_usage_error(self):
        assert cli.main(["transmogrify"]) == 1

    def test_missing_file_is_runtime_error(self, tmp_path):
        code = cli.main(["spectrogram", "--in", str(tmp_path / "none.wav"),
                         "--out", str(tmp_path / "x.avct")])
        assert code == 2

    def test_spectrogram_writes_tensor(self, dataset_dir, tmp_path):
        out = tmp_path / "patch.avct"
        code = cli.main(["spectrogram", "--in", str(dataset_dir / "audio" / "0000.wav"),
                         "--out", str(out)])
        assert code == 0
        assert serialize.load_tensor(out).shape == (96, 64)

    def test_density_command(self, tmp_path):
        ann_path = tmp_path / "heads.csv"
        write_annotations(ann_path, HeadAnnotations(np.array([[4.0, 5.0], [10.0, 3.0]]), (16, 16)))
        out = tmp_path / "map.avct"
        code = cli.main(["density", "--ann", str(ann_path), "--width", "16",
                         "--height", "16", "--out", str(out)])
        assert code == 0
        dens = serialize.load_tensor(out)
        assert dens.shape == (16, 16)
        assert dens.sum() == pytest.approx(2.0, abs=1e-5)


class TestCorruptCommand:
    def test_occlude_deterministic_bytes(self, dataset_dir, tmp_path):
        src = dataset_dir / "images" / "0000.ppm"
        out_a, out_b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        base = ["corrupt", "--in", str(src), "--mode", "occlude",
                "--or", "0.25", "--seed", "7"]
        assert cli.main(base + ["--out", str(out_a)]) == 0
        assert cli.main(base + ["--out", str(out_b)]) == 0
        assert filecmp.cmp(out_a, out_b, shallow=False)

    def test_quality_report(self, tmp_path, capsys):
        gen = np.random.Generator(np.random.PCG64(4))
        src = tmp_path / "big.ppm"
        cr.write_ppm(src, gen.uniform(0, 1, (48, 48, 3)))
        out = tmp_path / "n.ppm"
        code = cli.main(["corrupt", "--in", str(src), "--mode", "fixed_noise",
                         "--sigma-fixed", "0.1", "--out", str(out), "--quality"])
        assert code == 0
        printed = capsys.readouterr().out
        assert "psnr=" in printed and "brisque_features=" in printed

    def test_requires_mode(self, dataset_dir, tmp_path):
        code = cli.main(["corrupt", "--in", str(dataset_dir / "images" / "0000.ppm"),
                         "--out", str(tmp_path / "o.ppm")])
        assert code == 1


class TestTrainEvalCommands:
    def test_train_then_eval(self, dataset_dir, tmp_path):
        out = tmp_path / "run"
        code = cli.main(["train", "--data", str(dataset_dir), "--train", "6", "--val", "2",
                         "--test", "2", "--epochs", "2", "--lr", "1e-4",
                         "--batch-size", "2", "--seed", "3", "--base-width", "0.25",
                         "--out", str(out)])
        assert code == 0
        assert (out / "best.avck").exists()
        history = (out / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,lr,train_loss,val_mae,val_mse"
        assert len(history) == 3
        assert (out / "test_eval.csv").exists()

        eval_out = tmp_path / "eval.csv"
        code = cli.main(["eval", "--data", str(dataset_dir), "--offset", "8", "--count", "2",
                         "--checkpoint", str(out / "best.avck"),
                         "--model-config", str(out / "model.cfg"),
                         "--out", str(eval_out)])
        assert code == 0
        lines = eval_out.read_text().splitlines()
        assert lines[0] == "index,count,predicted"
        assert lines[-1].startswith("summary,")

    def test_train_determinism(self, dataset_dir, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            code = cli.main(["train", "--data", str(dataset_dir), "--train", "4", "--val", "2",
                             "--epochs", "1", "--lr", "1e-4", "--batch-size", "2",
                             "--seed", "11", "--base-width", "0.25", "--out", str(out)])
            assert code == 0
            outs.append(out)
        assert filecmp.cmp(outs[0] / "best.avck", outs[1] / "best.avck", shallow=False)
        assert filecmp.cmp(outs[0] / "history.csv", outs[1] / "history.csv", shallow=False)


class TestSweepCommands:
    def test_sweep_r_produces_rows(self, dataset_dir, tmp_path):
        out = tmp_path / "sweep"
        code = cli.main(["sweep-r", "--data", str(dataset_dir), "--train", "4", "--val", "2",
                         "--test", "2", "--epochs", "1", "--lr", "1e-4", "--batch-size", "2",
                         "--seed", "2", "--base-width", "0.25",
                         "--R", "0.0,1.0", "--B", "25", "--deterministic",
                         "--out", str(out)])
        assert code == 0
        lines = (out / "sweep_r.csv").read_text().splitlines()
        assert lines[0] == "sweep_r,variant,mae,mse"
        assert len(lines) == 1 + 2 * 2  # two R values x two variants
        assert any(",audiovisual," in ln for ln in lines[1:])
        assert any(",vision," in ln for ln in lines[1:])

    def test_sweep_occlusion_produces_rows(self, dataset_dir, tmp_path):
        out = tmp_path / "sweepo"
        code = cli.main(["sweep-occlusion", "--data", str(dataset_dir), "--train", "4",
                         "--val", "2", "--test", "2", "--epochs", "1", "--lr", "1e-4",
                         "--batch-size", "2", "--seed", "2", "--base-width", "0.25",
                         "--or", "0.2", "--out", str(out)])
        assert code == 0
        lines = (out / "sweep_occlusion.csv").read_text().splitlines()
        assert len(lines) == 3


class TestGradcheckCommand:
    def test_passes_and_prints_layers(self, capsys):
        assert cli.main(["gradcheck", "--seed", "3"]) == 0
        printed = capsys.readouterr().out
        assert "op conv2d" in printed
        assert "layer visual.conv0.weight" in printed
        assert "gradcheck passed" in printed
