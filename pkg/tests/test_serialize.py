import numpy as np
import pytest

from avclab import serialize
from avclab.errors import FormatError


class TestTensorFormat:
    def test_round_trip(self, tmp_path):
        arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4) / 7.0
        path = tmp_path / "t.avct"
        serialize.save_tensor(path, arr)
        back = serialize.load_tensor(path)
        np.testing.assert_array_equal(back, arr)
        assert back.dtype == np.float32

    def test_scalar_round_trip(self, tmp_path):
        path = tmp_path / "s.avct"
        serialize.save_tensor(path, np.asarray(3.25, dtype=np.float32))
        assert serialize.load_tensor(path).reshape(()) == np.float32(3.25)

    def test_header_layout(self):
        blob = serialize.tensor_to_bytes(np.zeros((2, 5), dtype=np.float32))
        assert blob[:4] == b"AVCT"
        assert int.from_bytes(blob[4:8], "little") == 1
        assert int.from_bytes(blob[8:12], "little") == 2
        assert int.from_bytes(blob[12:20], "little") == 2
        assert int.from_bytes(blob[20:28], "little") == 5
        assert len(blob) == 28 + 4 * 10

    def test_float64_written_as_float32(self, tmp_path):
        arr = np.array([1.0, 2.0], dtype=np.float64)
        path = tmp_path / "d.avct"
        serialize.save_tensor(path, arr)
        assert serialize.load_tensor(path).dtype == np.float32

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            serialize.tensor_from_bytes(b"NOPE" + b"\x00" * 16)


class TestCheckpointFormat:
    def test_round_trip(self, tmp_path):
        state = {
            "visual.conv0.weight": np.random.rand(4, 3, 3, 3).astype(np.float32),
            "head.conv.bias": np.random.rand(1).astype(np.float32),
        }
        path = tmp_path / "c.avck"
        serialize.save_checkpoint(path, state)
        back = serialize.load_checkpoint(path)
        assert list(back) == list(state)
        for name in state:
            np.testing.assert_array_equal(back[name], state[name])

    def test_magic(self):
        blob = serialize.checkpoint_to_bytes({"a": np.zeros(1, dtype=np.float32)})
        assert blob[:4] == b"AVCK"
        with pytest.raises(FormatError):
            serialize.checkpoint_from_bytes(b"AVCT" + blob[4:])

    def test_deterministic_bytes(self):
        state = {"p": np.arange(6, dtype=np.float32).reshape(2, 3)}
        assert serialize.checkpoint_to_bytes(state) == serialize.checkpoint_to_bytes(state)
