import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avclab import density
from avclab.density import HeadAnnotations
from avclab.errors import AnnotationError


def ann(points, dims=(64, 64)):
    return HeadAnnotations(points=np.array(points, dtype=np.float64).reshape(-1, 2),
                           image_dims=dims)


class TestDensityFromHeads:
    def test_no_heads(self):
        out = density.density_from_heads(ann([]))
        assert out.shape == (64, 64)
        assert out.sum() == 0.0

    def test_single_center_head(self):
        out = density.density_from_heads(ann([(32.0, 32.0)]))
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.unravel_index(out.argmax(), out.shape) == (32, 32)

    def test_corner_head_border_renormalized(self):
        out = density.density_from_heads(ann([(0.0, 0.0)]))
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        # oracle: direct 15x15 Gaussian summation over the visible quadrant
        sigma = 2.0
        total = 0.0
        for dy in range(-7, 8):
            for dx in range(-7, 8):
                if 0 <= dy and 0 <= dx:
                    total += np.exp(-(dx * dx + dy * dy) / (2 * sigma * sigma))
        expect_corner = 1.0 / total  # kernel center exp(0)=1 over visible mass
        assert out[0, 0] == pytest.approx(expect_corner, rel=1e-12)

    def test_out_of_bounds_names_index(self):
        with pytest.raises(AnnotationError, match="head 1"):
            density.density_from_heads(ann([(5.0, 5.0), (64.0, 2.0)]))

    def test_rounding_to_nearest_pixel(self):
        out_a = density.density_from_heads(ann([(10.4, 20.4)]))
        out_b = density.density_from_heads(ann([(10.0, 20.0)]))
        np.testing.assert_array_equal(out_a, out_b)

    def test_nonnegative(self):
        out = density.density_from_heads(ann([(3.0, 60.0), (63.0, 63.0), (31.5, 2.2)]))
        assert np.all(out >= 0.0)


class TestCountFromDensity:
    def test_zero_map(self):
        assert density.count_from_density(np.zeros((8, 8))) == 0.0

    def test_seven_heads(self):
        pts = [(5, 5), (0, 0), (63, 63), (10, 50), (50, 10), (32, 32), (1, 62)]
        out = density.density_from_heads(ann(pts))
        assert density.count_from_density(out) == pytest.approx(7.0, abs=1e-6)

    def test_uniform_map(self):
        w, h = 24, 16
        assert density.count_from_density(np.full((h, w), 1.0 / (w * h))) == pytest.approx(1.0, abs=1e-12)


class TestInvariants:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=0, max_value=120))
    def test_mass_conservation(self, seed, n_heads):
        gen = np.random.Generator(np.random.PCG64(seed))
        w = int(gen.integers(16, 96))
        h = int(gen.integers(16, 96))
        xs = gen.uniform(0.0, np.nextafter(w, 0.0), n_heads)
        ys = gen.uniform(0.0, np.nextafter(h, 0.0), n_heads)
        # force some border heads in
        if n_heads >= 4:
            xs[0], ys[0] = 0.0, 0.0
            xs[1], ys[1] = w - 1, h - 1
            xs[2], ys[2] = 0.0, h - 1
        pts = np.stack([xs, ys], axis=1)
        out = density.density_from_heads(HeadAnnotations(pts, (w, h)))
        assert abs(out.sum() - n_heads) < 1e-6

    def test_translation_covariance_away_from_border(self):
        gen = np.random.Generator(np.random.PCG64(77))
        pts = np.stack([gen.uniform(12, 40, 10), gen.uniform(12, 40, 10)], axis=1)
        base = density.density_from_heads(HeadAnnotations(pts, (64, 64)))
        dx, dy = 3, 4
        shifted = density.density_from_heads(HeadAnnotations(pts + [dx, dy], (64, 64)))
        np.testing.assert_allclose(shifted[dy:, dx:], base[:-dy or None, :-dx or None], atol=1e-15)

    def test_adding_head_never_decreases(self):
        pts = [(20.0, 20.0), (40.0, 30.0)]
        base = density.density_from_heads(ann(pts))
        more = density.density_from_heads(ann(pts + [(21.0, 22.0)]))
        assert np.all(more >= base - 1e-15)


class TestAnnotationIo:
    def test_round_trip(self, tmp_path):
        pts = [(1.25, 2.5), (63.0, 0.0)]
        path = tmp_path / "heads.csv"
        density.write_annotations(path, ann(pts))
        back = density.read_annotations(path, (64, 64))
        np.testing.assert_allclose(back.points, pts, atol=1e-3)
        assert back.image_dims == (64, 64)

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(AnnotationError):
            density.read_annotations(path, (8, 8))

    def test_empty_file_gives_zero_heads(self, tmp_path):
        path = tmp_path / "none.csv"
        path.write_text("x,y\n")
        back = density.read_annotations(path, (8, 8))
        assert back.count == 0
