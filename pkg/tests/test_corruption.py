import numpy as np
import pytest

from avclab import corruption as cr
from avclab import rng
from avclab.corruption import CorruptionSpec
from avclab.errors import DimensionError, FormatError, SpecError


def make_image(seed=0, h=48, w=64):
    gen = np.random.Generator(np.random.PCG64(seed))
    return gen.uniform(0.0, 1.0, (h, w, 3))


class TestDarken:
    def test_r_zero_blacks_out(self):
        out, r = cr.darken(make_image(), 0.0, deterministic=True)
        assert r == 0.0
        assert np.all(out == 0.0)

    def test_r_one_deterministic_unchanged(self):
        img = make_image(1)
        out, r = cr.darken(img, 1.0, deterministic=True)
        assert r == 1.0
        np.testing.assert_array_equal(out, img)

    def test_constant_half(self):
        img = np.full((8, 8, 3), 0.8)
        out, _ = cr.darken(img, 0.5, deterministic=True)
        np.testing.assert_allclose(out, 0.4)

    def test_random_rate_in_range(self):
        img = make_image(2)
        out, r = cr.darken(img, 0.6, seed=5)
        assert 0.0 <= r <= 0.6
        np.testing.assert_allclose(out, img * r)

    def test_multiplicative_composition(self):
        img = make_image(3)
        once, _ = cr.darken(img, 0.6 * 0.5, deterministic=True)
        twice, _ = cr.darken(cr.darken(img, 0.6, deterministic=True)[0], 0.5, deterministic=True)
        np.testing.assert_allclose(twice, once, atol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(SpecError):
            cr.darken(make_image(), 1.5)


class TestAddNoise:
    def test_zero_sigma_unchanged(self):
        img = make_image(4)
        np.testing.assert_array_equal(cr.add_noise(img, sigma_fixed=0.0), img)

    def test_fixed_sigma_std(self):
        img = np.full((256, 256, 3), 0.5)
        out = cr.add_noise(img, sigma_fixed=25.0 / 255.0, seed=9)
        measured = float(np.std(out - img))
        assert abs(measured - 25.0 / 255.0) / (25.0 / 255.0) < 0.05

    def test_sigma_distribution_kolmogorov_smirnov(self):
        # sigma^2 must be uniform on (0, (B/255)^2); KS test at alpha=0.01
        n, b = 10000, 50.0
        sigmas = np.array([cr.draw_sigma(b, rng.generator(i)) for i in range(n)])
        u = np.sort((sigmas * 255.0 / b) ** 2)
        ecdf_hi = np.arange(1, n + 1) / n
        ecdf_lo = np.arange(0, n) / n
        d_stat = max(np.max(np.abs(ecdf_hi - u)), np.max(np.abs(u - ecdf_lo)))
        assert d_stat < 1.628 / np.sqrt(n)

    def test_clamped_to_unit_range(self):
        out = cr.add_noise(make_image(5), sigma_fixed=0.8, seed=3)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_requires_parameter(self):
        with pytest.raises(SpecError):
            cr.add_noise(make_image())


class TestOcclude:
    def test_zero_rate(self):
        img = make_image(6)
        out, rect = cr.occlude(img, 0.0, seed=1)
        assert rect == (0, 0, 0, 0)
        np.testing.assert_array_equal(out, img)

    def test_quarter_rate_rectangle_dims(self):
        img = np.full((576, 1024, 3), 0.5)
        out, (x, y, w, h) = cr.occlude(img, 0.25, seed=7)
        assert (w, h) == (512, 288)
        assert np.count_nonzero(np.all(out == 0.0, axis=2)) == 147456

    def test_full_rate_blacks_image(self):
        out, rect = cr.occlude(make_image(7), 1.0, seed=2)
        assert np.all(out == 0.0)
        assert rect[2:] == (64, 48)

    def test_touches_exactly_rectangle(self):
        img = make_image(8)
        out, (x, y, w, h) = cr.occlude(img, 0.3, seed=11)
        changed = np.any(out != img, axis=2)
        assert changed.sum() == w * h
        assert np.all(changed[y: y + h, x: x + w])
        # everything else is bit-identical
        mask = np.ones(img.shape[:2], dtype=bool)
        mask[y: y + h, x: x + w] = False
        np.testing.assert_array_equal(out[mask], img[mask])


class TestLowRes:
    def test_identity_target(self):
        img = make_image(9)
        np.testing.assert_array_equal(cr.low_res(img, (64, 48)), img)

    def test_2x2_block_mean(self):
        img = np.zeros((2, 2, 3))
        img[1, :, :] = 1.0
        out = cr.low_res(img, (1, 1))
        np.testing.assert_allclose(out, 0.5)

    def test_paper_dims(self):
        img = np.zeros((576, 1024, 3))
        assert cr.low_res(img, (128, 72)).shape == (72, 128, 3)

    def test_mean_preserved(self):
        img = make_image(10, h=90, w=120)
        for target in ((60, 45), (40, 30), (37, 21)):
            out = cr.low_res(img, target)
            assert abs(out.mean() - img.mean()) < 1e-6

    def test_upscale_rejected(self):
        with pytest.raises(SpecError):
            cr.low_res(make_image(), (128, 96))


class TestEnhance:
    def test_blur_keeps_constant(self):
        img = np.full((32, 32, 3), 0.37)
        np.testing.assert_allclose(cr.gaussian_blur(img), 0.37, atol=1e-12)

    def test_equalize_constant_is_constant(self):
        img = np.full((16, 16, 3), 0.3)
        out = cr.equalize_luma(img)
        assert np.allclose(out, out[0, 0])

    def test_two_level_cdf_mapping(self):
        img = np.zeros((4, 8, 3))
        img[:, :4] = 0.2
        img[:, 4:] = 0.8
        out = cr.equalize_luma(img)
        np.testing.assert_allclose(out[:, :4], 0.5, atol=1e-3)
        np.testing.assert_allclose(out[:, 4:], 1.0, atol=1e-3)

    def test_impulse_blur_matches_kernel_oracle(self):
        img = np.zeros((33, 33, 3))
        img[16, 16, :] = 1.0
        out = cr.gaussian_blur(img)
        # direct 2-D kernel summation oracle
        sigma = 2.0
        offs = np.arange(-5, 6)
        k2 = np.exp(-(offs[:, None] ** 2 + offs[None, :] ** 2) / (2 * sigma * sigma))
        k2 /= k2.sum()
        np.testing.assert_allclose(out[11:22, 11:22, 0], k2, atol=1e-12)
        assert cr.ENHANCE_SIGMA == pytest.approx(2.0)

    def test_enhance_full_pipeline_in_range(self):
        out = cr.enhance(make_image(11))
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestPsnr:
    def test_identical_is_infinite(self):
        img = make_image(12)
        assert cr.psnr(img, img.copy()) == float("inf")

    def test_uniform_offset_20db(self):
        img = np.full((16, 16, 3), 0.4)
        assert cr.psnr(img, img + 0.1) == pytest.approx(20.0, abs=1e-9)

    def test_uniform_offset_26db(self):
        img = np.full((16, 16, 3), 0.4)
        assert cr.psnr(img, img + 0.05) == pytest.approx(10.0 * np.log10(1.0 / 0.0025), abs=1e-9)

    def test_symmetry(self):
        a, b = make_image(13), make_image(14)
        assert cr.psnr(a, b) == pytest.approx(cr.psnr(b, a), rel=1e-12)

    def test_decreases_with_noise_level(self):
        img = make_image(15, h=64, w=64)
        lo = np.mean([cr.psnr(img, cr.add_noise(img, sigma_fixed=10 / 255, seed=s)) for s in range(20)])
        hi = np.mean([cr.psnr(img, cr.add_noise(img, sigma_fixed=40 / 255, seed=s)) for s in range(20)])
        assert hi < lo

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            cr.psnr(make_image(16), make_image(16, h=32))


class TestApplySpec:
    def test_darken_noise_order_and_determinism(self):
        img = make_image(17)
        spec = CorruptionSpec(mode="darken_noise", R=0.2, B=50, seed=99, deterministic=True)
        a = cr.apply_corruption(img, spec, index=4)
        b = cr.apply_corruption(img, spec, index=4)
        np.testing.assert_array_equal(a, b)
        c = cr.apply_corruption(img, spec, index=5)
        assert not np.array_equal(a, c)

    def test_fixed_noise_mode(self):
        img = make_image(18)
        spec = CorruptionSpec(mode="fixed_noise", sigma_fixed=25 / 255, seed=1)
        out = cr.apply_corruption(img, spec)
        assert out.shape == img.shape
        assert not np.array_equal(out, img)

    def test_mode_validation(self):
        with pytest.raises(SpecError):
            CorruptionSpec(mode="sepia").validate()
        with pytest.raises(SpecError):
            CorruptionSpec(mode="darken_noise", R=2.0, B=50).validate()
        with pytest.raises(SpecError):
            CorruptionSpec(mode="occlude").validate()


class TestPpm:
    def test_round_trip(self, tmp_path):
        img = np.round(make_image(19) * 255) / 255.0
        path = tmp_path / "img.ppm"
        cr.write_ppm(path, img)
        back = cr.read_ppm(path)
        np.testing.assert_allclose(back, img, atol=1e-12)

    def test_comment_handling(self, tmp_path):
        path = tmp_path / "c.ppm"
        pixels = bytes(range(12))
        path.write_bytes(b"P6\n# a comment\n2 2\n255\n" + pixels)
        img = cr.read_ppm(path)
        assert img.shape == (2, 2, 3)
        assert img[0, 0, 1] == pytest.approx(1 / 255)

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
        with pytest.raises(FormatError):
            cr.read_ppm(path)
