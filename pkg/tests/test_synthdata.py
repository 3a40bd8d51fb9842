import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from naim.synthdata import (BACKGROUND, FOREGROUND, EffectSpec, assemble_response, gen_colors, gen_squares,
                            make_dataset, phi_red, phi_xval, reference_interpolation, render_square)


class TestSquares:
    def test_white_pixel_count(self):
        images, _, _ = gen_squares(1000, 32, seed=1)
        assert np.all((images == FOREGROUND).sum(axis=(1, 2, 3)) == 16 * 16)

    def test_two_tone(self):
        images, _, _ = gen_squares(1000, 32, seed=2)
        assert set(np.unique(images).tolist()) <= {BACKGROUND, FOREGROUND}

    def test_phi_uniform(self):
        _, phi, _ = gen_squares(10_000, 32, seed=3)
        assert stats.kstest(phi, "uniform").statistic <= 0.02

    def test_extractor_matches_recorded_phi(self):
        images, phi, _ = gen_squares(500, 32, seed=4)
        extracted = np.array([phi_xval(im) for im in images])
        assert np.max(np.abs(extracted - phi)) <= 1 / 32

    def test_odd_size_rejected(self):
        with pytest.raises(ValueError):
            gen_squares(3, 31)

    def test_reproducible(self):
        a, pa, _ = gen_squares(20, 32, seed=9)
        b, pb, _ = gen_squares(20, 32, seed=9)
        assert np.array_equal(a, b) and np.array_equal(pa, pb)


class TestPhiXval:
    def test_flush_left_right_centered(self):
        assert phi_xval(render_square(0, 5, 32)) == 0.0
        assert phi_xval(render_square(16, 5, 32)) == 1.0
        assert phi_xval(render_square(8, 0, 32)) == 0.5

    def test_no_white_pixels(self):
        with pytest.raises(ValueError, match="white"):
            phi_xval(np.full((32, 32, 1), BACKGROUND))


class TestColors:
    def test_monochrome(self):
        images, _, _ = gen_colors(50, 32, seed=0)
        assert np.all(np.ptp(images, axis=(1, 2)) == 0)

    def test_phi_red_matches_channel(self):
        images, phi, rgb = gen_colors(50, 32, seed=0)
        assert np.array_equal(phi, rgb[:, 0])
        assert all(phi_red(im) == p for im, p in zip(images, phi))

    def test_channel_means(self):
        _, _, rgb = gen_colors(10_000, 2, seed=5)
        assert np.all(np.abs(rgb.mean(axis=0) - 0.5) <= 0.02)

    def test_phi_red_examples(self):
        red = np.zeros((4, 4, 3))
        red[..., 0] = 1.0
        assert phi_red(red) == 1.0
        assert phi_red(np.zeros((4, 4, 3))) == 0.0

    def test_phi_red_channel_count(self):
        with pytest.raises(ValueError, match="3"):
            phi_red(np.zeros((4, 4, 1)))


class TestResponse:
    def test_midpoint_example(self):
        y = assemble_response([0.5, 0.5, 0.5], 0.5, EffectSpec(image="linear", sigma=0.0))
        assert y == pytest.approx(2.25, abs=1e-12)

    @pytest.mark.parametrize("image", ["linear", "power"])
    def test_origin_is_zero(self, image):
        assert assemble_response([0.0, 0.0, 0.0], 0.0, EffectSpec(image=image, sigma=0.0)) == 0.0

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            assemble_response([1.2, 0, 0], 0.5, EffectSpec())
        with pytest.raises(ValueError):
            assemble_response([0, 0, 0], -0.1, EffectSpec())

    def test_noise_variance(self):
        ds = make_dataset("colors", 10_000, EffectSpec(sigma=0.1), seed=11, image_size=2)
        noise_free = assemble_response(ds.features, ds.phi, EffectSpec(sigma=0.0))
        assert 0.009 <= np.var(ds.y - noise_free) <= 0.011

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.floats(0, 1),
           st.sampled_from(["linear", "power", "sine"]))
    def test_noise_isolation(self, x, phi, image):
        spec = EffectSpec(image=image, sigma=0.0)
        expected = 2 * x[0] + x[1] ** 2 + math.sin(2 * math.pi * x[2]) + spec.image_effect(phi)
        assert assemble_response(x, phi, spec) == pytest.approx(float(expected), abs=1e-12)

    def test_unknown_effect(self):
        with pytest.raises(ValueError):
            EffectSpec(image="cubic")
        with pytest.raises(ValueError):
            EffectSpec(sigma=-1)


class TestDataset:
    @pytest.mark.parametrize("domain", ["squares", "colors"])
    def test_consistency(self, domain):
        ds = make_dataset(domain, 200, EffectSpec(), seed=3)
        assert np.all((ds.features >= 0) & (ds.features <= 1))
        assert np.all((ds.phi >= 0) & (ds.phi <= 1))
        np.testing.assert_array_equal(ds.y, assemble_response(ds.features, ds.phi, ds.spec, ds.noise))

    def test_bit_identical(self):
        a = make_dataset("squares", 50, EffectSpec(), seed=7)
        b = make_dataset("squares", 50, EffectSpec(), seed=7)
        for f in ("features", "images", "phi", "noise", "y"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_spec_change_keeps_images(self):
        a = make_dataset("squares", 30, EffectSpec(image="linear"), seed=7)
        b = make_dataset("squares", 30, EffectSpec(image="power"), seed=7)
        assert np.array_equal(a.images, b.images) and not np.array_equal(a.y, b.y)

    def test_unknown_domain(self):
        with pytest.raises(ValueError):
            make_dataset("faces", 3, EffectSpec(), seed=0)


class TestReferenceInterpolation:
    def test_endpoints_k2(self):
        a, b = render_square(2, 3, 32), render_square(12, 9, 32)
        out = reference_interpolation(a, b, 2, "squares")
        assert np.array_equal(out[0], a) and np.array_equal(out[1], b)

    def test_squares_midpoint(self):
        out = reference_interpolation(render_square(0, 4, 32), render_square(16, 4, 32), 11, "squares")
        assert abs(phi_xval(out[5]) - 0.5) <= 1 / 32

    def test_colors_linear(self):
        a = np.broadcast_to([0.2, 0.1, 0.9], (4, 4, 3))
        b = np.broadcast_to([0.8, 0.4, 0.3], (4, 4, 3))
        out = reference_interpolation(a, b, 4, "colors")
        np.testing.assert_allclose([phi_red(im) for im in out], [0.2, 0.4, 0.6, 0.8], atol=1e-12)
        assert all(np.all(np.ptp(im, axis=(0, 1)) == 0) for im in out)

    def test_domain_mismatch(self):
        with pytest.raises(ValueError):
            reference_interpolation(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)), 3, "squares")
        with pytest.raises(ValueError):
            reference_interpolation(render_square(0, 0, 32), render_square(0, 0, 32), 3, "colors")
