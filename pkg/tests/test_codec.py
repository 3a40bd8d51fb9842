import numpy as np
import pytest

from naim.codec import Autoencoder, AutoencoderConfig, attribute_direction, train_autoencoder
from naim.diffcore import ShapeError


def small_ae(**kw):
    cfg = AutoencoderConfig(**{"latent_dim": 4, "hidden": (16,), "seed": 0, **kw})
    return Autoencoder((6, 6, 1), cfg)


class TestEncodeDecode:
    def test_deterministic(self):
        ae = small_ae()
        img = np.random.default_rng(0).uniform(size=(6, 6, 1))
        assert np.array_equal(ae.encode(img), ae.encode(img.copy()))
        assert ae.encode(img).shape == (4,)

    def test_zero_code_in_range(self):
        out = small_ae().decode(np.zeros(4))
        assert out.shape == (6, 6, 1) and out.min() >= 0 and out.max() <= 1

    def test_extreme_codes_in_range(self):
        out = small_ae().decode(np.random.default_rng(1).normal(scale=1e4, size=(5, 4)))
        assert np.all((out >= 0) & (out <= 1)) and np.all(np.isfinite(out))

    def test_shape_errors(self):
        ae = small_ae()
        with pytest.raises(ShapeError):
            ae.encode(np.zeros((2, 5, 6, 1)))
        with pytest.raises(ShapeError):
            ae.decode(np.zeros(3))

    def test_roundtrip_shape(self):
        ae = small_ae()
        x = np.zeros((3, 6, 6, 1))
        assert ae.reconstruct(x).shape == x.shape

    def test_state_roundtrip(self):
        a, b = small_ae(seed=0), small_ae(seed=1)
        b.load_state(a.state())
        x = np.random.default_rng(2).uniform(size=(2, 6, 6, 1))
        assert np.array_equal(a.encode(x), b.encode(x))


class TestTraining:
    def _images(self, n=64):
        rng = np.random.default_rng(0)
        return np.clip(rng.uniform(size=(n, 1, 1, 1)) + np.zeros((n, 6, 6, 1)), 0, 1)

    def test_same_seed_same_loss(self):
        cfg = AutoencoderConfig(latent_dim=2, hidden=(8,), epochs=3, batch_size=16, seed=5)
        a, b = train_autoencoder(self._images(), cfg), train_autoencoder(self._images(), cfg)
        assert a.history == b.history

    def test_loss_decreases(self):
        cfg = AutoencoderConfig(latent_dim=2, hidden=(8,), epochs=20, batch_size=16, lr=3e-3, seed=1)
        ae = train_autoencoder(self._images(), cfg)
        assert ae.history[-1] < 0.5 * ae.history[0]

    def test_inconsistent_shapes(self):
        with pytest.raises(ShapeError):
            train_autoencoder(np.zeros(5))
        with pytest.raises(ValueError):
            train_autoencoder(np.zeros((1, 6, 6, 1)))


class TestAttributeDirection:
    def _clusters(self, seed=0):
        rng = np.random.default_rng(seed)
        c0 = np.array([-1.0, 0.0]) + rng.uniform(-0.01, 0.01, size=(20, 2))
        c1 = np.array([1.0, 0.0]) + rng.uniform(-0.01, 0.01, size=(20, 2))
        return np.vstack([c0, c1]), np.r_[np.zeros(20), np.ones(20)]

    def test_axis_separated(self):
        v = attribute_direction(*self._clusters())
        assert v @ np.array([1.0, 0.0]) >= 0.99
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_flipped_labels_negate(self):
        codes, labels = self._clusters()
        np.testing.assert_allclose(attribute_direction(codes, 1 - labels), -attribute_direction(codes, labels),
                                   atol=1e-8)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        codes = rng.normal(size=(200, 6))
        labels = (codes @ rng.normal(size=6) + 0.3 * rng.normal(size=200) > 0).astype(float)
        perm = rng.permutation(200)
        v1 = attribute_direction(codes, labels)
        v2 = attribute_direction(codes[perm], labels[perm])
        assert v1 @ v2 >= 1 - 1e-6

    def test_single_class(self):
        with pytest.raises(ValueError, match="both classes"):
            attribute_direction(np.zeros((4, 2)), np.ones(4))

    def test_non_binary_labels(self):
        with pytest.raises(ValueError):
            attribute_direction(np.zeros((3, 2)), [0, 1, 2])
