import numpy as np
import pytest

from naim.diffcore import ShapeError
from naim.nam import NaimModel, TrainConfig, TrainingError, train


def set_affine(net, a: float, b: float):
    """Make a zero-initialised shape net compute a*x + b exactly."""
    net.weights[0].data[0, 0] = 1.0          # x -> hidden unit 0 (x in [0, 1] so relu is identity)
    for w in net.weights[1:-1]:
        w.data[0, 0] = 1.0
    net.weights[-1].data[0, 0] = a
    net.biases[-1].data[0] = b


def random_model(seed=0, interactions=((0, 2),)):
    return NaimModel(3, latent_dim=4, hidden=8, image_hidden=12, interactions=interactions, seed=seed)


class TestPredict:
    def test_intercept_only(self):
        m = NaimModel(3, latent_dim=4, zero=True)
        m.intercept.data = np.array(0.7)
        x = np.random.default_rng(0).uniform(size=(5, 3))
        z = np.random.default_rng(1).normal(size=(5, 4))
        np.testing.assert_array_equal(m.predict(x, z), 0.7)

    def test_hand_set_affine(self):
        m = NaimModel(2, latent_dim=3, hidden=4, zero=True)
        set_affine(m.shape_nets[0], 2.0, 1.0)
        set_affine(m.shape_nets[1], -3.0, 0.5)
        x = np.array([0.25, 0.6])
        assert m.predict(x, np.ones(3)) == pytest.approx(2 * 0.25 + 1 - 3 * 0.6 + 0.5, abs=1e-12)

    def test_term_wise_oracle(self):
        m = random_model()
        m.intercept.data = np.array(-0.3)
        rng = np.random.default_rng(2)
        x, z = rng.uniform(size=(7, 3)), rng.normal(size=(7, 4))
        by_hand = (-0.3 + sum(m.shape_nets[j].forward(x[:, [j]])[:, 0] for j in range(3))
                   + m.interaction_nets[0].forward(x[:, [0, 2]])[:, 0]
                   + m.image_head.forward(z)[:, 0])
        np.testing.assert_allclose(m.predict(x, z), by_hand, atol=1e-10)
        np.testing.assert_allclose(m.predict(x, z), -0.3 + m.terms(x, z).sum(axis=1), atol=1e-10)

    def test_subtraction_identity(self):
        m = random_model(1)
        rng = np.random.default_rng(3)
        x, z = rng.uniform(size=(6, 3)), rng.normal(size=(6, 4))
        np.testing.assert_allclose(m.predict(x, z) - m.predict_tabular(x), m.image_effect(z), atol=1e-10)

    def test_tabular_zero(self):
        assert NaimModel(3, zero=True).predict_tabular([0.1, 0.2, 0.3]) == 0.0

    def test_length_mismatch(self):
        m = random_model()
        with pytest.raises(ShapeError):
            m.predict(np.zeros(2), np.zeros(4))
        with pytest.raises(ShapeError):
            m.predict(np.zeros(3), np.zeros(5))
        with pytest.raises(ShapeError):
            m.predict(np.zeros(3))

    def test_eval_is_deterministic(self):
        m = NaimModel(3, latent_dim=4, dropout=0.2, seed=5)
        x, z = np.full((2, 3), 0.4), np.ones((2, 4))
        assert np.array_equal(m.predict(x, z), m.predict(x, z))

    def test_invalid_interaction(self):
        with pytest.raises(ValueError):
            NaimModel(3, interactions=[(1, 1)])


class TestNumericEffectCurve:
    def test_zero_net_flat(self):
        m = NaimModel(2, zero=True)
        assert all(v == 0.0 for _, v in m.effect_curve_numeric(0, np.linspace(0, 1, 5)))

    def test_centering_affine(self):
        m = NaimModel(1, hidden=3, zero=True)
        set_affine(m.shape_nets[0], 2.0, 0.0)
        m.set_term_means(np.random.default_rng(0).uniform(size=(200_000, 1)))
        (x, v), = m.effect_curve_numeric(0, [0.5])
        assert x == 0.5 and abs(v) < 0.01

    def test_centered_over_training_distribution(self):
        m = random_model(4)
        rng = np.random.default_rng(4)
        x, z = rng.uniform(size=(300, 3)), rng.normal(size=(300, 4))
        m.set_term_means(x, z)
        for j in range(3):
            vals = np.array(m.effect_curve_numeric(j, x[:, j]))[:, 1]
            assert abs(vals.mean()) <= 1e-8

    def test_invalid_index(self):
        with pytest.raises(IndexError):
            NaimModel(2).effect_curve_numeric(5, [0.1])

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            NaimModel(2).effect_curve_numeric(0, [])


class TestTrain:
    def test_constant_target(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(size=(256, 3))
        y = np.full(256, 1.7)
        cfg = TrainConfig(epochs=100, batch_size=64, hidden=16, lr=3e-3, seed=0)
        m = train(x, y, None, cfg)
        assert np.max(np.abs(m.predict(x) - 1.7)) <= 0.05

    def test_learns_linear_effect(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(2000, 2))
        y = 2 * x[:, 0] + x[:, 1] ** 2
        cfg = TrainConfig(epochs=30, batch_size=128, hidden=16, lr=3e-3, feature_dropout=0.1, seed=1)
        m = train(x, y, None, cfg)
        assert np.mean((m.predict(x) - y) ** 2) < 0.01
        assert m.history[-1] < m.history[0]

    def test_reproducible(self):
        rng = np.random.default_rng(2)
        x, z = rng.uniform(size=(100, 3)), rng.normal(size=(100, 2))
        y = x.sum(axis=1) + z[:, 0]
        cfg = TrainConfig(epochs=2, batch_size=32, hidden=8, image_hidden=8, seed=3)
        a, b = train(x, y, z, cfg), train(x, y, z, cfg)
        assert np.array_equal(a.predict(x, z), b.predict(x, z))

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            train(np.zeros((0, 3)), np.zeros(0))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss_aborts(self):
        x = np.random.default_rng(0).uniform(size=(10, 1))
        with pytest.raises(TrainingError, match="non-finite"):
            train(x, np.full(10, np.inf), None, TrainConfig(epochs=1, hidden=4))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(feature_dropout=1.0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)

    def test_term_means_set_after_training(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(size=(64, 2))
        m = train(x, x[:, 0], None, TrainConfig(epochs=1, batch_size=32, hidden=4))
        np.testing.assert_allclose(m.term_means, m.terms(x).mean(axis=0))


def test_state_roundtrip():
    m = random_model(7)
    m.intercept.data = np.array(0.25)
    clone = NaimModel.from_description(m.describe())
    clone.load_state(m.state())
    x, z = np.full((3, 3), 0.3), np.ones((3, 4))
    assert np.array_equal(clone.predict(x, z), m.predict(x, z))
    assert clone.link == "identity"
