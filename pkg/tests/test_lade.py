from __future__ import annotations

import numpy as np
import pytest

from actnow.errors import CheckpointError
from actnow.errors import ShapeMismatchError
from actnow.harness.verify import finite_difference_error
from actnow.harness.verify import toy_problem
from actnow.models.adam import AdamState
from actnow.models.lade import NORM_NETS
from actnow.models.lade import STAT_NETS
from actnow.models.lade import LadeModel
from actnow.models.lade import ModelConfig
from actnow.models.lade import decompose
from actnow.models.lade import loss_norm
from actnow.models.mlp import Mlp2


def small_model(seed: int = 0, **cfg) -> LadeModel:
    settings = dict(L_in=6, L_out=3, hidden=16, lr=1e-3)
    settings.update(cfg)
    return LadeModel.init(ModelConfig(**settings), np.random.default_rng(seed))


def snapshot(model: LadeModel, nets) -> dict[str, np.ndarray]:
    return {name: p.copy() for name, p in model.parameters(nets).items()}


def test_decompose_example():
    parts = decompose(np.array([[1.0], [2.0], [3.0]]))
    assert parts.M[0] == pytest.approx(2.0)
    assert parts.V[0] == pytest.approx(2.0 / 3.0)
    assert parts.N[2, 0] == pytest.approx(1.4999775, rel=1e-6)
    assert parts.N[1, 0] == 0.0
    np.testing.assert_allclose(parts.reconstruct(), [[1.0], [2.0], [3.0]], rtol=1e-12)


def test_decompose_constant_series_is_exact():
    window = np.full((12, 3), 0.1)
    parts = decompose(window)
    np.testing.assert_array_equal(parts.V, 0.0)
    np.testing.assert_array_equal(parts.N, 0.0)
    np.testing.assert_array_equal(parts.reconstruct(), window)


def test_decompose_single_row():
    parts = decompose(np.array([[4.0, -2.0]]))
    np.testing.assert_array_equal(parts.reconstruct(), [[4.0, -2.0]])


def test_decompose_rejects_vectors():
    with pytest.raises(ShapeMismatchError):
        decompose(np.zeros(5))


def test_forward_shapes():
    model = small_model()
    X = np.random.default_rng(1).normal(size=(6, 7))
    out = model.forward(X)
    assert out.Y_hat.shape == (3, 7)
    assert out.N_hat.shape == (3, 7)
    assert out.M_hat.shape == (7,)
    assert (out.V_hat > 0).all()
    np.testing.assert_array_equal(model.predict(X), out.Y_hat)
    assert model.relu_masks(X).dtype == bool


def test_forward_rejects_wrong_window():
    with pytest.raises(ShapeMismatchError):
        small_model().forward(np.zeros((5, 2)))


def test_init_is_deterministic():
    X = np.random.default_rng(1).normal(size=(6, 4))
    np.testing.assert_array_equal(small_model(3).predict(X), small_model(3).predict(X))


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    model, X, Y = toy_problem(seed)
    assert finite_difference_error(model, X, Y) < 1e-4


def test_normalization_loss_does_not_reach_statistics_networks():
    model, X, Y = toy_problem(0)
    out = model.forward(X)
    norm_only = model.gradients(out, None, Y)
    stat_only = model.gradients(out, decompose(Y), None)
    assert all(not norm_only[name].any() for name in model.parameters(STAT_NETS))
    assert all(not stat_only[name].any() for name in model.parameters(NORM_NETS))


def test_optimizers_own_disjoint_parameters():
    model = small_model()
    rng = np.random.default_rng(2)
    X, Y = rng.normal(size=(6, 5)), rng.normal(size=(3, 5))
    stat_before = snapshot(model, STAT_NETS)
    norm_before = snapshot(model, NORM_NETS)

    stat, norm = model.backward_and_step(model.forward(X), None, Y)
    assert stat is None and norm is not None
    assert model.opt_stat.step_count == 0
    for name, p in model.parameters(STAT_NETS).items():
        np.testing.assert_array_equal(p, stat_before[name])
    assert any(not np.array_equal(p, norm_before[name]) for name, p in model.parameters(NORM_NETS).items())

    norm_after = snapshot(model, NORM_NETS)
    model.backward_and_step(model.forward(X), decompose(Y), None)
    for name, p in model.parameters(NORM_NETS).items():
        np.testing.assert_array_equal(p, norm_after[name])


def test_training_reduces_loss():
    model = small_model(hidden=32)
    rng = np.random.default_rng(4)
    X = rng.normal(size=(6, 8))
    Y = rng.normal(size=(3, 8))
    stats = decompose(Y)
    first = model.backward_and_step(model.forward(X), stats, Y)
    for _ in range(49):
        last = model.backward_and_step(model.forward(X), stats, Y)
    assert last[0] < first[0]
    assert last[1] < first[1]
    assert loss_norm(model.predict(X), Y) < first[1]


def test_clone_is_independent():
    model = small_model()
    clone = model.clone_params()
    clone.nets["norm"].params["W1"] += 1.0
    clone.opt_norm.lr = 0.5
    assert not np.array_equal(model.nets["norm"].params["W1"], clone.nets["norm"].params["W1"])
    assert model.opt_norm.lr == pytest.approx(1e-3)


def test_adopt_copies_parameters_and_optimizers():
    model = small_model(0)
    other = small_model(1)
    rng = np.random.default_rng(2)
    other.backward_and_step(other.forward(rng.normal(size=(6, 3))), None, rng.normal(size=(3, 3)))
    model.adopt_params(other)
    for name, p in model.parameters().items():
        np.testing.assert_array_equal(p, other.parameters()[name])
    assert model.opt_norm.step_count == 1
    assert model.opt_norm is not other.opt_norm


def test_adopt_rejects_other_architecture():
    with pytest.raises(ShapeMismatchError):
        small_model().adopt_params(small_model(hidden=8))


def test_checkpoint_round_trip(tmp_path):
    model = small_model()
    rng = np.random.default_rng(5)
    X, Y = rng.normal(size=(6, 4)), rng.normal(size=(3, 4))
    model.backward_and_step(model.forward(X), decompose(Y), Y)
    path = tmp_path / "nested" / "model.ckpt"
    model.save_checkpoint(str(path))
    loaded = LadeModel.load_checkpoint(str(path))
    assert loaded.cfg == model.cfg
    assert loaded.checkpoint_meta() == model.checkpoint_meta()
    original = model.state_arrays()
    restored = loaded.state_arrays()
    assert list(restored) == list(original)
    for name, array in original.items():
        np.testing.assert_array_equal(restored[name], array)
    np.testing.assert_array_equal(loaded.predict(X), model.predict(X))


def test_checkpoint_corruption(tmp_path):
    path = tmp_path / "model.ckpt"
    small_model().save_checkpoint(str(path))
    blob = path.read_bytes()

    path.write_bytes(b"NOTACKPT" + blob[8:])
    with pytest.raises(CheckpointError):
        LadeModel.load_checkpoint(str(path))
    path.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError):
        LadeModel.load_checkpoint(str(path))
    path.write_bytes(blob + b"\x00" * 8)
    with pytest.raises(CheckpointError):
        LadeModel.load_checkpoint(str(path))


def test_mlp_backward_input_gradient():
    net = Mlp2.init(3, 5, 2, np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=(4, 3))
    out, cache = net.forward(x)
    _, g_in = net.backward(cache, np.ones_like(out))
    step = 1e-6
    numeric = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        shifted = x.copy()
        shifted[idx] += step
        numeric[idx] = (net.forward(shifted)[0].sum() - out.sum()) / step
    np.testing.assert_allclose(g_in, numeric, atol=1e-4)


def test_adam_first_step():
    param = {"w": np.array([1.0])}
    opt = AdamState.for_params(param, lr=0.1)
    opt.step(param, {"w": np.array([0.5])})
    assert param["w"][0] == pytest.approx(0.9, abs=1e-6)
    assert opt.step_count == 1
