"""Neural model tests: hand-computed forwards, recurrences, and grad checks.

Scalar oracles use one-unit networks where every gate can be followed by
hand; gradient oracles use central finite differences on a probe batch whose
targets sit near the model output, keeping the difference quotient far from
cancellation noise.
"""
import math

import numpy as np
import pytest

from chaosbench.errors import ShapeError
from chaosbench.models_neural import (
    LSTM_PROFILES,
    RNN_PROFILES,
    FnnModel,
    LstmModel,
    RnnModel,
    flatten_params,
    mse_and_grad,
    write_flat,
)
from chaosbench.numerics import Rng, glorot_uniform, grad_check


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def _set_all(model, value):
    for k, v in model.params.items():
        v[...] = value


def test_mse_and_grad_hand_case():
    pred = np.array([[1.0, 2.0], [3.0, 5.0]])
    target = np.array([[0.0, 2.0], [1.0, 1.0]])
    loss, grad = mse_and_grad(pred, target)
    assert loss == (1 + 0 + 4 + 16) / 4
    assert np.array_equal(grad, [[0.5, 0.0], [1.0, 2.0]])


def test_flatten_write_roundtrip():
    model = FnnModel(4, rng=Rng(3))
    flat = flatten_params(model.params)
    assert flat.shape == (4 * 64 + 64 + 64 * 32 + 32 + 32 * 2 + 2,)
    write_flat(model.params, flat * 2.0)
    assert flatten_params(model.params) == pytest.approx(flat * 2.0)
    with pytest.raises(ShapeError):
        write_flat(model.params, flat[:-1])


def test_fnn_constant_weight_forward_by_hand():
    model = FnnModel(2, rng=Rng(0))
    model.params["W1"][...] = 0.01
    model.params["b1"][...] = 0.02
    model.params["W2"][...] = 0.03
    model.params["b2"][...] = 0.01
    model.params["W3"][...] = 0.05
    model.params["b3"][...] = -0.1
    out = model.predict(np.array([[0.5, -0.25]]))
    h1 = 0.01 * 0.5 + 0.01 * -0.25 + 0.02  # same in all 64 units, positive
    h2 = 64 * (h1 * 0.03) + 0.01
    want = 32 * (h2 * 0.05) - 0.1
    assert out.shape == (1, 2)
    assert out[0, 0] == pytest.approx(want, rel=1e-12)
    assert out[0, 1] == pytest.approx(want, rel=1e-12)


def test_fnn_dead_relu_passes_only_bias():
    model = FnnModel(2, rng=Rng(0))
    model.params["W1"][...] = 0.01
    model.params["b1"][...] = -1.0  # all first-layer units off for small inputs
    model.params["b2"][...] = -1.0  # second layer off too
    model.params["W3"][...] = 0.7
    model.params["b3"][:] = [0.25, -0.5]
    out = model.predict(np.array([[0.3, 0.1], [-0.2, 0.4]]))
    assert np.array_equal(out, [[0.25, -0.5], [0.25, -0.5]])


def test_fnn_softmax_head_sums_to_one():
    model = FnnModel(2, rng=Rng(5), output_activation="softmax")
    out = model.predict(np.array([[0.4, -0.2], [0.1, 0.3]]))
    assert np.allclose(out.sum(axis=1), 1.0)
    # symmetric weights force equal logits, so the split is exactly even
    _set_all(model, 0.01)
    out = model.predict(np.array([[0.4, -0.2]]))
    assert np.array_equal(out, [[0.5, 0.5]])


def test_fnn_rejects_unknown_head_and_bad_width():
    with pytest.raises(ValueError):
        FnnModel(2, output_activation="sigmoid")
    model = FnnModel(4, rng=Rng(1))
    with pytest.raises(ShapeError):
        model.predict(np.zeros((3, 6)))


def test_fnn_init_draw_order_is_w1_w2_w3():
    model = FnnModel(2, rng=Rng(9))
    ref = Rng(9)
    assert np.array_equal(model.params["W1"], glorot_uniform(ref, 2, 64))
    assert np.array_equal(model.params["W2"], glorot_uniform(ref, 64, 32))
    assert np.array_equal(model.params["W3"], glorot_uniform(ref, 32, 2))
    assert not model.params["b1"].any()


def test_rnn_window_one_is_a_dense_tanh_layer():
    model = RnnModel(units=(10,), rng=Rng(4), profile="A")
    x = np.array([[0.3, -0.1], [0.2, 0.5], [-0.4, 0.0]])
    p = model.params
    h = np.tanh(x @ p["W0"] + p["b0"])  # hs[0] = 0, so U0 is inert
    want = h @ p["Wh"] + p["bh"]
    assert model.predict(x) == pytest.approx(want, rel=1e-12)

    y = np.array([[0.1, 0.0], [0.0, 0.2], [0.3, -0.3]])
    loss, grads = model.backward(x, y)
    out = model.predict(x)
    dout = 2.0 * (out - y) / out.size
    assert not grads["U0"].any()
    assert grads["Wh"] == pytest.approx(h.T @ dout, rel=1e-12)
    da = (dout @ p["Wh"].T) * (1 - h * h)
    assert grads["W0"] == pytest.approx(x.T @ da, rel=1e-12)
    assert grads["b0"] == pytest.approx(da.sum(axis=0), rel=1e-12)


def test_rnn_two_step_recurrence_by_hand():
    model = RnnModel(units=(1,), rng=Rng(0))
    model.params["W0"][:, 0] = [0.3, -0.2]
    model.params["U0"][...] = 0.5
    model.params["b0"][...] = 0.1
    model.params["Wh"][0, :] = [1.5, -0.7]
    model.params["bh"][:] = [0.05, 0.02]
    x = np.array([[0.4, -0.1, 0.2, 0.3]])  # two states, oldest first
    h1 = math.tanh(0.4 * 0.3 + (-0.1) * (-0.2) + 0.1)
    h2 = math.tanh(0.2 * 0.3 + 0.3 * (-0.2) + 0.5 * h1 + 0.1)
    out = model.predict(x)
    assert out[0, 0] == pytest.approx(1.5 * h2 + 0.05, rel=1e-12)
    assert out[0, 1] == pytest.approx(-0.7 * h2 + 0.02, rel=1e-12)


def test_rnn_profiles_and_shapes():
    a = RnnModel.from_profile("A", rng=Rng(1))
    assert a.units == (10,) and a.profile == "A"
    b = RnnModel.from_profile("B", rng=Rng(1))
    assert b.units == (32, 24)
    assert b.params["W0"].shape == (2, 32)
    assert b.params["U1"].shape == (24, 24)
    assert b.params["Wh"].shape == (24, 2)
    with pytest.raises(ValueError):
        RnnModel.from_profile("C")
    with pytest.raises(ShapeError):
        a.predict(np.zeros((2, 5)))  # width not a multiple of the state size
    assert RNN_PROFILES == {"A": (10,), "B": (32, 24)}


def test_lstm_zero_kernels_output_head_bias():
    model = LstmModel(units=(10,), rng=Rng(2), profile="A")
    for key in ("W0", "U0", "Wh"):
        model.params[key][...] = 0.0
    model.params["b0"][...] = 0.0
    model.params["b0"][10:20] = 1.0
    model.params["bh"][:] = [0.3, -0.2]
    out = model.predict(np.array([[0.5, 0.1, -0.3, 0.2], [0.0, 0.0, 0.0, 0.0]]))
    # candidate gate tanh(0) = 0 keeps the cell empty, so only bh passes
    assert np.array_equal(out, [[0.3, -0.2], [0.3, -0.2]])


def test_lstm_single_step_by_hand():
    model = LstmModel(units=(1,), rng=Rng(0))
    model.params["W0"][0, :] = [0.1, 0.2, 0.3, 0.4]
    model.params["W0"][1, :] = [0.5, 0.6, 0.7, 0.8]
    model.params["U0"][0, :] = [0.01, 0.02, 0.03, 0.04]
    model.params["b0"][:] = [0.0, 1.0, 0.0, 0.0]
    model.params["Wh"][0, :] = [2.0, -1.0]
    model.params["bh"][:] = [0.1, 0.2]
    out = model.predict(np.array([[0.4, 0.2]]))
    z = [
        0.4 * 0.1 + 0.2 * 0.5 + 0.0,
        0.4 * 0.2 + 0.2 * 0.6 + 1.0,
        0.4 * 0.3 + 0.2 * 0.7 + 0.0,
        0.4 * 0.4 + 0.2 * 0.8 + 0.0,
    ]
    gi, gf, gg, go = _sig(z[0]), _sig(z[1]), math.tanh(z[2]), _sig(z[3])
    c = gi * gg  # previous cell is zero
    h = go * math.tanh(c)
    assert out[0, 0] == pytest.approx(2.0 * h + 0.1, rel=1e-12)
    assert out[0, 1] == pytest.approx(-1.0 * h + 0.2, rel=1e-12)


def test_lstm_two_step_cell_carry_by_hand():
    model = LstmModel(units=(1,), rng=Rng(0))
    model.params["W0"][0, :] = [0.1, 0.2, 0.3, 0.4]
    model.params["W0"][1, :] = [0.5, 0.6, 0.7, 0.8]
    model.params["U0"][0, :] = [0.3, -0.2, 0.1, 0.25]
    model.params["b0"][:] = [0.0, 1.0, 0.0, 0.0]
    model.params["Wh"][0, :] = [1.0, 0.0]
    model.params["bh"][:] = [0.0, 0.0]

    def cell(x1, x2, h_prev, c_prev):
        z = [
            x1 * 0.1 + x2 * 0.5 + h_prev * 0.3 + 0.0,
            x1 * 0.2 + x2 * 0.6 + h_prev * -0.2 + 1.0,
            x1 * 0.3 + x2 * 0.7 + h_prev * 0.1 + 0.0,
            x1 * 0.4 + x2 * 0.8 + h_prev * 0.25 + 0.0,
        ]
        gi, gf, gg, go = _sig(z[0]), _sig(z[1]), math.tanh(z[2]), _sig(z[3])
        c = gf * c_prev + gi * gg
        return go * math.tanh(c), c

    h1, c1 = cell(0.4, 0.2, 0.0, 0.0)
    h2, _ = cell(-0.3, 0.1, h1, c1)
    out = model.predict(np.array([[0.4, 0.2, -0.3, 0.1]]))
    assert out[0, 0] == pytest.approx(h2, rel=1e-12)
    assert out[0, 1] == 0.0


def test_lstm_forget_bias_and_profiles():
    a = LstmModel.from_profile("A", rng=Rng(7))
    assert np.array_equal(a.params["b0"][10:20], np.ones(10))
    assert not a.params["b0"][:10].any()
    assert not a.params["b0"][20:].any()
    b = LstmModel.from_profile("B", rng=Rng(7))
    assert b.units == (50, 50)
    assert b.params["W0"].shape == (2, 200)
    assert b.params["U1"].shape == (50, 200)
    with pytest.raises(ValueError):
        LstmModel.from_profile("Z")
    assert LSTM_PROFILES == {"A": (10,), "B": (50, 50)}


def _probe_grad_error(model, window):
    rng_data = Rng(42)
    d = model.input_size * window if hasattr(model, "input_size") else model.input_width
    x = (np.array(rng_data.uniforms(4 * d)) * 2 - 1).reshape(4, d)
    y = model.predict(x) + 0.01 * (np.array(rng_data.uniforms(8)) * 2 - 1).reshape(4, 2)
    base = flatten_params(model.params)

    def f(vec):
        write_flat(model.params, vec)
        return mse_and_grad(model.predict(x), y)[0]

    write_flat(model.params, base)
    _, grads = model.backward(x, y)
    ana = np.concatenate([grads[k].ravel() for k in model.params])
    write_flat(model.params, base)
    return grad_check(f, ana, base)


def test_gradients_match_finite_differences_fast_configs():
    assert _probe_grad_error(FnnModel(6, rng=Rng(1)), 3) < 1e-5
    assert _probe_grad_error(RnnModel.from_profile("A", rng=Rng(3)), 3) < 1e-5
    assert _probe_grad_error(LstmModel.from_profile("A", rng=Rng(5)), 3) < 1e-5


def test_serialization_roundtrip_preserves_predictions():
    x = np.array([[0.2, -0.4, 0.1, 0.3, 0.0, -0.1]])
    fnn = FnnModel(6, rng=Rng(11), output_activation="softmax")
    rnn = RnnModel.from_profile("B", rng=Rng(12))
    lstm = LstmModel.from_profile("A", rng=Rng(13))
    for model, cls in ((fnn, FnnModel), (rnn, RnnModel), (lstm, LstmModel)):
        clone = cls.from_dict(model.to_dict())
        assert np.array_equal(clone.predict(x), model.predict(x))
    assert FnnModel.from_dict(fnn.to_dict()).output_activation == "softmax"
    assert RnnModel.from_dict(rnn.to_dict()).profile == "B"
