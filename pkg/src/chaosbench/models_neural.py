"""From-scratch neural forecasters: feedforward, simple recurrent, and LSTM.

Parameters are float64 numpy arrays in insertion-ordered dicts; every
gradient is derived by hand, with full backpropagation through time for the
recurrent models. Batch loss is mean squared error over all output entries.

Recurrent models consume a window of past states as a sequence (oldest
first); the flat dataset layout x0, y0, x1, y1, ... reshapes to (batch,
window_len, 2) without copying semantics to worry about.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .numerics import (
    Rng,
    activation_derivative,
    apply_activation,
    glorot_uniform,
    sigmoid,
    softmax_vjp,
)

RNN_PROFILES = {"A": (10,), "B": (32, 24)}
LSTM_PROFILES = {"A": (10,), "B": (50, 50)}


def mse_and_grad(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch MSE over every entry and its gradient with respect to pred."""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / diff.size) * diff


def flatten_params(params: dict) -> np.ndarray:
    """All parameters as one vector, in dict insertion order, row-major."""
    return np.concatenate([params[k].ravel() for k in params])


def write_flat(params: dict, vec: np.ndarray) -> None:
    """Inverse of flatten_params: copy vec back into the parameter arrays."""
    offset = 0
    for k in params:
        n = params[k].size
        params[k].flat[:] = vec[offset : offset + n]
        offset += n
    if offset != vec.size:
        raise ShapeError(f"flat vector has {vec.size} entries, parameters need {offset}")


def _as_batch(x: np.ndarray, width: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeError(f"{what} expects (batch, {width}) inputs, got shape {x.shape}")
    return x


class FnnModel:
    """Dense net: input -> 64 -> 32 -> 2 with ReLU hidden layers.

    The output layer is linear by default so both coordinates of the next
    state can be regressed directly. output_activation="softmax" keeps the
    probability-style head available behind a flag; it pairs with MSE
    through the full softmax Jacobian, not the cross-entropy shortcut.
    """

    kind = "fnn"

    def __init__(
        self,
        input_width: int,
        rng: Rng | None = None,
        hidden: tuple[int, int] = (64, 32),
        output_width: int = 2,
        output_activation: str = "linear",
        profile: str = "A",
    ):
        if output_activation not in ("linear", "softmax"):
            raise ValueError(f"unsupported output activation {output_activation!r}")
        self.input_width = int(input_width)
        self.hidden = (int(hidden[0]), int(hidden[1]))
        self.output_width = int(output_width)
        self.output_activation = output_activation
        self.profile = profile
        h1, h2 = self.hidden
        if rng is None:
            rng = Rng(0)
        # Draw order: W1, W2, W3. Biases start at zero and consume no draws.
        self.params = {
            "W1": glorot_uniform(rng, self.input_width, h1),
            "b1": np.zeros(h1),
            "W2": glorot_uniform(rng, h1, h2),
            "b2": np.zeros(h2),
            "W3": glorot_uniform(rng, h2, self.output_width),
            "b3": np.zeros(self.output_width),
        }

    def _forward(self, x: np.ndarray):
        p = self.params
        a1 = x @ p["W1"] + p["b1"]
        h1 = np.maximum(a1, 0.0)
        a2 = h1 @ p["W2"] + p["b2"]
        h2 = np.maximum(a2, 0.0)
        a3 = h2 @ p["W3"] + p["b3"]
        out = apply_activation(a3, self.output_activation)
        return a1, h1, a2, h2, out

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = _as_batch(x, self.input_width, "fnn")
        return self._forward(x)[4]

    def backward(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
        x = _as_batch(x, self.input_width, "fnn")
        a1, h1, a2, h2, out = self._forward(x)
        loss, dout = mse_and_grad(out, np.asarray(y, dtype=np.float64))
        if self.output_activation == "softmax":
            da3 = softmax_vjp(out, dout)
        else:
            da3 = dout
        p = self.params
        grads = {
            "W3": h2.T @ da3,
            "b3": da3.sum(axis=0),
        }
        dh2 = da3 @ p["W3"].T
        da2 = dh2 * activation_derivative("relu", a2, h2)
        grads["W2"] = h1.T @ da2
        grads["b2"] = da2.sum(axis=0)
        dh1 = da2 @ p["W2"].T
        da1 = dh1 * activation_derivative("relu", a1, h1)
        grads["W1"] = x.T @ da1
        grads["b1"] = da1.sum(axis=0)
        return loss, grads

    def to_dict(self) -> dict:
        return {
            "input_width": self.input_width,
            "hidden": list(self.hidden),
            "output_width": self.output_width,
            "output_activation": self.output_activation,
            "profile": self.profile,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FnnModel":
        model = cls(
            d["input_width"],
            rng=Rng(0),
            hidden=tuple(d["hidden"]),
            output_width=d["output_width"],
            output_activation=d["output_activation"],
            profile=d.get("profile", "A"),
        )
        for k in model.params:
            model.params[k] = np.asarray(d["params"][k], dtype=np.float64).reshape(model.params[k].shape)
        return model


class RnnModel:
    """Stacked simple recurrent net (tanh units) with a linear readout.

    Profile A is one 10-unit layer; profile B stacks 32 then 24 units. The
    readout sees only the final hidden state of the top layer.
    """

    kind = "rnn"

    def __init__(
        self,
        units: tuple[int, ...] = RNN_PROFILES["A"],
        rng: Rng | None = None,
        input_size: int = 2,
        output_width: int = 2,
        profile: str = "custom",
    ):
        if not units:
            raise ValueError("at least one recurrent layer is required")
        self.units = tuple(int(u) for u in units)
        self.input_size = int(input_size)
        self.output_width = int(output_width)
        self.profile = profile
        if rng is None:
            rng = Rng(0)
        self.params: dict = {}
        # Draw order: per layer input kernel W then recurrent kernel U,
        # bottom to top; readout Wh last. Biases start at zero.
        d_in = self.input_size
        for l, h in enumerate(self.units):
            self.params[f"W{l}"] = glorot_uniform(rng, d_in, h)
            self.params[f"U{l}"] = glorot_uniform(rng, h, h)
            self.params[f"b{l}"] = np.zeros(h)
            d_in = h
        self.params["Wh"] = glorot_uniform(rng, self.units[-1], self.output_width)
        self.params["bh"] = np.zeros(self.output_width)

    @classmethod
    def from_profile(cls, profile: str, rng: Rng | None = None, input_size: int = 2) -> "RnnModel":
        if profile not in RNN_PROFILES:
            raise ValueError(f"unknown rnn profile {profile!r}; expected one of {sorted(RNN_PROFILES)}")
        return cls(units=RNN_PROFILES[profile], rng=rng, input_size=input_size, profile=profile)

    def _reshape(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] == 0 or x.shape[1] % self.input_size != 0:
            raise ShapeError(
                f"rnn expects (batch, k*{self.input_size}) inputs, got shape {x.shape}"
            )
        return x.reshape(x.shape[0], x.shape[1] // self.input_size, self.input_size)

    def forward_seq(self, seq: np.ndarray):
        """Run the stack over a (batch, timesteps, input_size) sequence.

        Returns (output, caches); caches feed backward() and hold, per
        layer, the layer input and hidden states including h[-1] = 0.
        """
        seq = np.asarray(seq, dtype=np.float64)
        if seq.ndim != 3 or seq.shape[2] != self.input_size:
            raise ShapeError(f"rnn sequence must be (batch, steps, {self.input_size}), got {seq.shape}")
        b, n, _ = seq.shape
        layer_in = seq
        caches = []
        for l, h in enumerate(self.units):
            w, u, bias = self.params[f"W{l}"], self.params[f"U{l}"], self.params[f"b{l}"]
            hs = np.zeros((n + 1, b, h))
            for t in range(n):
                hs[t + 1] = np.tanh(layer_in[:, t, :] @ w + hs[t] @ u + bias)
            caches.append((layer_in, hs))
            layer_in = hs[1:].transpose(1, 0, 2)
        out = caches[-1][1][n] @ self.params["Wh"] + self.params["bh"]
        return out, caches

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward_seq(self._reshape(x))[0]

    def backward(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
        seq = self._reshape(x)
        b, n, _ = seq.shape
        out, caches = self.forward_seq(seq)
        loss, dout = mse_and_grad(out, np.asarray(y, dtype=np.float64))
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        top_hs = caches[-1][1]
        grads["Wh"] = top_hs[n].T @ dout
        grads["bh"] = dout.sum(axis=0)
        d_above = np.zeros((n, b, self.units[-1]))
        d_above[n - 1] = dout @ self.params["Wh"].T
        for l in range(len(self.units) - 1, -1, -1):
            layer_in, hs = caches[l]
            w, u = self.params[f"W{l}"], self.params[f"U{l}"]
            d_below = np.zeros((n, b, layer_in.shape[2])) if l > 0 else None
            carry = np.zeros((b, self.units[l]))
            for t in range(n - 1, -1, -1):
                dh = d_above[t] + carry
                da = dh * (1.0 - hs[t + 1] * hs[t + 1])
                grads[f"W{l}"] += layer_in[:, t, :].T @ da
                grads[f"U{l}"] += hs[t].T @ da
                grads[f"b{l}"] += da.sum(axis=0)
                carry = da @ u.T
                if l > 0:
                    d_below[t] = da @ w.T
            d_above = d_below
        return loss, grads

    def to_dict(self) -> dict:
        return {
            "units": list(self.units),
            "input_size": self.input_size,
            "output_width": self.output_width,
            "profile": self.profile,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RnnModel":
        model = cls(
            units=tuple(d["units"]),
            rng=Rng(0),
            input_size=d["input_size"],
            output_width=d["output_width"],
            profile=d.get("profile", "custom"),
        )
        for k in model.params:
            model.params[k] = np.asarray(d["params"][k], dtype=np.float64).reshape(model.params[k].shape)
        return model


class LstmModel:
    """Stacked LSTM with a linear readout of the final top hidden state.

    Gate kernels are fused per layer: W (in, 4H), U (H, 4H), b (4H,) in
    block order [input | forget | candidate | output]. Forget-gate biases
    start at 1 so early training does not wipe the cell state; everything
    else follows the usual equations with sigmoid gates, tanh candidate,
    and h = o * tanh(c). Hidden and cell states reset to zero per window.

    Profile A is one 10-unit layer; profile B stacks two 50-unit layers.
    """

    kind = "lstm"

    def __init__(
        self,
        units: tuple[int, ...] = LSTM_PROFILES["A"],
        rng: Rng | None = None,
        input_size: int = 2,
        output_width: int = 2,
        profile: str = "custom",
    ):
        if not units:
            raise ValueError("at least one recurrent layer is required")
        self.units = tuple(int(u) for u in units)
        self.input_size = int(input_size)
        self.output_width = int(output_width)
        self.profile = profile
        if rng is None:
            rng = Rng(0)
        self.params: dict = {}
        # Draw order: per layer fused W then fused U, bottom to top; readout
        # Wh last. Only the forget-gate bias block starts away from zero.
        d_in = self.input_size
        for l, h in enumerate(self.units):
            self.params[f"W{l}"] = glorot_uniform(rng, d_in, 4 * h)
            self.params[f"U{l}"] = glorot_uniform(rng, h, 4 * h)
            bias = np.zeros(4 * h)
            bias[h : 2 * h] = 1.0
            self.params[f"b{l}"] = bias
            d_in = h
        self.params["Wh"] = glorot_uniform(rng, self.units[-1], self.output_width)
        self.params["bh"] = np.zeros(self.output_width)

    @classmethod
    def from_profile(cls, profile: str, rng: Rng | None = None, input_size: int = 2) -> "LstmModel":
        if profile not in LSTM_PROFILES:
            raise ValueError(f"unknown lstm profile {profile!r}; expected one of {sorted(LSTM_PROFILES)}")
        return cls(units=LSTM_PROFILES[profile], rng=rng, input_size=input_size, profile=profile)

    def _reshape(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] == 0 or x.shape[1] % self.input_size != 0:
            raise ShapeError(
                f"lstm expects (batch, k*{self.input_size}) inputs, got shape {x.shape}"
            )
        return x.reshape(x.shape[0], x.shape[1] // self.input_size, self.input_size)

    def forward_seq(self, seq: np.ndarray):
        """Run the stack over a (batch, timesteps, input_size) sequence."""
        seq = np.asarray(seq, dtype=np.float64)
        if seq.ndim != 3 or seq.shape[2] != self.input_size:
            raise ShapeError(f"lstm sequence must be (batch, steps, {self.input_size}), got {seq.shape}")
        b, n, _ = seq.shape
        layer_in = seq
        caches = []
        for l, h in enumerate(self.units):
            w, u, bias = self.params[f"W{l}"], self.params[f"U{l}"], self.params[f"b{l}"]
            hs = np.zeros((n + 1, b, h))
            cs = np.zeros((n + 1, b, h))
            gates = np.empty((n, b, 4 * h))
            tcs = np.empty((n, b, h))
            for t in range(n):
                z = layer_in[:, t, :] @ w + hs[t] @ u + bias
                gi = sigmoid(z[:, :h])
                gf = sigmoid(z[:, h : 2 * h])
                gg = np.tanh(z[:, 2 * h : 3 * h])
                go = sigmoid(z[:, 3 * h :])
                cs[t + 1] = gf * cs[t] + gi * gg
                tcs[t] = np.tanh(cs[t + 1])
                hs[t + 1] = go * tcs[t]
                gates[t, :, :h] = gi
                gates[t, :, h : 2 * h] = gf
                gates[t, :, 2 * h : 3 * h] = gg
                gates[t, :, 3 * h :] = go
            caches.append((layer_in, hs, cs, gates, tcs))
            layer_in = hs[1:].transpose(1, 0, 2)
        out = caches[-1][1][n] @ self.params["Wh"] + self.params["bh"]
        return out, caches

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward_seq(self._reshape(x))[0]

    def backward(self, x: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
        seq = self._reshape(x)
        b, n, _ = seq.shape
        out, caches = self.forward_seq(seq)
        loss, dout = mse_and_grad(out, np.asarray(y, dtype=np.float64))
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        top_hs = caches[-1][1]
        grads["Wh"] = top_hs[n].T @ dout
        grads["bh"] = dout.sum(axis=0)
        d_above = np.zeros((n, b, self.units[-1]))
        d_above[n - 1] = dout @ self.params["Wh"].T
        for l in range(len(self.units) - 1, -1, -1):
            layer_in, hs, cs, gates, tcs = caches[l]
            h = self.units[l]
            w, u = self.params[f"W{l}"], self.params[f"U{l}"]
            d_below = np.zeros((n, b, layer_in.shape[2])) if l > 0 else None
            dh_carry = np.zeros((b, h))
            dc_carry = np.zeros((b, h))
            for t in range(n - 1, -1, -1):
                dh = d_above[t] + dh_carry
                gi = gates[t, :, :h]
                gf = gates[t, :, h : 2 * h]
                gg = gates[t, :, 2 * h : 3 * h]
                go = gates[t, :, 3 * h :]
                tc = tcs[t]
                dc = dc_carry + dh * go * (1.0 - tc * tc)
                dz = np.empty((b, 4 * h))
                dz[:, :h] = dc * gg * gi * (1.0 - gi)
                dz[:, h : 2 * h] = dc * cs[t] * gf * (1.0 - gf)
                dz[:, 2 * h : 3 * h] = dc * gi * (1.0 - gg * gg)
                dz[:, 3 * h :] = dh * tc * go * (1.0 - go)
                grads[f"W{l}"] += layer_in[:, t, :].T @ dz
                grads[f"U{l}"] += hs[t].T @ dz
                grads[f"b{l}"] += dz.sum(axis=0)
                dh_carry = dz @ u.T
                dc_carry = dc * gf
                if l > 0:
                    d_below[t] = dz @ w.T
            d_above = d_below
        return loss, grads

    def to_dict(self) -> dict:
        return {
            "units": list(self.units),
            "input_size": self.input_size,
            "output_width": self.output_width,
            "profile": self.profile,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LstmModel":
        model = cls(
            units=tuple(d["units"]),
            rng=Rng(0),
            input_size=d["input_size"],
            output_width=d["output_width"],
            profile=d.get("profile", "custom"),
        )
        for k in model.params:
            model.params[k] = np.asarray(d["params"][k], dtype=np.float64).reshape(model.params[k].shape)
        return model
