"""Numerical substrate: matrices, activations, seeded PRNG, init, grad checking.

Matrices are plain 2-D float64 numpy arrays in row-major order. The PRNG is
xoshiro256** with its state expanded from the seed via splitmix64, so a given
seed yields the same stream on every platform and Python build; nothing here
touches the interpreter's global random state.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """splitmix64 finalizer: one 64-bit avalanche step."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    """Deterministic child seed for a task path under a master seed.

    Folds each index into the running state with splitmix64 mixing:
    ``z = mix(seed); z = mix(z ^ mix(i))`` for every index in order. The same
    (seed, indices) pair always maps to the same child, and siblings do not
    collide in practice.
    """
    z = _mix64(seed & _MASK64)
    for ix in indices:
        z = _mix64(z ^ _mix64(ix & _MASK64))
    return z


class Rng:
    """xoshiro256** generator seeded through splitmix64.

    Draw conventions (each documented call consumes a fixed number of raw
    64-bit draws, so streams can be reasoned about):

    - ``uniform``/``uniforms``: one draw per value, top 53 bits -> [0, 1).
    - ``randrange(n)``: one draw, reduced modulo n.
    - ``shuffle``: Fisher-Yates from the back, one draw per position
      (len - 1 draws).
    - ``indices(n, count)``: count draws, each reduced modulo n.
    """

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        state = seed & _MASK64
        words = []
        for _ in range(4):
            state = (state + _GOLDEN) & _MASK64
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            words.append(z ^ (z >> 31))
        self._s = tuple(words)

    def next_uint64(self) -> int:
        s0, s1, s2, s3 = self._s
        r = (s1 * 5) & _MASK64
        r = ((r << 7) | (r >> 57)) & _MASK64
        r = (r * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s = (s0, s1, s2, s3)
        return r

    def uniform(self) -> float:
        """One draw in [0, 1) with 53-bit resolution."""
        return (self.next_uint64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        """n consecutive uniform draws in [0, 1) as a float64 vector."""
        s0, s1, s2, s3 = self._s
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            r = (s1 * 5) & _MASK64
            r = ((r << 7) | (r >> 57)) & _MASK64
            r = (r * 9) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
            out[i] = (r >> 11) * 2.0**-53
        self._s = (s0, s1, s2, s3)
        return out

    def randrange(self, n: int) -> int:
        """One draw reduced modulo n (n >= 1)."""
        if n < 1:
            raise ValueError("randrange needs n >= 1")
        return self.next_uint64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, back to front."""
        s0, s1, s2, s3 = self._s
        for i in range(len(items) - 1, 0, -1):
            r = (s1 * 5) & _MASK64
            r = ((r << 7) | (r >> 57)) & _MASK64
            r = (r * 9) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
            j = r % (i + 1)
            items[i], items[j] = items[j], items[i]
        self._s = (s0, s1, s2, s3)

    def indices(self, n: int, count: int) -> np.ndarray:
        """count indices drawn uniformly (with replacement) from range(n)."""
        if n < 1:
            raise ValueError("indices needs n >= 1")
        s0, s1, s2, s3 = self._s
        out = np.empty(count, dtype=np.int64)
        for i in range(count):
            r = (s1 * 5) & _MASK64
            r = ((r << 7) | (r >> 57)) & _MASK64
            r = (r * 9) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
            out[i] = r % n
        self._s = (s0, s1, s2, s3)
        return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit conformance checking."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul mismatch: ({a.shape[0]}x{a.shape[1]}) @ ({b.shape[0]}x{b.shape[1]})")
    return a @ b


ACTIVATION_KINDS = ("tanh", "linear", "relu", "sigmoid", "softmax")


def sigmoid(m: np.ndarray) -> np.ndarray:
    # exp overflow for very negative inputs saturates to 0, which is the
    # correct limit; silence the spurious warning only.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(m, dtype=np.float64)))


def softmax(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"softmax expects a 2-D array, got shape {m.shape}")
    z = m - m.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def apply_activation(m: np.ndarray, kind: str) -> np.ndarray:
    """Apply a named activation; softmax acts row-wise, the rest elementwise."""
    m = np.asarray(m, dtype=np.float64)
    if kind == "tanh":
        return np.tanh(m)
    if kind == "linear":
        return m.copy()
    if kind == "relu":
        return np.maximum(m, 0.0)
    if kind == "sigmoid":
        return sigmoid(m)
    if kind == "softmax":
        return softmax(m)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATION_KINDS}")


def activation_derivative(kind: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    """Elementwise derivative d(post)/d(pre) for the non-softmax activations.

    relu uses subgradient 0 at exactly 0. softmax has no elementwise
    derivative; its backward pass goes through softmax_vjp.
    """
    if kind == "tanh":
        return 1.0 - post * post
    if kind == "linear":
        return np.ones_like(pre)
    if kind == "relu":
        return (pre > 0.0).astype(np.float64)
    if kind == "sigmoid":
        return post * (1.0 - post)
    if kind == "softmax":
        raise ValueError("softmax has no elementwise derivative; use softmax_vjp")
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATION_KINDS}")


def softmax_vjp(post: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Row-wise vector-Jacobian product for softmax.

    Given post = softmax(pre) and grad = dL/d(post), returns dL/d(pre)
    using the full Jacobian p_j (delta_ij - p_i), not the cross-entropy
    shortcut.
    """
    inner = (grad * post).sum(axis=1, keepdims=True)
    return post * (grad - inner)


def glorot_uniform(rng: Rng, rows: int, cols: int) -> np.ndarray:
    """(rows x cols) matrix, entries uniform on +-sqrt(6 / (rows + cols)).

    Consumes exactly rows * cols draws, filled in row-major order; each
    entry is bound * (2u - 1) for one uniform u.
    """
    bound = math.sqrt(6.0 / (rows + cols))
    u = rng.uniforms(rows * cols)
    return ((2.0 * u - 1.0) * bound).reshape(rows, cols)


def grad_check(
    f: Callable[[np.ndarray], float],
    analytic_grad: Sequence[float] | np.ndarray,
    point: Sequence[float] | np.ndarray,
    step: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Per coordinate: |num - ana| / max(1e-8, |num| + |ana|) with
    num = (f(x + h e_i) - f(x - h e_i)) / (2h). The point is restored
    between evaluations, so f may read it by reference.
    """
    point = np.array(point, dtype=np.float64).ravel()
    ana = np.asarray(analytic_grad, dtype=np.float64).ravel()
    if ana.shape != point.shape:
        raise ShapeError(f"gradient shape {ana.shape} does not match point shape {point.shape}")
    worst = 0.0
    for i in range(point.size):
        orig = point[i]
        point[i] = orig + step
        f_plus = float(f(point))
        point[i] = orig - step
        f_minus = float(f(point))
        point[i] = orig
        num = (f_plus - f_minus) / (2.0 * step)
        denom = max(1e-8, abs(num) + abs(ana[i]))
        err = abs(num - ana[i]) / denom
        if err > worst:
            worst = err
    return worst
