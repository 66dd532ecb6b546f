"""Dense feed-forward network engine with analytic reverse-mode gradients.

All parameters of a network live in a single flat float64 vector with a
frozen canonical layout: for each consecutive layer pair (n_in, n_out), the
weight matrix of shape (n_in, n_out) flattened row-major, then the bias
vector of length n_out. A layer maps ``a`` to ``a @ W + b``. This layout is
the wire contract between code that generates weights for another network
and the network consuming them, so it must never change.

`forward`/`backward` accept a single input vector or a batch of row vectors.
Gradients are exact reverse-mode results with respect to both the parameter
vector and the input; `grad_check` verifies them against central finite
differences. Everything here is a pure function over explicit state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Activation",
    "NetShape",
    "ForwardCache",
    "AdamState",
    "param_count",
    "layer_slices",
    "init_params",
    "forward",
    "backward",
    "fd_grads",
    "max_relative_error",
    "grad_check",
    "adam_step",
]


class Activation(enum.Enum):
    """Hidden-layer activation. The output layer is always linear."""

    ELU = "elu"
    IDENTITY = "identity"


@dataclass(frozen=True)
class NetShape:
    """Widths of a dense multilayer perceptron: input, hidden..., output."""

    layer_sizes: tuple[int, ...]
    activation: Activation = Activation.ELU

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("layer_sizes needs at least an input and an output width")
        if min(sizes) < 1:
            raise ValueError(f"all layer widths must be >= 1, got {sizes}")
        if not isinstance(self.activation, Activation):
            raise ValueError(f"unknown activation: {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def layer_pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))


def param_count(shape: NetShape) -> int:
    """Length of the flat parameter vector for `shape`."""
    return sum(n_in * n_out + n_out for n_in, n_out in shape.layer_pairs())


def layer_slices(shape: NetShape) -> list[tuple[slice, slice, tuple[int, int]]]:
    """Per layer: (weight slice, bias slice, (n_in, n_out)) into the flat vector."""
    out = []
    pos = 0
    for n_in, n_out in shape.layer_pairs():
        w = slice(pos, pos + n_in * n_out)
        b = slice(w.stop, w.stop + n_out)
        pos = b.stop
        out.append((w, b, (n_in, n_out)))
    return out


def init_params(shape: NetShape, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases, deterministic given `seed`.

    Per layer, weights are drawn uniformly from
    [-sqrt(6/(n_in+n_out)), +sqrt(6/(n_in+n_out))].
    """
    rng = np.random.default_rng(seed)
    parts = []
    for n_in, n_out in shape.layer_pairs():
        limit = math.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-limit, limit, size=n_in * n_out))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts)


def _elu(z: np.ndarray) -> np.ndarray:
    # expm1 only on the negative part; avoids overflow warnings on large z
    out = z.copy()
    neg = z < 0
    out[neg] = np.expm1(z[neg])
    return out


def _elu_prime(z: np.ndarray) -> np.ndarray:
    out = np.ones_like(z)
    neg = z < 0
    out[neg] = np.exp(z[neg])
    return out


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, consumed by `backward`.

    Valid only for the exact (params, input) pair that produced it.
    """

    params: np.ndarray
    zs: list = field(default_factory=list)
    acts: list = field(default_factory=list)


def _check_params(shape: NetShape, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.size != param_count(shape):
        raise ValueError(
            f"parameter vector has length {params.size}, "
            f"shape {shape.layer_sizes} needs {param_count(shape)}"
        )
    return params


def forward(
    shape: NetShape, params: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on `x` (one vector, or a batch of row vectors).

    Returns the output (same leading dimensions as `x`) and the cache needed
    for `backward`. Hidden layers use the shape's activation; the output
    layer is linear. ELU(z) = z for z >= 0 and exp(z) - 1 otherwise.
    """
    params = _check_params(shape, params)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != shape.n_in:
        raise ValueError(
            f"input of shape {x.shape} does not match first layer size {shape.n_in}"
        )
    slices = layer_slices(shape)
    cache = ForwardCache(params=params, acts=[x])
    a = x
    for i, (ws, bs, (n_in, n_out)) in enumerate(slices):
        w = params[ws].reshape(n_in, n_out)
        z = a @ w + params[bs]
        cache.zs.append(z)
        if i < len(slices) - 1 and shape.activation is Activation.ELU:
            a = _elu(z)
        else:
            a = z
        cache.acts.append(a)
    return a, cache


def backward(
    shape: NetShape, params: np.ndarray, cache: ForwardCache, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse-mode gradients of ``sum(upstream * output)``.

    Returns (grad_params, grad_input). grad_params is a flat vector in the
    canonical layout (summed over the batch when the input was a batch);
    grad_input has the same shape as the forward input. `params` must be the
    same array object the cache was built with.
    """
    params = np.asarray(params, dtype=np.float64)
    if cache.params is not params:
        raise ValueError("cache was produced with a different parameter vector")
    out = cache.acts[-1]
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != out.shape:
        raise ValueError(
            f"upstream of shape {upstream.shape} does not match output shape {out.shape}"
        )
    slices = layer_slices(shape)
    grad = np.zeros_like(params)
    delta = upstream
    for i in range(len(slices) - 1, -1, -1):
        ws, bs, (n_in, n_out) = slices[i]
        w = params[ws].reshape(n_in, n_out)
        a_prev = cache.acts[i]
        if delta.ndim == 1:
            grad[ws] = np.outer(a_prev, delta).ravel()
            grad[bs] = delta
        else:
            grad[ws] = (a_prev.T @ delta).ravel()
            grad[bs] = delta.sum(axis=0)
        delta = delta @ w.T
        if i > 0 and shape.activation is Activation.ELU:
            delta = delta * _elu_prime(cache.zs[i - 1])
    return grad, delta


def fd_grads(
    shape: NetShape,
    params: np.ndarray,
    x: np.ndarray,
    upstream: np.ndarray,
    step: float = 1e-5,
) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences of ``sum(upstream * output)``.

    The slow, independent oracle for `backward`. Returns (grad_params,
    grad_input) with the same shapes as the analytic results.
    """
    upstream = np.asarray(upstream, dtype=np.float64)

    def objective(p: np.ndarray, xx: np.ndarray) -> float:
        y, _ = forward(shape, p, xx)
        return float(np.sum(upstream * y))

    p = _check_params(shape, params).copy()
    g_params = np.zeros_like(p)
    for j in range(p.size):
        orig = p[j]
        p[j] = orig + step
        hi = objective(p, x)
        p[j] = orig - step
        lo = objective(p, x)
        p[j] = orig
        g_params[j] = (hi - lo) / (2.0 * step)

    xx = np.asarray(x, dtype=np.float64).copy()
    flat = xx.reshape(-1)
    g_input = np.zeros_like(flat)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        hi = objective(p, xx)
        flat[j] = orig - step
        lo = objective(p, xx)
        flat[j] = orig
        g_input[j] = (hi - lo) / (2.0 * step)
    return g_params, g_input.reshape(xx.shape)


def max_relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """max over coordinates of |a - b| / max(1e-12, |a| + |b|)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    denom = np.maximum(1e-12, np.abs(a) + np.abs(b))
    return float(np.max(np.abs(a - b) / denom))


def grad_check(
    shape: NetShape,
    params: np.ndarray,
    x: np.ndarray,
    upstream: np.ndarray,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and finite-difference gradients,
    taken over all parameter and input coordinates."""
    params = _check_params(shape, params)
    _, cache = forward(shape, params, x)
    g_params, g_input = backward(shape, params, cache, upstream)
    f_params, f_input = fd_grads(shape, params, x, upstream, step=step)
    return max(
        max_relative_error(g_params, f_params),
        max_relative_error(g_input, f_input),
    )


@dataclass
class AdamState:
    """Adam moment estimates and step counter for one parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.m.shape != self.v.shape or self.m.ndim != 1:
            raise ValueError("moment vectors must be 1-D and of equal length")
        if self.step < 0:
            raise ValueError("step counter must be >= 0")

    @classmethod
    def init(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def adam_step(
    state: AdamState, params: np.ndarray, grads: np.ndarray, lr: float
) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update. Returns new (state, params); inputs
    are not mutated. Rejects non-finite gradient entries."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if not (state.m.size == params.size == grads.size):
        raise ValueError("parameter, gradient, and moment vectors must have equal length")
    if not np.all(np.isfinite(grads)):
        bad = int(np.count_nonzero(~np.isfinite(grads)))
        raise ValueError(f"{bad} non-finite gradient entries")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(
        m=m, v=v, step=t, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )
    return new_state, new_params
