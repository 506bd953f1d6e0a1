"""Dense two-hidden-layer perceptron with a hand-derived backward pass.

Float64 throughout. Hidden layers use tanh, the output layer is linear.
The backward pass is exact (checked against central finite differences in
the test suite), which is what makes the whole training stack auditable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, NumericError, ValidationError
from .rng import RngState

CHECKPOINT_MAGIC = b"AVCK1"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_LEARNING_RATE = 1e-3


@dataclass
class MlpParams:
    """Weights, biases, and per-parameter Adam moment buffers.

    weights[l] has shape (fan_out, fan_in); biases[l] has shape (fan_out,).
    Moment buffers mirror the parameter shapes exactly.
    """

    weights: list
    biases: list
    activation: str = "tanh"
    m_weights: list = field(default_factory=list)
    v_weights: list = field(default_factory=list)
    m_biases: list = field(default_factory=list)
    v_biases: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValidationError("weights and biases must pair up layer by layer")
        if self.activation != "tanh":
            raise ValidationError(f"unsupported activation {self.activation!r}")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValidationError(f"layer {l}: weight {w.shape} and bias {b.shape} disagree")
            if l > 0 and w.shape[1] != self.weights[l - 1].shape[0]:
                raise ValidationError(
                    f"layer {l}: fan_in {w.shape[1]} != previous fan_out "
                    f"{self.weights[l - 1].shape[0]}"
                )
        if not self.m_weights:
            self.m_weights = [np.zeros_like(w) for w in self.weights]
            self.v_weights = [np.zeros_like(w) for w in self.weights]
            self.m_biases = [np.zeros_like(b) for b in self.biases]
            self.v_biases = [np.zeros_like(b) for b in self.biases]

    @property
    def dims(self) -> tuple:
        """Architecture as (in_dim, h1, ..., out_dim)."""
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            m_weights=[m.copy() for m in self.m_weights],
            v_weights=[v.copy() for v in self.v_weights],
            m_biases=[m.copy() for m in self.m_biases],
            v_biases=[v.copy() for v in self.v_biases],
        )


@dataclass
class MlpGradients:
    weights: list
    biases: list
    input: np.ndarray


@dataclass
class ForwardCache:
    """Activation record from one forward call; consumed by mlp_backward."""

    dims: tuple
    input: np.ndarray
    hidden: list  # post-tanh activations, one per hidden layer
    output: np.ndarray


def init_params(in_dim: int, h1: int, h2: int, out_dim: int, rng: RngState) -> MlpParams:
    """Glorot-uniform weights, zero biases, drawn from the given state."""
    dims = (in_dim, h1, h2, out_dim)
    if any(d < 1 for d in dims):
        raise ValidationError(f"all layer sizes must be >= 1, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = (rng.uniform(size=(fan_out, fan_in)) * 2.0 - 1.0) * bound
        weights.append(np.asarray(w, dtype=np.float64))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpParams(weights=weights, biases=biases)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple:
    """Run the network on one input vector; returns (output, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.in_dim:
        raise ValidationError(f"input length {x.shape} does not match in_dim {params.in_dim}")
    hidden = []
    h = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.tanh(w @ h + b)
        hidden.append(h)
    out = params.weights[-1] @ h + params.biases[-1]
    if not np.all(np.isfinite(out)):
        raise NumericError("mlp_forward produced a non-finite output")
    return out, ForwardCache(dims=params.dims, input=x, hidden=hidden, output=out)


def mlp_backward(params: MlpParams, cache: ForwardCache, output_gradient: np.ndarray) -> MlpGradients:
    """Exact gradients of sum(output_gradient * output) w.r.t. params and input."""
    if cache.dims != params.dims:
        raise ValidationError(
            f"cache architecture {cache.dims} does not match params {params.dims}; "
            "cache must come from a forward call on these params"
        )
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.shape != (params.out_dim,):
        raise ValidationError(f"output_gradient shape {g.shape} != ({params.out_dim},)")

    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.biases)
    upstream = g
    for l in range(len(params.weights) - 1, -1, -1):
        below = cache.hidden[l - 1] if l > 0 else cache.input
        d_weights[l] = np.outer(upstream, below)
        d_biases[l] = upstream.copy()
        upstream = params.weights[l].T @ upstream
        if l > 0:
            upstream = upstream * (1.0 - cache.hidden[l - 1] ** 2)  # tanh'
    return MlpGradients(weights=d_weights, biases=d_biases, input=upstream)


def zero_gradients(params: MlpParams) -> MlpGradients:
    return MlpGradients(
        weights=[np.zeros_like(w) for w in params.weights],
        biases=[np.zeros_like(b) for b in params.biases],
        input=np.zeros(params.in_dim),
    )


def accumulate_gradients(total: MlpGradients, part: MlpGradients, scale: float = 1.0) -> None:
    for l in range(len(total.weights)):
        total.weights[l] += scale * part.weights[l]
        total.biases[l] += scale * part.biases[l]
    total.input += scale * part.input


def adam_update(param, grad, m, v, step_index: int, learning_rate: float,
                beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2, eps: float = ADAM_EPS):
    """In-place Adam update of one parameter array and its moment buffers."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    t = step_index + 1
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)


def optimizer_step(params: MlpParams, grads: MlpGradients, learning_rate: float,
                   step_index: int) -> MlpParams:
    """One Adam step over every layer; mutates params and returns it.

    step_index counts from 0; bias correction uses step_index + 1.
    """
    if learning_rate <= 0:
        raise ValidationError(f"learning_rate must be > 0, got {learning_rate}")
    for l in range(len(params.weights)):
        for path, g in ((f"weights[{l}]", grads.weights[l]), (f"biases[{l}]", grads.biases[l])):
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient at {path}")
    for l in range(len(params.weights)):
        adam_update(params.weights[l], grads.weights[l], params.m_weights[l],
                    params.v_weights[l], step_index, learning_rate)
        adam_update(params.biases[l], grads.biases[l], params.m_biases[l],
                    params.v_biases[l], step_index, learning_rate)
    return params


def flatten_params(params: MlpParams) -> np.ndarray:
    """All weights and biases as one vector, in declaration order."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def set_flat_params(params: MlpParams, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=np.float64)
    off = 0
    for w, b in zip(params.weights, params.biases):
        w[...] = flat[off:off + w.size].reshape(w.shape)
        off += w.size
        b[...] = flat[off:off + b.size]
        off += b.size
    if off != flat.size:
        raise ValidationError(f"flat vector length {flat.size} != parameter count {off}")


def flatten_gradients(grads: MlpGradients) -> np.ndarray:
    parts = []
    for w, b in zip(grads.weights, grads.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def save_checkpoint(params: MlpParams, path) -> None:
    """Little-endian binary: magic, u32 dim count, u32 dims, float64 W/b per layer."""
    dims = params.dims
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> MlpParams:
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(offset, count):
        if offset + count > len(blob):
            raise FormatError(f"checkpoint truncated at byte {len(blob)}, needed {offset + count}")
        return blob[offset:offset + count], offset + count

    head, off = take(0, len(CHECKPOINT_MAGIC))
    if head != CHECKPOINT_MAGIC:
        if head[:4] == CHECKPOINT_MAGIC[:4]:
            raise FormatError(f"unsupported checkpoint version {head[4:5]!r}")
        raise FormatError(f"bad checkpoint magic {head!r}")
    raw, off = take(off, 4)
    (ndims,) = struct.unpack("<I", raw)
    if ndims < 2 or ndims > 16:
        raise FormatError(f"implausible dim count {ndims} at byte {off - 4}")
    raw, off = take(off, 4 * ndims)
    dims = struct.unpack(f"<{ndims}I", raw)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        raw, off = take(off, 8 * fan_out * fan_in)
        weights.append(np.frombuffer(raw, dtype="<f8").reshape(fan_out, fan_in).copy())
        raw, off = take(off, 8 * fan_out)
        biases.append(np.frombuffer(raw, dtype="<f8").copy())
    if off != len(blob):
        raise FormatError(f"trailing bytes after offset {off}")
    return MlpParams(weights=weights, biases=biases)
