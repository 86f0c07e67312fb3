"""Small double-precision neural-network engine.

A single-layer LSTM (standard non-peephole cell) feeding a scalar dense head,
with hand-derived backpropagation through time, Adam, and a central
finite-difference checker.

Gate blocks are stacked in the order ``i, f, o, g`` along the first axis of
``W`` (4H x I), ``U`` (4H x H) and ``b`` (4H,).  Batched inputs have shape
``(batch, time, features)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import CheckpointError, NonFiniteLoss, ShapeMismatch

GATES = ("i", "f", "o", "g")
DEFAULT_HIDDEN = 16
DEFAULT_INPUT = 4

CHECKPOINT_MAGIC = "thermocast-checkpoint"
CHECKPOINT_VERSION = 1


def sigmoid(z):
    # tanh form avoids overflow warnings for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class LSTMParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        U = np.asarray(self.U, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] % 4:
            raise ShapeMismatch(f"W must be (4H, I), got {W.shape}")
        h = W.shape[0] // 4
        if U.shape != (4 * h, h) or b.shape != (4 * h,):
            raise ShapeMismatch(f"inconsistent LSTM shapes W{W.shape} U{U.shape} b{b.shape}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "b", b)

    @property
    def hidden_size(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(W_x, U_x, b_x)`` views for gate ``name`` in ``i, f, o, g``."""
        k, h = GATES.index(name), self.hidden_size
        sl = slice(k * h, (k + 1) * h)
        return self.W[sl], self.U[sl], self.b[sl]


@dataclass(frozen=True, eq=False)
class DenseParams:
    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1:
            raise ShapeMismatch(f"dense weights must be a vector, got {w.shape}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))


@dataclass
class LSTMCache:
    """Activations kept by :func:`lstm_forward` for the backward pass."""

    xs: np.ndarray              # (B, T, I)
    h: list = field(default_factory=list)      # T+1 entries of (B, H)
    c: list = field(default_factory=list)
    gates: list = field(default_factory=list)  # T entries of (i, f, o, g, tanh c)


def _as_batch(sequence, input_size: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(sequence, dtype=np.float64)
    single = x.ndim == 2 or (x.ndim == 1 and x.size == 0)
    if x.ndim == 1 and x.size == 0:
        x = x.reshape(0, input_size)
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != input_size:
        raise ShapeMismatch(f"expected input vectors of length {input_size}, got array {np.shape(sequence)}")
    return x, single


def lstm_forward(params: LSTMParams, sequence) -> tuple[np.ndarray, LSTMCache]:
    """Run the LSTM over ``sequence`` from zero initial state.

    ``sequence`` is ``(T, I)`` or ``(B, T, I)``.  Returns the final hidden state
    (``(H,)`` or ``(B, H)``) and the cache for :func:`lstm_backward`.
    """
    x, single = _as_batch(sequence, params.input_size)
    B, T, _ = x.shape
    H = params.hidden_size
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = LSTMCache(x, [h], [c], [])
    # input projection for all steps at once
    zx = x @ params.W.T + params.b
    UT = params.U.T
    for t in range(T):
        z = zx[:, t] + h @ UT
        s = sigmoid(z[:, :3 * H])
        i, f, o = s[:, :H], s[:, H:2 * H], s[:, 2 * H:]
        g = np.tanh(z[:, 3 * H:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.h.append(h)
        cache.c.append(c)
        cache.gates.append((i, f, o, g, tc))
    return (h[0] if single else h), cache


def lstm_backward(params: LSTMParams, cache: LSTMCache, dh_final) -> LSTMParams:
    """Gradients of a scalar loss w.r.t. LSTM parameters given dL/dh_T."""
    H = params.hidden_size
    x = cache.xs
    B, T, _ = x.shape
    dh = np.asarray(dh_final, dtype=np.float64).reshape(B, H)
    dc = np.zeros((B, H))
    dz_all = np.empty((B, T, 4 * H))
    dU = np.zeros_like(params.U)
    U = params.U
    for t in range(T - 1, -1, -1):
        i, f, o, g, tc = cache.gates[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * cache.c[t] * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H:] = dc * i * (1.0 - g * g)
        dU += dz.T @ cache.h[t]
        dh = dz @ U
        dc = dc * f
    flat_dz = dz_all.reshape(B * T, 4 * H)
    dW = flat_dz.T @ x.reshape(B * T, -1)
    db = flat_dz.sum(axis=0)
    return LSTMParams(dW, dU, db)


def dense_forward(params: DenseParams, h):
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.w.shape[0]:
        raise ShapeMismatch(f"hidden size {h.shape[-1]} does not match dense weights {params.w.shape[0]}")
    y = h @ params.w + params.b
    return float(y) if np.ndim(y) == 0 else y


def dense_backward(params: DenseParams, h: np.ndarray, dy: np.ndarray) -> tuple[DenseParams, np.ndarray]:
    dy = np.asarray(dy, dtype=np.float64)
    return DenseParams(dy @ h, float(dy.sum())), np.outer(dy, params.w)


def compute_gradients(
    lstm: LSTMParams,
    head: DenseParams,
    inputs: np.ndarray,
    output_loss: Callable[[np.ndarray], tuple[float, np.ndarray, dict]],
) -> tuple[float, LSTMParams, DenseParams, dict]:
    """Reverse-mode gradients of ``output_loss(dense(lstm(inputs)))``.

    ``output_loss`` maps the batch of network outputs to ``(loss, dloss/doutput,
    extra)``, where ``extra`` carries gradients of parameters living outside the
    network (e.g. physics coefficients) and is passed through untouched.

    Raises
    ------
    NonFiniteLoss
        The loss or any gradient is NaN/inf.
    """
    if len(inputs) == 0:
        raise ValueError("batch must be non-empty")
    h, cache = lstm_forward(lstm, inputs)
    h = np.atleast_2d(h)
    y = dense_forward(head, h)
    loss, dy, extra = output_loss(np.atleast_1d(y))
    if not math.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    g_head, dh = dense_backward(head, h, dy)
    g_lstm = lstm_backward(lstm, cache, dh)
    for arr in (g_lstm.W, g_lstm.U, g_lstm.b, g_head.w):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteLoss("non-finite gradient")
    return loss, g_lstm, g_head, extra


# ---------------------------------------------------------------------------
# flat parameter vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterVector:
    """Flat view of named parameter arrays with a fixed, documented order.

    ``layout`` lists ``(name, shape)`` pairs; ``values`` concatenates the
    row-major ravel of each array in that order.
    """

    layout: tuple
    values: np.ndarray

    def __post_init__(self):
        layout = tuple((str(n), tuple(int(s) for s in shape)) for n, shape in self.layout)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        size = sum(int(np.prod(s)) for _, s in layout)
        if values.size != size:
            raise ShapeMismatch(f"layout needs {size} values, got {values.size}")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ParameterVector":
        layout = tuple((k, np.shape(v)) for k, v in arrays.items())
        values = np.concatenate([np.asarray(v, dtype=np.float64).reshape(-1) for v in arrays.values()]) \
            if arrays else np.zeros(0)
        return cls(layout, values)

    def to_arrays(self) -> dict[str, np.ndarray]:
        """Views into ``values`` (0-d entries come back as 0-d arrays)."""
        out, pos = {}, 0
        for name, shape in self.layout:
            n = int(np.prod(shape))
            out[name] = self.values[pos:pos + n].reshape(shape)
            pos += n
        return out

    def with_values(self, values) -> "ParameterVector":
        return ParameterVector(self.layout, values)

    def __len__(self) -> int:
        return self.values.size

    def names(self) -> list[str]:
        """One label per scalar, e.g. ``lstm.W[3,1]``."""
        labels = []
        for name, shape in self.layout:
            for idx in np.ndindex(*shape) if shape else [()]:
                labels.append(f"{name}[{','.join(map(str, idx))}]" if idx else name)
        return labels


def network_arrays(lstm: LSTMParams, head: DenseParams) -> dict[str, np.ndarray]:
    return {"lstm.W": lstm.W, "lstm.U": lstm.U, "lstm.b": lstm.b,
            "dense.w": head.w, "dense.b": np.asarray(head.b)}


def network_from_arrays(arrays: Mapping[str, np.ndarray]) -> tuple[LSTMParams, DenseParams]:
    return (LSTMParams(arrays["lstm.W"], arrays["lstm.U"], arrays["lstm.b"]),
            DenseParams(arrays["dense.w"], float(arrays["dense.b"])))


# ---------------------------------------------------------------------------
# initialisation and optimisation
# ---------------------------------------------------------------------------

def init_params(seed, hidden_size: int = DEFAULT_HIDDEN, input_size: int = DEFAULT_INPUT,
                scheme: str = "uniform_fan_in", forget_bias: float = 1.0) -> tuple[LSTMParams, DenseParams]:
    """Draw initial network parameters.

    ``uniform_fan_in`` samples every weight matrix uniformly in
    ``+-1/sqrt(fan_in)`` (fan-in = input size for ``W``, hidden size for ``U``
    and the dense head).  Biases start at zero except the forget gate.
    ``zeros`` gives an all-zero network (forget bias included).
    """
    rng = np.random.default_rng(seed)
    H, I = hidden_size, input_size
    b = np.zeros(4 * H)
    if scheme == "zeros":
        return LSTMParams(np.zeros((4 * H, I)), np.zeros((4 * H, H)), b), DenseParams(np.zeros(H), 0.0)
    if scheme != "uniform_fan_in":
        raise ValueError(f"unknown init scheme {scheme!r}")
    W = rng.uniform(-1 / math.sqrt(I), 1 / math.sqrt(I), size=(4 * H, I))
    U = rng.uniform(-1 / math.sqrt(H), 1 / math.sqrt(H), size=(4 * H, H))
    w = rng.uniform(-1 / math.sqrt(H), 1 / math.sqrt(H), size=H)
    b[H:2 * H] = forget_bias
    return LSTMParams(W, U, b), DenseParams(w, 0.0)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **hyper) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, **hyper)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new arrays, inputs are not modified."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeMismatch(f"length mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences ``(f(x + h e_k) - f(x - h e_k)) / 2h``."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    for k in range(x.size):
        old = x[k]
        x[k] = old + step
        fp = f(x)
        x[k] = old - step
        fm = f(x)
        x[k] = old
        g[k] = (fp - fm) / (2 * step)
    return g


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-300) * 2


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: Union[str, Path], family: str, vector: ParameterVector,
                    metadata: Mapping | None = None) -> Path:
    """Write a JSON checkpoint with magic string, version and layout.

    Floats are emitted with ``repr`` precision, so reloading is lossless.
    """
    doc = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "family": family,
        "layout": [[name, list(shape)] for name, shape in vector.layout],
        "values": vector.values.tolist(),
        "metadata": dict(metadata or {}),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path: Union[str, Path]) -> tuple[str, ParameterVector, dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("magic") != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a thermocast checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    vector = ParameterVector(tuple((n, tuple(s)) for n, s in doc["layout"]), doc["values"])
    return doc["family"], vector, doc.get("metadata", {})
