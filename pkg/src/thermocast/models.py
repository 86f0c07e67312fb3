"""Model families: lagged linear baseline, LSTM regressor, and the PC-RNN.

The PC-RNN adds a physics head with three trainable coefficients to the LSTM
regressor.  The head predicts the per-step bearing temperature change from the
raw current state ``x_t``::

    dT_phys = lambda1 * (T^a_t - T^b_{t-1}) + lambda2 * omega_t + lambda3 * P_t

and the loss softly ties the network's implied change ``T_hat_t - T^b_{t-1}``
to it (weight ``alpha_weight``).  The network itself sees standardized states;
the physics head sees raw SCADA units, so lambda absorbs ``dt / C_p`` and the
kW scaling.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import CheckpointError, NotEnoughWindows, RankDeficientWarning, ShapeMismatch
from .nn_core import (
    DenseParams,
    LSTMParams,
    ParameterVector,
    compute_gradients,
    dense_forward,
    init_params,
    load_checkpoint,
    lstm_forward,
    network_arrays,
    network_from_arrays,
    save_checkpoint,
)
from .scada_data import (
    AMBIENT,
    POWER,
    PREV_TEMP,
    ROTOR,
    StandardizationStats,
    WindowSample,
    WindowSet,
    destandardize_temp,
    standardize_states,
)

FAMILIES = ("linear", "rnn", "pcrnn")
LINEAR_FEATURES = ("temp_diff", "rotor_speed", "power")
DEFAULT_ALPHA_WEIGHT = 0.25
_PREDICT_CHUNK = 32768


def _states_of(windows) -> tuple[np.ndarray, bool]:
    if isinstance(windows, WindowSample):
        return windows.states[None], True
    if isinstance(windows, WindowSet):
        return windows.states, False
    arr = np.asarray(windows, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None], True
    return arr, False


# ---------------------------------------------------------------------------
# linear baseline
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearModel:
    """``T^b_t = theta + sum_{k,j} Theta[k, j] * X[k, j]``; row ``k`` is lag ``k``."""

    intercept: float
    coefs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefs, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != len(LINEAR_FEATURES):
            raise ShapeMismatch(f"coefficients must be (M+1, 3), got {c.shape}")
        object.__setattr__(self, "coefs", c)
        object.__setattr__(self, "intercept", float(self.intercept))

    family = "linear"

    @property
    def lags(self) -> int:
        return self.coefs.shape[0] - 1

    def predict(self, windows):
        return linear_predict(self, windows)


def linear_features(windows) -> np.ndarray:
    """Lag-major feature matrix ``(M+1, 3)`` (or ``(n, M+1, 3)`` for a batch).

    Row ``k`` holds ``(T^a_{t-k} - T^b_{t-k-1}, omega_{t-k}, P_{t-k})`` in raw units.
    """
    states, single = _states_of(windows)
    rev = states[:, ::-1, :]
    X = np.stack([rev[..., AMBIENT] - rev[..., PREV_TEMP], rev[..., ROTOR], rev[..., POWER]], axis=-1)
    return X[0] if single else X


def fit_linear(windows: WindowSet) -> LinearModel:
    """Ordinary least squares on the lagged features.

    Solved with an SVD-based least-squares routine.  A rank-deficient design
    (e.g. an always-idle turbine) emits :class:`RankDeficientWarning` and
    returns the minimum-norm solution.
    """
    M = windows.lags
    n_params = (M + 1) * len(LINEAR_FEATURES) + 1
    if len(windows) < n_params:
        raise NotEnoughWindows(f"linear fit needs at least {n_params} windows, got {len(windows)}")
    X = linear_features(windows).reshape(len(windows), -1)
    A = np.column_stack([np.ones(len(windows)), X])
    sol, _, rank, _ = np.linalg.lstsq(A, windows.targets, rcond=None)
    if rank < A.shape[1]:
        warnings.warn(f"design matrix rank {rank} < {A.shape[1]}; using the minimum-norm solution",
                      RankDeficientWarning, stacklevel=2)
    return LinearModel(sol[0], sol[1:].reshape(M + 1, len(LINEAR_FEATURES)))


def linear_predict(model: LinearModel, windows):
    X = linear_features(windows)
    if X.shape[-2:] != model.coefs.shape:
        raise ShapeMismatch(f"window features {X.shape[-2:]} do not match model {model.coefs.shape}")
    y = model.intercept + np.einsum("...kj,kj->...", X, model.coefs)
    return float(y) if np.ndim(y) == 0 else y


def save_linear_csv(model: LinearModel, path: Union[str, Path]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["key", "lag", "feature", "value"])
    w.writerow(["M", "", "", model.lags])
    w.writerow(["N", "", "", len(LINEAR_FEATURES)])
    w.writerow(["theta", "", "", repr(model.intercept)])
    for k in range(model.lags + 1):
        for j, name in enumerate(LINEAR_FEATURES):
            w.writerow(["Theta", k, name, repr(float(model.coefs[k, j]))])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")
    return path


def load_linear_csv(path: Union[str, Path]) -> LinearModel:
    rows = list(csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8"))))
    if not rows or rows[0] != ["key", "lag", "feature", "value"]:
        raise CheckpointError(f"{path} is not a linear-model CSV")
    meta = {r[0]: r[3] for r in rows[1:] if r and r[0] in ("M", "N", "theta")}
    try:
        M, N = int(meta["M"]), int(meta["N"])
        coefs = np.full((M + 1, N), np.nan)
        for r in rows[1:]:
            if r and r[0] == "Theta":
                coefs[int(r[1]), LINEAR_FEATURES.index(r[2])] = float(r[3])
        model = LinearModel(float(meta["theta"]), coefs)
    except (KeyError, ValueError, IndexError) as exc:
        raise CheckpointError(f"{path}: malformed linear-model CSV ({exc})") from exc
    if np.isnan(model.coefs).any():
        raise CheckpointError(f"{path}: missing Theta entries")
    return model


# ---------------------------------------------------------------------------
# recurrent models
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RNNModel:
    lstm: LSTMParams
    head: DenseParams
    stats: StandardizationStats

    family = "rnn"

    def predict(self, windows):
        return rnn_predict(self, windows)

    def arrays(self) -> dict[str, np.ndarray]:
        return network_arrays(self.lstm, self.head)


@dataclass(frozen=True, eq=False)
class PCRNNModel:
    rnn: RNNModel
    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(lam)):
            raise ValueError("physics coefficients must be finite")
        object.__setattr__(self, "lambdas", lam)

    family = "pcrnn"

    @property
    def stats(self) -> StandardizationStats:
        return self.rnn.stats

    def predict(self, windows):
        return rnn_predict(self.rnn, windows)

    def arrays(self) -> dict[str, np.ndarray]:
        out = self.rnn.arrays()
        out["physics.lambda"] = self.lambdas
        return out


def init_rnn(stats: StandardizationStats, seed, hidden_size: int = 16) -> RNNModel:
    lstm, head = init_params(seed, hidden_size=hidden_size, input_size=4)
    return RNNModel(lstm, head, stats)


def init_pcrnn(stats: StandardizationStats, seed, hidden_size: int = 16) -> PCRNNModel:
    """Network drawn exactly as :func:`init_rnn` with the same seed; lambda = 0."""
    return PCRNNModel(init_rnn(stats, seed, hidden_size), np.zeros(3))


def rnn_predict(model: RNNModel, windows):
    """Nowcast ``T^b_t`` in degC from raw windows (standardized internally)."""
    states, single = _states_of(windows)
    if states.shape[-1] != model.lstm.input_size:
        raise ShapeMismatch(f"state vectors have {states.shape[-1]} features, model expects {model.lstm.input_size}")
    out = np.empty(states.shape[0])
    for lo in range(0, states.shape[0], _PREDICT_CHUNK):
        x = standardize_states(states[lo:lo + _PREDICT_CHUNK], model.stats)
        h, _ = lstm_forward(model.lstm, x)
        out[lo:lo + _PREDICT_CHUNK] = dense_forward(model.head, h)
    out = destandardize_temp(out, model.stats)
    return float(out[0]) if single else out


def model_vector(model) -> ParameterVector:
    return ParameterVector.from_arrays(model.arrays())


def model_with_vector(model, vector: Union[ParameterVector, np.ndarray]):
    """Copy of ``model`` with parameters replaced (layout must match)."""
    if not isinstance(vector, ParameterVector):
        vector = model_vector(model).with_values(vector)
    arrays = vector.to_arrays()
    lstm, head = network_from_arrays(arrays)
    if isinstance(model, PCRNNModel):
        return PCRNNModel(RNNModel(lstm, head, model.stats), arrays["physics.lambda"])
    return RNNModel(lstm, head, model.stats)


# ---------------------------------------------------------------------------
# physics head and loss
# ---------------------------------------------------------------------------

def physics_features(x_t) -> np.ndarray:
    """``(T^a_t - T^b_{t-1}, omega_t, P_t)`` from raw current state(s)."""
    x = np.asarray(x_t, dtype=np.float64)
    return np.stack([x[..., AMBIENT] - x[..., PREV_TEMP], x[..., ROTOR], x[..., POWER]], axis=-1)


def physics_delta(model, x_t):
    """Physics-head temperature change for raw current state(s) ``x_t``.

    ``model`` is a :class:`PCRNNModel` or a length-3 coefficient vector.
    """
    lam = model.lambdas if isinstance(model, PCRNNModel) else np.asarray(model, dtype=np.float64)
    d = physics_features(x_t) @ lam
    return float(d) if np.ndim(d) == 0 else d


def euler_delta(pred, prev_temp):
    return np.asarray(pred) - np.asarray(prev_temp) if np.ndim(pred) else float(pred) - float(prev_temp)


@dataclass(frozen=True)
class LossBreakdown:
    pred_loss: float
    phys_loss: float
    total: float
    alpha_weight: float


def combined_loss(preds, targets, euler_deltas, physics_deltas, alpha_weight: float) -> LossBreakdown:
    """Mean-squared prediction loss plus ``alpha_weight`` times the physics loss."""
    preds, targets = np.asarray(preds, float), np.asarray(targets, float)
    euler_deltas, physics_deltas = np.asarray(euler_deltas, float), np.asarray(physics_deltas, float)
    if not (preds.shape == targets.shape == euler_deltas.shape == physics_deltas.shape):
        raise ShapeMismatch("preds, targets and deltas must have equal length")
    if alpha_weight < 0:
        raise ValueError("alpha_weight must be >= 0")
    if preds.size == 0:
        raise ValueError("empty batch")
    pred = float(np.mean((preds - targets) ** 2))
    phys = float(np.mean((euler_deltas - physics_deltas) ** 2))
    return LossBreakdown(pred, phys, pred + alpha_weight * phys, float(alpha_weight))


@dataclass(frozen=True)
class PreparedBatch:
    """Arrays needed by the loss: standardized inputs plus raw physics terms."""

    inputs: np.ndarray      # standardized states (B, M+1, 4)
    phys_feats: np.ndarray  # (B, 3)
    targets: np.ndarray
    prev_temps: np.ndarray

    def __len__(self):
        return self.targets.shape[0]

    def take(self, idx) -> "PreparedBatch":
        return PreparedBatch(self.inputs[idx], self.phys_feats[idx], self.targets[idx], self.prev_temps[idx])


def prepare_batch(windows: WindowSet, stats: StandardizationStats) -> PreparedBatch:
    return PreparedBatch(standardize_states(windows.states, stats),
                         physics_features(windows.current_states),
                         windows.targets.copy(), windows.prev_temps.copy())


def loss_and_gradients(model, batch: PreparedBatch, alpha_weight: float = DEFAULT_ALPHA_WEIGHT
                       ) -> tuple[LossBreakdown, ParameterVector]:
    """Batch-mean composite loss and its exact gradient.

    For :class:`RNNModel` the loss is the plain MSE and ``alpha_weight`` is
    ignored.  The gradient layout matches :func:`model_vector`.
    """
    stats = model.stats
    rnn = model.rnn if isinstance(model, PCRNNModel) else model
    lam = model.lambdas if isinstance(model, PCRNNModel) else None
    n = len(batch)
    parts = {}

    def output_loss(y):
        pred = stats.temp_mean + stats.temp_std * y
        err = pred - batch.targets
        pred_loss = float(np.mean(err * err))
        d_pred = (2.0 / n) * err
        if lam is None:
            parts["loss"] = LossBreakdown(pred_loss, 0.0, pred_loss, 0.0)
            return pred_loss, stats.temp_std * d_pred, {}
        phys_err = (pred - batch.prev_temps) - batch.phys_feats @ lam
        phys_loss = float(np.mean(phys_err * phys_err))
        total = pred_loss + alpha_weight * phys_loss
        d_pred = d_pred + alpha_weight * ((2.0 / n) * phys_err)
        d_lam = -alpha_weight * (2.0 / n) * (batch.phys_feats.T @ phys_err)
        parts["loss"] = LossBreakdown(pred_loss, phys_loss, total, float(alpha_weight))
        return total, stats.temp_std * d_pred, {"physics.lambda": d_lam}

    _, g_lstm, g_head, extra = compute_gradients(rnn.lstm, rnn.head, batch.inputs, output_loss)
    grads = network_arrays(g_lstm, g_head)
    grads.update(extra)
    return parts["loss"], ParameterVector.from_arrays(grads)


def evaluate_loss(model, windows: WindowSet, alpha_weight: float = DEFAULT_ALPHA_WEIGHT) -> LossBreakdown:
    """Loss breakdown of ``model`` on raw windows (no gradients)."""
    preds = np.asarray(model.predict(windows), dtype=float)
    prev = windows.prev_temps
    if isinstance(model, PCRNNModel):
        return combined_loss(preds, windows.targets, preds - prev,
                             physics_delta(model, windows.current_states), alpha_weight)
    pred = float(np.mean((preds - windows.targets) ** 2))
    return LossBreakdown(pred, 0.0, pred, 0.0)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_model(model, path: Union[str, Path], metadata: dict | None = None) -> Path:
    """Linear models go to CSV; recurrent models to the JSON checkpoint format."""
    if isinstance(model, LinearModel):
        return save_linear_csv(model, path)
    meta = {"stats": model.stats.to_dict(), "hidden_size": model.rnn.lstm.hidden_size
            if isinstance(model, PCRNNModel) else model.lstm.hidden_size}
    meta.update(metadata or {})
    return save_checkpoint(path, model.family, model_vector(model), meta)


def load_model(path: Union[str, Path]):
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    head = path.read_bytes()[:64].lstrip()
    if head.startswith(b"key,lag,feature,value"):
        return load_linear_csv(path)
    family, vector, meta = load_checkpoint(path)
    if family not in ("rnn", "pcrnn"):
        raise CheckpointError(f"{path}: unknown model family {family!r}")
    arrays = vector.to_arrays()
    lstm, dense = network_from_arrays(arrays)
    rnn = RNNModel(lstm, dense, StandardizationStats.from_dict(meta["stats"]))
    if family == "pcrnn":
        return PCRNNModel(rnn, arrays["physics.lambda"])
    return rnn
