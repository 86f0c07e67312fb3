"""Training loop, metrics and the multi-plant experiment protocol."""

from __future__ import annotations

import csv
import io
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import EmptyInput, NonFiniteLoss, NotEnoughWindows, TooFewValues
from .models import (
    DEFAULT_ALPHA_WEIGHT,
    FAMILIES,
    LinearModel,
    LossBreakdown,
    PCRNNModel,
    evaluate_loss,
    fit_linear,
    init_pcrnn,
    init_rnn,
    loss_and_gradients,
    model_vector,
    model_with_vector,
    physics_delta,
    prepare_batch,
)
from .nn_core import AdamState, adam_step
from .scada_data import (
    DEFAULT_LAGS,
    PlantDataset,
    SplitSpec,
    WindowSet,
    build_windows,
    fit_standardization,
    sample_turbines,
    time_split,
    to_epoch,
)

log = logging.getLogger(__name__)

CATEGORIES = ("test", "in-plant-generalization", "cross-plant-generalization")


@dataclass(frozen=True)
class Hyperparams:
    batch_size: int = 16
    validation_fraction: float = 0.2
    learning_rate: float = 1e-3
    alpha_weight: float = DEFAULT_ALPHA_WEIGHT
    lags: int = DEFAULT_LAGS
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    hidden_size: int = 16

    def __post_init__(self):
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.alpha_weight < 0:
            raise ValueError("alpha_weight must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ValueError("batch_size >= 1, max_epochs >= 0 and patience >= 1 required")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train: LossBreakdown
    val: Optional[LossBreakdown]


@dataclass
class TrainingHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    initial_val: Optional[LossBreakdown] = None
    best_epoch: Optional[int] = None

    def __len__(self):
        return len(self.epochs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["epoch", "train_pred", "train_phys", "train_total", "val_pred", "val_phys", "val_total"])
        for r in self.epochs:
            val = [repr(r.val.pred_loss), repr(r.val.phys_loss), repr(r.val.total)] if r.val else ["", "", ""]
            w.writerow([r.epoch, repr(r.train.pred_loss), repr(r.train.phys_loss), repr(r.train.total), *val])
        return buf.getvalue()


def chronological_split(windows: WindowSet, fraction: float) -> tuple[WindowSet, WindowSet]:
    """Split off the latest ``fraction`` of windows (by timestamp) for validation."""
    order = windows.chronological_order()
    n_val = int(round(fraction * len(windows)))
    n_val = min(max(n_val, 1), len(windows) - 1)
    return windows[order[:-n_val]], windows[order[-n_val:]]


def train(family: str, windows: WindowSet, hyper: Hyperparams = Hyperparams()):
    """Fit one model family on ``windows``.

    Recurrent families use mini-batch Adam on a shuffled training head and
    select the epoch with the lowest validation objective on the chronological
    tail.  The linear family is solved in closed form on all windows.

    Returns
    -------
    (model, TrainingHistory)
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}; expected one of {FAMILIES}")
    if family == "linear":
        model = fit_linear(windows)
        rec = EpochRecord(0, evaluate_loss(model, windows), None)
        return model, TrainingHistory([rec], None, 0)

    fit_w, val_w = chronological_split(windows, hyper.validation_fraction)
    if len(fit_w) < hyper.batch_size:
        raise NotEnoughWindows(f"{len(fit_w)} training windows cannot fill one batch of {hyper.batch_size}")
    stats = fit_standardization(fit_w)
    init = init_pcrnn if family == "pcrnn" else init_rnn
    model = init(stats, hyper.seed, hyper.hidden_size)
    alpha = hyper.alpha_weight
    history = TrainingHistory(initial_val=evaluate_loss(model, val_w, alpha))
    if hyper.max_epochs == 0:
        return model, history

    batch_all = prepare_batch(fit_w, stats)
    theta = model_vector(model).values.copy()
    adam = AdamState.zeros(theta.size, lr=hyper.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence([int(hyper.seed), 1]))
    n = len(fit_w)
    best, best_theta, wait = math.inf, theta.copy(), 0

    for epoch in range(hyper.max_epochs):
        perm = rng.permutation(n)
        sums = np.zeros(3)
        for b, lo in enumerate(range(0, n, hyper.batch_size)):
            idx = perm[lo:lo + hyper.batch_size]
            try:
                loss, grads = loss_and_gradients(model_with_vector(model, theta), batch_all.take(idx), alpha)
            except NonFiniteLoss as exc:
                raise NonFiniteLoss(str(exc), epoch=epoch, batch=b) from exc
            theta, adam = adam_step(theta, grads.values, adam)
            sums += len(idx) * np.array([loss.pred_loss, loss.phys_loss, loss.total])
        current = model_with_vector(model, theta)
        tr = LossBreakdown(*(sums / n).tolist(), alpha if family == "pcrnn" else 0.0)
        val = evaluate_loss(current, val_w, alpha)
        if not math.isfinite(val.total):
            raise NonFiniteLoss("validation loss is not finite", epoch=epoch, batch=-1)
        history.epochs.append(EpochRecord(epoch, tr, val))
        log.debug("epoch %d train %.5f val %.5f", epoch, tr.total, val.total)
        if val.total < best:
            best, best_theta, wait = val.total, theta.copy(), 0
            history.best_epoch = epoch
        else:
            wait += 1
            if wait >= hyper.patience:
                break
    return model_with_vector(model, best_theta), history


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def rmse(preds, targets) -> float:
    p, t = np.asarray(preds, dtype=float), np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError("preds and targets differ in length")
    if p.size == 0:
        raise EmptyInput("rmse of zero samples")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def standard_error(values) -> float:
    """Sample standard deviation (n - 1) over sqrt(n)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise TooFewValues("standard error needs at least two values")
    return float(np.std(v, ddof=1) / math.sqrt(v.size))


@dataclass(frozen=True)
class SignAgreement:
    fraction: float
    agree: int
    compared: int
    excluded_zero: int
    excluded_small: int


def gradient_sign_agreement(model, windows: WindowSet, min_abs_delta: float = 0.0,
                            zero_tol: float = 1e-9) -> SignAgreement:
    """Share of windows where the physics head and the measured change agree in sign.

    Windows whose measured change is below ``min_abs_delta`` in magnitude are
    dropped first (``excluded_small``); of the rest, those where either delta
    is within ``zero_tol`` of zero are counted as ``excluded_zero``.
    ``fraction`` is NaN when nothing is left to compare.
    """
    if len(windows) == 0:
        raise EmptyInput("no windows")
    true = windows.true_deltas
    phys = np.asarray(physics_delta(model, windows.current_states), dtype=float)
    big = np.abs(true) >= min_abs_delta if min_abs_delta > 0 else np.ones(true.size, bool)
    nonzero = (np.abs(true) >= zero_tol) & (np.abs(phys) >= zero_tol)
    use = big & nonzero
    agree = int(np.sum(np.sign(true[use]) == np.sign(phys[use])))
    n = int(use.sum())
    return SignAgreement(agree / n if n else float("nan"), agree, n,
                         int(np.sum(big & ~nonzero)), int(np.sum(~big)))


# ---------------------------------------------------------------------------
# experiment protocol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """A named model configuration; ``alpha_weight=None`` means the hyperparameter default."""

    name: str
    family: str
    alpha_weight: Optional[float] = None


def model_specs(families: Sequence[str] = FAMILIES, alpha_sweep: Sequence[float] = ()) -> tuple[ModelSpec, ...]:
    """One spec per family; ``pcrnn`` expands to one spec per swept alpha."""
    specs = []
    for fam in families:
        if fam == "pcrnn" and alpha_sweep:
            specs += [ModelSpec(f"pcrnn_a{a:g}", fam, float(a)) for a in alpha_sweep]
        else:
            specs.append(ModelSpec(fam, fam))
    return tuple(specs)


@dataclass(frozen=True)
class ExperimentSpec:
    train_plant: str
    n_train: int
    boundary: int
    repeats: int = 5
    models: tuple = model_specs()
    seed: int = 0
    hyper: Hyperparams = Hyperparams()

    def __post_init__(self):
        object.__setattr__(self, "boundary", to_epoch(self.boundary))
        if self.repeats < 2:
            raise ValueError("repeats must be >= 2 for a standard error")
        if self.n_train < 1:
            raise ValueError("n_train must be >= 1")

    def repeat_seeds(self, repeat: int) -> tuple[int, int]:
        """(turbine-sampling seed, model seed); shared by every model family."""
        ss = np.random.SeedSequence([int(self.seed), zlib.crc32(self.train_plant.encode()),
                                     int(self.n_train), int(repeat)])
        a, b = ss.generate_state(2).tolist()
        return a, b


@dataclass(frozen=True)
class RepeatResult:
    train_plant: str
    eval_plant: str
    category: str
    model: str
    n_train: int
    repeat: int
    rmse: float
    n_windows: int
    turbines: tuple


@dataclass(frozen=True)
class ReportRow:
    train_plant: str
    eval_plant: str
    category: str
    model: str
    n_train: int
    rmse_mean: float
    rmse_se: float
    repeats: int


SUMMARY_COLUMNS = ("train_plant", "eval_plant", "category", "model", "n_train", "rmse_mean", "rmse_se", "repeats")
LONG_COLUMNS = ("train_plant", "eval_plant", "category", "model", "n_train", "repeat", "rmse", "n_windows", "turbines")


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)
    results: list[RepeatResult] = field(default_factory=list)

    def extend(self, other: "ExperimentReport") -> None:
        self.rows.extend(other.rows)
        self.results.extend(other.results)

    def cell(self, train_plant: str, eval_plant: str, category: str, model: str,
             n_train: Optional[int] = None) -> ReportRow:
        for r in self.rows:
            if (r.train_plant, r.eval_plant, r.category, r.model) == (train_plant, eval_plant, category, model) \
                    and (n_train is None or r.n_train == n_train):
                return r
        raise KeyError((train_plant, eval_plant, category, model, n_train))

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(SUMMARY_COLUMNS)
        for r in self.rows:
            w.writerow([r.train_plant, r.eval_plant, r.category, r.model, r.n_train,
                        repr(r.rmse_mean), repr(r.rmse_se), r.repeats])
        return buf.getvalue()

    def long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(LONG_COLUMNS)
        for r in self.results:
            w.writerow([r.train_plant, r.eval_plant, r.category, r.model, r.n_train, r.repeat,
                        repr(r.rmse), r.n_windows, ";".join(r.turbines)])
        return buf.getvalue()

    def write(self, directory: Union[str, Path], prefix: str = "report") -> tuple[Path, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        s, l = d / f"{prefix}_summary.csv", d / f"{prefix}_long.csv"
        s.write_text(self.summary_csv(), encoding="utf-8", newline="")
        l.write_text(self.long_csv(), encoding="utf-8", newline="")
        return s, l


@dataclass
class _PreparedPlants:
    """Per-plant train/test halves and per-turbine windows, computed once."""

    train_windows: dict
    test_windows: dict
    turbines: dict

    @classmethod
    def build(cls, datasets: Mapping[str, PlantDataset], boundary: int, lags: int) -> "_PreparedPlants":
        train_w, test_w, turbines = {}, {}, {}
        for pid, ds in datasets.items():
            tr, te = time_split(ds, SplitSpec(boundary))
            train_w[pid] = {t: build_windows(s, lags)[0] for t, s in tr.turbines.items()}
            test_w[pid] = {t: build_windows(s, lags)[0] for t, s in te.turbines.items()}
            turbines[pid] = ds.turbine_ids
        return cls(train_w, test_w, turbines)


def _concat(windows_by_turbine: dict, ids) -> WindowSet:
    sets = [windows_by_turbine[t] for t in ids if t in windows_by_turbine and len(windows_by_turbine[t])]
    if not sets:
        raise NotEnoughWindows(f"no windows for turbines {list(ids)}")
    return WindowSet.concat(sets)


def _run_repeat(spec: ExperimentSpec, datasets: Mapping[str, PlantDataset],
                prepared: _PreparedPlants, repeat: int) -> list[RepeatResult]:
    sample_seed, model_seed = spec.repeat_seeds(repeat)
    home = datasets[spec.train_plant]
    selected, held_out = sample_turbines(home, spec.n_train, sample_seed)
    train_windows = _concat(prepared.train_windows[spec.train_plant], selected.turbine_ids)

    targets = []   # (eval_plant, category, turbine ids)
    targets.append((spec.train_plant, CATEGORIES[0], tuple(selected.turbine_ids)))
    if held_out.turbine_ids:
        targets.append((spec.train_plant, CATEGORIES[1], tuple(held_out.turbine_ids)))
    for pid in sorted(datasets):
        if pid != spec.train_plant:
            targets.append((pid, CATEGORIES[2], tuple(prepared.turbines[pid])))

    out = []
    for ms in spec.models:
        alpha = spec.hyper.alpha_weight if ms.alpha_weight is None else ms.alpha_weight
        hyper = replace(spec.hyper, seed=model_seed, alpha_weight=alpha)
        try:
            model, _ = train(ms.family, train_windows, hyper)
        except Exception as exc:
            raise type(exc)(f"{exc} [train_plant={spec.train_plant}, n_train={spec.n_train}, "
                            f"repeat={repeat}, model={ms.name}]") from exc
        for eval_plant, category, ids in targets:
            w = _concat(prepared.test_windows[eval_plant], ids)
            out.append(RepeatResult(spec.train_plant, eval_plant, category, ms.name, spec.n_train,
                                    repeat, rmse(model.predict(w), w.targets), len(w), ids))
    return out


def _run_repeat_star(args):
    return _run_repeat(*args)


def aggregate(results: Sequence[RepeatResult]) -> list[ReportRow]:
    """Mean and standard error per cell, in first-seen cell order."""
    cells: dict[tuple, list[float]] = {}
    for r in results:
        cells.setdefault((r.train_plant, r.eval_plant, r.category, r.model, r.n_train), []).append(r.rmse)
    rows = []
    for (tp, ep, cat, model, n), vals in cells.items():
        rows.append(ReportRow(tp, ep, cat, model, n, float(np.mean(vals)), standard_error(vals), len(vals)))
    return rows


def run_experiment(spec: ExperimentSpec, datasets: Mapping[str, PlantDataset], jobs: int = 1,
                   prepared: Optional[_PreparedPlants] = None) -> ExperimentReport:
    """Train every model of ``spec`` ``spec.repeats`` times and score all evaluation cells.

    Each repeat samples ``n_train`` turbines of the training plant, trains on
    their pre-boundary windows, and scores RMSE on post-boundary windows of the
    sampled turbines (test), the rest of the plant (in-plant generalization)
    and every other plant (cross-plant generalization).
    """
    if spec.train_plant not in datasets:
        raise KeyError(f"training plant {spec.train_plant!r} not among {sorted(datasets)}")
    if prepared is None:
        prepared = _PreparedPlants.build(datasets, spec.boundary, spec.hyper.lags)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_repeat_star,
                                   [(spec, datasets, prepared, r) for r in range(spec.repeats)]))
    else:
        chunks = [_run_repeat(spec, datasets, prepared, r) for r in range(spec.repeats)]
    # order rows by category, then eval plant, then model, for stable reports
    results = [r for chunk in chunks for r in chunk]
    model_order = {m.name: i for i, m in enumerate(spec.models)}
    results.sort(key=lambda r: (CATEGORIES.index(r.category), r.eval_plant, model_order[r.model], r.repeat))
    return ExperimentReport(aggregate(results), results)


def prepare_plants(datasets: Mapping[str, PlantDataset], boundary, lags: int = DEFAULT_LAGS) -> _PreparedPlants:
    """Precompute splits and windows to share across several experiments."""
    return _PreparedPlants.build(datasets, to_epoch(boundary), lags)
