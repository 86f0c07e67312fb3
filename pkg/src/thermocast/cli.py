"""``thermocast`` command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, describe_keys, load_config
from .errors import CheckpointError, ConfigError, NoWindows, ThermocastError
from .models import FAMILIES, LinearModel, load_model, save_model
from .monitor import calibrate, detect, ewma, residuals, write_alarms_csv
from .plant_sim import (
    DAY_SECONDS,
    PRESETS,
    FaultProfile,
    generate_preset,
    ground_truth,
    inject_fault,
    plant_seed,
    turbine_coefficients,
)
from .scada_data import (
    build_plant_windows,
    build_windows,
    load_plant_dir,
    read_plant_csv,
    time_split,
    to_epoch,
    write_plant_csv,
)
from .train_eval import (
    ExperimentReport,
    ExperimentSpec,
    Hyperparams,
    model_specs,
    prepare_plants,
    rmse,
    run_experiment,
    train,
)

log = logging.getLogger("thermocast")

COMMANDS = ("simulate", "train", "evaluate", "experiment", "monitor")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_dir(cfg: RunConfig) -> Path:
    cfg.require("run.out_dir")
    out = Path(cfg["run.out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_dir(cfg: RunConfig) -> Path:
    return Path(cfg["data.data_dir"] or _out_dir(cfg))


def _write_manifest(cfg: RunConfig, command: str, outputs) -> Path:
    out = _out_dir(cfg)
    manifest = {
        "command": command,
        "config": cfg.resolved(),
        "seed": cfg["run.seed"],
        "versions": {"thermocast": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "outputs": sorted(str(Path(p).relative_to(out)) for p in outputs),
    }
    path = out / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _hyper(cfg: RunConfig) -> Hyperparams:
    return Hyperparams(
        batch_size=cfg["train.batch_size"],
        validation_fraction=cfg["train.validation_fraction"],
        learning_rate=cfg["train.learning_rate"],
        alpha_weight=cfg["train.alpha_weight"],
        lags=cfg["data.lags"],
        max_epochs=cfg["train.max_epochs"],
        patience=cfg["train.patience"],
        seed=cfg["run.seed"],
        hidden_size=cfg["train.hidden_size"],
    )


def _load_plants(cfg: RunConfig) -> dict:
    d = _data_dir(cfg)
    if not d.is_dir():
        raise ThermocastError(f"data directory not found: {d}")
    plants = load_plant_dir(d)
    if not plants:
        raise ThermocastError(f"no plant CSVs in {d}")
    return plants


def _checkpoint_path(cfg: RunConfig) -> Path:
    if cfg["model.checkpoint"]:
        return Path(cfg["model.checkpoint"])
    out = _out_dir(cfg)
    for name in ("model.json", "model.csv"):
        if (out / name).is_file():
            return out / name
    return out / "model.json"


def cmd_simulate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    seed = cfg["run.seed"]
    duration = cfg["simulate.duration_days"] * DAY_SECONDS
    n = cfg["simulate.n_turbines"]
    fault_tid = cfg["simulate.fault_turbine"]
    fault = None
    if fault_tid:
        cfg.require("simulate.fault_onset")
        fault = FaultProfile(to_epoch(cfg["simulate.fault_onset"]), cfg["simulate.fault_mu_multiplier"],
                             cfg["simulate.fault_ramp_hours"] * 3600.0)
    truth, outputs, faulted = {}, [], False
    for pid in cfg["simulate.plants"]:
        if pid not in PRESETS:
            raise ConfigError(f"simulate.plants: unknown preset {pid!r}; expected one of {sorted(PRESETS)}")
        preset = PRESETS[pid]
        ps = plant_seed(seed, pid)
        ds = generate_preset(preset, n, duration, ps, start=cfg["simulate.start"])
        faults = {}
        if fault is not None and fault_tid in ds.turbines:
            idx = ds.turbine_ids.index(fault_tid)
            coeffs = turbine_coefficients(preset.physics, n, ps, preset.jitter)[idx]
            ds = ds.replace_turbine(inject_fault(ds.turbines[fault_tid], coeffs, fault))
            faults[fault_tid] = fault
            faulted = True
        outputs.append(write_plant_csv(ds, out / f"{pid}.csv"))
        truth[pid] = ground_truth(preset, n, ps, pid, preset.jitter, faults)
        print(f"{pid}: {ds.n_records} rows")
    if fault is not None and not faulted:
        raise ConfigError(f"simulate.fault_turbine: no simulated turbine {fault_tid!r}")
    gt = out / "ground_truth.json"
    gt.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    outputs.append(gt)
    _write_manifest(cfg, "simulate", outputs)
    return 0


def cmd_train(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    family = cfg["train.model"]
    if family not in FAMILIES:
        raise ConfigError(f"train.model: unknown family {family!r}; expected one of {FAMILIES}")
    plants = _load_plants(cfg)
    pid = cfg["train.plant"]
    if pid not in plants:
        raise ConfigError(f"train.plant: no data for plant {pid!r} in {_data_dir(cfg)}")
    ds = plants[pid]
    if cfg["train.turbines"]:
        missing = [t for t in cfg["train.turbines"] if t not in ds.turbines]
        if missing:
            raise ConfigError(f"train.turbines: unknown turbines {missing}")
        ds = ds.subset(list(cfg["train.turbines"]))
    train_part, _ = time_split(ds, cfg["data.boundary"])
    windows, _ = build_plant_windows(train_part, cfg["data.lags"])
    hyper = _hyper(cfg)
    model, history = train(family, windows, hyper)
    path = out / ("model.csv" if isinstance(model, LinearModel) else "model.json")
    save_model(model, path, {"lags": hyper.lags, "plant": pid, "turbines": list(ds.turbine_ids)})
    hist = out / "history.csv"
    hist.write_text(history.to_csv(), encoding="utf-8", newline="")
    _write_manifest(cfg, "train", [path, hist])
    print(f"{family}: {len(windows)} windows, {len(history)} epochs -> {path.name}")
    return 0


def _load_checkpoint(cfg: RunConfig):
    path = _checkpoint_path(cfg)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return load_model(path)


def cmd_evaluate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    model = _load_checkpoint(cfg)
    lags = cfg["data.lags"]
    rows = ["plant,turbine_id,n_windows,rmse"]
    for pid, ds in _load_plants(cfg).items():
        _, test = time_split(ds, cfg["data.boundary"])
        sq, count = 0.0, 0
        for tid, series in test.turbines.items():
            w, _ = build_windows(series, lags)
            if len(w) == 0:
                continue
            e = rmse(model.predict(w), w.targets)
            rows.append(f"{pid},{tid},{len(w)},{e!r}")
            sq += e * e * len(w)
            count += len(w)
        if count:
            total = float(np.sqrt(sq / count))
            rows.append(f"{pid},,{count},{total!r}")
            print(f"{pid}: RMSE {total:.4f} over {count} windows")
    path = out / "evaluation.csv"
    path.write_bytes(("\r\n".join(rows) + "\r\n").encode("utf-8"))
    _write_manifest(cfg, "evaluate", [path])
    return 0


def cmd_experiment(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    plants = _load_plants(cfg)
    for p in cfg["experiment.train_plants"]:
        if p not in plants:
            raise ConfigError(f"experiment.train_plants: no data for plant {p!r}")
    for f in cfg["experiment.models"]:
        if f not in FAMILIES:
            raise ConfigError(f"experiment.models: unknown family {f!r}")
    specs = model_specs(cfg["experiment.models"], cfg["experiment.alpha_sweep"])
    hyper = _hyper(cfg)
    prepared = prepare_plants(plants, cfg["data.boundary"], hyper.lags)
    report = ExperimentReport()
    for n in cfg["experiment.n_train"]:
        for p in cfg["experiment.train_plants"]:
            spec = ExperimentSpec(p, n, cfg["data.boundary"], cfg["experiment.repeats"], specs,
                                  cfg["run.seed"], hyper)
            report.extend(run_experiment(spec, plants, cfg["run.jobs"], prepared))
            print(f"train plant {p}, n_train {n}: done")
    paths = report.write(out, cfg["experiment.prefix"])
    _write_manifest(cfg, "experiment", paths)
    return 0


def cmd_monitor(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    cfg.require("monitor.data")
    model = _load_checkpoint(cfg)
    data = Path(cfg["monitor.data"])
    if not data.is_file():
        raise ThermocastError(f"data file not found: {data}")
    ds = read_plant_csv(data)
    cal_end = to_epoch(cfg["monitor.calibration_end"] or cfg["data.boundary"])
    events = []
    for tid, series in ds.turbines.items():
        try:
            r = residuals(model, series, cfg["data.lags"])
        except NoWindows:
            log.warning("turbine %s has no windows; skipped", tid)
            continue
        ac = calibrate(r.before(cal_end), ewma_weight=cfg["monitor.ewma_weight"],
                       threshold_sigmas=cfg["monitor.threshold_sigmas"],
                       min_consecutive=cfg["monitor.min_consecutive"])
        events += detect(ewma(r, ac.ewma_weight), ac)
    path = write_alarms_csv(events, out / "alarms.csv")
    _write_manifest(cfg, "monitor", [path])
    print(f"{len(events)} alarms")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="thermocast",
        description="Physics-constrained bearing temperature nowcasting.",
        epilog=describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"thermocast {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    helps = {
        "simulate": "simulate plant SCADA CSVs and ground truth",
        "train": "train one model family",
        "evaluate": "score a checkpoint on post-boundary data",
        "experiment": "run the repeated benchmark grid",
        "monitor": "raise residual alarms on a SCADA CSV",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name], epilog=describe_keys(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("-c", "--config", type=Path, help="INI config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key, e.g. train.max_epochs=5")
        p.add_argument("--jobs", type=int, help="worker processes (overrides run.jobs)")
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        overrides = list(args.overrides)
        if args.jobs is not None:
            if args.jobs < 1:
                raise UsageError("--jobs must be >= 1")
            overrides.append(f"run.jobs={args.jobs}")
        cfg = load_config(args.config, overrides)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"thermocast: error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"thermocast: config error: {exc}", file=sys.stderr)
        return 1

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"simulate": cmd_simulate, "train": cmd_train, "evaluate": cmd_evaluate,
               "experiment": cmd_experiment, "monitor": cmd_monitor}[args.command]
    try:
        return handler(cfg)
    except ConfigError as exc:
        print(f"thermocast: config error: {exc}", file=sys.stderr)
        return 1
    except (ThermocastError, OSError, ValueError, ArithmeticError, KeyError) as exc:
        print(f"thermocast {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
