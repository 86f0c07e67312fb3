"""Run configuration: one INI file plus ``section.key=value`` overrides.

Every key has a type and a default.  Unknown sections or keys are errors.
Relative paths are resolved against the directory of the config file (or the
working directory for values given on the command line).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from .errors import ConfigError
from .scada_data import parse_timestamp


def _str(v: str) -> str:
    return v.strip()


def _int(v: str) -> int:
    return int(v.strip())


def _float(v: str) -> float:
    return float(v.strip())


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _timestamp(v: str) -> str:
    v = v.strip()
    if v:
        parse_timestamp(v)
    return v


def _list(item: Callable) -> Callable:
    def parse(v: str) -> tuple:
        return tuple(item(p) for p in v.split(",") if p.strip())
    return parse


@dataclass(frozen=True)
class Key:
    section: str
    name: str
    default: str
    parse: Callable[[str], Any]
    help: str
    path: bool = False
    required: bool = False

    @property
    def dotted(self) -> str:
        return f"{self.section}.{self.name}"


SCHEMA: tuple[Key, ...] = (
    Key("run", "out_dir", "", _str, "output directory (required)", path=True, required=True),
    Key("run", "seed", "2024", _int, "master seed for simulation and training"),
    Key("run", "jobs", "1", _int, "worker processes for experiment repeats"),

    Key("simulate", "plants", "A,B,C", _list(_str), "plant presets to simulate"),
    Key("simulate", "n_turbines", "10", _int, "turbines per plant"),
    Key("simulate", "duration_days", "182", _float, "simulated days"),
    Key("simulate", "start", "2021-10-15T00:00:00Z", _timestamp, "first timestamp"),
    Key("simulate", "fault_turbine", "", _str, "turbine id to fault, empty for none"),
    Key("simulate", "fault_onset", "", _timestamp, "fault onset timestamp"),
    Key("simulate", "fault_mu_multiplier", "1.5", _float, "friction multiplier after the ramp"),
    Key("simulate", "fault_ramp_hours", "24", _float, "hours to ramp the fault in"),

    Key("data", "data_dir", "", _str, "plant CSV directory, empty for out_dir", path=True),
    Key("data", "boundary", "2022-01-15T00:00:00Z", _timestamp, "train/test time boundary"),
    Key("data", "lags", "5", _int, "lag count M of each window"),

    Key("train", "model", "pcrnn", _str, "linear, rnn or pcrnn"),
    Key("train", "plant", "A", _str, "plant to train on"),
    Key("train", "turbines", "", _list(_str), "turbine ids, empty for all"),
    Key("train", "batch_size", "16", _int, "mini-batch size"),
    Key("train", "validation_fraction", "0.2", _float, "chronological validation tail"),
    Key("train", "learning_rate", "0.001", _float, "Adam step size"),
    Key("train", "alpha_weight", "0.25", _float, "physics loss weight"),
    Key("train", "max_epochs", "100", _int, "epoch limit"),
    Key("train", "patience", "10", _int, "early-stopping patience"),
    Key("train", "hidden_size", "16", _int, "LSTM units"),

    Key("experiment", "train_plants", "A,B,C", _list(_str), "plants to train on"),
    Key("experiment", "n_train", "1", _list(_int), "training turbine counts"),
    Key("experiment", "repeats", "5", _int, "repeats per cell"),
    Key("experiment", "models", "linear,rnn,pcrnn", _list(_str), "model families"),
    Key("experiment", "alpha_sweep", "", _list(_float), "pcrnn alpha values, empty for one"),
    Key("experiment", "prefix", "experiment", _str, "report file prefix"),

    Key("model", "checkpoint", "", _str, "model file, empty for out_dir model", path=True),

    Key("monitor", "data", "", _str, "SCADA CSV to monitor (required)", path=True),
    Key("monitor", "calibration_end", "", _timestamp, "end of calibration, empty for boundary"),
    Key("monitor", "ewma_weight", "0.1", _float, "EWMA smoothing weight"),
    Key("monitor", "threshold_sigmas", "4", _float, "alarm threshold k"),
    Key("monitor", "min_consecutive", "6", _int, "exceedances before an alarm"),
)

_BY_DOTTED = {k.dotted: k for k in SCHEMA}
SECTIONS = tuple(dict.fromkeys(k.section for k in SCHEMA))


class RunConfig:
    """Parsed configuration; look values up as ``cfg["section.key"]``."""

    def __init__(self, raw: dict[str, str], bases: dict[str, Path]):
        self._raw = dict(raw)
        self._values = {}
        for k in SCHEMA:
            text = self._raw.get(k.dotted, k.default)
            try:
                value = k.parse(text)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{k.dotted}: {exc}") from None
            if k.path and value:
                value = (bases.get(k.dotted, Path.cwd()) / value).resolve()
            self._values[k.dotted] = value

    def __getitem__(self, dotted: str):
        return self._values[dotted]

    def require(self, *dotted: str) -> None:
        for d in dotted:
            if self._values[d] in ("", None, ()):
                raise ConfigError(f"missing required key {d}")

    def resolved(self) -> dict[str, dict[str, Any]]:
        out: dict[str, dict[str, Any]] = {}
        for k in SCHEMA:
            v = self._values[k.dotted]
            out.setdefault(k.section, {})[k.name] = list(v) if isinstance(v, tuple) else \
                (str(v) if isinstance(v, Path) else v)
        return out


def load_config(path: Optional[Path] = None, overrides: Sequence[str] = ()) -> RunConfig:
    raw: dict[str, str] = {}
    bases: dict[str, Path] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None, default_section="\0")
        parser.optionxform = str
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for name, value in parser.items(section):
                dotted = f"{section}.{name}"
                if dotted not in _BY_DOTTED:
                    raise ConfigError(f"{path}: unknown key {dotted}")
                raw[dotted] = value
                bases[dotted] = path.parent.resolve()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        dotted = dotted.strip()
        if dotted not in _BY_DOTTED:
            raise ConfigError(f"unknown key {dotted}")
        raw[dotted] = value
        bases.pop(dotted, None)
    return RunConfig(raw, bases)


def describe_keys() -> str:
    """One line per key with its default, grouped by section."""
    width = max(len(k.dotted) for k in SCHEMA)
    lines = ["configuration keys (section.key = default):"]
    for k in SCHEMA:
        default = k.default if k.default else '""'
        lines.append(f"  {k.dotted:<{width}} = {default}")
        lines.append(f"      {k.help}")
    return "\n".join(lines)
