"""Exception hierarchy shared by all thermocast modules."""

from __future__ import annotations


class ThermocastError(Exception):
    """Base class for every error raised by this package."""


# -- data ingestion / preparation -------------------------------------------

class DataError(ThermocastError, ValueError):
    pass


class MissingHeader(DataError):
    pass


class MalformedRow(DataError):
    """One or more CSV rows could not be parsed.

    ``lines`` holds 1-based file line numbers (the header is line 1).
    """

    def __init__(self, lines: list[int], reasons: list[str]):
        self.lines = list(lines)
        self.reasons = list(reasons)
        shown = "; ".join(f"line {n}: {r}" for n, r in zip(lines[:10], reasons[:10]))
        more = f" (+{len(lines) - 10} more)" if len(lines) > 10 else ""
        super().__init__(f"malformed rows: {shown}{more}")


class DuplicateTimestamp(DataError):
    def __init__(self, turbine: str, timestamp):
        self.turbine, self.timestamp = turbine, timestamp
        super().__init__(f"duplicate timestamp {timestamp} for turbine {turbine!r}")


class OffGridTimestamp(DataError):
    def __init__(self, turbine: str, timestamp):
        self.turbine, self.timestamp = turbine, timestamp
        super().__init__(f"timestamp {timestamp} of turbine {turbine!r} is not on the 10-minute grid")


class DegenerateFeature(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"feature {name!r} has zero standard deviation")


class EmptySide(DataError):
    def __init__(self, side: str):
        self.side = side
        super().__init__(f"time split leaves the {side} side without records")


class NotEnoughTurbines(DataError):
    pass


class NotEnoughWindows(DataError):
    pass


class NoWindows(DataError):
    pass


# -- simulation ---------------------------------------------------------------

class SimulationError(ThermocastError, ValueError):
    pass


class InvalidDuration(SimulationError):
    pass


class OnsetOutOfRange(SimulationError):
    pass


class UnstableIntegration(SimulationError):
    pass


# -- numerics -----------------------------------------------------------------

class ShapeMismatch(ThermocastError, ValueError):
    pass


class NonFiniteLoss(ThermocastError, ArithmeticError):
    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        self.epoch, self.batch = epoch, batch
        where = ""
        if epoch is not None:
            where = f" (epoch {epoch}, batch {batch})"
        super().__init__(message + where)


class EmptyInput(ThermocastError, ValueError):
    pass


class TooFewValues(ThermocastError, ValueError):
    pass


class RankDeficientWarning(UserWarning):
    """Least-squares design matrix is rank deficient; the minimum-norm solution is used."""


# -- configuration / checkpoints -----------------------------------------------

class ConfigError(ThermocastError):
    pass


class CheckpointError(ThermocastError):
    pass
