"""Physics-constrained temperature nowcasting for wind-turbine gearbox bearings."""

__version__ = "0.1.0"

from .models import PCRNNModel, RNNModel, LinearModel, fit_linear, load_model, save_model
from .plant_sim import PRESETS, generate_plant, generate_preset, inject_fault
from .scada_data import PlantDataset, TurbineSeries, WindowSet, build_windows, parse_scada_csv
from .train_eval import ExperimentSpec, Hyperparams, run_experiment, train

__all__ = [
    "LinearModel", "RNNModel", "PCRNNModel", "fit_linear", "load_model", "save_model",
    "PRESETS", "generate_plant", "generate_preset", "inject_fault",
    "PlantDataset", "TurbineSeries", "WindowSet", "build_windows", "parse_scada_csv",
    "ExperimentSpec", "Hyperparams", "run_experiment", "train",
]
