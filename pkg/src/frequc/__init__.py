"""Island unit commitment with analytical under-frequency load-shedding constraints."""

from .case_io import bundled_case_path, load_case
from .cfcuc import LinearizationConfig, build_model, solve_cfcuc
from .core import (
    Contingency,
    FrequencyParams,
    GeneratorUnit,
    RenewableSource,
    SystemCase,
    aggregate_gain,
    aggregate_inertia,
    critical_power,
    ideal_ufls,
    piecewise_cost,
    ufls_cost_param,
)
from .milp import MilpModel, SolveOptions
from .uc import build_base_model, solve_standard_uc

__version__ = "0.1.0"
