"""Second-order cone relaxations of optimal power flow on radial feeders,
with an interior-point solver, a load flow and exactness diagnostics."""

from .exactness import ExactnessReport, classify, residuals
from .fixtures import fixture_path, profiles_path
from .formulation import FormulationConfig, build_program
from .harness import SweepConfig, emit_reports, load_sweep_config, run_sweep
from .loadflow import run_loadflow, violations
from .network import Feeder, ScenarioOptions, build_scenario, fixed_scenario, load_feeder, load_profiles, simple_feeder
from .program import solve_program, to_standard_form

__version__ = "0.1.0"

__all__ = [
    "ExactnessReport", "Feeder", "FormulationConfig", "ScenarioOptions", "SweepConfig", "build_program",
    "build_scenario", "classify", "emit_reports", "fixed_scenario", "fixture_path", "load_feeder", "load_profiles",
    "load_sweep_config", "profiles_path", "residuals", "run_loadflow", "run_sweep", "simple_feeder",
    "solve_program", "to_standard_form", "violations",
]
