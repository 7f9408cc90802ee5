from .config import ConfigError, ExperimentConfig, apply_overrides, config_hash, load, parse, serialize
from .exact import exact_solution, field_callable, primary_field, state_sampler
from .experiments import (
    ExperimentResult,
    coeffs_output,
    converge_experiment,
    reference_dt,
    resolve_dt,
    run_experiment,
    stability_experiment,
)
