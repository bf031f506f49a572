"""Multispecies porous-media / Hele-Shaw simulator with Lagrangian flow diagnostics."""

from ._pmflow import (  # noqa: F401
    BoundaryMode,
    CheckResult,
    GridSpec,
    ObstacleConfig,
    PressureLaw,
    ScalarField,
    ScenarioConfig,
    ScenarioRunSummary,
    VectorField,
    check_run_dir,
    config_disable_flows,
    config_set_cells,
    config_set_dt,
    config_set_horizon,
    config_set_output_dir,
    distance_l1,
    distance_l2,
    emit_report,
    gradient,
    integrate,
    integrate_weighted,
    interpolate,
    laplacian,
    maximal_functions,
    parse_config,
    pressure_from_density,
    render_config,
    run_gamma_sweep,
    run_scenario,
    scenario_preset,
    scenario_preset_names,
    solve_complementarity,
)

__all__ = [name for name in dir() if not name.startswith("_")]
