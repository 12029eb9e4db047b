"""Discounted and long-run average optimal control on finite deterministic systems.

Dynamic programming and occupation-measure linear programs side by side, with
the Abel/Cesaro limit machinery that connects the two criteria.
"""
from .dp import (
    Policy,
    ValueFunction,
    bellman_backup,
    finite_horizon_value,
    h_operator,
    min_over_initial,
    value_iteration,
)
from .lpcore import LPSolution, StandardFormLP, check_certificates, solve
from .lpform import (
    build_average_lp,
    build_discounted_lp,
    distance_to_W,
    solve_average,
    solve_discounted,
    verify_discounted_duality,
)
from .measures import (
    OccupationalMeasure,
    PeriodicControl,
    TestFunctionBasis,
    default_basis,
    discounted_occupational_measure,
    hausdorff,
    horizon_occupational_measure,
    integrate,
    rho,
)
from .model import FiniteControlSystem, GridSpec, build_from_table, build_grid_system, validate
from .tauberian import (
    BoundedSequence,
    abel_mean,
    alpha_sweep,
    find_cesaro_horizon,
    find_good_start,
    horizon_sweep,
    set_convergence_experiment,
)

__version__ = "0.1.0"
