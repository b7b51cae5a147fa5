"""Spectral upper bounds on independent-cascade influence.

The library computes influence bounds from the spectral radius of the
symmetrized hazard matrix and validates them against Monte Carlo simulators
of three equivalent infection dynamics, an exact small-graph oracle, and
bond-percolation component statistics.
"""

from .bounds import (
    BoundReport,
    BoundsError,
    PercolationBoundReport,
    SirParams,
    closed_form_any_set,
    closed_form_uniform,
    compare_sir_bounds,
    er_giant_fraction,
    influence_bound_any_set,
    influence_bound_uniform,
    percolation_bounds,
    sir_bound_draief,
    solve_gamma1,
    solve_gamma2,
    solve_gamma3,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    emit_report,
    run_experiment,
    run_fig1,
    run_fig2,
    run_fig3,
    run_percolation_er,
)
from .generators import (
    CalibrationError,
    GeneratorError,
    GeneratorSpec,
    calibrate_uniform_p,
    chung_lu_ratio,
    complete_uniform,
    generate,
)
from .graph import (
    GraphError,
    HazardMatrix,
    InfluencerSet,
    ProbGraph,
    build_graph,
    build_graph_arrays,
    hazard_from_prob,
    mask_columns,
    read_edge_list,
    with_uniform_p,
    write_edge_list,
)
from .simulate import (
    DynamicsSpec,
    InfluenceEstimate,
    OracleLimitError,
    PercolationReport,
    TrialStreams,
    estimate_influence,
    estimate_influence_uniform,
    estimate_percolation,
    exact_influence_bruteforce,
    infection_frequencies,
    percolation_trial,
    simulate_ctic,
    simulate_dtic,
    simulate_rn,
    simulate_sir_coupled,
    trial_rng,
)
from .spectral import (
    SparseMatrix,
    SpectralError,
    SpectralResult,
    dense_spectral_radius,
    dense_symmetrized_radius,
    nonnegative_spectral_radius,
    rho_c_of_set,
    sandwich_check,
    symmetrized_spectral_radius,
)

__version__ = "0.1.0"
