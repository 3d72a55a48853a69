"""Opinion dynamics on posting networks with stubborn agents.

Load or build a directed network whose edges carry reading probabilities,
solve for the expected limiting opinions of the persuadable agents, score
every agent's harmonic influence, choose where a new committed source
should post, and simulate the underlying stochastic process to check all
of it.
"""

from .centrality import CentralityReport, hic_nonstubborn, hic_stubborn, rank_all
from .dynamics import (
    Constant,
    OpinionState,
    PowerLaw,
    RateEstimate,
    SimulationTrace,
    StubbornnessSchedule,
    Verbalization,
    consensus_run,
    ergodicity_coefficient,
    is_scrambling,
    rate_estimate,
    run,
    step,
    update_matrix,
)
from .equilibrium import (
    EquilibriumSolution,
    Modification,
    SystemMatrices,
    assemble,
    full_opinion_vector,
    inverse_column,
    row_sums_of_inverse,
    solve_equilibrium,
    write_matrix_dump,
)
from .errors import (
    ConfigError,
    DomainError,
    DuplicateEdgeError,
    NumericalError,
    ParseError,
    PreconditionError,
    StubnetError,
)
from .network import (
    Network,
    ValidationReport,
    classify_stubborn,
    load_network,
    network_from_edges,
    normalize_rates,
    validate,
    write_network,
)
from .placement import (
    AllCandidates,
    MeanShift,
    PlacementProblem,
    PlacementResult,
    ThresholdCount,
    TopHic,
    baseline_place,
    brute_force_place,
    candidate_pool,
    greedy_place,
    marginal_gain_mean,
    mean_rate_probability,
    objective_value,
)

__version__ = "0.1.0"

__all__ = [
    "AllCandidates",
    "CentralityReport",
    "ConfigError",
    "Constant",
    "DomainError",
    "DuplicateEdgeError",
    "EquilibriumSolution",
    "MeanShift",
    "Modification",
    "Network",
    "NumericalError",
    "OpinionState",
    "ParseError",
    "PlacementProblem",
    "PlacementResult",
    "PowerLaw",
    "PreconditionError",
    "RateEstimate",
    "SimulationTrace",
    "StubbornnessSchedule",
    "StubnetError",
    "SystemMatrices",
    "ThresholdCount",
    "TopHic",
    "ValidationReport",
    "Verbalization",
    "assemble",
    "baseline_place",
    "brute_force_place",
    "candidate_pool",
    "classify_stubborn",
    "consensus_run",
    "ergodicity_coefficient",
    "full_opinion_vector",
    "greedy_place",
    "hic_nonstubborn",
    "hic_stubborn",
    "inverse_column",
    "is_scrambling",
    "load_network",
    "marginal_gain_mean",
    "mean_rate_probability",
    "network_from_edges",
    "normalize_rates",
    "objective_value",
    "rank_all",
    "rate_estimate",
    "row_sums_of_inverse",
    "run",
    "solve_equilibrium",
    "step",
    "update_matrix",
    "validate",
    "write_matrix_dump",
    "write_network",
]
