"""Certifying photon-number statistics of QKD sources from intensity correlations."""

__version__ = "0.1.0"

from .decoy_bounds import IntensitySettings, ObservedGains, YieldBounds, bound_error_rate_e1, bound_yields
from .errors import (
    DataError,
    InfeasibleConstraints,
    InfeasibleError,
    ParseError,
    PhotonCertError,
    ValidationError,
)
from .hbt_simulator import (
    CoincidenceCounts,
    CorrelationMeasurement,
    DetectorConfig,
    count_coincidences,
    estimate_correlation,
    estimate_correlations,
    simulate_pulse_train,
)
from .keyrate import ChannelModel, ProtocolParams, SourceSpec, binary_entropy, rate_vs_distance_scan, secure_key_rate
from .lp import LPProblem, LPSolution, solve_lp
from .photon_model import (
    Mixture,
    PhotonNumberDistribution,
    Poisson,
    SinglePhoton,
    Thermal,
    correlation_from_distribution,
    parse_source,
)
from .statistics_bounds import CorrelationConstraints, ProbabilityBounds, bound_photon_probabilities

__all__ = [
    "__version__",
    "IntensitySettings",
    "ObservedGains",
    "YieldBounds",
    "bound_error_rate_e1",
    "bound_yields",
    "DataError",
    "InfeasibleConstraints",
    "InfeasibleError",
    "ParseError",
    "PhotonCertError",
    "ValidationError",
    "CoincidenceCounts",
    "CorrelationMeasurement",
    "DetectorConfig",
    "count_coincidences",
    "estimate_correlation",
    "estimate_correlations",
    "simulate_pulse_train",
    "ChannelModel",
    "ProtocolParams",
    "SourceSpec",
    "binary_entropy",
    "rate_vs_distance_scan",
    "secure_key_rate",
    "LPProblem",
    "LPSolution",
    "solve_lp",
    "Mixture",
    "PhotonNumberDistribution",
    "Poisson",
    "SinglePhoton",
    "Thermal",
    "correlation_from_distribution",
    "parse_source",
    "CorrelationConstraints",
    "ProbabilityBounds",
    "bound_photon_probabilities",
]
