"""Chernoff-information analysis of repetitive QND qubit readout.

The figure of merit C is the Chernoff information between the outcome
distributions conditioned on the two eigenvalues: soft-decoded error
rates decay as exp(-C N) over N repetitions. The package computes C and
its companion statistics for analytic and measured outcome
distributions, predicts cumulative error rates, quantifies the
advantage of soft decoding over outcome binarization, and validates
everything with a hidden-Markov Monte Carlo engine that includes state
transitions between repetitions.
"""

from .chernoff import (
    ChernoffSummary,
    DegeneratePairWarning,
    ExpansionRangeWarning,
    SmallCExpansion,
    TiltedDensity,
    cgf,
    chernoff_information,
    cumulants_under_eff,
    effective_distribution,
    small_c_expansion,
)
from .distributions import (
    OutcomePair,
    SingleRepetitionErrors,
    Support,
    SupportError,
    SupportKind,
    binary_pair,
    cauchy_pair,
    empirical_pair,
    empirical_pair_from_csv,
    gaussian_conversion_pair,
    gaussian_mixture_pair,
    gaussian_pair,
    poissonian_pair,
    single_repetition_errors,
)
from .error_model import (
    AdvantageGrid,
    AdvantageReport,
    BinaryChernoff,
    ErrorCurve,
    advantage,
    advantage_grid,
    binary_chernoff,
    chernoff_upper_bound,
    conversion_chernoff,
    gaussian_ansatz,
    saddle_point,
    snr_from_binarized_error,
    summary_from_values,
)
from .hmm import (
    CollapseEntry,
    CollapseResult,
    HmmSpec,
    McEstimate,
    SingleShotRegimeWarning,
    ZeroLikelihoodError,
    decode,
    forward_loglik,
    monte_carlo,
    sample_trajectory,
    universality_collapse,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # distributions
    "Support", "SupportKind", "SupportError", "OutcomePair",
    "SingleRepetitionErrors", "gaussian_pair", "poissonian_pair",
    "cauchy_pair", "gaussian_conversion_pair", "gaussian_mixture_pair",
    "binary_pair", "empirical_pair", "empirical_pair_from_csv",
    "single_repetition_errors",
    # chernoff
    "ChernoffSummary", "SmallCExpansion", "TiltedDensity",
    "DegeneratePairWarning", "ExpansionRangeWarning", "cgf",
    "chernoff_information", "effective_distribution", "cumulants_under_eff",
    "small_c_expansion",
    # error model
    "ErrorCurve", "BinaryChernoff", "AdvantageReport", "AdvantageGrid",
    "gaussian_ansatz", "saddle_point", "chernoff_upper_bound",
    "summary_from_values", "binary_chernoff", "advantage",
    "conversion_chernoff", "snr_from_binarized_error", "advantage_grid",
    # hmm
    "HmmSpec", "McEstimate", "CollapseEntry", "CollapseResult",
    "ZeroLikelihoodError", "SingleShotRegimeWarning", "sample_trajectory",
    "forward_loglik", "decode", "monte_carlo", "universality_collapse",
]
