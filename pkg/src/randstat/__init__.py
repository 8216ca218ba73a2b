"""Classical and externally randomized rank and phi-divergence tests."""

from .chi2 import ChiSquare, chi2_cdf, chi2_pdf, chi2_quantile, chi2_survival
from .core import (
    CountVector,
    ProbabilityVector,
    RandomSource,
    RankingMatrix,
    UnitWeights,
    ValidationError,
    sample_multinomial,
    sample_outcomes,
    sample_rankings,
    sample_sphere,
)
from .gof import (
    DomainError,
    GofTestResult,
    PhiSpec,
    SampleSizeReport,
    check_sample_size,
    classical_phi_statistic,
    custom_phi,
    phi_lambda,
    randomized_phi_from_counts,
    randomized_phi_statistic,
    weighted_multinomial_sum,
)
from .montecarlo import (
    ConvergenceReport,
    ExperimentConfig,
    ExperimentError,
    StatisticSpec,
    calibration_check,
    empirical_ks_distance,
    run_experiment,
)
from .rank import (
    RankTestResult,
    ScoreFunction,
    brown_mood,
    classical_rank_statistic,
    friedman,
    make_score,
    randomized_rank_statistic,
    score_vectors,
)

__version__ = "0.1.0"
