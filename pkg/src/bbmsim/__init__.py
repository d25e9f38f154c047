"""Exact simulation of one-dimensional branching Brownian motion, with the
additive-martingale statistics, limit-law samplers, and seeded verification
batteries built on top of it.

Layers, bottom to top: sampling (seeded streams and primitive draws), core
(the event-exact simulator and genealogy queries), stats (per-realization
statistics), limits (limit objects and tail estimation), experiments
(ensembles, closed-form checks, distributional experiments), config/cli
(INI-driven command line).
"""

__version__ = "0.1.0"

from .core import DEFAULT_PARTICLE_CAP, Realization, SimConfig, Snapshot, simulate
from .experiments import (
    EnsembleSummary,
    ExperimentConfig,
    Verdict,
    check_barrier_bound,
    check_critical_scaling,
    check_death_functional,
    check_extinction_probability,
    check_many_to_one,
    check_martingale_means,
    check_oracle_equivalence,
    check_overlap_rescaled_mass,
    check_population_moments,
    check_second_moment,
    fluctuation_experiment,
    fluctuation_report,
    limit_selftests,
    overlap_decay_experiment,
    run_ensemble,
)
from .limits import (
    FluctuationSpec,
    GumbelMixtureSpec,
    gaussian_fluctuation_variance,
    hill_sensitivity,
    hill_tail_index,
    rescale_fluctuation,
    sample_limit_extremal_atoms,
    sample_limit_maximum,
)
from .sampling import (
    SERIES_TAIL_SD_TARGET,
    OffspringDistribution,
    RngStream,
    StableSpec,
    offspring_moments,
    sample_exponential_ppp,
    sample_gaussian_increment,
    sample_lifetime,
    sample_offspring,
    sample_stable_positive,
    series_truncation,
)
from .stats import (
    BETA_CRITICAL,
    BetaGrid,
    StatisticSeries,
    additive_martingale,
    centering,
    critical_derivative_martingale,
    derivative_martingale,
    extremal_count,
    functional_martingale,
    growth_statistic,
    martingale_rate,
    max_displacement,
    overlap_cdf,
    overlap_mass,
    overlap_mass_pairwise,
    resolve_function,
)

__all__ = [
    "__version__",
    "BETA_CRITICAL",
    "DEFAULT_PARTICLE_CAP",
    "BetaGrid",
    "EnsembleSummary",
    "ExperimentConfig",
    "FluctuationSpec",
    "GumbelMixtureSpec",
    "OffspringDistribution",
    "Realization",
    "RngStream",
    "SERIES_TAIL_SD_TARGET",
    "SimConfig",
    "Snapshot",
    "StableSpec",
    "StatisticSeries",
    "Verdict",
    "additive_martingale",
    "centering",
    "check_barrier_bound",
    "check_critical_scaling",
    "check_death_functional",
    "check_extinction_probability",
    "check_many_to_one",
    "check_martingale_means",
    "check_oracle_equivalence",
    "check_overlap_rescaled_mass",
    "check_population_moments",
    "check_second_moment",
    "critical_derivative_martingale",
    "derivative_martingale",
    "extremal_count",
    "fluctuation_experiment",
    "fluctuation_report",
    "functional_martingale",
    "gaussian_fluctuation_variance",
    "growth_statistic",
    "hill_sensitivity",
    "hill_tail_index",
    "limit_selftests",
    "martingale_rate",
    "max_displacement",
    "offspring_moments",
    "overlap_cdf",
    "overlap_decay_experiment",
    "overlap_mass",
    "overlap_mass_pairwise",
    "rescale_fluctuation",
    "resolve_function",
    "run_ensemble",
    "sample_exponential_ppp",
    "sample_gaussian_increment",
    "sample_lifetime",
    "sample_limit_extremal_atoms",
    "sample_limit_maximum",
    "sample_offspring",
    "sample_stable_positive",
    "series_truncation",
    "simulate",
]
