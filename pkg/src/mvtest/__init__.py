"""MANOVA group tests (Wilks, Pillai, Hotelling-Lawley, Roy) and a Monte Carlo
harness for their type I error rates."""

from .errors import (
    AbortError,
    DegenerateError,
    DimensionMismatch,
    DomainError,
    InvalidSpec,
    MvTestError,
    NoConvergence,
    NonNumericResponse,
    NotPositiveDefinite,
    ParseError,
    SingularError,
    TooFewGroups,
    UnknownPreset,
)
from .manova import (
    FReport,
    GroupedDataset,
    ManovaResult,
    SscpPair,
    Statistic,
    TestStatistics,
    analyze,
    compute_sscp,
    f_approx_paper,
    f_approx_software,
    grand_mean,
    group_means,
    manova_test,
    regression_test,
    stats_from_eigenvalues,
)
from .sampler import CovarianceSpec, RngState, build_cov, gen_dataset, mvn_sample, rng_new, rng_substream, std_normal
from .simlab import (
    RejectionRow,
    ScenarioConfig,
    SimulationTable,
    mc_stderr,
    preset_tables,
    run_replicate,
    run_scenario,
    run_suite,
)

__version__ = "0.1.0"
