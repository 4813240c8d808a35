"""Pooled, conditional and covariate-adjusted ROC curves, and a bootstrap
test of whether the covariate-adjusted curve equals the pooled one."""

__version__ = "0.1.0"

from covroc.errors import (  # noqa: E402
    CovrocError,
    EvaluationError,
    InvalidInputError,
    MonteCarloError,
    ReplicateError,
    SelectionError,
)
from covroc.estimators import (  # noqa: E402
    Curve,
    KernelSpec,
    MarkerSample,
    PairedSample,
    RegressionFit,
    ResidualSet,
    aroc_estimate,
    auc,
    conditional_roc,
    default_grid,
    ecdf_eval,
    empirical_quantile,
    nw_fit,
    pooled_roc,
    standardized_residuals,
)
from covroc.bandwidth import BandwidthSearch, default_search, select_bandwidth  # noqa: E402
from covroc.io import StudyDataset, read_csv, read_result, write_result  # noqa: E402
from covroc.testing import (  # noqa: E402
    BandwidthPolicy,
    DistanceKind,
    SplitConfig,
    TestConfig,
    TestResult,
    curve_distance,
    run_test,
    split_sample,
)
