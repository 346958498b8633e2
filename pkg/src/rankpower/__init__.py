"""Exact and Monte Carlo power of two-sample rank tests under Lehmann alternatives."""

from .errors import (
    CapExceeded,
    DegenerateFit,
    DuplicateValue,
    LengthMismatch,
    NoSolution,
    NonFinite,
    NotBracketed,
    QuadratureFailure,
    RankPowerError,
    ZeroDerivative,
)
from .ranks import (
    RankSet,
    SampleSizes,
    ScoreKind,
    ScoreVector,
    custom_scores,
    enumerate_ranksets,
    ranks_of_second_sample,
    score_vector,
    statistic,
)
from .exact import (
    MpTest,
    Pmf,
    RandomizedTest,
    alt_pmf,
    critical_value,
    exact_power,
    lmp_scores,
    mp_test,
    null_pmf,
    rankset_prob_lehmann,
)

from .distributions import DistributionFamily, Lehmann, Local, Shift
from .simulate import (
    ComparatorTest,
    MatchedSize,
    PowerEstimate,
    RankTest,
    RngSpec,
    draw_two_samples,
    matched_sample_size,
    power_mc,
)
from .asymptotics import (
    DeficiencyFit,
    GaussianLocalPower,
    PowerExpansion,
    are,
    deficiency_curve,
    deficiency_leading_coeff,
    numeric_derivative,
)

__version__ = "0.1.0"
