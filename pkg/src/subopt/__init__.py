"""Low-adaptivity maximisation of non-monotone submodular functions under
p-system and p-extendible-system constraints."""

from .baselines import greedy, repeated_greedy, sample_greedy
from .constraints import (
    GroupCapSystem,
    MatroidIntersection,
    PartitionMatroid,
    Unconstrained,
    UniformMatroid,
    estimate_p,
)
from .exhaustive import brute_force_opt, estimate_expected_value, quarter_sampling_check
from .objectives import (
    ConstantObjective,
    CoverageObjective,
    CutObjective,
    EntropyObjective,
    LogDetObjective,
    ModularObjective,
)
from .oracle import (
    IndependenceSystem,
    RunLedger,
    SubmodularOracle,
    extension_batch,
    feasible_batch,
    marginal_batch,
    value_batch,
)
from .sampling import (
    RunResult,
    SamplingParams,
    binary_search_eta,
    preset_p_extendible,
    preset_p_system,
    rand_sampling,
    rand_sequence,
    rep_sampling,
    threshold_candidates,
    unif_sampling,
)

__version__ = "0.1.0"
