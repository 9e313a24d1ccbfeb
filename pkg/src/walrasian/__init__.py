"""Testing approximate Walrasian equilibria and building blocking coalitions
in exchange economies."""

from .coalitions import (
    BlockingCoalition,
    check_equal_treatment,
    equal_treatment_block,
    find_blocking_coalition,
    theoretical_k,
    verify_coalition,
)
from .convexgeom import TradeSet, approx_caratheodory, hull_membership, project_hull
from .economy import (
    PLC,
    Allocation,
    Consumer,
    Economy,
    ReplicaAllocation,
    ShiftedPower,
    check_allocation,
    check_replica_allocation,
    normalize,
    replicate,
    utility_eval,
    utility_supergradient,
)
from .equilibrium import (
    ApproxParams,
    Verdict,
    compute_params,
    convert_notion,
    lambda_big_bound,
    min_expenditure,
    test_walrasian,
    verify_eps_walrasian,
)
from .estimator import WalrasianTester
from .exceptions import (
    ConsistencyError,
    InfeasibleError,
    InputError,
    NumericalFailure,
    WalrasianError,
)

__all__ = [
    "PLC", "Allocation", "ApproxParams", "BlockingCoalition", "ConsistencyError", "Consumer",
    "Economy", "InfeasibleError", "InputError", "NumericalFailure", "ReplicaAllocation",
    "ShiftedPower", "TradeSet", "Verdict", "WalrasianError", "WalrasianTester",
    "approx_caratheodory", "check_allocation", "check_equal_treatment",
    "check_replica_allocation", "compute_params", "convert_notion", "equal_treatment_block",
    "find_blocking_coalition", "hull_membership", "lambda_big_bound", "min_expenditure",
    "normalize", "project_hull", "replicate", "test_walrasian", "theoretical_k",
    "utility_eval", "utility_supergradient", "verify_coalition", "verify_eps_walrasian",
]

__version__ = "0.1.0"
