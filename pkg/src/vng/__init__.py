"""Growth-optimal investment paths on scenario trees, with dual certificates.

The package solves finite-horizon log-optimal portfolio problems over
margin-constrained markets with transaction costs, encoded on scenario trees,
and verifies optimality by constructing a supporting dual price path whose
defining inequalities are checked exactly (inner products, section vertices,
and one small LP per node).
"""

__version__ = "0.1.0"

from . import errors
from .certification import (
    DualPath,
    EquivalenceReport,
    GrowthEntry,
    RapidityCertificate,
    SupermartingaleReport,
    buy_and_hold_path,
    check_equivalences,
    extract_dual,
    fixed_fraction_path,
    growth_dominance,
    prop4_reconstruct,
    sample_competitor_path,
    sample_competitor_paths,
    supermartingale_check,
    verify_rapid,
)
from .market_model import (
    ConeLift,
    MarketConstants,
    MarketData,
    dual_cone_residual,
    dual_cone_violation,
    feasible_completion,
    in_Z,
    lift_X,
    lift_Z,
    margin_residual,
    market_constants,
    returns_from_prices,
    sample_cone_batch,
    sample_cone_point,
    sample_transition_pair,
    transition_frontier,
    transition_frontier_batch,
    self_financing_value,
    slater_path,
    dominating_path,
)
from .objectives import (
    LinearObjective,
    LiquidationObjective,
    NormPenalizedObjective,
    PsiClassReport,
    TerminalObjective,
    check_psi_class,
    log_objective,
)
from .scenario_tree import (
    AdaptedVector,
    Node,
    ScenarioTree,
    build_tree,
    conditional_expectation,
    expectation,
    node_probability,
)
from .solver import (
    KktReport,
    KktResiduals,
    PathProblem,
    Solution,
    SolveOptions,
    assemble,
    kkt_report,
    solve_log_optimal,
)
