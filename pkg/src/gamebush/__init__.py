"""Multi-root extensive-form game bundles: models, equilibria, spanning."""

from .model import (
    BundleValidationError,
    GameBundle,
    GameBush,
    InfoSet,
    MeetPartition,
    Violation,
    bundle_from_dict,
    bundle_to_dict,
    load_bundle,
    meet_partition,
    save_bundle,
    validate_bush,
)
from .payoff_models import (
    ConstantPointModel,
    FunctionModel,
    NoPlanError,
    PayoffModel,
    SampledGraphModel,
    Selector,
    builtin_names,
)
from .strategies import (
    BehaviourProfile,
    MixedProfile,
    Plan,
    PureStrategy,
    ReachReport,
    action_values,
    behaviour_to_mixed,
    enumerate_pure,
    expected_payoffs,
    make_plan,
    mixed_to_behaviour,
    reach,
    uniform_profile,
)
from .subgames import (
    SPerfectStatus,
    SubgameLattice,
    SubgameSet,
    closure,
    compose,
    enumerate_subgame_sets,
    factor,
    has_perfect_recall,
    is_s_perfect,
    is_solvable,
    is_subgame_set,
    restrict,
)
from .solver import (
    MyopicCertificate,
    PerfectResult,
    RegularizationConfig,
    SolverConfig,
    SweepTable,
    nash_residual,
    regularized_payoffs,
    retract,
    simplex_project,
    solve_bundle_perfect,
    solve_myopic,
    sweep,
    verify_myopic,
)
from .spanning import (
    SimplicialCorrespondence,
    TriangulatedPair,
    Z2ChainSystem,
    chain_system,
    circle_pair,
    compose_correspondences,
    constant_correspondence,
    fundamental_class,
    graph_correspondence,
    has_spanning,
    interval_pair,
    make_correspondence,
    make_pair,
    product_correspondences,
    restrict_correspondence,
    scale_correspondence,
    square_pair,
    sum_correspondences,
    torus_pair,
    union_correspondences,
)

__version__ = "0.1.0"
