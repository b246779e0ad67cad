"""Equilibria of Bayesian games whose payoffs are chosen by a meta-level game."""

from .errors import (
    BoundaryEquilibrium,
    GridTooCoarse,
    HypothesisViolated,
    MetaBNEError,
    SchemaError,
    ShapeMismatch,
    TooLarge,
    UniquenessUnknown,
    UniquenessViolated,
    ZeroMarginal,
)
from .game import (
    AgentFormGame,
    FiniteBayesianGame,
    conditional_prior,
    deviation_gain,
    independent_prior,
    interim_expected_payoff,
    is_bne,
    to_agent_form,
)
from .meta import (
    EquilibriumTable,
    MetaGame,
    build_equilibrium_table,
    env_best_reply,
    env_payoff,
    interim_meta_payoff,
    is_meta_bne,
    meta_best_reply,
    solve_meta_bne,
    to_meta_agent_game,
)
from .solve import (
    SolveReport,
    Status,
    UniquenessVerdict,
    audit_uniqueness,
    enumerate_equilibria,
    solve_best_response_iteration,
    solve_logit_homotopy,
)
from .transform import (
    MetaActionSpaces,
    MetaProfile,
    Transformation,
    TransformationRule,
    TransformationSet,
    apply_transformation,
    transformation_probability,
)

__version__ = "0.1.0"
