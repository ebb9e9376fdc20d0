"""Structured exploration for deterministic MDPs.

Declared equivalences between action sequences quotient the tree of
short action strings into a layered graph; a maximum-entropy
occupancy measure over that graph yields an exploration policy that
spreads visitation across genuinely distinct outcomes instead of
redundant action orderings.
"""

from __future__ import annotations

from .agent import AgentConfig, LearningCurve, QTable, evaluate, train
from .algebra import (
    EMPTY_OMEGA,
    ActionSet,
    BudgetExceeded,
    DslError,
    EquivalenceSet,
    closure,
    equivalent,
    format_dsl,
    make_omega,
    parse_dsl,
)
from .envs import (
    BUILTIN_OMEGA_VARIANTS,
    ENV_REGISTRY,
    Environment,
    UnknownEnv,
    UnknownVariant,
    builtin_omega,
    make_env,
    parse_builtin_spec,
)
from .explore import (
    CursorAtFinalLayer,
    RngStream,
    SequenceCursor,
    VisitLog,
    derive_reset_seed,
    run_pure_exploration,
    sample_exploration_action,
)
from .graph import (
    BuildReport,
    DepthZero,
    GraphNode,
    LocalDynamicsGraph,
    UnknownNode,
    build_graph,
    from_json,
    node_count_bound_check,
    to_json,
)
from .harness import (
    EXPERIMENT_KINDS,
    EmptyReport,
    ExperimentConfig,
    ReportRow,
    SummaryRow,
    run_experiment,
    summarize,
)
from .solver import (
    ExplorationPolicy,
    InfeasibleGraph,
    NotConvergedError,
    OccupancyMeasure,
    SolverConfig,
    extract_policy,
    forward_marginals,
    objective_value,
    policy_from_json,
    policy_to_json,
    solve_occupancy,
    uniform_policy,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "AgentConfig",
    "BUILTIN_OMEGA_VARIANTS",
    "BudgetExceeded",
    "BuildReport",
    "CursorAtFinalLayer",
    "DepthZero",
    "DslError",
    "EMPTY_OMEGA",
    "ENV_REGISTRY",
    "EXPERIMENT_KINDS",
    "EmptyReport",
    "Environment",
    "EquivalenceSet",
    "ExperimentConfig",
    "ExplorationPolicy",
    "GraphNode",
    "InfeasibleGraph",
    "LearningCurve",
    "LocalDynamicsGraph",
    "NotConvergedError",
    "OccupancyMeasure",
    "QTable",
    "ReportRow",
    "RngStream",
    "SequenceCursor",
    "SolverConfig",
    "SummaryRow",
    "UnknownEnv",
    "UnknownNode",
    "UnknownVariant",
    "VisitLog",
    "build_graph",
    "builtin_omega",
    "closure",
    "derive_reset_seed",
    "equivalent",
    "evaluate",
    "extract_policy",
    "format_dsl",
    "forward_marginals",
    "from_json",
    "make_env",
    "make_omega",
    "node_count_bound_check",
    "objective_value",
    "parse_builtin_spec",
    "parse_dsl",
    "policy_from_json",
    "policy_to_json",
    "run_experiment",
    "run_pure_exploration",
    "sample_exploration_action",
    "solve_occupancy",
    "summarize",
    "to_json",
    "train",
    "uniform_policy",
]
