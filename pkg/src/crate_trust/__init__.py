"""Minimum-trust scoring for Rust crates.

Each piece of evidence about a crate becomes a weighted assumption; the
trust cost is the cheapest set of assumptions that proves the crate safe,
and the distrust cost the cheapest set proving it unsafe.
"""

from .catalog import CostConfig, Polarity, default_config, instantiate, load_config
from .errors import (
    CyclicClauses,
    CyclicDependency,
    InvalidConfig,
    NetworkUnavailable,
    NonHornShape,
    NotFound,
    ParseError,
    ResourceLimit,
    TooLarge,
    TrustError,
)
from .logic import HornClause, Var, fact, forward_chain, to_horn_clauses, tracker
from .model import CrateRecord, DependencyGraph, RecordCache, fetch_record, load_record, resolve_graph, store_record
from .sat import Budget, sat_search
from .solver import (
    AssumptionInstance,
    Status,
    TrustQuery,
    TrustSolution,
    reduce_vertex_cover,
    solve_bruteforce,
    solve_horn,
    solve_naive,
    unfold,
)
from .verdict import SeverityLabel, Verdict, combine, evaluate, render_report

__version__ = "0.1.0"

__all__ = [
    "AssumptionInstance", "Budget", "CostConfig", "CrateRecord", "CyclicClauses", "CyclicDependency",
    "DependencyGraph", "HornClause", "InvalidConfig", "NetworkUnavailable", "NonHornShape", "NotFound",
    "ParseError", "Polarity", "RecordCache", "ResourceLimit", "SeverityLabel", "Status", "TooLarge",
    "TrustError", "TrustQuery", "TrustSolution", "Var", "Verdict", "combine", "default_config", "evaluate",
    "fact", "fetch_record", "forward_chain", "instantiate", "load_config", "load_record", "reduce_vertex_cover",
    "render_report", "resolve_graph", "sat_search", "solve_bruteforce", "solve_horn", "solve_naive",
    "store_record", "to_horn_clauses", "tracker", "unfold",
]
