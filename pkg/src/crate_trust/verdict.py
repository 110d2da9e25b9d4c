"""Trust and distrust costs, severity labels, and the report.

Lower trust cost and higher distrust cost mean a safer crate.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .catalog import CostConfig, Polarity, conclusion, instantiate
from .errors import ResourceLimit, TooLarge
from .model import CrateRecord, DependencyGraph
from .sat import Budget
from .solver import SOLVERS, Status, TrustQuery, TrustSolution, query_from_graph


class SeverityLabel(enum.IntEnum):
    SAFE = 0
    LOW_SEVERITY = 1
    MEDIUM_SEVERITY = 2
    HIGH_SEVERITY = 3
    CRITICAL = 4


@dataclass(frozen=True)
class Band:
    """Label applies when ``trust <= max_trust`` and ``distrust >= min_distrust``."""

    label: SeverityLabel
    max_trust: int
    min_distrust: int = 0


DEFAULT_BANDS: tuple[Band, ...] = (
    Band(SeverityLabel.SAFE, 20, 50),
    Band(SeverityLabel.LOW_SEVERITY, 35),
    Band(SeverityLabel.MEDIUM_SEVERITY, 55),
    Band(SeverityLabel.HIGH_SEVERITY, 70, 40),
)


def bands_from_config(rows: Iterable[Sequence] | None) -> tuple[Band, ...]:
    if rows is None:
        return DEFAULT_BANDS
    return tuple(Band(SeverityLabel[str(r[0])], int(r[1]), int(r[2]) if len(r) > 2 else 0) for r in rows)


def combine(trust_cost: int, distrust_cost: int, bands: Sequence[Band] = DEFAULT_BANDS) -> SeverityLabel:
    """First band whose inequalities hold, else CRITICAL."""
    for name, value in (("trust_cost", trust_cost), ("distrust_cost", distrust_cost)):
        if not 0 <= value <= 100:
            raise ValueError(f"{name} {value} outside [0, 100]")
    for band in bands:
        if trust_cost <= band.max_trust and distrust_cost >= band.min_distrust:
            return band.label
    return SeverityLabel.CRITICAL


@dataclass(frozen=True)
class ChosenAssumption:
    id: str
    label: str
    cost: int


@dataclass(frozen=True)
class Verdict:
    crate: str
    version: str
    trust_cost: int | None
    distrust_cost: int | None
    trust_assumptions: tuple[ChosenAssumption, ...]
    distrust_assumptions: tuple[ChosenAssumption, ...]
    label: SeverityLabel | None
    incomplete: tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return not self.incomplete

    def to_dict(self) -> dict:
        def rows(items):
            return [{"id": a.id, "label": a.label, "cost": a.cost} for a in items]

        return {
            "crate": self.crate,
            "version": self.version,
            "trust_cost": self.trust_cost,
            "distrust_cost": self.distrust_cost,
            "trust_assumptions": rows(self.trust_assumptions),
            "distrust_assumptions": rows(self.distrust_assumptions),
            "label": self.label.name if self.label is not None else None,
            "incomplete": list(self.incomplete),
        }

    @classmethod
    def from_dict(cls, data) -> Verdict:
        def rows(items):
            return tuple(ChosenAssumption(r["id"], r["label"], int(r["cost"])) for r in items)

        return cls(
            crate=data["crate"],
            version=data["version"],
            trust_cost=data["trust_cost"],
            distrust_cost=data["distrust_cost"],
            trust_assumptions=rows(data["trust_assumptions"]),
            distrust_assumptions=rows(data["distrust_assumptions"]),
            label=SeverityLabel[data["label"]] if data["label"] is not None else None,
            incomplete=tuple(data.get("incomplete", ())),
        )


def build_query(
    graph: DependencyGraph,
    cfg: CostConfig,
    polarity: Polarity,
    budget: Budget | None = None,
) -> TrustQuery:
    return query_from_graph(
        graph.root,
        lambda key: instantiate(graph.record(key), graph, cfg, polarity),
        graph.dependencies,
        conclusion(graph.root, polarity),
        budget,
    )


def _solve(query: TrustQuery, algorithm: str) -> TrustSolution:
    try:
        return SOLVERS[algorithm](query)
    except (ResourceLimit, TooLarge):
        return TrustSolution(None, (), Status.RESOURCE_LIMIT)


def evaluate(
    crate: CrateRecord,
    graph: DependencyGraph,
    cfg: CostConfig,
    algorithm: str = "horn",
    budget: Budget | None = None,
    bands: Sequence[Band] | None = None,
) -> Verdict:
    if graph.root != crate.key:
        raise ValueError("graph is not rooted at the evaluated crate")
    if algorithm not in SOLVERS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    bands = bands if bands is not None else bands_from_config(cfg.bands)
    costs: dict[Polarity, int | None] = {}
    chosen: dict[Polarity, tuple[ChosenAssumption, ...]] = {}
    incomplete = []
    for polarity in (Polarity.TRUST, Polarity.DISTRUST):
        query = build_query(graph, cfg, polarity, budget)
        solution = _solve(query, algorithm)
        by_id = query.by_id()
        if solution.status is Status.SOLVED:
            costs[polarity] = solution.min_cost
            chosen[polarity] = tuple(
                ChosenAssumption(i, by_id[i].label, by_id[i].cost)
                for i in sorted(solution.chosen, key=lambda i: (-by_id[i].cost, i))
            )
        else:
            # the base assumption always makes both queries feasible
            costs[polarity] = None
            chosen[polarity] = ()
            incomplete.append("trust" if polarity is Polarity.TRUST else "distrust")
    trust, distrust = costs[Polarity.TRUST], costs[Polarity.DISTRUST]
    label = combine(trust, distrust, bands) if trust is not None and distrust is not None else None
    return Verdict(
        crate.name,
        crate.version,
        trust,
        distrust,
        chosen[Polarity.TRUST],
        chosen[Polarity.DISTRUST],
        label,
        tuple(incomplete),
    )


# ----------------------------------------------------------------- report

_COLORS = {
    SeverityLabel.SAFE: "\033[32m",
    SeverityLabel.LOW_SEVERITY: "\033[33m",
    SeverityLabel.MEDIUM_SEVERITY: "\033[36m",
    SeverityLabel.HIGH_SEVERITY: "\033[35m",
    SeverityLabel.CRITICAL: "\033[31m",
}
_GREEN, _RED, _RESET = "\033[32m", "\033[31m", "\033[0m"


def render_report(v: Verdict, mode: str = "text", color: bool = False) -> str:
    if mode == "json":
        return json.dumps(v.to_dict(), indent=2) + "\n"
    if mode != "text":
        raise ValueError(f"unknown report mode {mode!r}")

    def paint(text: str, code: str) -> str:
        return f"{code}{text}{_RESET}" if color else text

    def cost(value: int | None) -> str:
        return "incomplete (timeout)" if value is None else str(value)

    lines = [f"crate: {v.crate}@{v.version}"]
    lines.append(paint(f"trust_cost: {cost(v.trust_cost)}", _GREEN))
    lines.append("Assumptions for Trusting:")
    lines += [paint(f"  - [{a.cost}] {a.label}", _GREEN) for a in v.trust_assumptions]
    lines.append(paint(f"distrust_cost: {cost(v.distrust_cost)}", _RED))
    lines.append("Assumptions for Distrusting:")
    lines += [paint(f"  - [{a.cost}] {a.label}", _RED) for a in v.distrust_assumptions]
    if v.label is None:
        lines.append("label: INCOMPLETE (" + ", ".join(v.incomplete) + " query timed out)")
    else:
        lines.append("label: " + paint(v.label.name, _COLORS[v.label]))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> Verdict:
    return Verdict.from_dict(json.loads(text))
