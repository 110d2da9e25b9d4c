"""Minimum trust: the cheapest set of assumptions that entails a conclusion.

Three solvers share one contract:

* :func:`solve_horn` unfolds acyclic definite Horn assumptions into a
  formula over tracker variables, then binary-searches the cost bound.
* :func:`solve_naive` accepts arbitrary encodings.  It eliminates every
  non-tracker variable from the validity condition by Shannon expansion,
  so it blows up quickly with the number of facts.
* :func:`solve_bruteforce` enumerates subsets and is the test oracle.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from .errors import CyclicClauses, CyclicDependency, NonHornShape, ResourceLimit, TooLarge
from .logic import (
    BOT,
    TOP,
    Formula,
    HornClause,
    Var,
    acyclic_ranking,
    atoms,
    conj,
    conj_all,
    disj,
    disj_all,
    fact,
    forward_chain,
    implies,
    neg,
    substitute_many,
    to_horn_clauses,
    tracker,
)
from .sat import Budget, CostSearch, Deadline, as_deadline

BRUTEFORCE_LIMIT = 20


@dataclass(frozen=True)
class AssumptionInstance:
    id: str
    tracker: Var
    encoding: Formula
    cost: int
    label: str = ""
    provenance: str = ""

    def __post_init__(self):
        if not 0 <= self.cost <= 100:
            raise ValueError(f"assumption {self.id}: cost {self.cost} outside [0, 100]")

    @classmethod
    def make(cls, id: str, encoding: Formula, cost: int, label: str = "", provenance: str = ""):
        return cls(id, tracker(f"a:{id}"), encoding, cost, label, provenance)

    def guarded(self) -> Formula:
        """``tracker ⇒ encoding``."""
        return implies(self.tracker, self.encoding)


@dataclass(frozen=True)
class TrustQuery:
    assumptions: tuple[AssumptionInstance, ...]
    conclusion: Var
    budget: Budget = field(default_factory=Budget)

    def __post_init__(self):
        object.__setattr__(self, "assumptions", tuple(self.assumptions))
        ids = [a.id for a in self.assumptions]
        if len(set(ids)) != len(ids):
            raise ValueError("assumption ids must be unique")

    def by_id(self) -> dict[str, AssumptionInstance]:
        return {a.id: a for a in self.assumptions}

    def formula(self) -> Formula:
        return conj_all(a.guarded() for a in self.assumptions)

    def costs(self) -> dict[Var, int]:
        return {a.tracker: a.cost for a in self.assumptions}


class Status(str, enum.Enum):
    SOLVED = "solved"
    INFEASIBLE = "infeasible"
    RESOURCE_LIMIT = "resource-limit"


@dataclass(frozen=True)
class TrustSolution:
    min_cost: int | None
    chosen: tuple[str, ...]
    status: Status

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED


INFEASIBLE = TrustSolution(None, (), Status.INFEASIBLE)
TIMED_OUT = TrustSolution(None, (), Status.RESOURCE_LIMIT)


# ------------------------------------------------------------------- joining


def join_assumptions(
    root: Hashable,
    instantiate: Callable[[Hashable], Iterable[AssumptionInstance]],
    dependencies: Callable[[Hashable], Iterable[Hashable]],
) -> tuple[Formula, dict[Var, AssumptionInstance]]:
    """Conjoin ``tracker ⇒ encoding`` over ``root`` and all its dependencies.

    Each node is visited once, so a dependency shared by several crates
    contributes a single copy of its assumptions.
    """
    conjuncts: list[Formula] = []
    trackers: dict[Var, AssumptionInstance] = {}
    done: set = set()
    on_path: list = []

    def visit(node):
        if node in done:
            return
        if node in on_path:
            raise CyclicDependency(on_path[on_path.index(node):] + [node])
        on_path.append(node)
        for inst in instantiate(node):
            if inst.tracker in trackers:
                raise ValueError(f"duplicate assumption id {inst.id}")
            trackers[inst.tracker] = inst
            conjuncts.append(inst.guarded())
        for dep in dependencies(node):
            visit(dep)
        on_path.pop()
        done.add(node)

    visit(root)
    return conj_all(conjuncts), trackers


def query_from_graph(
    root: Hashable,
    instantiate: Callable[[Hashable], Iterable[AssumptionInstance]],
    dependencies: Callable[[Hashable], Iterable[Hashable]],
    conclusion: Var,
    budget: Budget | None = None,
) -> TrustQuery:
    _, trackers = join_assumptions(root, instantiate, dependencies)
    return TrustQuery(tuple(trackers.values()), conclusion, budget or Budget())


# ----------------------------------------------------------------- unfolding


def unfold(
    f: Formula,
    conclusion: Var,
    trackers: Iterable[Var],
    budget: Budget | Deadline | None = None,
) -> Formula:
    """Formula over trackers only that holds iff the selected assumptions entail ``conclusion``.

    Every derived variable is replaced by the disjunction of the bodies of
    the clauses concluding it.  Variables are processed in increasing
    rank and each clause body is rewritten with one simultaneous
    substitution, so every definition is built once and shared.
    """
    deadline = as_deadline(budget)
    trackers = frozenset(trackers)
    clauses = to_horn_clauses(f)
    for cl in clauses:
        if cl.head in trackers:
            raise NonHornShape(f"tracker {cl.head} appears as a clause head")
    ranking = acyclic_ranking(clauses)
    if ranking is None:
        raise CyclicClauses("assumption clauses are cyclic")
    by_head: dict[Var, list[HornClause]] = {}
    for cl in clauses:
        by_head.setdefault(cl.head, []).append(cl)

    definition: dict[Var, Formula] = {t: t for t in trackers}
    for v in sorted(ranking, key=lambda x: (ranking[x], x.name)):
        if v in trackers:
            continue
        deadline.tick()
        bodies = []
        for cl in by_head.get(v, ()):
            body = conj_all(sorted(cl.body))
            bodies.append(substitute_many(body, {b: definition.get(b, BOT) for b in cl.body}))
        definition[v] = disj_all(bodies)
    return definition.get(conclusion, BOT)


# ----------------------------------------------------------- cost minimizing


def _minimize(valid: Formula, query: TrustQuery, deadline: Deadline) -> TrustSolution:
    if valid == BOT:
        return INFEASIBLE
    search = CostSearch(valid, query.costs())
    total = sum(a.cost for a in query.assumptions)
    bound = search.lower_bound()
    if bound > total:
        return INFEASIBLE
    # Least k with a witness of cost <= k.  The root lower bound and each
    # witness's actual cost tighten the interval.
    left, right = int(bound), total
    best = None
    while left < right:
        k = (left + right) // 2
        bits = search.solve(k, deadline)
        if bits is None:
            left = k + 1
        else:
            best = bits
            right = search.cost_of(bits)
    if best is None or search.cost_of(best) != left:
        best = search.solve(left, deadline)
        if best is None:
            return INFEASIBLE
    best = search.irredundant(best)
    chosen = {v.name for v, b in zip(search.variables, best) if b}
    ids = tuple(sorted(a.id for a in query.assumptions if a.tracker.name in chosen))
    return TrustSolution(search.cost_of(best), ids, Status.SOLVED)


def solve_horn(query: TrustQuery) -> TrustSolution:
    deadline = query.budget.start()
    try:
        valid = unfold(query.formula(), query.conclusion, (a.tracker for a in query.assumptions), deadline)
        return _minimize(valid, query, deadline)
    except ResourceLimit:
        return TIMED_OUT


def eliminate_exists(f: Formula, variables: Sequence[Var], deadline: Deadline) -> Formula:
    """``∃ variables. f`` by Shannon expansion, one variable at a time."""
    for v in variables:
        deadline.tick()
        f = disj(
            substitute_many(f, {v: TOP}, deadline.tick),
            substitute_many(f, {v: BOT}, deadline.tick),
        )
    return f


def validity_formula(query: TrustQuery, deadline: Deadline | None = None) -> Formula:
    """``¬∃ facts. (F ∧ ¬c)`` as a formula over trackers."""
    deadline = deadline or Deadline()
    f = query.formula()
    trackers = {a.tracker.name for a in query.assumptions}
    facts = sorted(v for v in atoms(f) | {query.conclusion} if v.name not in trackers)
    facts.sort(key=lambda v: v != query.conclusion)
    counterexample = conj(f, neg(query.conclusion))
    return neg(eliminate_exists(counterexample, facts, deadline))


def solve_naive(query: TrustQuery) -> TrustSolution:
    if not query.assumptions:
        return INFEASIBLE
    deadline = query.budget.start()
    try:
        valid = validity_formula(query, deadline)
        return _minimize(valid, query, deadline)
    except ResourceLimit:
        return TIMED_OUT


# ------------------------------------------------------------------- oracle


def _entails_by_search(selected: Sequence[AssumptionInstance], conclusion: Var) -> bool:
    from .sat import sat_search

    f = conj_all([a.encoding for a in selected] + [neg(conclusion)])
    return sat_search(f) is None


def entails(selected: Sequence[AssumptionInstance], conclusion: Var) -> bool:
    """Whether the encodings of ``selected`` entail ``conclusion``."""
    try:
        clauses = [cl for a in selected for cl in to_horn_clauses(a.encoding)]
    except NonHornShape:
        return _entails_by_search(selected, conclusion)
    return conclusion in forward_chain(clauses, ())


def relevant_assumptions(horn: Sequence[Sequence[HornClause]], conclusion: Var) -> list[int]:
    """Indices of assumptions with a clause that can contribute to deriving ``conclusion``.

    Dropping the rest never changes which subsets entail the conclusion.
    """
    needed = {conclusion}
    keep: set[int] = set()
    pending = [(i, cl) for i, clauses in enumerate(horn) for cl in clauses]
    changed = True
    while changed:
        changed = False
        rest = []
        for i, cl in pending:
            if cl.head in needed:
                keep.add(i)
                needed |= cl.body
                changed = True
            else:
                rest.append((i, cl))
        pending = rest
    return sorted(keep)


def solve_bruteforce(query: TrustQuery, limit: int = BRUTEFORCE_LIMIT) -> TrustSolution:
    """Enumerate every subset of the relevant assumptions.

    Ties go to the lexicographically smallest id set.
    """
    items = sorted(query.assumptions, key=lambda a: a.id)
    horn: list[list[HornClause]] | None
    try:
        horn = [to_horn_clauses(a.encoding) for a in items]
    except NonHornShape:
        horn = None
    if horn is not None:
        keep = relevant_assumptions(horn, query.conclusion)
        items = [items[i] for i in keep]
        horn = [horn[i] for i in keep]
    n = len(items)
    if n > limit:
        raise TooLarge(f"{n} assumptions exceed the brute-force limit of {limit}")
    deadline = query.budget.start()
    best: tuple[int, tuple[str, ...]] | None = None
    for mask in range(1 << n):
        if mask & 0x3FF == 0:
            try:
                deadline.tick()
            except ResourceLimit:
                return TIMED_OUT
        picked = [i for i in range(n) if mask >> i & 1]
        cost = sum(items[i].cost for i in picked)
        ids = tuple(items[i].id for i in picked)
        if best is not None and (cost, ids) >= best:
            continue
        if horn is not None:
            ok = query.conclusion in forward_chain(itertools.chain.from_iterable(horn[i] for i in picked), ())
        else:
            ok = _entails_by_search([items[i] for i in picked], query.conclusion)
        if ok:
            best = (cost, ids)
    if best is None:
        return INFEASIBLE
    return TrustSolution(best[0], best[1], Status.SOLVED)


SOLVERS: dict[str, Callable[[TrustQuery], TrustSolution]] = {
    "horn": solve_horn,
    "naive": solve_naive,
    "bruteforce": solve_bruteforce,
}


def check_solution(query: TrustQuery, solution: TrustSolution) -> bool:
    """Independent check that a solved witness entails the conclusion at its stated cost."""
    if not solution.solved:
        return False
    by_id = query.by_id()
    picked = [by_id[i] for i in solution.chosen]
    return sum(a.cost for a in picked) == solution.min_cost and entails(picked, query.conclusion)


# ------------------------------------------------------------- vertex cover


def reduce_vertex_cover(edges: Iterable[tuple[Hashable, Hashable]]) -> TrustQuery:
    """Trust instance whose minimum cost is the graph's minimum vertex cover size."""
    edges = [tuple(e) for e in edges]
    if not edges:
        raise ValueError("graph needs at least one edge")
    vertices = sorted({v for e in edges for v in e}, key=str)
    vnames = {v: f"v{i}" for i, v in enumerate(vertices)}
    assumptions = [
        AssumptionInstance.make(f"vertex:{vnames[v]}", fact(vnames[v]), 1, f"choose vertex {v}")
        for v in vertices
    ]
    edge_vars = []
    for j, (u, w) in enumerate(edges):
        e = fact(f"e{j}")
        edge_vars.append(e)
        for v in (u, w):
            assumptions.append(
                AssumptionInstance.make(f"cover:{vnames[v]}:e{j}", implies(fact(vnames[v]), e), 0,
                                        f"vertex {v} covers edge {u}-{w}")
            )
    c = fact("c")
    assumptions.append(AssumptionInstance.make("all-edges", implies(conj_all(edge_vars), c), 0, "all edges covered"))
    return TrustQuery(tuple(assumptions), c)


# --------------------------------------------------------------- JSON format


def _encoding(body: Sequence[str], head: str) -> Formula:
    if not body:
        return fact(head)
    return implies(conj_all(fact(b) for b in body), fact(head))


def query_to_dict(query: TrustQuery) -> dict:
    rows = []
    for a in query.assumptions:
        clauses = to_horn_clauses(a.encoding)
        if len(clauses) != 1:
            raise NonHornShape(f"assumption {a.id} is not a single clause")
        (cl,) = clauses
        rows.append({
            "id": a.id,
            "body": sorted(v.name for v in cl.body),
            "head": cl.head.name,
            "cost": a.cost,
            "label": a.label,
        })
    return {"conclusion": query.conclusion.name, "assumptions": rows}


def query_from_dict(data: Mapping, budget: Budget | None = None) -> TrustQuery:
    assumptions = tuple(
        AssumptionInstance.make(str(row["id"]), _encoding(row.get("body", []), row["head"]), int(row["cost"]),
                                row.get("label", ""))
        for row in data["assumptions"]
    )
    return TrustQuery(assumptions, fact(data["conclusion"]), budget or Budget())


def load_query(path: str | Path, budget: Budget | None = None) -> TrustQuery:
    return query_from_dict(json.loads(Path(path).read_text()), budget)


def dump_query(query: TrustQuery, path: str | Path) -> None:
    Path(path).write_text(json.dumps(query_to_dict(query), indent=2) + "\n")
