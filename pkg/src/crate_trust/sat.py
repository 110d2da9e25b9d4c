"""Backtracking satisfiability search with a native cost bound.

The search works directly on the formula DAG instead of a CNF encoding.
Each search node runs three-valued evaluation, which also yields lower
bounds on the extra cost needed to make every subformula true or false.
Those bounds prune branches that cannot stay within ``max_cost``.
Propagation forces literals on paths that must hold (the formula
analogue of unit propagation) and forces expensive trackers false once
they no longer fit in the remaining budget.

Branching picks the lexicographically smallest relevant variable and
tries ``False`` first, so results are reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Mapping

from .errors import ResourceLimit
from .logic import And, Const, Formula, Implies, Not, Or, Var, postorder

INF = math.inf

_T, _F, _VAR, _NOT, _AND, _OR, _IMP = range(7)


@dataclass(frozen=True)
class Budget:
    """Resource limits for one solver query."""

    seconds: float | None = 600.0
    max_nodes: int | None = None

    def start(self) -> Deadline:
        return Deadline(self)


class Deadline:
    def __init__(self, budget: Budget | None = None):
        budget = budget or Budget(seconds=None)
        self.budget = budget
        self.started = time.monotonic()
        self.expires = None if budget.seconds is None else self.started + budget.seconds
        self.nodes = 0

    def tick(self, nodes: int = 0) -> None:
        self.nodes += nodes
        if self.budget.max_nodes is not None and self.nodes > self.budget.max_nodes:
            raise ResourceLimit(f"node budget of {self.budget.max_nodes} exhausted")
        if self.expires is not None and time.monotonic() > self.expires:
            raise ResourceLimit(f"time budget of {self.budget.seconds}s exhausted")

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.started


def as_deadline(budget: Budget | Deadline | None) -> Deadline:
    if isinstance(budget, Deadline):
        return budget
    return Deadline(budget)


def _combine(values: list[float], disjoint: tuple[int, ...]) -> float:
    # Summing is only sound over children whose cost-bearing variables are
    # disjoint; the max of all children is always sound.
    best = max(values)
    if len(disjoint) > 1:
        total = sum(values[i] for i in disjoint)
        if total > best:
            return total
    return best


class CostSearch:
    """A formula compiled once and searched under several cost bounds."""

    def __init__(self, f: Formula, costs: Mapping[Var, int] | None = None):
        costs = {v.name: c for v, c in (costs or {}).items()}
        nodes = postorder(f)
        variables = sorted({n for n in nodes if isinstance(n, Var)})
        self.variables: list[Var] = variables
        var_index = {v.name: i for i, v in enumerate(variables)}
        self.cost = [int(costs.get(v.name, 0)) for v in variables]
        if any(c < 0 for c in self.cost):
            raise ValueError("costs must be non-negative")

        index = {id(n): i for i, n in enumerate(nodes)}
        self.kind: list[int] = []
        self.kids: list[tuple[int, ...]] = []
        self.var_of: list[int] = []
        self.disjoint: list[tuple[int, ...]] = []
        masks: list[int] = []
        for node in nodes:
            kids = tuple(index[id(k)] for k in node.children)
            v = -1
            if isinstance(node, Const):
                kind = _T if node.value else _F
            elif isinstance(node, Var):
                kind, v = _VAR, var_index[node.name]
            elif isinstance(node, Not):
                kind = _NOT
            elif isinstance(node, And):
                kind = _AND
            elif isinstance(node, Or):
                kind = _OR
            elif isinstance(node, Implies):
                kind = _IMP
            else:
                raise TypeError(f"not a formula node: {node!r}")
            if kind == _VAR:
                mask = (1 << v) if self.cost[v] > 0 else 0
            else:
                mask = 0
                for k in kids:
                    mask |= masks[k]
            chosen: list[int] = []
            acc = 0
            for pos, k in enumerate(kids):
                if masks[k] & acc == 0:
                    chosen.append(pos)
                    acc |= masks[k]
            masks.append(mask)
            self.kind.append(kind)
            self.kids.append(kids)
            self.var_of.append(v)
            self.disjoint.append(tuple(chosen))
        self.root = len(nodes) - 1

        # Occurrence polarity of every variable (1 positive, 2 negative).
        # A variable that only occurs positively can be made true for free
        # when it costs nothing; one that only occurs negatively is best false.
        pol = [0] * len(nodes)
        pol[self.root] = 1
        flip = lambda p: ((p & 1) << 1) | (p >> 1)
        for i in range(self.root, -1, -1):
            k, p = self.kind[i], pol[i]
            for pos, j in enumerate(self.kids[i]):
                pol[j] |= flip(p) if k == _NOT or (k == _IMP and pos == 0) else p
        self.polarity = [0] * len(variables)
        for i, v in enumerate(self.var_of):
            if v >= 0:
                self.polarity[v] |= pol[i]

    # ------------------------------------------------------------ evaluation

    def _evaluate(self, values: list[int]):
        n = len(self.kind)
        val = [0] * n
        lbt = [0.0] * n
        lbf = [0.0] * n
        kind, kids, var_of, disjoint, cost = self.kind, self.kids, self.var_of, self.disjoint, self.cost
        for i in range(n):
            k = kind[i]
            if k == _VAR:
                x = values[var_of[i]]
                if x == 1:
                    val[i], lbt[i], lbf[i] = 1, 0.0, INF
                elif x == 0:
                    val[i], lbt[i], lbf[i] = 0, INF, 0.0
                else:
                    val[i], lbt[i], lbf[i] = -1, cost[var_of[i]], 0.0
            elif k == _AND or k == _OR:
                ks = kids[i]
                vs = [val[j] for j in ks]
                if k == _AND:
                    val[i] = 0 if 0 in vs else (-1 if -1 in vs else 1)
                    lbt[i] = _combine([lbt[j] for j in ks], disjoint[i])
                    lbf[i] = min(lbf[j] for j in ks)
                else:
                    val[i] = 1 if 1 in vs else (-1 if -1 in vs else 0)
                    lbt[i] = min(lbt[j] for j in ks)
                    lbf[i] = _combine([lbf[j] for j in ks], disjoint[i])
            elif k == _NOT:
                j = kids[i][0]
                val[i] = -1 if val[j] == -1 else 1 - val[j]
                lbt[i], lbf[i] = lbf[j], lbt[j]
            elif k == _IMP:
                a, b = kids[i]
                if val[a] == 0 or val[b] == 1:
                    val[i] = 1
                elif val[a] == 1 and val[b] == 0:
                    val[i] = 0
                else:
                    val[i] = -1
                lbt[i] = min(lbf[a], lbt[b])
                lbf[i] = _combine([lbt[a], lbf[b]], disjoint[i])
            elif k == _T:
                val[i], lbt[i], lbf[i] = 1, 0.0, INF
            else:
                val[i], lbt[i], lbf[i] = 0, INF, 0.0
        return val, lbt, lbf

    def lower_bound(self) -> float:
        """Cost lower bound for satisfying the formula with nothing assigned."""
        _, lbt, _ = self._evaluate([-1] * len(self.variables))
        return lbt[self.root]

    def _forced(self, val: list[int]) -> dict[int, int] | None:
        """Literals implied by the root having to be true; None on a clash."""
        kind, kids, var_of = self.kind, self.kids, self.var_of
        forced: dict[int, int] = {}
        seen: set[int] = set()
        stack = [(self.root, 1)]
        while stack:
            i, want = stack.pop()
            key = 2 * i + want
            if key in seen:
                continue
            seen.add(key)
            if val[i] != -1:
                if val[i] != want:
                    return None
                continue
            k = kind[i]
            if k == _VAR:
                v = var_of[i]
                if forced.setdefault(v, want) != want:
                    return None
            elif k == _NOT:
                stack.append((kids[i][0], 1 - want))
            elif k == _AND or k == _OR:
                if (k == _AND) == bool(want):
                    stack.extend((j, want) for j in kids[i] if val[j] == -1)
                else:
                    open_kids = [j for j in kids[i] if val[j] == -1]
                    if len(open_kids) == 1:
                        stack.append((open_kids[0], want))
            elif k == _IMP:
                a, b = kids[i]
                if want:
                    if val[a] == 1:
                        stack.append((b, 1))
                    elif val[b] == 0:
                        stack.append((a, 0))
                else:
                    stack.append((a, 1))
                    stack.append((b, 0))
        return forced

    def _branch_var(self, val: list[int], values: list[int]) -> int:
        kind, kids, var_of = self.kind, self.kids, self.var_of
        best = -1
        seen: set[int] = set()
        stack = [self.root]
        while stack:
            i = stack.pop()
            if i in seen or val[i] != -1:
                continue
            seen.add(i)
            if kind[i] == _VAR:
                v = var_of[i]
                if values[v] == -1 and (best == -1 or v < best):
                    best = v
            else:
                stack.extend(kids[i])
        return best

    def _candidate(self, values: list[int], lbt: list[float], lbf: list[float]) -> list[int]:
        """Greedy completion that follows the cheapest branch of every choice."""
        kind, kids, var_of = self.kind, self.kids, self.var_of
        cand = list(values)
        seen: set[int] = set()
        stack = [(self.root, 1)]
        while stack:
            i, want = stack.pop()
            if 2 * i + want in seen:
                continue
            seen.add(2 * i + want)
            k = kind[i]
            if k == _VAR:
                v = var_of[i]
                if cand[v] == -1:
                    cand[v] = want
            elif k == _NOT:
                stack.append((kids[i][0], 1 - want))
            elif k == _AND or k == _OR:
                ks = kids[i]
                if (k == _AND) == bool(want):
                    stack.extend((j, want) for j in ks)
                else:
                    bound = lbf if want == 0 else lbt
                    stack.append((min(ks, key=lambda j: bound[j]), want))
            elif k == _IMP:
                a, b = kids[i]
                if want:
                    stack.append((a, 0) if lbf[a] <= lbt[b] else (b, 1))
                else:
                    stack.extend(((a, 1), (b, 0)))
        return [0 if x == -1 else x for x in cand]

    # ---------------------------------------------------------------- search

    def solve(self, max_cost: float | None = None, deadline: Deadline | None = None) -> list[int] | None:
        """A total 0/1 assignment satisfying the formula within ``max_cost``."""
        limit = INF if max_cost is None else max_cost
        deadline = deadline or Deadline()
        cost = self.cost
        start = [-1] * len(self.variables)
        for v, p in enumerate(self.polarity):
            if p == 2:
                start[v] = 0
            elif p == 1 and cost[v] == 0:
                start[v] = 1
        stack: list[tuple[list[int], int]] = [(start, 0)]
        while stack:
            values, spent = stack.pop()
            deadline.tick(1)
            branch = None
            while True:
                if spent > limit:
                    break
                val, lbt, lbf = self._evaluate(values)
                root = val[self.root]
                if root == 1:
                    return [0 if x == -1 else x for x in values]
                if root == 0 or spent + lbt[self.root] > limit:
                    break
                cand = self._candidate(values, lbt, lbf)
                cand_cost = sum(c for c, x in zip(cost, cand) if x == 1)
                if cand_cost <= limit and self._evaluate(cand)[0][self.root] == 1:
                    return cand
                forced = self._forced(val)
                if forced is None:
                    break
                room = limit - spent
                for v, x in enumerate(values):
                    if x == -1 and cost[v] > room and forced.get(v) != 1:
                        forced[v] = 0
                if not forced:
                    branch = self._branch_var(val, values)
                    break
                for v, x in forced.items():
                    values[v] = x
                    if x == 1:
                        spent += cost[v]
            if branch is None or branch == -1:
                continue
            taken = list(values)
            taken[branch] = 1
            stack.append((taken, spent + cost[branch]))
            values[branch] = 0
            stack.append((values, spent))
        return None

    def irredundant(self, bits: list[int]) -> list[int]:
        """Drop true variables, in index order, that the formula does not need."""
        bits = list(bits)
        for v, b in enumerate(bits):
            if b:
                bits[v] = 0
                if self._evaluate(bits)[0][self.root] != 1:
                    bits[v] = 1
        return bits

    def assignment(self, bits: list[int]) -> dict[Var, bool]:
        return {v: bool(b) for v, b in zip(self.variables, bits)}

    def cost_of(self, bits: list[int]) -> int:
        return sum(c for c, b in zip(self.cost, bits) if b)


def sat_search(
    f: Formula,
    costs: Mapping[Var, int] | None = None,
    max_cost: float | None = None,
    budget: Budget | Deadline | None = None,
) -> dict[Var, bool] | None:
    """Satisfying assignment over ``atoms(f)``, or None when UNSAT.

    With ``costs`` and ``max_cost`` the assignment must also keep the total
    cost of true variables at or below ``max_cost``.
    """
    search = CostSearch(f, costs)
    bits = search.solve(max_cost, as_deadline(budget))
    return None if bits is None else search.assignment(bits)
