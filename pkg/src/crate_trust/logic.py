"""Propositional formulas, definite Horn clauses and forward chaining.

Formulas are immutable trees that may share subtrees.  The smart
constructors (:func:`conj`, :func:`disj`, :func:`neg`, :func:`implies`)
fold constants eagerly; the raw node classes do not, so build formulas
through the constructors unless an exact shape is required.

Every traversal here is iterative, so deep formulas produced by
unfolding long dependency chains do not hit the recursion limit.
"""

from __future__ import annotations

import graphlib
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping

from .errors import NonHornShape

TRACKER = "tracker"
FACT = "fact"


class Formula:
    """Base class for formula nodes."""

    __slots__ = ()

    @property
    def children(self) -> tuple[Formula, ...]:
        return ()

    def __and__(self, other: Formula) -> Formula:
        return conj(self, other)

    def __or__(self, other: Formula) -> Formula:
        return disj(self, other)

    def __invert__(self) -> Formula:
        return neg(self)

    def __rshift__(self, other: Formula) -> Formula:
        return implies(self, other)


@dataclass(frozen=True)
class Const(Formula):
    value: bool

    def __repr__(self) -> str:
        return "⊤" if self.value else "⊥"


@dataclass(frozen=True, order=True)
class Var(Formula):
    """A propositional variable, identified by name alone."""

    name: str
    kind: str = field(default=FACT, compare=False)

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Not(Formula):
    child: Formula

    @property
    def children(self) -> tuple[Formula, ...]:
        return (self.child,)

    def __repr__(self) -> str:
        return f"¬{self.child!r}"


@dataclass(frozen=True)
class And(Formula):
    items: tuple[Formula, ...]

    @property
    def children(self) -> tuple[Formula, ...]:
        return self.items

    def __repr__(self) -> str:
        return "(" + " ∧ ".join(map(repr, self.items)) + ")"


@dataclass(frozen=True)
class Or(Formula):
    items: tuple[Formula, ...]

    @property
    def children(self) -> tuple[Formula, ...]:
        return self.items

    def __repr__(self) -> str:
        return "(" + " ∨ ".join(map(repr, self.items)) + ")"


@dataclass(frozen=True)
class Implies(Formula):
    antecedent: Formula
    consequent: Formula

    @property
    def children(self) -> tuple[Formula, ...]:
        return (self.antecedent, self.consequent)

    def __repr__(self) -> str:
        return f"({self.antecedent!r} ⇒ {self.consequent!r})"


TOP = Const(True)
BOT = Const(False)


def tracker(name: str) -> Var:
    return Var(name, TRACKER)


def fact(name: str) -> Var:
    return Var(name, FACT)


def _is_true(f: Formula) -> bool:
    return isinstance(f, Const) and f.value


def _is_false(f: Formula) -> bool:
    return isinstance(f, Const) and not f.value


def _nary(cls: type, absorbing: Formula, items: Iterable[Formula]) -> Formula:
    unit = not absorbing.value  # type: ignore[attr-defined]
    kids: list[Formula] = []
    seen: set = set()
    for item in items:
        if isinstance(item, Const):
            if item.value == unit:
                continue
            return absorbing
        for kid in item.items if isinstance(item, cls) else (item,):
            key = ("v", kid.name) if isinstance(kid, Var) else id(kid)
            if key not in seen:
                seen.add(key)
                kids.append(kid)
    if not kids:
        return Const(unit)
    if len(kids) == 1:
        return kids[0]
    return cls(tuple(kids))


def conj(*items: Formula) -> Formula:
    return _nary(And, BOT, items)


def disj(*items: Formula) -> Formula:
    return _nary(Or, TOP, items)


def conj_all(items: Iterable[Formula]) -> Formula:
    return _nary(And, BOT, items)


def disj_all(items: Iterable[Formula]) -> Formula:
    return _nary(Or, TOP, items)


def neg(f: Formula) -> Formula:
    if isinstance(f, Const):
        return BOT if f.value else TOP
    if isinstance(f, Not):
        return f.child
    return Not(f)


def implies(antecedent: Formula, consequent: Formula) -> Formula:
    if _is_true(antecedent):
        return consequent
    if _is_false(antecedent) or _is_true(consequent):
        return TOP
    if _is_false(consequent):
        return neg(antecedent)
    return Implies(antecedent, consequent)


def postorder(root: Formula) -> list[Formula]:
    """Distinct nodes of ``root``, every child listed before its parents."""
    out: list[Formula] = []
    seen: set[int] = set()
    stack: list[tuple[Formula, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            out.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for kid in reversed(node.children):
            if id(kid) not in seen:
                stack.append((kid, False))
    return out


def atoms(f: Formula) -> frozenset[Var]:
    return frozenset(n for n in postorder(f) if isinstance(n, Var))


def size(f: Formula) -> int:
    """Number of distinct nodes (shared subtrees count once)."""
    return len(postorder(f))


def evaluate(f: Formula, assignment: Mapping[Var, bool]) -> bool:
    values: dict[int, bool] = {}
    for node in postorder(f):
        if isinstance(node, Const):
            v = node.value
        elif isinstance(node, Var):
            v = bool(assignment[node])
        elif isinstance(node, Not):
            v = not values[id(node.child)]
        elif isinstance(node, And):
            v = all(values[id(k)] for k in node.items)
        elif isinstance(node, Or):
            v = any(values[id(k)] for k in node.items)
        elif isinstance(node, Implies):
            v = (not values[id(node.antecedent)]) or values[id(node.consequent)]
        else:
            raise TypeError(f"not a formula node: {node!r}")
        values[id(node)] = v
    return values[id(f)]


def _rebuild(node: Formula, kids: list[Formula]) -> Formula:
    if isinstance(node, Not):
        return neg(kids[0])
    if isinstance(node, And):
        return conj_all(kids)
    if isinstance(node, Or):
        return disj_all(kids)
    if isinstance(node, Implies):
        return implies(kids[0], kids[1])
    return node


def substitute_many(
    f: Formula,
    mapping: Mapping[Var, Formula],
    tick: Callable[[], None] | None = None,
) -> Formula:
    """Replace each variable in ``mapping`` simultaneously, folding constants.

    Untouched subtrees are returned as the same objects, so sharing in the
    input survives in the output.
    """
    by_name = {v.name: g for v, g in mapping.items()}
    done: dict[int, Formula] = {}
    for i, node in enumerate(postorder(f)):
        if tick is not None and i & 0xFFF == 0:
            tick()
        if isinstance(node, Var):
            out = by_name.get(node.name, node)
        elif isinstance(node, Const):
            out = node
        else:
            kids = [done[id(k)] for k in node.children]
            if all(a is b for a, b in zip(kids, node.children)):
                out = node
            else:
                out = _rebuild(node, kids)
        done[id(node)] = out
    return done[id(f)]


def substitute(f: Formula, v: Var, replacement: Formula) -> Formula:
    return substitute_many(f, {v: replacement})


def iter_conjuncts(f: Formula) -> Iterator[Formula]:
    if isinstance(f, And):
        for item in f.items:
            yield from iter_conjuncts(item)
    elif not _is_true(f):
        yield f


# ---------------------------------------------------------------- Horn clauses


@dataclass(frozen=True)
class HornClause:
    """``body ⇒ head``; an empty body means ⊤, a ``None`` head means ⊥."""

    body: frozenset[Var]
    head: Var | None

    @property
    def is_definite(self) -> bool:
        return self.head is not None

    def to_formula(self) -> Formula:
        body = conj_all(sorted(self.body))
        return implies(body, self.head if self.head is not None else BOT)

    def __repr__(self) -> str:
        body = " ∧ ".join(v.name for v in sorted(self.body)) or "⊤"
        return f"{body} ⇒ {self.head.name if self.head else '⊥'}"


def _body_vars(f: Formula) -> list[Var]:
    if isinstance(f, Var):
        return [f]
    if _is_true(f):
        return []
    if isinstance(f, And) and all(isinstance(k, Var) for k in f.items):
        return list(f.items)  # type: ignore[arg-type]
    raise NonHornShape(f"body is not a conjunction of variables: {f!r}")


def _flatten(premises: list[Var], consequent: Formula, out: list[HornClause]) -> None:
    if isinstance(consequent, Var):
        out.append(HornClause(frozenset(premises), consequent))
    elif isinstance(consequent, Implies):
        more = _body_vars(consequent.antecedent)
        _flatten(premises + more, consequent.consequent, out)
    elif isinstance(consequent, And):
        for item in consequent.items:
            _flatten(premises, item, out)
    elif _is_true(consequent):
        return
    else:
        raise NonHornShape(f"consequent is not definite: {consequent!r}")


def to_horn_clauses(f: Formula) -> list[HornClause]:
    """Flatten a conjunction of guarded implications into definite clauses.

    ``a ⇒ ((p ∧ q) ⇒ r)`` becomes the single clause ``{a, p, q} ⇒ r``.
    """
    out: list[HornClause] = []
    for conjunct in iter_conjuncts(f):
        _flatten([], conjunct, out)
    return out


def acyclic_ranking(clauses: Iterable[HornClause]) -> dict[Var, int] | None:
    """Rank with ``rank[head] > rank[b]`` for every body var, or None on a cycle."""
    graph: dict[Var, set[Var]] = {}
    for cl in clauses:
        if cl.head is None:
            for b in cl.body:
                graph.setdefault(b, set())
            continue
        graph.setdefault(cl.head, set()).update(cl.body)
        for b in cl.body:
            graph.setdefault(b, set())
    try:
        order = list(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError:
        return None
    rank: dict[Var, int] = {}
    for v in order:
        rank[v] = 1 + max((rank[p] for p in graph[v]), default=-1)
    return rank


def is_acyclic(clauses: Iterable[HornClause]) -> bool:
    return acyclic_ranking(clauses) is not None


def forward_chain(clauses: Iterable[HornClause], facts: Iterable[Var]) -> set[Var]:
    """Least fixed point of the clauses over ``facts`` (linear-time propagation)."""
    clauses = [c for c in clauses if c.head is not None]
    missing = [len(c.body) for c in clauses]
    watchers: dict[Var, list[int]] = {}
    for i, cl in enumerate(clauses):
        for b in cl.body:
            watchers.setdefault(b, []).append(i)
    derived = set(facts)
    queue = deque(derived)
    for i, cl in enumerate(clauses):
        if not cl.body and cl.head not in derived:
            derived.add(cl.head)
            queue.append(cl.head)
    while queue:
        v = queue.popleft()
        for i in watchers.get(v, ()):
            missing[i] -= 1
            if missing[i] == 0:
                head = clauses[i].head
                if head not in derived:
                    derived.add(head)
                    queue.append(head)
    return derived
