import itertools
import random

import pytest

from crate_trust.fixtures import fixture_path
from crate_trust.logic import conj_all, fact, forward_chain, implies, to_horn_clauses
from crate_trust.solver import AssumptionInstance, TrustQuery, load_query


def random_horn_query(rng: random.Random, n_assumptions: int, n_facts: int = 6) -> TrustQuery:
    """An acyclic definite-Horn instance: heads always outrank their body facts."""
    facts = [fact(f"p{i}") for i in range(n_facts)]
    conclusion = facts[-1]
    assumptions = []
    for i in range(n_assumptions):
        h = rng.randrange(n_facts)
        body = rng.sample(facts[:h], rng.randint(0, min(h, 3))) if h else []
        enc = implies(conj_all(body), facts[h]) if body else facts[h]
        assumptions.append(AssumptionInstance.make(f"A{i:02d}", enc, rng.randint(0, 100)))
    return TrustQuery(tuple(assumptions), conclusion)


def oracle_min_cost(query: TrustQuery):
    """Exhaustive minimum with plain forward chaining; independent of every solver."""
    clauses = {a.id: to_horn_clauses(a.encoding) for a in query.assumptions}
    best = None
    items = list(query.assumptions)
    for r in range(len(items) + 1):
        for subset in itertools.combinations(items, r):
            cost = sum(a.cost for a in subset)
            if best is not None and cost >= best:
                continue
            derived = forward_chain([cl for a in subset for cl in clauses[a.id]], ())
            if query.conclusion in derived:
                best = cost
    return best


@pytest.fixture
def table1():
    return load_query(fixture_path("table1.json"))


@pytest.fixture
def cache_dir(tmp_path):
    return tmp_path / "cache"


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
