import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_min_cost, random_horn_query
from crate_trust.errors import CyclicClauses, CyclicDependency, NonHornShape, TooLarge
from crate_trust.logic import atoms, conj, disj, evaluate, fact, implies, tracker
from crate_trust.sat import Budget
from crate_trust.solver import (
    AssumptionInstance,
    Status,
    TrustQuery,
    check_solution,
    dump_query,
    entails,
    join_assumptions,
    load_query,
    query_from_dict,
    query_to_dict,
    reduce_vertex_cover,
    solve_bruteforce,
    solve_horn,
    solve_naive,
    unfold,
)

SOLVERS = [solve_horn, solve_naive, solve_bruteforce]


def trackers_of(query):
    return {a.id: a.tracker for a in query.assumptions}


@pytest.mark.parametrize("solver", SOLVERS, ids=lambda s: s.__name__)
def test_worked_example_costs_45(table1, solver):
    sol = solver(table1)
    assert sol.status is Status.SOLVED
    assert sol.min_cost == 45
    assert sol.chosen == ("5", "6", "7", "8")
    assert check_solution(table1, sol)


def test_unfolded_worked_example_is_the_derivation_formula(table1):
    t = trackers_of(table1)
    valid = unfold(table1.formula(), table1.conclusion, t.values())
    # c holds via assumption 1, via downloads (3, 4), or via Alice's rule (5, 7)
    # with memchr safe either outright (2) or through Bob (6, 8)
    expected = disj(t["1"], conj(t["4"], t["3"]), conj(t["5"], t["7"], disj(t["2"], conj(t["8"], t["6"]))))
    assert atoms(valid) <= set(t.values())
    for bits in itertools.product([False, True], repeat=8):
        env = dict(zip([t[str(i)] for i in range(1, 9)], bits))
        assert evaluate(valid, env) == evaluate(expected, env)


def test_unfolded_formula_agrees_with_entailment(table1):
    t = trackers_of(table1)
    valid = unfold(table1.formula(), table1.conclusion, t.values())
    by_id = table1.by_id()
    for bits in itertools.product([False, True], repeat=8):
        picked = [str(i + 1) for i in range(8) if bits[i]]
        env = {t[i]: i in picked for i in t}
        assert evaluate(valid, env) == entails([by_id[i] for i in picked], table1.conclusion)


def test_memchr_path_without_bob_entails_conclusion(table1):
    by_id = table1.by_id()
    assert entails([by_id["2"], by_id["5"], by_id["7"]], table1.conclusion)


def test_unfold_without_any_derivation_is_false():
    a = AssumptionInstance.make("x", fact("p"), 3)
    q = TrustQuery((a,), fact("goal"))
    assert not evaluate(unfold(q.formula(), q.conclusion, [a.tracker]), {a.tracker: True})
    for solver in SOLVERS:
        assert solver(q).status is Status.INFEASIBLE


def test_cyclic_clauses_are_rejected():
    p, q = fact("p"), fact("q")
    query = TrustQuery((
        AssumptionInstance.make("1", implies(p, q), 1),
        AssumptionInstance.make("2", implies(q, p), 1),
        AssumptionInstance.make("3", p, 1),
    ), q)
    with pytest.raises(CyclicClauses):
        solve_horn(query)
    # the other algorithms do not need acyclicity
    assert solve_naive(query).min_cost == 2
    assert solve_bruteforce(query).min_cost == 2


def test_disjunctive_assumption_is_not_horn():
    query = TrustQuery((AssumptionInstance.make("1", disj(fact("p"), fact("q")), 1),), fact("p"))
    with pytest.raises(NonHornShape):
        solve_horn(query)
    assert solve_naive(query).status is Status.INFEASIBLE
    assert solve_bruteforce(query).status is Status.INFEASIBLE


def test_zero_cost_assumptions_are_free():
    p, c = fact("p"), fact("c")
    query = TrustQuery((
        AssumptionInstance.make("free-fact", p, 0),
        AssumptionInstance.make("free-rule", implies(p, c), 0),
        AssumptionInstance.make("base", c, 100),
    ), c)
    for solver in SOLVERS:
        assert solver(query).min_cost == 0


def test_bruteforce_refuses_large_instances():
    c = fact("c")
    query = TrustQuery(tuple(AssumptionInstance.make(f"{i:02d}", c, 50) for i in range(25)), c)
    with pytest.raises(TooLarge):
        solve_bruteforce(query)


def test_exhausted_budget_reports_resource_limit(table1):
    q = TrustQuery(table1.assumptions, table1.conclusion, Budget(seconds=None, max_nodes=0))
    assert solve_horn(q).status is Status.RESOURCE_LIMIT
    assert solve_naive(q).status is Status.RESOURCE_LIMIT


def test_ties_are_broken_deterministically():
    p = fact("p")
    query = TrustQuery((AssumptionInstance.make("b", p, 5), AssumptionInstance.make("a", p, 5)), p)
    assert solve_bruteforce(query).chosen == ("a",)
    assert solve_horn(query).min_cost == 5


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9))
def test_solvers_match_exhaustive_oracle(seed, n):
    query = random_horn_query(random.Random(seed), n)
    expected = oracle_min_cost(query)
    for solver in SOLVERS:
        sol = solver(query)
        if expected is None:
            assert sol.status is Status.INFEASIBLE
        else:
            assert sol.min_cost == expected
            assert check_solution(query, sol)


def brute_vertex_cover(edges):
    vertices = sorted({v for e in edges for v in e})
    for k in range(len(vertices) + 1):
        for cover in itertools.combinations(vertices, k):
            if all(u in cover or w in cover for u, w in edges):
                return k


@pytest.mark.parametrize("edges,size", [
    ([(0, 1)], 1),
    ([(0, 1), (1, 2), (2, 0)], 2),
    ([(0, 1), (0, 2), (0, 3)], 1),
    ([(0, 1), (2, 3)], 2),
])
def test_vertex_cover_reduction_small_graphs(edges, size):
    query = reduce_vertex_cover(edges)
    assert solve_horn(query).min_cost == size == brute_vertex_cover(edges)


def test_vertex_cover_reduction_shape():
    query = reduce_vertex_cover([(0, 1), (1, 2)])
    ids = {a.id for a in query.assumptions}
    assert {"vertex:v0", "vertex:v1", "vertex:v2", "all-edges"} <= ids
    assert sum(a.cost for a in query.assumptions) == 3


def test_join_visits_shared_dependencies_once():
    deps = {"root": ["x", "y"], "x": ["z"], "y": ["z"], "z": []}
    calls = []

    def inst(node):
        calls.append(node)
        return [AssumptionInstance.make(f"base({node})", fact(f"safe:{node}"), 100)]

    f, trackers = join_assumptions("root", inst, deps.__getitem__)
    assert sorted(calls) == ["root", "x", "y", "z"]
    assert len(trackers) == 4


def test_join_rejects_dependency_cycles():
    deps = {"a": ["b"], "b": ["c"], "c": ["a"]}
    with pytest.raises(CyclicDependency) as err:
        join_assumptions("a", lambda n: [], deps.__getitem__)
    assert err.value.path == ["a", "b", "c", "a"]


def test_instance_json_round_trip(table1, tmp_path):
    path = tmp_path / "q.json"
    dump_query(table1, path)
    again = load_query(path)
    assert query_to_dict(again) == query_to_dict(table1)
    assert solve_horn(again).min_cost == 45


def test_instance_tracker_names_are_namespaced():
    q = query_from_dict({"conclusion": "c", "assumptions": [{"id": "1", "head": "c", "cost": 1}]})
    (a,) = q.assumptions
    assert a.tracker == tracker("a:1")
    assert a.guarded() == implies(tracker("a:1"), fact("c"))


def test_assumption_costs_are_validated():
    with pytest.raises(ValueError):
        AssumptionInstance.make("x", fact("p"), 101)
    with pytest.raises(ValueError):
        AssumptionInstance.make("x", fact("p"), -1)


def test_bruteforce_ignores_assumptions_that_cannot_reach_the_conclusion():
    p, q, c = fact("p"), fact("q"), fact("c")
    noise = [AssumptionInstance.make(f"n{i:02d}", fact(f"noise{i}"), 1) for i in range(30)]
    # one assumption with two clauses: only the second makes q relevant
    both = AssumptionInstance.make("both", conj(implies(q, p), implies(p, c)), 7)
    query = TrustQuery((*noise, both, AssumptionInstance.make("q", q, 3)), c)
    sol = solve_bruteforce(query)
    assert (sol.min_cost, sol.chosen) == (10, ("both", "q"))
    assert solve_horn(query).min_cost == 10


def test_vertex_cover_on_dense_graph_is_fast():
    import time

    edges = [(u, w) for u, w in itertools.combinations(range(8), 2) if (u + w) % 3]
    start = time.perf_counter()
    assert solve_horn(reduce_vertex_cover(edges)).min_cost == 5
    assert time.perf_counter() - start < 2
