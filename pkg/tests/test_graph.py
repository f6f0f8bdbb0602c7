from __future__ import annotations

import json
import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pctscm.errors import CycleError, GraphError, UnknownNodeError
from pctscm.graph import (
    C,
    S,
    X,
    X_RECEIVED,
    Y,
    Z,
    Z_ADHERENCE,
    CausalDag,
    NodeRole,
    backdoor_paths,
    build_pct_template,
    d_separated,
    find_cycle,
    graph_from_dict,
    graph_to_dict,
    is_acyclic,
    is_backdoor_admissible,
    open_backdoor_paths,
    path_is_blocked,
    pct_role_violations,
)
from pctscm.scm import random_dag


def test_template_structure():
    g = build_pct_template()
    assert set(g.nodes) == {X, X_RECEIVED, Y, Z, Z_ADHERENCE}
    assert g.edges == {(X, X_RECEIVED), (X_RECEIVED, Y), (Z_ADHERENCE, X_RECEIVED), (Z_ADHERENCE, Y), (Z, Y)}
    assert g.parents(Y) == {X_RECEIVED, Z_ADHERENCE, Z}
    assert g.roles[Z_ADHERENCE] is NodeRole.ADHERENCE_COVARIATE
    assert pct_role_violations(g) == []


def test_template_optional_nodes():
    g = build_pct_template(with_selection=True, with_censoring=True)
    assert g.parents(S) == {Z}
    assert g.parents(C) == {X_RECEIVED, Z_ADHERENCE}
    assert g.roles[S] is NodeRole.SELECTION and g.roles[C] is NodeRole.CENSORING


def test_cycle_is_rejected_and_named():
    with pytest.raises(CycleError) as exc:
        CausalDag(["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "a")])
    cyc = exc.value.cycle
    assert cyc[0] == cyc[-1] and set(cyc) == {"a", "b", "c"}
    assert "->" in str(exc.value)


def test_self_loop_is_a_cycle():
    assert find_cycle(["a"], [("a", "a")]) == ["a", "a"]
    with pytest.raises(CycleError):
        CausalDag(["a"], [("a", "a")])


def test_template_with_back_edge_has_cycle():
    g = build_pct_template()
    assert not is_acyclic(list(g.edges) + [(X_RECEIVED, X)])
    with pytest.raises(CycleError) as exc:
        g.with_edges(add=[(X_RECEIVED, X)])
    assert set(exc.value.cycle) == {X, X_RECEIVED}


def test_unknown_and_duplicate_nodes():
    with pytest.raises(UnknownNodeError):
        CausalDag(["a"], [("a", "b")])
    with pytest.raises(GraphError):
        CausalDag(["a", "a"])
    with pytest.raises(GraphError):
        CausalDag(["a", "b"], [("a", "b"), ("a", "b")])


def test_dag_is_immutable():
    g = build_pct_template()
    with pytest.raises(AttributeError):
        g.edges = frozenset()


def test_topological_order_respects_edges():
    g = build_pct_template(with_selection=True, with_censoring=True)
    order = g.topological_order()
    for u, v in g.edges:
        assert order.index(u) < order.index(v)


def test_ancestors_descendants():
    g = build_pct_template()
    assert g.ancestors(Y) == {X, X_RECEIVED, Z, Z_ADHERENCE}
    assert g.descendants(X) == {X_RECEIVED, Y}
    assert g.descendants(Y) == set()


def test_role_violations():
    g = CausalDag(
        {X: NodeRole.TREATMENT_PRESCRIBED, X_RECEIVED: NodeRole.TREATMENT_RECEIVED, Y: NodeRole.OUTCOME, Z: NodeRole.COVARIATE},
        [(Z, X), (X, X_RECEIVED), (Z, X_RECEIVED), (X_RECEIVED, Y)],
    )
    problems = pct_role_violations(g)
    assert any("randomized" in p for p in problems)
    assert any("adherence_covariate" in p for p in problems)
    assert any("outcome" in p for p in pct_role_violations(CausalDag({X: NodeRole.TREATMENT_PRESCRIBED})))


def test_template_dsep_facts():
    g = build_pct_template()
    # X and Y are connected only through X'
    assert not d_separated(g, {X}, {Y})
    assert d_separated(g, {X}, {Y}, {X_RECEIVED, Z_ADHERENCE})
    # conditioning on the collider X' opens X - X' <- Z'
    assert d_separated(g, {X}, {Z_ADHERENCE})
    assert not d_separated(g, {X}, {Z_ADHERENCE}, {X_RECEIVED})
    assert d_separated(g, {Z}, {Z_ADHERENCE})
    assert not d_separated(g, {Z}, {Z_ADHERENCE}, {Y})


def test_dsep_argument_errors():
    g = build_pct_template()
    with pytest.raises(UnknownNodeError):
        d_separated(g, {"Q"}, {Y})
    with pytest.raises(GraphError):
        d_separated(g, {X}, {X}, ())
    assert d_separated(g, set(), {Y})


def test_backdoor_on_template():
    g = build_pct_template()
    assert backdoor_paths(g, X_RECEIVED, Y) == [[X_RECEIVED, Z_ADHERENCE, Y]]
    assert open_backdoor_paths(g, X_RECEIVED, Y) == [[X_RECEIVED, Z_ADHERENCE, Y]]
    assert is_backdoor_admissible(g, X_RECEIVED, Y, {Z_ADHERENCE})
    assert is_backdoor_admissible(g, X_RECEIVED, Y, {Z_ADHERENCE, Z})
    assert not is_backdoor_admissible(g, X_RECEIVED, Y, set())
    assert is_backdoor_admissible(g, X, Y, set())
    # joint intervention for per-protocol
    assert is_backdoor_admissible(g, {X, X_RECEIVED}, Y, {Z_ADHERENCE})
    assert not is_backdoor_admissible(g, {X, X_RECEIVED}, Y, set())


def test_backdoor_rejects_descendants():
    g = build_pct_template(with_censoring=True)
    assert not is_backdoor_admissible(g, X_RECEIVED, Y, {Z_ADHERENCE, C})


def test_template_without_zprime_to_y():
    g = build_pct_template().with_edges(remove=[(Z_ADHERENCE, Y)])
    assert open_backdoor_paths(g, X_RECEIVED, Y) == []
    assert is_backdoor_admissible(g, X_RECEIVED, Y, {Z_ADHERENCE})
    assert is_backdoor_admissible(g, X_RECEIVED, Y, set())


def test_path_blocking():
    g = build_pct_template()
    collider = [X, X_RECEIVED, Z_ADHERENCE]
    assert path_is_blocked(g, collider)
    assert not path_is_blocked(g, collider, {X_RECEIVED})
    assert not path_is_blocked(g, collider, {Y})  # a descendant of the collider opens it too
    chain = [X, X_RECEIVED, Y]
    assert not path_is_blocked(g, chain)
    assert path_is_blocked(g, chain, {X_RECEIVED})


def test_json_round_trip(tmp_path):
    g = build_pct_template(with_selection=True)
    doc = graph_to_dict(g)
    assert graph_from_dict(json.loads(json.dumps(doc))) == g
    with pytest.raises(GraphError):
        graph_from_dict({"nodes": [{"name": "a", "role": "wizard"}], "edges": []})
    with pytest.raises(GraphError):
        graph_from_dict({"nodes": [], "edges": [], "extra": 1})


def _random_case(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 7)
    g = random_dag(rng, n, rng.choice([0.2, 0.4, 0.6]))
    nodes = list(g.nodes)
    a = rng.choice(nodes)
    b = rng.choice([m for m in nodes if m != a])
    z = {m for m in nodes if m not in (a, b) and rng.random() < 0.4}
    return g, a, b, z


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**9))
def test_dsep_matches_path_enumeration(seed):
    g, a, b, z = _random_case(seed)
    assert d_separated(g, {a}, {b}, z) == oracles.dsep_by_paths(g.edges, [a], [b], z)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_dsep_matches_networkx(seed):
    g, a, b, z = _random_case(seed)
    ng = nx.DiGraph()
    ng.add_nodes_from(g.nodes)
    ng.add_edges_from(g.edges)
    assert d_separated(g, {a}, {b}, z) == nx.is_d_separator(ng, {a}, {b}, z)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_dsep_symmetric(seed):
    g, a, b, z = _random_case(seed)
    assert d_separated(g, {a}, {b}, z) == d_separated(g, {b}, {a}, z)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_backdoor_matches_definition(seed):
    # the criterion read literally: no descendants, every backdoor path blocked
    g, a, b, z = _random_case(seed)
    expect = not (z & g.descendants(a)) and all(
        not oracles.path_open(g.edges, p, z) for p in oracles._simple_paths(g.edges, a, b) if (p[1], a) in g.edges
    )
    assert is_backdoor_admissible(g, a, b, z) == expect


def test_parents_are_always_admissible():
    rng = random.Random(11)
    for _ in range(200):
        g = random_dag(rng, rng.randint(2, 7), 0.5)
        for x in g.nodes:
            pa = set(g.parents(x))
            for y in g.nodes:
                if y != x and y not in pa:
                    assert is_backdoor_admissible(g, x, y, pa)
