from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import conftest
import oracles
from pctscm.adjustment import (
    AdjustmentQuery,
    JointDistribution,
    backdoor_adjust,
    check_admissible,
    convergence_report,
    dataset_table,
    joint_distribution,
    oracle_interventional,
    population_table,
)
from pctscm.data import ContingencyTable, complete_cases, load_dataset
from pctscm.errors import GraphError, NotAdmissible, ParamsError, PositivityViolation
from pctscm.graph import C, X, X_RECEIVED, Y, Z, Z_ADHERENCE, build_pct_template, is_backdoor_admissible
from pctscm.scm import Cpt, ScmParams, load_params, load_params_document, random_params
from pctscm.simulator import seed_for, simulate

FIX = conftest.FIXTURES
SHIPPED = ["template_confounded.json", "perfect_adherence.json", "censoring_adversarial.json"]
EVENT = "death"


def test_itt_on_reference_counts_without_adjustment():
    g = build_pct_template()
    d = load_dataset(FIX / "mccoy_table1.csv")
    q = AdjustmentQuery(g, {X: "A"}, Y, EVENT)
    est = backdoor_adjust(q, dataset_table(d, g, [X, Y]))
    assert est.value == Fraction(3, 10)
    assert est.render() == "0.30"
    assert est.details["protocol"] == "ITT"
    assert est.reproduce() == est.value


def test_received_arm_needs_zprime():
    g = build_pct_template()
    q = AdjustmentQuery(g, {X_RECEIVED: "A"}, Y, EVENT)
    with pytest.raises(NotAdmissible) as exc:
        check_admissible(q)
    assert exc.value.open_paths == [[X_RECEIVED, Z_ADHERENCE, Y]]
    assert "X' <-Z' ->Y" in str(exc.value)


def test_descendant_in_adjustment_set():
    g = build_pct_template(with_censoring=True)
    q = AdjustmentQuery(g, {X_RECEIVED: "A"}, Y, EVENT, frozenset({Z_ADHERENCE, C}))
    with pytest.raises(NotAdmissible, match="descendant"):
        check_admissible(q)


def test_query_validation():
    g = build_pct_template()
    with pytest.raises(GraphError):
        AdjustmentQuery(g, {}, Y, EVENT)
    with pytest.raises(GraphError):
        AdjustmentQuery(g, {"Q": "A"}, Y, EVENT)
    with pytest.raises(GraphError):
        AdjustmentQuery(g, {X: "A"}, Y, EVENT, frozenset({X}))


def test_positivity_violation():
    g = build_pct_template()
    arms, flags = ("A", "B"), ("0", "1")
    cells = {
        ("A", "0", "death"): 3, ("A", "0", "no_death"): 2,
        ("B", "0", "death"): 1, ("B", "0", "no_death"): 4,
        ("B", "1", "death"): 2, ("B", "1", "no_death"): 2,
    }
    t = ContingencyTable.from_cells([(X_RECEIVED, arms), (Z_ADHERENCE, flags), (Y, ("no_death", "death"))], cells)
    q = AdjustmentQuery(g, {X_RECEIVED: "A"}, Y, EVENT, frozenset({Z_ADHERENCE}))
    with pytest.raises(PositivityViolation) as exc:
        backdoor_adjust(q, t)
    assert exc.value.stratum == {Z_ADHERENCE: "1", X_RECEIVED: "A"}


@pytest.mark.parametrize("name", SHIPPED)
def test_stored_ground_truth_matches_oracle(name):
    params = load_params(FIX / name)
    stored = load_params_document(FIX / name)["ground_truth"]
    x, xr, y = X, X_RECEIVED, Y
    plain = oracles.plain_params(params)
    for a in params.arm_labels:
        for key, do in ((f"do_ITT[{a}]", {x: a}), (f"do_AT[{a}]", {xr: a}), (f"do_PP[{a}]", {x: a, xr: a})):
            truth = oracle_interventional(params, do, EVENT)
            assert Fraction(stored[key]["exact"]) == truth
            assert oracles.interventional(*plain, do, {y: EVENT}) == truth


def test_perfect_adherence_protocols_coincide():
    params = load_params(FIX / "perfect_adherence.json")
    g = params.graph
    pop = population_table(params)
    for a in params.arm_labels:
        values = {
            oracle_interventional(params, {X: a}, EVENT),
            oracle_interventional(params, {X_RECEIVED: a}, EVENT),
            oracle_interventional(params, {X: a, X_RECEIVED: a}, EVENT),
        }
        assert len(values) == 1
        for do in ({X: a}, {X_RECEIVED: a}, {X: a, X_RECEIVED: a}):
            est = backdoor_adjust(AdjustmentQuery(g, do, Y, EVENT), pop)
            assert est.value in values
        # with no adherence problem the plain conditional is already causal
        assert joint_distribution(params).conditional({Y: EVENT}, {X_RECEIVED: a}) in values


def test_confounded_fixture_separates_conditional_from_interventional():
    params = load_params(FIX / "template_confounded.json")
    joint = joint_distribution(params)
    do = oracle_interventional(params, {X_RECEIVED: "A"}, EVENT)
    assert joint.conditional({Y: EVENT}, {X_RECEIVED: "A"}) != do
    est = backdoor_adjust(
        AdjustmentQuery(params.graph, {X_RECEIVED: "A"}, Y, EVENT, frozenset({Z_ADHERENCE})), population_table(params)
    )
    assert est.value == do


def test_joint_distribution_basics():
    params = load_params(FIX / "template_confounded.json")
    j = joint_distribution(params)
    assert j.prob() == 1
    m = j.marginal([Z, Z_ADHERENCE])
    assert m.prob({Z: "1"}) == Fraction(2, 5)
    assert m.prob({Z: "1", Z_ADHERENCE: "1"}) == Fraction(1, 5)
    assert j.conditional_mutual_information([Z], [Z_ADHERENCE]) == 0
    assert j.conditional_mutual_information([Z], [Z_ADHERENCE], [Y]) > 1e-6
    # intervened distributions clamp the node
    jd = joint_distribution(params, {X_RECEIVED: "B"})
    assert jd.prob({X_RECEIVED: "B"}) == 1
    with pytest.raises(ValueError):
        JointDistribution([("a", ("0", "1"))], [Fraction(1, 2), Fraction(1, 3)])


def test_population_table_is_proportional():
    params = load_params(FIX / "perfect_adherence.json")
    t = population_table(params)
    j = joint_distribution(params)
    for key, c in t.cells():
        assert Fraction(c, t.total) == j.prob(dict(zip(t.names, key)))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_oracle_agrees_with_independent_enumeration(seed):
    rng = random.Random(seed)
    params = random_params(rng, n_nodes=rng.randint(2, 5), max_levels=3, edge_prob=0.5)
    nodes = list(params.graph.nodes)
    xs = rng.sample(nodes, rng.randint(1, len(nodes) - 1))
    y = rng.choice([n for n in nodes if n not in xs])
    do = {x: rng.choice(params.levels[x]) for x in xs}
    ly = rng.choice(params.levels[y])
    assert oracle_interventional(params, do, ly, y) == oracles.interventional(*oracles.plain_params(params), do, {y: ly})


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_parent_adjustment_recovers_oracle(seed):
    rng = random.Random(seed)
    params = random_params(rng, n_nodes=rng.randint(2, 6), max_levels=3, edge_prob=0.5)
    g = params.graph
    x = rng.choice(list(g.nodes))
    candidates = [n for n in g.nodes if n != x and n not in g.parents(x)]
    if not candidates:
        return
    y = rng.choice(candidates)
    z = frozenset(g.parents(x))
    assert is_backdoor_admissible(g, x, y, z)
    lx, ly = rng.choice(params.levels[x]), rng.choice(params.levels[y])
    est = backdoor_adjust(AdjustmentQuery(g, {x: lx}, y, ly, z), population_table(params))
    assert est.value == oracle_interventional(params, {x: lx}, ly, y)
    assert est.reproduce() == est.value


def test_convergence_report_refuses_direct_edge():
    params = load_params(FIX / "template_confounded.json")
    g = params.graph.with_edges(add=[(X, Y)])
    rows = {(x, *k): d for x in params.arm_labels for k, d in params.mechanisms[Y].rows.items()}
    mechs = dict(params.mechanisms)
    mechs[Y] = Cpt((X, *params.mechanisms[Y].parents), rows)
    with pytest.raises(ParamsError, match="X -> Y"):
        convergence_report(ScmParams(g, params.levels, mechs, EVENT), 10, 1)


def test_errors_shrink_with_sample_size():
    # mean absolute error of the adjusted AT estimate over 20 replicates, at two sample sizes
    params = load_params(FIX / "template_confounded.json")
    g = params.graph
    truth = oracle_interventional(params, {X_RECEIVED: "A"}, EVENT)
    q = AdjustmentQuery(g, {X_RECEIVED: "A"}, Y, EVENT, frozenset({Z_ADHERENCE}))
    mean_err = {}
    for n in (500, 50_000):
        errs = []
        for i in range(20):
            d = complete_cases(simulate(params, n, seed_for(99, i)).dataset)
            errs.append(abs(backdoor_adjust(q, dataset_table(d, g, [X_RECEIVED, Z_ADHERENCE, Y])).value - truth))
        mean_err[n] = sum(errs) / len(errs)
    assert mean_err[50_000] < mean_err[500] / 4
