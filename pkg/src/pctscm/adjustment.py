"""Interventional estimates by backdoor adjustment, and their exact oracle.

:func:`backdoor_adjust` is the plug-in estimator

    P(Y = y | do(T = t)) = sum_z P(Y = y | T = t, Z = z) P(Z = z)

over a contingency table, for one or several jointly intervened nodes ``T``.
It refuses to answer when ``Z`` is not backdoor-admissible in the query's
graph, and when some stratum with observations has none at the intervention
levels.

:func:`oracle_interventional` evaluates the same quantity from a fully
specified :class:`~pctscm.scm.ScmParams` by truncated factorization: the
mechanisms of intervened nodes are deleted, their values clamped, and the
product of the remaining CPTs is summed over all assignments.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .data import COMPLETED, OUTCOME, PRESCRIBED, RECEIVED, ContingencyTable, TrialDataset, complete_cases, tabulate
from .errors import (
    DataError,
    DegenerateStratum,
    GraphError,
    NotAdmissible,
    ParamsError,
    PositivityViolation,
)
from .estimators import EffectEstimate, Estimand, render
from .graph import CausalDag, NodeRole, is_backdoor_admissible, open_backdoor_paths
from .scm import ScmParams

ROLE_COLUMNS = {
    NodeRole.TREATMENT_PRESCRIBED: PRESCRIBED,
    NodeRole.TREATMENT_RECEIVED: RECEIVED,
    NodeRole.OUTCOME: OUTCOME,
    NodeRole.CENSORING: COMPLETED,
}


@dataclass(frozen=True)
class AdjustmentQuery:
    graph: CausalDag
    interventions: Mapping[str, str]
    outcome: str
    outcome_event: str
    adjustment_set: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "interventions", dict(self.interventions))
        object.__setattr__(self, "adjustment_set", frozenset(self.adjustment_set))
        if not self.interventions:
            raise GraphError("a query needs at least one intervention")
        for n in (*self.interventions, self.outcome, *self.adjustment_set):
            if n not in self.graph:
                raise GraphError(f"unknown node {n!r}")
        if self.outcome in self.interventions:
            raise GraphError("the outcome cannot be intervened on")
        clash = self.adjustment_set & (set(self.interventions) | {self.outcome})
        if clash:
            raise GraphError("adjustment set overlaps interventions/outcome: " + ", ".join(sorted(clash)))

    def ordered_adjustment(self) -> list[str]:
        return [n for n in self.graph.nodes if n in self.adjustment_set]

    def describe(self) -> str:
        do = ", ".join(f"do({k}={v})" for k, v in self.interventions.items())
        return f"P({self.outcome}={self.outcome_event} | {do})"

    def protocol_tag(self) -> str | None:
        roles = {self.graph.roles[n] for n in self.interventions}
        if roles == {NodeRole.TREATMENT_PRESCRIBED}:
            return "ITT"
        if roles == {NodeRole.TREATMENT_RECEIVED}:
            return "AT"
        if roles == {NodeRole.TREATMENT_PRESCRIBED, NodeRole.TREATMENT_RECEIVED} and len(set(self.interventions.values())) == 1:
            return "PP"
        return None


def check_admissible(q: AdjustmentQuery) -> None:
    treatments = set(q.interventions)
    z = q.adjustment_set
    if is_backdoor_admissible(q.graph, treatments, q.outcome, z):
        return
    shown = "{" + ", ".join(q.ordered_adjustment()) + "}"
    bad = z & q.graph.descendants(treatments)
    if bad:
        raise NotAdmissible(
            f"adjustment set {shown} contains descendant(s) of the treatment: " + ", ".join(sorted(bad))
        )
    paths = open_backdoor_paths(q.graph, treatments, q.outcome, z)
    listing = "; ".join(_path_str(q.graph, p) for p in paths)
    raise NotAdmissible(
        f"adjustment set {shown} is not backdoor-admissible for {q.describe()}: open backdoor path(s) {listing}",
        paths,
    )


def _path_str(g: CausalDag, path: Sequence[str]) -> str:
    parts = [path[0]]
    for u, v in zip(path, path[1:]):
        parts.append(("->" if (u, v) in g.edges else "<-") + v)
    return " ".join(parts)


def backdoor_adjust(q: AdjustmentQuery, t: ContingencyTable) -> EffectEstimate:
    check_admissible(q)
    zs = q.ordered_adjustment()
    xs = list(q.interventions)
    table = t.marginal([*zs, *xs, q.outcome])
    if q.outcome_event not in table.levels(q.outcome):
        raise DataError(f"{q.outcome_event!r} is not a level of {q.outcome}")
    for x, level in q.interventions.items():
        if level not in table.levels(x):
            raise DataError(f"{level!r} is not a level of {x}")
    total = table.total
    if total == 0:
        raise DegenerateStratum({})
    z_table = table.marginal(zs)
    num_cells, den_cells, w_cells = [], [], []
    value = Fraction(0)
    for z_key, w in z_table.cells():
        stratum = dict(zip(zs, z_key))
        if w == 0:
            continue
        cond = {**stratum, **q.interventions}
        den = table.count(cond)
        if den == 0:
            raise PositivityViolation(cond)
        num = table.count({**cond, q.outcome: q.outcome_event})
        num_cells.append((z_key, num))
        den_cells.append((z_key, den))
        w_cells.append((z_key, w))
        value += Fraction(num, den) * Fraction(w, total)
    return EffectEstimate(
        value=value,
        metric="adjusted_probability",
        estimand=Estimand.INTERVENTIONAL,
        label=q.describe(),
        numerator_cells=tuple(num_cells),
        denominator_cells=tuple(den_cells),
        weight_cells=tuple(w_cells),
        details={"adjustment_set": tuple(zs), "protocol": q.protocol_tag()},
    )


def node_columns(graph: CausalDag, nodes: Iterable[str]) -> dict[str, str]:
    """Dataset column holding each graph node."""
    out = {}
    for n in nodes:
        role = graph.roles.get(n)
        if role is None:
            raise GraphError(f"unknown node {n!r}")
        if role is NodeRole.SELECTION:
            raise DataError(f"selection node {n!r} is not recorded in trial data (only S=1 is enrolled)")
        out[n] = ROLE_COLUMNS.get(role, n)
    return out


def dataset_table(d: TrialDataset, graph: CausalDag, nodes: Sequence[str]) -> ContingencyTable:
    """Tabulate a dataset over graph nodes; the table dimensions carry node names."""
    cols = node_columns(graph, nodes)
    t = tabulate(d, [cols[n] for n in nodes])
    return t.rename({c: n for n, c in cols.items()})


# --- exact joint distributions ---------------------------------------------


class JointDistribution:
    """Exact probabilities over a product of categorical variables."""

    __slots__ = ("variables", "probabilities")

    def __init__(self, variables: Sequence[tuple[str, Sequence[str]]], probabilities):
        self.variables = tuple((n, tuple(l)) for n, l in variables)
        arr = np.asarray(probabilities, dtype=object)
        if arr.shape != tuple(len(l) for _, l in self.variables):
            raise ValueError("probability array shape does not match variables")
        if any(p < 0 for p in arr.reshape(-1)):
            raise ValueError("negative probability")
        if sum(arr.reshape(-1), Fraction(0)) != 1:
            raise ValueError("probabilities do not sum to 1")
        self.probabilities = arr

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    def _index(self, assignment):
        idx = [slice(None)] * len(self.variables)
        for name, level in assignment.items():
            ax = self.names.index(name)
            idx[ax] = self.variables[ax][1].index(level)
        return tuple(idx)

    def prob(self, assignment: Mapping[str, str] | None = None) -> Fraction:
        sub = self.probabilities[self._index(dict(assignment or {}))]
        if isinstance(sub, np.ndarray):
            return sum(sub.reshape(-1), Fraction(0))
        return Fraction(sub)

    def conditional(self, target: Mapping[str, str], given: Mapping[str, str]) -> Fraction:
        den = self.prob(given)
        if den == 0:
            raise DegenerateStratum(given)
        return self.prob({**given, **target}) / den

    def marginal(self, names: Sequence[str]) -> JointDistribution:
        axes = [self.names.index(n) for n in names]
        drop = tuple(a for a in range(len(self.variables)) if a not in axes)
        arr = np.sum(self.probabilities, axis=drop) if drop else self.probabilities
        kept = [a for a in range(len(self.variables)) if a in axes]
        arr = np.asarray(arr, dtype=object).reshape(tuple(len(self.variables[a][1]) for a in kept))
        return JointDistribution([self.variables[a] for a in axes], np.transpose(arr, [kept.index(a) for a in axes]))

    def to_table(self, names: Sequence[str] | None = None) -> ContingencyTable:
        """Integer counts proportional to the distribution (scaled by the common denominator)."""
        j = self if names is None else self.marginal(names)
        flat = [Fraction(p) for p in j.probabilities.reshape(-1)]
        scale = math.lcm(*(p.denominator for p in flat)) if flat else 1
        counts = np.array([int(p * scale) for p in flat], dtype=object).reshape(j.probabilities.shape)
        return ContingencyTable(j.variables, counts)

    def conditional_mutual_information(self, a: Sequence[str], b: Sequence[str], c: Sequence[str] = ()) -> float:
        """I(A; B | C) in nats; each log ratio is formed exactly before taking the logarithm."""
        a, b, c = list(a), list(b), list(c)
        j = self.marginal([*a, *b, *c])
        p_abc = j.probabilities
        p_ac = j.marginal([*a, *c]).probabilities
        p_bc = j.marginal([*b, *c]).probabilities
        p_c = j.marginal(c).probabilities
        total = 0.0
        la, lb = len(a), len(b)
        for idx in itertools.product(*(range(len(l)) for _, l in j.variables)):
            p = Fraction(p_abc[idx])
            if p == 0:
                continue
            ia, ib, ic = idx[:la], idx[la : la + lb], idx[la + lb :]
            ratio = p * Fraction(p_c[ic]) / (Fraction(p_ac[ia + ic]) * Fraction(p_bc[ib + ic]))
            if ratio != 1:
                total += float(p) * math.log(ratio)
        return total


def joint_distribution(params: ScmParams, interventions: Mapping[str, str] | None = None) -> JointDistribution:
    """Distribution over all nodes, optionally under do(interventions)."""
    interventions = dict(interventions or {})
    g = params.graph
    for n, level in interventions.items():
        if n not in g:
            raise GraphError(f"unknown node {n!r}")
        if level not in params.levels[n]:
            raise ParamsError(f"{level!r} is not a level of {n}")
    order = g.topological_order()
    names = list(g.nodes)
    shape = tuple(len(params.levels[n]) for n in names)
    probs = np.empty(shape, dtype=object)
    probs[...] = Fraction(0)
    choices = [
        [interventions[n]] if n in interventions else list(params.levels[n])
        for n in order
    ]
    parent_lists = [params.mechanisms[n].parents for n in order]
    for combo in itertools.product(*choices):
        value = dict(zip(order, combo))
        w = Fraction(1)
        for n, parents in zip(order, parent_lists):
            if n in interventions:
                continue
            w *= params.mechanisms[n].prob(value[n], tuple(value[p] for p in parents))
            if w == 0:
                break
        if w:
            idx = tuple(params.levels[n].index(value[n]) for n in names)
            probs[idx] = w
    return JointDistribution([(n, params.levels[n]) for n in names], probs)


def oracle_interventional(
    params: ScmParams,
    interventions: Mapping[str, str],
    outcome_event: str,
    outcome: str | None = None,
) -> Fraction:
    if outcome is None:
        outcome = params.role_node(NodeRole.OUTCOME)
    if outcome_event not in params.levels[outcome]:
        raise ParamsError(f"{outcome_event!r} is not a level of {outcome}")
    return joint_distribution(params, interventions).prob({outcome: outcome_event})


def population_table(params: ScmParams, names: Sequence[str] | None = None) -> ContingencyTable:
    """Exact population contingency table (counts proportional to the joint)."""
    return joint_distribution(params).to_table(names)


# --- convergence of the three interventional estimands ---------------------


@dataclass(frozen=True)
class ArmConvergence:
    arm: str
    estimates: Mapping[str, EffectEstimate]
    truth: Mapping[str, Fraction]
    gaps: Mapping[str, Fraction]

    @property
    def max_gap(self) -> Fraction:
        return max(self.gaps.values())

    @property
    def max_oracle_error(self) -> Fraction:
        return max(abs(self.estimates[k].value - self.truth[k]) for k in self.estimates)


@dataclass(frozen=True)
class ConvergenceReport:
    n: int
    seed: int
    n_after_selection: int
    n_complete: int
    adjustment_set: tuple[str, ...]
    arms: tuple[ArmConvergence, ...] = field(default_factory=tuple)

    @property
    def max_gap(self) -> Fraction:
        return max(a.max_gap for a in self.arms)

    @property
    def max_oracle_error(self) -> Fraction:
        return max(a.max_oracle_error for a in self.arms)

    def to_dict(self, precision: int = 6) -> dict:
        arms = {}
        for a in self.arms:
            arms[a.arm] = {
                "estimates": {k: {"exact": str(e.value), "value": render(e.value, precision)} for k, e in a.estimates.items()},
                "truth": {k: {"exact": str(v), "value": render(v, precision)} for k, v in a.truth.items()},
                "gaps": {k: render(v, precision) for k, v in a.gaps.items()},
            }
        return {
            "n": self.n,
            "seed": self.seed,
            "n_after_selection": self.n_after_selection,
            "n_complete": self.n_complete,
            "adjustment_set": list(self.adjustment_set),
            "arms": arms,
            "max_gap": render(self.max_gap, precision),
            "max_oracle_error": render(self.max_oracle_error, precision),
        }


def convergence_report(
    params: ScmParams,
    n: int,
    seed: int,
    adjustment_set: Iterable[str] | None = None,
) -> ConvergenceReport:
    """Simulate ``n`` patients and compare do(X), do(X') and do(X, X') estimates.

    The ITT estimand uses no adjustment (X is randomized); AT and PP adjust
    for ``adjustment_set``, by default the adherence covariates that are
    parents of X'.  Each estimate is paired with its oracle value.  Rows lost
    to follow-up are dropped before estimation.
    """
    from .simulator import simulate

    g = params.graph
    x = g.role_node(NodeRole.TREATMENT_PRESCRIBED)
    xr = g.role_node(NodeRole.TREATMENT_RECEIVED)
    y = g.role_node(NodeRole.OUTCOME)
    if (x, y) in g.edges:
        raise ParamsError("convergence of the protocol estimands assumes no direct X -> Y edge")
    if params.event is None:
        raise ParamsError("parameters need an event label")
    if adjustment_set is None:
        zs = tuple(p for p in g.nodes if p in g.parents(xr) and g.roles[p] is NodeRole.ADHERENCE_COVARIATE)
    else:
        zs = tuple(n_ for n_ in g.nodes if n_ in set(adjustment_set))
    sim = simulate(params, n, seed)
    data = complete_cases(sim.dataset)
    table = dataset_table(data, g, [x, xr, y, *zs])
    arms = []
    for a in params.arm_labels:
        queries = {
            "do_ITT": AdjustmentQuery(g, {x: a}, y, params.event),
            "do_AT": AdjustmentQuery(g, {xr: a}, y, params.event, frozenset(zs)),
            "do_PP": AdjustmentQuery(g, {x: a, xr: a}, y, params.event, frozenset(zs)),
        }
        estimates = {k: backdoor_adjust(q, table) for k, q in queries.items()}
        truth = {k: oracle_interventional(params, q.interventions, params.event, y) for k, q in queries.items()}
        gaps = {
            f"{k1}-{k2}": abs(estimates[k1].value - estimates[k2].value)
            for k1, k2 in itertools.combinations(estimates, 2)
        }
        arms.append(ArmConvergence(a, estimates, truth, gaps))
    return ConvergenceReport(
        n=n,
        seed=seed,
        n_after_selection=sim.n_after_selection,
        n_complete=len(data),
        adjustment_set=zs,
        arms=tuple(arms),
    )
