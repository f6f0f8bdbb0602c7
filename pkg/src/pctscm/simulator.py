"""Seeded ancestral sampling of trial datasets from discrete SCMs.

Sampling discipline (version ``pcg64-raw-v1``):

* The bit stream is NumPy's ``PCG64`` seeded with the integer seed, read
  through ``random_raw`` as unsigned 64-bit words.  Raw PCG64 output is fixed
  by the algorithm, independent of NumPy's distribution code.
* Row ``i`` consumes words ``i*k .. i*k + k - 1``, where ``k`` is the number
  of graph nodes plus one.  Word ``j < k - 1`` drives the ``j``-th node in
  topological order; the last word drives the event time.
* A word ``u`` selects the first category whose cumulative probability ``c``
  satisfies ``u < c * 2**64``.  Thresholds ``ceil(c * 2**64)`` are computed
  exactly from the rationals, so no floating-point comparison is involved.

Identical ``(params, n, seed)`` therefore give byte-identical datasets on
every platform.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .adjustment import joint_distribution, oracle_interventional
from .data import (
    OUTCOME,
    PRESCRIBED,
    RECEIVED,
    ContingencyTable,
    DatasetSchema,
    TrialDataset,
)
from .errors import DegenerateStratum, ParamsError
from .graph import CausalDag, NodeRole
from .scm import Cpt, ScmParams

SAMPLER_VERSION = "pcg64-raw-v1"
_TWO64 = 1 << 64


def seed_for(seed: int, index: int) -> int:
    """Deterministic 64-bit seed for replicate ``index`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def raw_words(seed: int, n_rows: int, width: int) -> np.ndarray:
    """The ``(n_rows, width)`` block of raw 64-bit words for a seed."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    bg = np.random.PCG64(seed)
    return bg.random_raw(n_rows * width).astype(np.uint64).reshape(n_rows, width)


def thresholds(dist: Sequence[Fraction]) -> np.ndarray:
    """Integer category boundaries for inverse-CDF sampling over ``dist``."""
    out = []
    cum = Fraction(0)
    for p in dist[:-1]:
        cum += p
        t = -((-cum.numerator * _TWO64) // cum.denominator)
        if t >= _TWO64:
            break
        out.append(t)
    return np.array(out, dtype=np.uint64)


def draw_categories(words: np.ndarray, dist: Sequence[Fraction]) -> np.ndarray:
    return np.searchsorted(thresholds(dist), words, side="right").astype(np.int64)


def sample_codes(params: ScmParams, n: int, seed: int) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Ancestral sample of every node as level codes, plus the spare event-time words."""
    g = params.graph
    order = g.topological_order()
    words = raw_words(seed, n, len(order) + 1)
    codes: dict[str, np.ndarray] = {}
    for j, node in enumerate(order):
        cpt = params.mechanisms[node]
        levels = params.levels[node]
        out = np.zeros(n, dtype=np.int64)
        col = words[:, j]
        if not cpt.parents:
            out[:] = draw_categories(col, [cpt.prob(v) for v in levels])
        else:
            parent_levels = [params.levels[p] for p in cpt.parents]
            shape = tuple(len(l) for l in parent_levels)
            config = np.ravel_multi_index([codes[p] for p in cpt.parents], shape)
            for flat, key in enumerate(itertools.product(*parent_levels)):
                rows = np.nonzero(config == flat)[0]
                if rows.size:
                    out[rows] = draw_categories(col[rows], [cpt.prob(v, key) for v in levels])
        codes[node] = out
    return codes, words[:, -1]


@dataclass(frozen=True)
class SimulationOutput:
    dataset: TrialDataset
    ground_truth: Mapping[str, Fraction | None]
    seed: int
    n_requested: int
    n_after_selection: int
    sampler: str = SAMPLER_VERSION

    def truth_document(self) -> dict:
        return {
            "sampler": self.sampler,
            "seed": self.seed,
            "n_requested": self.n_requested,
            "n_after_selection": self.n_after_selection,
            "ground_truth": truth_to_json(self.ground_truth),
        }


def truth_to_json(truth: Mapping[str, Fraction | None]) -> dict:
    return {k: None if v is None else {"exact": str(v), "float": float(v)} for k, v in truth.items()}


def ground_truth(params: ScmParams) -> dict[str, Fraction | None]:
    """Oracle interventional and population-conditional quantities for the event label.

    Keys: ``event_probability``, and ``do_ITT[a]``, ``do_AT[a]``,
    ``do_PP[a]``, ``cond_ITT[a]``, ``cond_AT[a]``, ``cond_PP[a]`` per arm.
    Conditionals computed on the full population (before selection and
    censoring); undefined ones are None.
    """
    if params.event is None:
        raise ParamsError("parameters need an event label for ground truth")
    g = params.graph
    x = g.role_node(NodeRole.TREATMENT_PRESCRIBED)
    xr = g.role_node(NodeRole.TREATMENT_RECEIVED)
    y = g.role_node(NodeRole.OUTCOME)
    e = params.event
    joint = joint_distribution(params)
    truth: dict[str, Fraction | None] = {"event_probability": joint.prob({y: e})}
    for a in params.arm_labels:
        truth[f"do_ITT[{a}]"] = oracle_interventional(params, {x: a}, e, y)
        truth[f"do_AT[{a}]"] = oracle_interventional(params, {xr: a}, e, y)
        truth[f"do_PP[{a}]"] = oracle_interventional(params, {x: a, xr: a}, e, y)
    for a in params.arm_labels:
        for tag, given in (("ITT", {x: a}), ("AT", {xr: a}), ("PP", {x: a, xr: a})):
            try:
                truth[f"cond_{tag}[{a}]"] = joint.conditional({y: e}, given)
            except DegenerateStratum:
                truth[f"cond_{tag}[{a}]"] = None
    return truth


def _schema(params: ScmParams) -> DatasetSchema:
    arms = params.arm_labels
    return DatasetSchema(
        arm_labels=arms,
        outcome_labels=params.outcome_labels,
        covariates=params.covariate_levels,
        event=params.event,
        treatment=arms[0],
        reference=arms[1] if len(arms) > 1 else None,
    )


def simulate(params: ScmParams, n: int, seed: int) -> SimulationOutput:
    """Sample ``n`` candidate patients; ineligible ones (S=0) are screened out.

    Patients with C=0 stay in the data with ``completed=0`` and no outcome;
    their received arm is still recorded.  With a hazard spec, event records
    get a time drawn from the arm's event-time distribution conditioned on an
    event by the horizon, and non-events are censored at the horizon.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    g = params.graph
    x = g.role_node(NodeRole.TREATMENT_PRESCRIBED)
    xr = g.role_node(NodeRole.TREATMENT_RECEIVED)
    y = g.role_node(NodeRole.OUTCOME)
    codes, time_words = sample_codes(params, n, seed)
    keep = np.ones(n, dtype=bool)
    for s in g.nodes_with_role(NodeRole.SELECTION):
        keep &= codes[s] == 1
    completed = np.ones(n, dtype=bool)
    for c in g.nodes_with_role(NodeRole.CENSORING):
        completed &= codes[c] == 1
    outcome = np.where(completed, codes[y], -1)
    event_time = np.full(n, -1, dtype=np.int64)
    if params.hazards is not None:
        h = params.hazards
        arm_codes = codes[xr] if h.by == "x_received" else codes[x]
        ev_code = params.outcome_labels.index(params.event) if params.event else -1
        is_event = completed & (outcome == ev_code)
        event_time[completed & ~is_event] = h.horizon
        for i, arm in enumerate(params.arm_labels):
            rows = np.nonzero(is_event & (arm_codes == i))[0]
            if rows.size:
                event_time[rows] = draw_categories(time_words[rows], h.event_time_distribution(arm)) + 1
    schema = _schema(params)
    width = len(str(n)) if n else 1
    idx = np.nonzero(keep)[0]
    ids = [f"P{i + 1:0{width}d}" for i in idx]
    col_codes = {PRESCRIBED: codes[x][keep], RECEIVED: codes[xr][keep], OUTCOME: outcome[keep]}
    for cov in schema.covariates:
        col_codes[cov] = codes[cov][keep]
    dataset = TrialDataset(schema, col_codes, event_time[keep], completed[keep], None, ids)
    truth = ground_truth(params) if params.event is not None else {}
    return SimulationOutput(dataset, truth, seed, n, int(keep.sum()))


def simulate_event_times(
    hazards: Mapping[str, Fraction],
    n_per_arm: int,
    horizon: int,
    seed: int,
    event_label: str = "event",
    censored_label: str = "no_event",
) -> TrialDataset:
    """Two-or-more-arm dataset with geometric event times and a constant per-period hazard per arm.

    Arm ``i`` uses rows ``i*n_per_arm ..``; periods run 1..horizon, and
    patients without an event by the horizon are censored there.
    """
    arms = tuple(hazards)
    n = n_per_arm * len(arms)
    words = raw_words(seed, n, 1)[:, 0]
    arm_codes = np.repeat(np.arange(len(arms), dtype=np.int64), n_per_arm)
    times = np.empty(n, dtype=np.int64)
    for i, arm in enumerate(arms):
        hz = Fraction(hazards[arm])
        # categories 1..horizon are event periods, the last one is "survived the horizon"
        dist = [hz * (1 - hz) ** (t - 1) for t in range(1, horizon + 1)]
        dist.append((1 - hz) ** horizon)
        sl = slice(i * n_per_arm, (i + 1) * n_per_arm)
        times[sl] = draw_categories(words[sl], dist) + 1
    event = times <= horizon
    times = np.minimum(times, horizon)
    schema = DatasetSchema(arms, (censored_label, event_label), {}, event=event_label, treatment=arms[0], reference=arms[-1])
    width = len(str(n))
    return TrialDataset(
        schema,
        {PRESCRIBED: arm_codes, RECEIVED: arm_codes, OUTCOME: event.astype(np.int64)},
        times,
        np.ones(n, dtype=bool),
        None,
        [f"P{i + 1:0{width}d}" for i in range(n)],
    )


def fit_params_from_table(
    t: ContingencyTable,
    graph: CausalDag,
    event: str | None = None,
) -> ScmParams:
    """Empirical conditional frequencies for every node of ``graph``.

    The table's dimensions must be named by graph nodes (see
    :func:`pctscm.adjustment.dataset_table`); each parent configuration must
    be observed at least once.
    """
    for n in graph.nodes:
        t.axis(n)
    table = t.marginal(list(graph.nodes))
    levels = {n: table.levels(n) for n in graph.nodes}
    mechanisms = {}
    for node in graph.nodes:
        parents = tuple(p for p in graph.nodes if p in graph.parents(node))
        rows = {}
        for key in itertools.product(*(levels[p] for p in parents)):
            cond = dict(zip(parents, key))
            den = table.count(cond)
            if den == 0:
                desc = ", ".join(f"{p}={v}" for p, v in cond.items()) or "<none>"
                raise ParamsError(f"parent configuration {desc} of {node!r} is never observed")
            rows[key] = {v: Fraction(table.count({**cond, node: v}), den) for v in levels[node]}
        mechanisms[node] = Cpt(parents, rows)
    return ScmParams(graph, levels, mechanisms, event)
