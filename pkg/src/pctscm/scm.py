"""Discrete SCM parameterizations: conditional probability tables over a DAG.

Each endogenous node gets a stochastic mechanism P(node | parents) stored as
exact rationals.  Parameter files are JSON::

    {
      "graph": {"nodes": [...], "edges": [...]},
      "levels": {"X": ["A", "B"], ...},
      "event": "death",
      "mechanisms": {
        "X":  {"parents": [], "table": {"A": "1/2", "B": "1/2"}},
        "X'": {"parents": ["X", "Z'"],
               "table": {"A": {"lo": {"A": "0.95", "B": "0.05"}, ...}, ...}}
      },
      "hazards": {"horizon": 52, "by": "x_received", "per_period": {"A": "1/50", "B": ["1/40", ...]}}
    }

Tables nest one level per parent, in the order of ``parents``.  Probabilities
are decimal or ``p/q`` strings; JSON numbers other than 0 and 1 are refused
because binary floats are not exact.
"""

from __future__ import annotations

import itertools
import json
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType

from .errors import GraphError, ParamsError
from .graph import CausalDag, NodeRole, graph_from_dict, graph_to_dict

BINARY_FLAG_LEVELS = ("0", "1")


def parse_probability(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ParamsError(f"{where}: probability must be a string, got {value!r}")
    if isinstance(value, int) and value in (0, 1):
        return Fraction(value)
    if isinstance(value, Fraction):
        p = value
    elif isinstance(value, str):
        try:
            p = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ParamsError(f"{where}: cannot parse probability {value!r}") from None
    else:
        raise ParamsError(f"{where}: probability must be a decimal or 'p/q' string, got {value!r}")
    if not 0 <= p <= 1:
        raise ParamsError(f"{where}: probability {value!r} outside [0, 1]")
    return p


def format_probability(p: Fraction) -> str:
    return str(Fraction(p))


@dataclass(frozen=True)
class Cpt:
    """P(node | parents); ``rows`` maps each parent-level tuple to a distribution."""

    parents: tuple[str, ...]
    rows: Mapping[tuple[str, ...], Mapping[str, Fraction]]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(
            self,
            "rows",
            MappingProxyType(
                {tuple(k): MappingProxyType({v: Fraction(p) for v, p in dist.items()}) for k, dist in self.rows.items()}
            ),
        )

    def dist(self, parent_levels: Sequence[str]) -> Mapping[str, Fraction]:
        return self.rows[tuple(parent_levels)]

    def prob(self, value: str, parent_levels: Sequence[str] = ()) -> Fraction:
        return self.rows[tuple(parent_levels)].get(value, Fraction(0))

    @classmethod
    def root(cls, dist: Mapping[str, Fraction]) -> Cpt:
        return cls((), {(): dist})


@dataclass(frozen=True)
class HazardSpec:
    """Per-arm, per-period event probabilities for periods 1..horizon.

    ``by`` names the dataset column that selects the arm (``x_received`` or
    ``x_prescribed``).
    """

    horizon: int
    per_period: Mapping[str, tuple[Fraction, ...]]
    by: str = "x_received"

    def __post_init__(self):
        if self.horizon < 1:
            raise ParamsError("hazard horizon must be >= 1")
        if self.by not in ("x_received", "x_prescribed"):
            raise ParamsError(f"hazards.by must be x_received or x_prescribed, got {self.by!r}")
        table = {}
        for arm, hs in self.per_period.items():
            hs = (hs,) if isinstance(hs, (Fraction, int)) else tuple(hs)
            if len(hs) == 1:
                hs = hs * self.horizon
            if len(hs) != self.horizon:
                raise ParamsError(f"hazards for arm {arm}: need 1 or {self.horizon} values, got {len(hs)}")
            table[arm] = tuple(Fraction(h) for h in hs)
            if any(not 0 <= h <= 1 for h in table[arm]):
                raise ParamsError(f"hazards for arm {arm} must lie in [0, 1]")
            if all(h == 0 for h in table[arm]):
                raise ParamsError(f"hazards for arm {arm} never produce an event")
        object.__setattr__(self, "per_period", MappingProxyType(table))

    def event_time_distribution(self, arm: str) -> list[Fraction]:
        """P(T = t | T <= horizon) for t = 1..horizon."""
        surv = Fraction(1)
        mass = []
        for h in self.per_period[arm]:
            mass.append(surv * h)
            surv *= 1 - h
        total = sum(mass)
        return [m / total for m in mass]


class ScmParams:
    """A DAG with a complete, validated CPT for every node."""

    def __init__(
        self,
        graph: CausalDag,
        levels: Mapping[str, Sequence[str]],
        mechanisms: Mapping[str, Cpt],
        event: str | None = None,
        hazards: HazardSpec | None = None,
    ):
        self.graph = graph
        self.levels = MappingProxyType({n: tuple(levels[n]) for n in graph.nodes if n in levels})
        self.mechanisms = MappingProxyType(dict(mechanisms))
        self.event = event
        self.hazards = hazards
        self._validate()

    def _validate(self):
        g = self.graph
        for n in g.nodes:
            if n not in self.levels:
                raise ParamsError(f"no levels declared for node {n!r}")
            levels = self.levels[n]
            if len(levels) < 1 or len(set(levels)) != len(levels) or "" in levels:
                raise ParamsError(f"levels of {n!r} must be distinct non-empty strings")
            if n not in self.mechanisms:
                raise ParamsError(f"incomplete parameterization: node {n!r} has no mechanism")
        extra = set(self.mechanisms) - set(g.nodes)
        if extra:
            raise ParamsError("mechanisms for unknown node(s): " + ", ".join(sorted(extra)))
        for n in g.nodes:
            cpt = self.mechanisms[n]
            if set(cpt.parents) != set(g.parents(n)) or len(cpt.parents) != len(g.parents(n)):
                raise ParamsError(
                    f"mechanism parents of {n!r} {list(cpt.parents)} differ from graph parents {sorted(g.parents(n))}"
                )
            configs = set(itertools.product(*(self.levels[p] for p in cpt.parents)))
            if set(cpt.rows) != configs:
                missing = configs - set(cpt.rows)
                if missing:
                    raise ParamsError(
                        f"incomplete parameterization: {n!r} has no distribution for parent levels {sorted(missing)[0]}"
                    )
                raise ParamsError(f"{n!r} has rows for undeclared parent levels {sorted(set(cpt.rows) - configs)[0]}")
            for key, dist in cpt.rows.items():
                unknown = set(dist) - set(self.levels[n])
                if unknown:
                    raise ParamsError(f"{n!r}: undeclared level(s) {sorted(unknown)} for parents {key}")
                total = sum(dist.values(), Fraction(0))
                if total != 1:
                    raise ParamsError(f"{n!r}: distribution for parents {key} sums to {total}, not 1")
        roles = {r: g.nodes_with_role(r) for r in NodeRole}
        x, xr = roles[NodeRole.TREATMENT_PRESCRIBED], roles[NodeRole.TREATMENT_RECEIVED]
        if x and xr and self.levels[x[0]] != self.levels[xr[0]]:
            raise ParamsError("prescribed and received treatment must share the same arm levels")
        for role in (NodeRole.SELECTION, NodeRole.CENSORING):
            for n in roles[role]:
                if self.levels[n] != BINARY_FLAG_LEVELS:
                    raise ParamsError(f"{role.value} node {n!r} must have levels ['0', '1']")
        if self.event is not None:
            ys = roles[NodeRole.OUTCOME]
            if len(ys) != 1:
                raise ParamsError("an event label needs exactly one outcome node")
            if self.event not in self.levels[ys[0]]:
                raise ParamsError(f"event {self.event!r} is not a level of outcome {ys[0]!r}")
        if self.hazards is not None:
            arms = self.levels[x[0]] if x else ()
            if set(self.hazards.per_period) != set(arms):
                raise ParamsError("hazards must be given for exactly the treatment arm levels")

    # -- role accessors ------------------------------------------------------

    def role_node(self, role: NodeRole) -> str:
        return self.graph.role_node(role)

    @property
    def arm_labels(self) -> tuple[str, ...]:
        return self.levels[self.role_node(NodeRole.TREATMENT_PRESCRIBED)]

    @property
    def outcome_labels(self) -> tuple[str, ...]:
        return self.levels[self.role_node(NodeRole.OUTCOME)]

    @property
    def covariate_levels(self) -> dict[str, tuple[str, ...]]:
        return {
            n: self.levels[n]
            for n, r in self.graph.roles.items()
            if r in (NodeRole.COVARIATE, NodeRole.ADHERENCE_COVARIATE)
        }

    @property
    def randomization_prob(self) -> Mapping[str, Fraction]:
        """Assignment probability of each arm (the prescribed node's root distribution)."""
        x = self.role_node(NodeRole.TREATMENT_PRESCRIBED)
        cpt = self.mechanisms[x]
        if cpt.parents:
            raise ParamsError("prescribed treatment is not randomized: it has parents")
        return cpt.dist(())

    def __eq__(self, other):
        if not isinstance(other, ScmParams):
            return NotImplemented
        return (
            self.graph == other.graph
            and dict(self.levels) == dict(other.levels)
            and self.event == other.event
            and self.hazards == other.hazards
            and all(_cpt_equal(self.mechanisms[n], other.mechanisms[n]) for n in self.graph.nodes)
        )

    def __repr__(self):
        return f"ScmParams(nodes={list(self.graph.nodes)}, event={self.event!r})"


def _cpt_equal(a: Cpt, b: Cpt) -> bool:
    if set(a.parents) != set(b.parents):
        return False
    perm = [a.parents.index(p) for p in b.parents]
    for key, dist in a.rows.items():
        other = b.rows[tuple(key[i] for i in perm)]
        levels = set(dist) | set(other)
        if any(dist.get(v, 0) != other.get(v, 0) for v in levels):
            return False
    return True


# --- JSON -----------------------------------------------------------------

_PARAM_FIELDS = {"graph", "levels", "mechanisms", "event", "hazards", "description", "ground_truth"}


def params_from_dict(doc: Mapping) -> ScmParams:
    if not isinstance(doc, Mapping):
        raise ParamsError("parameter document must be a JSON object")
    extra = set(doc) - _PARAM_FIELDS
    if extra:
        raise ParamsError("unknown parameter field(s): " + ", ".join(sorted(extra)))
    for key in ("graph", "levels", "mechanisms"):
        if key not in doc:
            raise ParamsError(f"parameter document is missing {key!r}")
    try:
        graph = graph_from_dict(doc["graph"])
    except GraphError as exc:
        raise ParamsError(f"graph: {exc}") from exc
    levels = {n: tuple(v) for n, v in doc["levels"].items()}
    mechanisms = {}
    for node, spec in doc["mechanisms"].items():
        if not isinstance(spec, Mapping) or set(spec) != {"parents", "table"}:
            raise ParamsError(f"mechanism for {node!r} needs exactly 'parents' and 'table'")
        parents = tuple(spec["parents"])
        rows = {}
        _flatten_table(spec["table"], parents, (), rows, node)
        mechanisms[node] = Cpt(parents, rows)
    hazards = None
    if doc.get("hazards") is not None:
        h = doc["hazards"]
        if set(h) - {"horizon", "by", "per_period"}:
            raise ParamsError("unknown hazards field(s)")
        per = {}
        for arm, vals in h["per_period"].items():
            vals = vals if isinstance(vals, list) else [vals]
            per[arm] = tuple(parse_probability(v, f"hazards[{arm}]") for v in vals)
        hazards = HazardSpec(int(h["horizon"]), per, h.get("by", "x_received"))
    return ScmParams(graph, levels, mechanisms, doc.get("event"), hazards)


def _flatten_table(node_table, parents, prefix, out, node):
    where = f"mechanisms[{node}]" + "".join(f"[{p}]" for p in prefix)
    if not isinstance(node_table, Mapping):
        raise ParamsError(f"{where}: expected an object")
    if len(prefix) == len(parents):
        out[prefix] = {v: parse_probability(p, f"{where}[{v}]") for v, p in node_table.items()}
        return
    for level, sub in node_table.items():
        _flatten_table(sub, parents, prefix + (level,), out, node)


def params_to_dict(params: ScmParams) -> dict:
    mechs = {}
    for node in params.graph.nodes:
        cpt = params.mechanisms[node]
        table: dict = {}
        for key in itertools.product(*(params.levels[p] for p in cpt.parents)):
            slot = table
            for k in key:
                slot = slot.setdefault(k, {})
            dist = cpt.dist(key)
            slot.update({v: format_probability(dist.get(v, 0)) for v in params.levels[node]})
        mechs[node] = {"parents": list(cpt.parents), "table": table}
    doc = {
        "graph": graph_to_dict(params.graph),
        "levels": {n: list(params.levels[n]) for n in params.graph.nodes},
        "mechanisms": mechs,
    }
    if params.event is not None:
        doc["event"] = params.event
    if params.hazards is not None:
        h = params.hazards
        doc["hazards"] = {
            "horizon": h.horizon,
            "by": h.by,
            "per_period": {arm: [format_probability(x) for x in hs] for arm, hs in h.per_period.items()},
        }
    return doc


def load_params(path) -> ScmParams:
    with open(path, encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))


def load_params_document(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# --- random parameterizations (property tests, benchmarks) -----------------


def random_dag(rng: random.Random, n_nodes: int, edge_prob: float = 0.4, prefix: str = "V") -> CausalDag:
    """Random DAG whose edges respect the node numbering V0 < V1 < ..."""
    names = [f"{prefix}{i}" for i in range(n_nodes)]
    edges = [(names[i], names[j]) for i in range(n_nodes) for j in range(i + 1, n_nodes) if rng.random() < edge_prob]
    return CausalDag(names, edges)


def random_distribution(rng: random.Random, levels: Sequence[str], max_weight: int = 9) -> dict[str, Fraction]:
    """Strictly positive rational distribution with small denominators."""
    weights = [rng.randint(1, max_weight) for _ in levels]
    total = sum(weights)
    return {lev: Fraction(w, total) for lev, w in zip(levels, weights)}


def random_params(
    rng: random.Random,
    graph: CausalDag | None = None,
    n_nodes: int = 5,
    max_levels: int = 2,
    edge_prob: float = 0.4,
    levels: Mapping[str, Sequence[str]] | None = None,
    event: str | None = None,
) -> ScmParams:
    if graph is None:
        graph = random_dag(rng, n_nodes, edge_prob)
    lv = {}
    for n in graph.nodes:
        if levels is not None and n in levels:
            lv[n] = tuple(levels[n])
        else:
            lv[n] = tuple(str(i) for i in range(rng.randint(2, max_levels)))
    mechs = {}
    for n in graph.nodes:
        parents = tuple(p for p in graph.topological_order() if p in graph.parents(n))
        rows = {key: random_distribution(rng, lv[n]) for key in itertools.product(*(lv[p] for p in parents))}
        mechs[n] = Cpt(parents, rows)
    return ScmParams(graph, lv, mechs, event)


def with_mechanism(params: ScmParams, node: str, cpt: Cpt, graph: CausalDag | None = None) -> ScmParams:
    mechs = dict(params.mechanisms)
    mechs[node] = cpt
    return ScmParams(graph or params.graph, params.levels, mechs, params.event, params.hazards)
