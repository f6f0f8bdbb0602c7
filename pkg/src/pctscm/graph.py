"""Causal DAGs with pragmatic-trial node roles.

A :class:`CausalDag` is immutable; every constructor path checks for cycles,
self-loops, duplicate edges and dangling endpoints.  The canonical trial graph
is produced by :func:`build_pct_template`::

    X -> X' -> Y,   Z' -> X',   Z' -> Y,   Z -> Y
    (optional)  Z -> S
    (optional)  X' -> C,  Z' -> C

``X`` is the prescribed (randomized) arm, ``X'`` the arm actually received,
``Z'`` the covariates driving adherence and ``Z`` the covariates that do not.
"""

from __future__ import annotations

import enum
import itertools
import json
from collections.abc import Iterable, Mapping
from types import MappingProxyType

from .errors import CycleError, GraphError, UnknownNodeError

# Names used by the canonical template.
X = "X"
X_RECEIVED = "X'"
Y = "Y"
Z = "Z"
Z_ADHERENCE = "Z'"
S = "S"
C = "C"


class NodeRole(enum.Enum):
    TREATMENT_PRESCRIBED = "treatment_prescribed"
    TREATMENT_RECEIVED = "treatment_received"
    OUTCOME = "outcome"
    COVARIATE = "covariate"
    ADHERENCE_COVARIATE = "adherence_covariate"
    SELECTION = "selection"
    CENSORING = "censoring"


_SINGLETON_ROLES = (NodeRole.TREATMENT_PRESCRIBED, NodeRole.TREATMENT_RECEIVED, NodeRole.OUTCOME)


def find_cycle(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str] | None:
    """Return one directed cycle as ``[v0, v1, ..., v0]`` or None."""
    children: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in edges:
        children.setdefault(u, []).append(v)
        children.setdefault(v, [])
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(children, WHITE)
    for root in sorted(children):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(sorted(children[root])))]
        path = [root]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                color[node] = BLACK
            elif color[nxt] == GREY:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                stack.append((nxt, iter(sorted(children[nxt]))))
    return None


class CausalDag:
    """Directed acyclic graph over named, role-tagged nodes.

    ``nodes`` is either a mapping name -> role or an iterable of names or
    ``(name, role)`` pairs; bare names get the covariate role.  Instances are
    immutable.
    """

    __slots__ = ("roles", "edges", "_parents", "_children", "_order")

    def __init__(self, nodes, edges=()):
        if isinstance(nodes, Mapping):
            items = list(nodes.items())
        else:
            items = [(n, NodeRole.COVARIATE) if isinstance(n, str) else tuple(n) for n in nodes]
        roles: dict[str, NodeRole] = {}
        for name, role in items:
            if not isinstance(name, str) or not name:
                raise GraphError(f"node name must be a non-empty string, got {name!r}")
            if name in roles:
                raise GraphError(f"duplicate node {name!r}")
            roles[name] = NodeRole(role)
        edge_list = [tuple(e) for e in edges]
        seen = set()
        for e in edge_list:
            if len(e) != 2:
                raise GraphError(f"edge must have two endpoints: {e!r}")
            u, v = e
            for end in (u, v):
                if end not in roles:
                    raise UnknownNodeError(f"edge {u} -> {v} references undeclared node {end!r}")
            if e in seen:
                raise GraphError(f"duplicate edge {u} -> {v}")
            seen.add(e)
        cycle = find_cycle(roles, edge_list)
        if cycle is not None:
            raise CycleError(cycle)
        object.__setattr__(self, "roles", MappingProxyType(roles))
        object.__setattr__(self, "edges", frozenset(edge_list))
        parents: dict[str, set[str]] = {n: set() for n in roles}
        children: dict[str, set[str]] = {n: set() for n in roles}
        for u, v in edge_list:
            parents[v].add(u)
            children[u].add(v)
        object.__setattr__(self, "_parents", {n: frozenset(p) for n, p in parents.items()})
        object.__setattr__(self, "_children", {n: frozenset(c) for n, c in children.items()})
        object.__setattr__(self, "_order", _topological_order(list(roles), parents))

    def __setattr__(self, name, value):
        raise AttributeError("CausalDag is immutable")

    def __eq__(self, other):
        if not isinstance(other, CausalDag):
            return NotImplemented
        return dict(self.roles) == dict(other.roles) and self.edges == other.edges

    def __hash__(self):
        return hash((frozenset(self.roles.items()), self.edges))

    def __repr__(self):
        edges = ", ".join(f"{u}->{v}" for u, v in sorted(self.edges))
        return f"CausalDag(nodes={list(self.roles)}, edges=[{edges}])"

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(self.roles)

    def __contains__(self, name):
        return name in self.roles

    def parents(self, node: str) -> frozenset[str]:
        self._check(node)
        return self._parents[node]

    def children(self, node: str) -> frozenset[str]:
        self._check(node)
        return self._children[node]

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def ancestors(self, nodes: Iterable[str] | str) -> set[str]:
        """Nodes with a directed path into ``nodes``."""
        return self._reach(_as_set(nodes), self._parents)

    def descendants(self, nodes: Iterable[str] | str) -> set[str]:
        return self._reach(_as_set(nodes), self._children)

    def _reach(self, start, nbrs):
        for n in start:
            self._check(n)
        out: set[str] = set()
        frontier = list(start)
        while frontier:
            for m in nbrs[frontier.pop()]:
                if m not in out:
                    out.add(m)
                    frontier.append(m)
        return out

    def nodes_with_role(self, role: NodeRole) -> tuple[str, ...]:
        return tuple(n for n, r in self.roles.items() if r is role)

    def role_node(self, role: NodeRole) -> str:
        """The unique node carrying ``role``; raises GraphError otherwise."""
        found = self.nodes_with_role(role)
        if len(found) != 1:
            raise GraphError(f"expected exactly one {role.value} node, found {len(found)}")
        return found[0]

    def subgraph(self, nodes: Iterable[str]) -> CausalDag:
        keep = _as_set(nodes)
        for n in keep:
            self._check(n)
        return CausalDag(
            {n: r for n, r in self.roles.items() if n in keep},
            [(u, v) for u, v in sorted(self.edges) if u in keep and v in keep],
        )

    def without_outgoing(self, nodes: Iterable[str]) -> CausalDag:
        drop = _as_set(nodes)
        return CausalDag(dict(self.roles), [e for e in sorted(self.edges) if e[0] not in drop])

    def with_edges(self, add=(), remove=()) -> CausalDag:
        remove = {tuple(e) for e in remove}
        edges = [e for e in sorted(self.edges) if e not in remove]
        edges += [tuple(e) for e in add]
        return CausalDag(dict(self.roles), edges)

    def _check(self, node):
        if node not in self.roles:
            raise UnknownNodeError(f"unknown node {node!r}")


def _topological_order(nodes, parents):
    # Kahn's algorithm; ties broken by declaration order for reproducibility.
    indeg = {n: len(parents[n]) for n in nodes}
    children = {n: [] for n in nodes}
    for v in nodes:
        for u in parents[v]:
            children[u].append(v)
    rank = {n: i for i, n in enumerate(nodes)}
    ready = [n for n in nodes if indeg[n] == 0]
    order = []
    while ready:
        ready.sort(key=rank.__getitem__)
        n = ready.pop(0)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return tuple(order)


def _as_set(nodes) -> set[str]:
    if isinstance(nodes, str):
        return {nodes}
    return set(nodes)


def is_acyclic(g) -> bool:
    """True iff ``g`` has no directed cycle.

    ``g`` may be a :class:`CausalDag` (always acyclic by construction) or a
    raw iterable of ``(from, to)`` edges.
    """
    if isinstance(g, CausalDag):
        return True
    edges = [tuple(e) for e in g]
    nodes = {n for e in edges for n in e}
    return find_cycle(nodes, edges) is None


def build_pct_template(with_selection: bool = False, with_censoring: bool = False) -> CausalDag:
    roles = {
        X: NodeRole.TREATMENT_PRESCRIBED,
        X_RECEIVED: NodeRole.TREATMENT_RECEIVED,
        Y: NodeRole.OUTCOME,
        Z: NodeRole.COVARIATE,
        Z_ADHERENCE: NodeRole.ADHERENCE_COVARIATE,
    }
    edges = [(X, X_RECEIVED), (X_RECEIVED, Y), (Z_ADHERENCE, X_RECEIVED), (Z_ADHERENCE, Y), (Z, Y)]
    if with_selection:
        roles[S] = NodeRole.SELECTION
        edges.append((Z, S))
    if with_censoring:
        roles[C] = NodeRole.CENSORING
        edges += [(X_RECEIVED, C), (Z_ADHERENCE, C)]
    return CausalDag(roles, edges)


def pct_role_violations(g: CausalDag) -> list[str]:
    """Human-readable list of trial-template role violations (empty if none)."""
    problems = []
    for role in _SINGLETON_ROLES:
        count = len(g.nodes_with_role(role))
        if count != 1:
            problems.append(f"expected exactly one {role.value} node, found {count}")
    for x in g.nodes_with_role(NodeRole.TREATMENT_PRESCRIBED):
        if g.parents(x):
            problems.append(
                f"prescribed treatment {x} must be randomized (no parents), has parents "
                + ", ".join(sorted(g.parents(x)))
            )
    for xr in g.nodes_with_role(NodeRole.TREATMENT_RECEIVED):
        for p in sorted(g.parents(xr)):
            if g.roles[p] is NodeRole.COVARIATE:
                problems.append(f"covariate {p} has an edge into received treatment {xr}; use adherence_covariate")
    return problems


def _check_sets(g: CausalDag, *sets) -> list[set[str]]:
    out = []
    for s in sets:
        s = _as_set(s)
        for n in s:
            if n not in g:
                raise UnknownNodeError(f"unknown node {n!r}")
        out.append(s)
    for i, j in itertools.combinations(range(len(out)), 2):
        shared = out[i] & out[j]
        if shared:
            raise GraphError("node sets overlap on " + ", ".join(sorted(shared)))
    return out


def d_separated(g: CausalDag, set_a, set_b, given=()) -> bool:
    """d-separation of ``set_a`` and ``set_b`` given ``given``.

    Reachability ("Bayes ball") search over (node, direction) states, linear
    in the number of edges.
    """
    a, b, z = _check_sets(g, set_a, set_b, given)
    if not a or not b:
        return True
    z_and_anc = z | g.ancestors(z)
    UP, DOWN = 0, 1  # UP: arrived from a child; DOWN: arrived from a parent
    stack = [(n, UP) for n in a]
    visited = set()
    while stack:
        node, d = stack.pop()
        if (node, d) in visited:
            continue
        visited.add((node, d))
        if node not in z and node in b:
            return False
        if d == UP:
            if node not in z:
                stack.extend((p, UP) for p in g.parents(node))
                stack.extend((c, DOWN) for c in g.children(node))
        else:
            if node not in z:
                stack.extend((c, DOWN) for c in g.children(node))
            if node in z_and_anc:
                stack.extend((p, UP) for p in g.parents(node))
    return True


def path_is_blocked(g: CausalDag, path, given=()) -> bool:
    """Whether the undirected path (a node sequence) is blocked by ``given``."""
    z = _as_set(given)
    z_and_anc = z | g.ancestors(z)
    for prev, mid, nxt in zip(path, path[1:], path[2:]):
        collider = (prev, mid) in g.edges and (nxt, mid) in g.edges
        if collider:
            if mid not in z_and_anc:
                return True
        elif mid in z:
            return True
    return False


def backdoor_paths(g: CausalDag, treatment, outcome):
    """All simple paths from a treatment to ``outcome`` that start with an edge into the treatment.

    With several treatments, paths passing through another treatment are skipped.
    """
    treatments = _as_set(treatment)
    found = []
    for t in sorted(treatments):
        for p in sorted(g.parents(t)):
            _extend_paths(g, [t, p], outcome, treatments, found)
    return found


def _extend_paths(g, path, target, avoid, found):
    node = path[-1]
    if node == target:
        found.append(list(path))
        return
    if node in avoid:
        return
    for nxt in sorted(g.parents(node) | g.children(node)):
        if nxt not in path:
            path.append(nxt)
            _extend_paths(g, path, target, avoid, found)
            path.pop()


def open_backdoor_paths(g: CausalDag, treatment, outcome, adjust=()):
    return [p for p in backdoor_paths(g, treatment, outcome) if not path_is_blocked(g, p, adjust)]


def is_backdoor_admissible(g: CausalDag, treatment, outcome: str, adjust=()) -> bool:
    """Backdoor criterion for a treatment node (or a set of jointly intervened nodes).

    ``adjust`` must contain no descendant of any treatment, and must
    d-separate the treatments from ``outcome`` once the treatments' outgoing
    edges are removed.
    """
    treatments, outcomes, z = _check_sets(g, treatment, outcome, adjust)
    if z & g.descendants(treatments):
        return False
    return d_separated(g.without_outgoing(treatments), treatments, outcomes, z)


# --- JSON document --------------------------------------------------------

_DOC_FIELDS = {"nodes", "edges"}
_NODE_FIELDS = {"name", "role"}


def graph_from_dict(doc) -> CausalDag:
    if not isinstance(doc, Mapping):
        raise GraphError("graph document must be a JSON object")
    extra = set(doc) - _DOC_FIELDS
    if extra:
        raise GraphError("unknown graph field(s): " + ", ".join(sorted(extra)))
    missing = _DOC_FIELDS - set(doc)
    if missing:
        raise GraphError("missing graph field(s): " + ", ".join(sorted(missing)))
    nodes = []
    for entry in doc["nodes"]:
        if not isinstance(entry, Mapping):
            raise GraphError(f"node entry must be an object: {entry!r}")
        extra = set(entry) - _NODE_FIELDS
        if extra:
            raise GraphError("unknown node field(s): " + ", ".join(sorted(extra)))
        if set(entry) != _NODE_FIELDS:
            raise GraphError(f"node entry needs 'name' and 'role': {entry!r}")
        try:
            role = NodeRole(entry["role"])
        except ValueError:
            raise GraphError(f"unknown role {entry['role']!r} for node {entry['name']!r}") from None
        nodes.append((entry["name"], role))
    edges = []
    for e in doc["edges"]:
        if not isinstance(e, list) or len(e) != 2:
            raise GraphError(f"edge must be a [from, to] pair: {e!r}")
        edges.append((e[0], e[1]))
    return CausalDag(nodes, edges)


def graph_to_dict(g: CausalDag) -> dict:
    return {
        "nodes": [{"name": n, "role": r.value} for n, r in g.roles.items()],
        "edges": [list(e) for e in sorted(g.edges)],
    }


def load_graph(path) -> CausalDag:
    """Read a graph JSON file; JSON syntax errors propagate as json.JSONDecodeError."""
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def dump_graph(g: CausalDag, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(g), fh, indent=2)
        fh.write("\n")
