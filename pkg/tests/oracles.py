"""Independent reference computations used by the tests.

Nothing here imports the package's algorithms: graphs are plain edge lists,
parameterizations are plain dicts, and every quantity is computed by the most
direct enumeration available.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def _ancestors_incl(edges, nodes):
    found = set(nodes)
    changed = True
    while changed:
        changed = False
        for u, v in edges:
            if v in found and u not in found:
                found.add(u)
                changed = True
    return found


def _simple_paths(edges, src, dst):
    nbrs = {}
    for u, v in edges:
        nbrs.setdefault(u, set()).add(v)
        nbrs.setdefault(v, set()).add(u)
    out = []

    def walk(path):
        if path[-1] == dst:
            out.append(list(path))
            return
        for n in sorted(nbrs.get(path[-1], ())):
            if n not in path:
                walk(path + [n])

    walk([src])
    return out


def path_open(edges, path, given):
    edges = set(edges)
    anc = _ancestors_incl(edges, given)
    for a, m, b in zip(path, path[1:], path[2:]):
        if (a, m) in edges and (b, m) in edges:
            if m not in anc:
                return False
        elif m in given:
            return False
    return True


def dsep_by_paths(edges, a, b, given):
    """d-separation by listing every simple path between the two sets."""
    given = set(given)
    for s in a:
        for t in b:
            for p in _simple_paths(edges, s, t):
                if path_open(edges, p, given):
                    return False
    return True


def interventional(levels, parents, cpts, interventions, target):
    """P(target | do(interventions)) by summing the truncated product over every assignment.

    ``cpts[node]`` maps a tuple of parent values (in ``parents[node]`` order)
    to a dict value -> probability.
    """
    names = list(levels)
    total = Fraction(0)
    for values in itertools.product(*(levels[n] for n in names)):
        v = dict(zip(names, values))
        if any(v[k] != x for k, x in interventions.items()):
            continue
        if any(v[k] != x for k, x in target.items()):
            continue
        w = Fraction(1)
        for n in names:
            if n in interventions:
                continue
            w *= Fraction(cpts[n][tuple(v[p] for p in parents[n])].get(v[n], 0))
        total += w
    return total


def plain_params(params):
    """Unpack ScmParams into the dict form used above."""
    levels = {n: list(params.levels[n]) for n in params.graph.nodes}
    parents = {n: list(params.mechanisms[n].parents) for n in params.graph.nodes}
    cpts = {
        n: {k: dict(d) for k, d in params.mechanisms[n].rows.items()} for n in params.graph.nodes
    }
    return levels, parents, cpts


# reference trial counts: (prescribed, received) -> (deaths, patients)
TABLE1 = {("A", "A"): (15, 85), ("A", "B"): (15, 15), ("B", "B"): (30, 100), ("B", "A"): (0, 0)}


def table1_probabilities():
    def pool(keep):
        d = sum(c[0] for k, c in TABLE1.items() if keep(k))
        n = sum(c[1] for k, c in TABLE1.items() if keep(k))
        return Fraction(d, n)

    return {
        "ITT": (pool(lambda k: k[0] == "A"), pool(lambda k: k[0] == "B")),
        "AT": (pool(lambda k: k[1] == "A"), pool(lambda k: k[1] == "B")),
        "PP": (pool(lambda k: k == ("A", "A")), pool(lambda k: k == ("B", "B"))),
    }


def half_even(x: Fraction, places: int) -> Fraction:
    scaled = x * 10**places
    floor = scaled.numerator // scaled.denominator
    rem = scaled - floor
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2 == 1):
        floor += 1
    return Fraction(floor, 10**places)


def fmt(x: Fraction, places: int = 2) -> str:
    r = half_even(x, places)
    return f"{float(r):.{places}f}"


def discrete_hazard_ratios(rows):
    """(Mantel-Haenszel, observed/expected) hazard ratios of arm "a" vs arm "b".

    ``rows`` are ``(arm, exit_time, is_event, count)``; at each period with an
    event, the risk set is everyone whose exit time is at least that period.
    """
    periods = sorted({t for _, t, e, _ in rows if e})
    num = den = Fraction(0)
    obs = {"a": 0, "b": 0}
    exp = {"a": Fraction(0), "b": Fraction(0)}
    for t in periods:
        d = {arm: sum(c for a, tt, e, c in rows if a == arm and tt == t and e) for arm in "ab"}
        n = {arm: sum(c for a, tt, _, c in rows if a == arm and tt >= t) for arm in "ab"}
        tot = n["a"] + n["b"]
        num += Fraction(d["a"] * n["b"], tot)
        den += Fraction(d["b"] * n["a"], tot)
        for arm in "ab":
            obs[arm] += d[arm]
            exp[arm] += Fraction(n[arm] * (d["a"] + d["b"]), tot)
    return num / den, (obs["a"] / exp["a"]) / (obs["b"] / exp["b"])
