"""Regenerate the shipped graph and parameter fixtures.

Parameter values are hand-picked; the stored ``ground_truth`` block is
computed by the exact enumeration oracle, so rerunning this script is the
only sanctioned way to change a fixture.
"""

from __future__ import annotations

import json
from fractions import Fraction as F
from pathlib import Path

from pctscm.graph import X, X_RECEIVED, Y, Z, Z_ADHERENCE, C, CausalDag, NodeRole, build_pct_template, graph_to_dict
from pctscm.scm import Cpt, HazardSpec, ScmParams, params_to_dict
from pctscm.simulator import ground_truth, truth_to_json

OUT = Path(__file__).resolve().parent.parent / "src" / "pctscm" / "fixtures"

ARMS = ("A", "B")
DEATH = ("no_death", "death")
FLAG = ("0", "1")


def _y_rows(death):
    """Y rows for parents (X', Z', Z) from a callable (x', z', z) -> P(death)."""
    return {
        (xr, zp, z): {"death": death(xr, zp, z), "no_death": 1 - death(xr, zp, z)}
        for xr in ARMS
        for zp in FLAG
        for z in FLAG
    }


def template_confounded() -> ScmParams:
    # Z' pushes patients towards arm A and independently raises mortality;
    # the received arm itself has no effect on death.
    g = build_pct_template()
    take_a = {("A", "0"): F(3, 5), ("A", "1"): F(19, 20), ("B", "0"): F(1, 20), ("B", "1"): F(2, 5)}
    mechs = {
        X: Cpt.root({"A": F(1, 2), "B": F(1, 2)}),
        Z: Cpt.root({"0": F(3, 5), "1": F(2, 5)}),
        Z_ADHERENCE: Cpt.root({"0": F(1, 2), "1": F(1, 2)}),
        X_RECEIVED: Cpt((X, Z_ADHERENCE), {k: {"A": p, "B": 1 - p} for k, p in take_a.items()}),
        Y: Cpt(
            (X_RECEIVED, Z_ADHERENCE, Z),
            _y_rows(lambda xr, zp, z: {("0", "0"): F(1, 10), ("0", "1"): F(1, 4), ("1", "0"): F(2, 5), ("1", "1"): F(3, 5)}[zp, z]),
        ),
    }
    levels = {X: ARMS, X_RECEIVED: ARMS, Y: DEATH, Z: FLAG, Z_ADHERENCE: FLAG}
    hazards = HazardSpec(12, {"A": (F(1, 10),), "B": (F(1, 10),)})
    return ScmParams(g, levels, mechs, "death", hazards)


def perfect_adherence() -> ScmParams:
    # everyone takes the prescribed arm; without Z' -> X' nothing needs adjusting
    roles = {
        X: NodeRole.TREATMENT_PRESCRIBED,
        X_RECEIVED: NodeRole.TREATMENT_RECEIVED,
        Y: NodeRole.OUTCOME,
        Z: NodeRole.COVARIATE,
        Z_ADHERENCE: NodeRole.COVARIATE,
    }
    g = CausalDag(roles, [(X, X_RECEIVED), (X_RECEIVED, Y), (Z_ADHERENCE, Y), (Z, Y)])
    base = {"A": F(3, 20), "B": F(3, 10)}
    mechs = {
        X: Cpt.root({"A": F(1, 2), "B": F(1, 2)}),
        Z: Cpt.root({"0": F(1, 2), "1": F(1, 2)}),
        Z_ADHERENCE: Cpt.root({"0": F(7, 10), "1": F(3, 10)}),
        X_RECEIVED: Cpt((X,), {("A",): {"A": F(1), "B": F(0)}, ("B",): {"A": F(0), "B": F(1)}}),
        Y: Cpt(
            (X_RECEIVED, Z_ADHERENCE, Z),
            _y_rows(lambda xr, zp, z: base[xr] + F(1, 5) * int(zp) + F(1, 10) * int(z)),
        ),
    }
    levels = {X: ARMS, X_RECEIVED: ARMS, Y: DEATH, Z: FLAG, Z_ADHERENCE: FLAG}
    return ScmParams(g, levels, mechs, "death")


def censoring_adversarial() -> ScmParams:
    # frail patients (Z'=1) die more often and also drop out more often,
    # more so on arm B, so complete cases under-count deaths unevenly
    g = build_pct_template(with_censoring=True)
    take_a = {("A", "0"): F(9, 10), ("A", "1"): F(7, 10), ("B", "0"): F(1, 10), ("B", "1"): F(1, 5)}
    stay = {("A", "0"): F(19, 20), ("A", "1"): F(3, 5), ("B", "0"): F(9, 10), ("B", "1"): F(3, 10)}
    effect = {"A": F(0), "B": F(1, 10)}
    mechs = {
        X: Cpt.root({"A": F(1, 2), "B": F(1, 2)}),
        Z: Cpt.root({"0": F(1, 2), "1": F(1, 2)}),
        Z_ADHERENCE: Cpt.root({"0": F(7, 10), "1": F(3, 10)}),
        X_RECEIVED: Cpt((X, Z_ADHERENCE), {k: {"A": p, "B": 1 - p} for k, p in take_a.items()}),
        Y: Cpt(
            (X_RECEIVED, Z_ADHERENCE, Z),
            _y_rows(lambda xr, zp, z: F(1, 10) + effect[xr] + F(2, 5) * int(zp) + F(1, 10) * int(z)),
        ),
        C: Cpt((X_RECEIVED, Z_ADHERENCE), {k: {"1": p, "0": 1 - p} for k, p in stay.items()}),
    }
    levels = {X: ARMS, X_RECEIVED: ARMS, Y: DEATH, Z: FLAG, Z_ADHERENCE: FLAG, C: FLAG}
    return ScmParams(g, levels, mechs, "death")


FIXTURES = {
    "template_confounded.json": (
        template_confounded,
        "Trial template with adherence confounded by Z' and no effect of the received arm on death.",
    ),
    "perfect_adherence.json": (
        perfect_adherence,
        "Every patient receives the prescribed arm; Z' affects death only.",
    ),
    "censoring_adversarial.json": (
        censoring_adversarial,
        "Loss to follow-up depends on the received arm and on Z', which also drives death.",
    ),
}


def document(params: ScmParams, description: str) -> dict:
    doc = {"description": description, **params_to_dict(params)}
    doc["ground_truth"] = truth_to_json(ground_truth(params))
    return doc


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "pct_template.json", "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(build_pct_template()), fh, indent=2)
        fh.write("\n")
    for name, (build, description) in FIXTURES.items():
        with open(OUT / name, "w", encoding="utf-8") as fh:
            json.dump(document(build(), description), fh, indent=2)
            fh.write("\n")
        print("wrote", OUT / name)


if __name__ == "__main__":
    main()
