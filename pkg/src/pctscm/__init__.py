"""Pragmatic clinical trials as structural causal models.

Graphs (:mod:`pctscm.graph`), trial data (:mod:`pctscm.data`), protocol
estimators (:mod:`pctscm.estimators`), backdoor adjustment with an exact
oracle (:mod:`pctscm.adjustment`) and a seeded simulator
(:mod:`pctscm.simulator`).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .adjustment import (
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
from .data import ContingencyTable, DatasetSchema, TrialDataset, TrialRecord, load_dataset, tabulate, write_dataset
from .errors import (
    AnalysisError,
    CycleError,
    DataError,
    DegenerateStratum,
    GraphError,
    InputError,
    NotAdmissible,
    ParamsError,
    PctError,
    PositivityViolation,
    UndefinedOdds,
    ZeroReferenceRisk,
)
from .estimators import (
    EffectEstimate,
    Protocol,
    ProtocolSpec,
    event_probability,
    hazard_ratio,
    odds_ratio,
    render,
    risk_ratio,
)
from .graph import CausalDag, NodeRole, build_pct_template, d_separated, is_backdoor_admissible
from .scm import Cpt, HazardSpec, ScmParams, load_params
from .simulator import SimulationOutput, fit_params_from_table, simulate

__all__ = [
    "AdjustmentQuery",
    "AnalysisError",
    "CausalDag",
    "ContingencyTable",
    "Cpt",
    "CycleError",
    "DataError",
    "DatasetSchema",
    "DegenerateStratum",
    "EffectEstimate",
    "GraphError",
    "HazardSpec",
    "InputError",
    "JointDistribution",
    "NodeRole",
    "NotAdmissible",
    "ParamsError",
    "PctError",
    "PositivityViolation",
    "Protocol",
    "ProtocolSpec",
    "ScmParams",
    "SimulationOutput",
    "TrialDataset",
    "TrialRecord",
    "UndefinedOdds",
    "ZeroReferenceRisk",
    "__version__",
    "backdoor_adjust",
    "build_pct_template",
    "check_admissible",
    "convergence_report",
    "d_separated",
    "dataset_table",
    "event_probability",
    "fit_params_from_table",
    "hazard_ratio",
    "is_backdoor_admissible",
    "joint_distribution",
    "load_dataset",
    "load_params",
    "odds_ratio",
    "oracle_interventional",
    "population_table",
    "render",
    "risk_ratio",
    "simulate",
    "tabulate",
    "write_dataset",
]
