"""Protocol-level effect estimates: event probabilities, RR, OR and HR.

All arithmetic is exact (:class:`fractions.Fraction`).  An
:class:`EffectEstimate` keeps the cells it was computed from, and
:meth:`EffectEstimate.reproduce` recomputes the value from those cells alone.

Arms are compared as treatment level ``a`` versus reference level ``b``:

* ITT conditions on the prescribed arm,
* AT conditions on the received arm,
* PP conditions on prescribed = received = the arm.
"""

from __future__ import annotations

import enum
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .data import OUTCOME, PRESCRIBED, RECEIVED, ContingencyTable, TrialDataset
from .errors import (
    DataError,
    DegenerateStratum,
    NoEvents,
    UndefinedOdds,
    ZeroReferenceRisk,
)

HALF = Fraction(1, 2)


class Protocol(enum.Enum):
    ITT = "ITT"
    AT = "AT"
    PP = "PP"


class Estimand(enum.Enum):
    CONDITIONAL = "conditional"
    INTERVENTIONAL = "interventional"


@dataclass(frozen=True)
class ProtocolSpec:
    protocol: Protocol
    treatment_level: str
    reference_level: str
    outcome_event: str

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.treatment_level == self.reference_level:
            raise ValueError("treatment_level and reference_level must differ")

    def stratum(self, level: str, prescribed: str = PRESCRIBED, received: str = RECEIVED) -> dict[str, str]:
        if self.protocol is Protocol.ITT:
            return {prescribed: level}
        if self.protocol is Protocol.AT:
            return {received: level}
        return {prescribed: level, received: level}

    def swapped(self) -> ProtocolSpec:
        return replace(self, treatment_level=self.reference_level, reference_level=self.treatment_level)


def round_half_even(value: Fraction, precision: int) -> Fraction:
    return Fraction(round(Fraction(value), precision))


def render(value: Fraction, precision: int = 2) -> str:
    """Fixed-point decimal string, rounded half-to-even."""
    scaled = round(Fraction(value) * 10**precision)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(precision + 1, "0")
    if precision == 0:
        return sign + digits
    return f"{sign}{digits[:-precision]}.{digits[-precision:]}"


@dataclass(frozen=True)
class EffectEstimate:
    """An exact estimate plus the evidence it was computed from.

    Cell lists hold ``(key, count)`` pairs.  For probabilities the key is a
    full table cell; for adjusted probabilities it is an adjustment stratum
    (``weight_cells`` then carries the stratum sizes); for hazard ratios it
    is ``(arm, period)`` with events as numerators and risk-set sizes as
    denominators.  Ratios keep their two arm-level probabilities in
    ``components``.
    """

    value: Fraction
    metric: str
    estimand: Estimand
    protocol: ProtocolSpec | None = None
    label: str = ""
    numerator_cells: tuple = ()
    denominator_cells: tuple = ()
    weight_cells: tuple = ()
    components: tuple = ()
    intermediate_precision: int | None = None
    correction: Fraction = Fraction(0)
    method: str | None = None
    details: Mapping = field(default_factory=dict)

    def render(self, precision: int = 2) -> str:
        return render(self.value, precision)

    def __float__(self):
        return float(self.value)

    def reproduce(self) -> Fraction:
        """Recompute the value from the recorded cells only."""
        if self.metric == "probability":
            num = sum((c for _, c in self.numerator_cells), 0)
            den = sum((c for _, c in self.denominator_cells), 0)
            return Fraction(num, den)
        if self.metric == "adjusted_probability":
            nums = dict(self.numerator_cells)
            dens = dict(self.denominator_cells)
            total = sum(c for _, c in self.weight_cells)
            acc = Fraction(0)
            for z, w in self.weight_cells:
                if w:
                    acc += Fraction(nums[z], dens[z]) * Fraction(w, total)
            return acc
        if self.metric in ("risk_ratio", "odds_ratio"):
            pa, pb = (self._arm_value(c) for c in self.components)
            return _risk_ratio(pa, pb) if self.metric == "risk_ratio" else _odds_ratio(pa, pb)
        if self.metric == "hazard_ratio":
            return _hazard_ratio_from_cells(self.numerator_cells, self.denominator_cells, self.method)
        raise ValueError(f"cannot reproduce metric {self.metric!r}")

    def _arm_value(self, comp: EffectEstimate) -> Fraction:
        if self.correction:
            num = sum(c for _, c in comp.numerator_cells)
            den = sum(c for _, c in comp.denominator_cells)
            p = (num + self.correction) / (den + 2 * self.correction)
        else:
            p = comp.reproduce()
        if self.intermediate_precision is not None:
            p = round_half_even(p, self.intermediate_precision)
        return p


def _label(protocol: ProtocolSpec, stratum: Mapping[str, str]) -> str:
    cond = ", ".join(f"{k}={v}" for k, v in stratum.items())
    return f"P({protocol.outcome_event} | {cond})"


def event_probability(
    t: ContingencyTable,
    protocol: ProtocolSpec,
    level: str | None = None,
    *,
    prescribed: str = PRESCRIBED,
    received: str = RECEIVED,
    outcome: str = OUTCOME,
) -> EffectEstimate:
    """P(outcome = event | protocol stratum of ``level``); ``level`` defaults to the treatment arm."""
    level = protocol.treatment_level if level is None else level
    stratum = protocol.stratum(level, prescribed, received)
    for name in (*stratum, outcome):
        t.axis(name)
    if protocol.outcome_event not in t.levels(outcome):
        raise DataError(f"{protocol.outcome_event!r} is not an outcome level")
    den_cells = tuple(t.cells(stratum))
    num_cells = tuple(t.cells({**stratum, outcome: protocol.outcome_event}))
    den = sum(c for _, c in den_cells)
    if den == 0:
        raise DegenerateStratum(stratum)
    num = sum(c for _, c in num_cells)
    return EffectEstimate(
        value=Fraction(num, den),
        metric="probability",
        estimand=Estimand.CONDITIONAL,
        protocol=protocol,
        label=_label(protocol, stratum),
        numerator_cells=num_cells,
        denominator_cells=den_cells,
    )


def _arm_pair(t, protocol, kw):
    pa = event_probability(t, protocol, protocol.treatment_level, **kw)
    pb = event_probability(t, protocol, protocol.reference_level, **kw)
    return pa, pb


def _risk_ratio(pa: Fraction, pb: Fraction) -> Fraction:
    if pb == 0:
        raise ZeroReferenceRisk("reference-arm event probability is 0; risk ratio undefined")
    return pa / pb


def _odds_ratio(pa: Fraction, pb: Fraction) -> Fraction:
    for p in (pa, pb):
        if p in (0, 1):
            raise UndefinedOdds(f"event probability {p} has no finite, non-zero odds")
    return (pa / (1 - pa)) / (pb / (1 - pb))


def risk_ratio(
    t: ContingencyTable,
    protocol: ProtocolSpec,
    intermediate_precision: int | None = None,
    **kw,
) -> EffectEstimate:
    """P(event | a) / P(event | b).

    ``intermediate_precision`` rounds both arm probabilities before dividing,
    which is how printed tables often derive their ratios.
    """
    pa, pb = _arm_pair(t, protocol, kw)
    est = EffectEstimate(
        value=Fraction(0),
        metric="risk_ratio",
        estimand=Estimand.CONDITIONAL,
        protocol=protocol,
        label=f"RR {protocol.protocol.value} {protocol.treatment_level} vs {protocol.reference_level}",
        components=(pa, pb),
        intermediate_precision=intermediate_precision,
    )
    return replace(est, value=est.reproduce())


def odds_ratio(
    t: ContingencyTable,
    protocol: ProtocolSpec,
    intermediate_precision: int | None = None,
    haldane: bool = False,
    **kw,
) -> EffectEstimate:
    """[p_a / (1 - p_a)] / [p_b / (1 - p_b)].

    ``haldane=True`` adds 1/2 to the event and non-event count of each arm
    (Haldane-Anscombe correction) before forming the odds.
    """
    pa, pb = _arm_pair(t, protocol, kw)
    est = EffectEstimate(
        value=Fraction(0),
        metric="odds_ratio",
        estimand=Estimand.CONDITIONAL,
        protocol=protocol,
        label=f"OR {protocol.protocol.value} {protocol.treatment_level} vs {protocol.reference_level}",
        components=(pa, pb),
        intermediate_precision=intermediate_precision,
        correction=HALF if haldane else Fraction(0),
    )
    return replace(est, value=est.reproduce())


def risk_ratio_bracketed(t: ContingencyTable, protocol: ProtocolSpec, **kw) -> Fraction:
    """Risk ratio evaluated term by term as P(e|a)/(P(e|a)+P(not e|a)) over the same for b.

    The non-event probability is counted directly, not taken as a complement,
    so agreement with :func:`risk_ratio` checks the algebraic reduction.
    """
    outcome = kw.get("outcome", OUTCOME)
    prescribed = kw.get("prescribed", PRESCRIBED)
    received = kw.get("received", RECEIVED)

    def bracket(level):
        stratum = protocol.stratum(level, prescribed, received)
        den = t.count(stratum)
        if den == 0:
            raise DegenerateStratum(stratum)
        p_event = Fraction(t.count({**stratum, outcome: protocol.outcome_event}), den)
        others = [y for y in t.levels(outcome) if y != protocol.outcome_event]
        p_other = sum((Fraction(t.count({**stratum, outcome: y}), den) for y in others), Fraction(0))
        return p_event / (p_event + p_other)

    b = bracket(protocol.reference_level)
    if b == 0:
        raise ZeroReferenceRisk("reference-arm event probability is 0; risk ratio undefined")
    return bracket(protocol.treatment_level) / b


# --- hazard ratio ---------------------------------------------------------

HR_METHODS = ("mantel-haenszel", "observed-expected")


def _hazard_ratio_from_cells(events_cells, risk_cells, method) -> Fraction:
    events = dict(events_cells)
    at_risk = dict(risk_cells)
    periods = sorted({t for (_, t) in events})
    arms = []
    for (arm, _t) in events:
        if arm not in arms:
            arms.append(arm)
    a, b = arms
    num = den = Fraction(0)
    obs_a = obs_b = 0
    exp_a = exp_b = Fraction(0)
    for t in periods:
        da, db = events[(a, t)], events[(b, t)]
        na, nb = at_risk[(a, t)], at_risk[(b, t)]
        n = na + nb
        if n == 0:
            if da or db:
                raise DataError(f"events recorded at period {t} with an empty risk set")
            continue
        num += Fraction(da * nb, n)
        den += Fraction(db * na, n)
        obs_a += da
        obs_b += db
        exp_a += Fraction(na * (da + db), n)
        exp_b += Fraction(nb * (da + db), n)
    if method == "mantel-haenszel":
        return num / den
    if method == "observed-expected":
        return (obs_a / exp_a) / (obs_b / exp_b)
    raise ValueError(f"unknown hazard ratio method {method!r}; choose from {HR_METHODS}")


def _arm_mask(d: TrialDataset, stratum: Mapping[str, str]) -> np.ndarray:
    mask = np.ones(d.n_rows, dtype=bool)
    for var, level in stratum.items():
        mask &= d.codes(var) == d.schema.levels(var).index(level)
    return mask


def hazard_ratio(
    d: TrialDataset,
    protocol: ProtocolSpec,
    time_horizon: int,
    method: str = "mantel-haenszel",
) -> EffectEstimate:
    """Discrete-time hazard ratio of the treatment arm against the reference arm.

    Each record exits at ``min(event_time, time_horizon)``; it is an event if
    its outcome is the event label and the event happened by the horizon,
    otherwise it is censored there.  Non-event records without a time are
    administratively censored at the horizon.  Records lost to follow-up with
    no recorded time carry no follow-up and are skipped.  Events occur before
    censorings in the same period.

    The default pooled Mantel-Haenszel estimator

        sum_t d_a(t) n_b(t) / n(t)   /   sum_t d_b(t) n_a(t) / n(t)

    is consistent for the common ratio under proportional discrete hazards.
    ``method="observed-expected"`` gives (O_a/E_a)/(O_b/E_b) with expected
    counts under the pooled hazard; it is attenuated towards 1 when the
    hazards differ by a large factor.
    """
    if method not in HR_METHODS:
        raise ValueError(f"unknown hazard ratio method {method!r}; choose from {HR_METHODS}")
    if time_horizon < 0:
        raise ValueError("time_horizon must be non-negative")
    s = d.schema
    if protocol.outcome_event not in s.outcome_labels:
        raise DataError(f"{protocol.outcome_event!r} is not an outcome level")
    event_code = s.outcome_labels.index(protocol.outcome_event)
    y = d.codes(OUTCOME)
    times = d.event_time
    w = d.weights
    is_event_label = y == event_code
    bad = is_event_label & (times < 0)
    if np.any(bad):
        raise DataError("event records need an event_time to estimate a hazard ratio")
    has_followup = (times >= 0) | (y >= 0)
    exit_time = np.where(times >= 0, np.minimum(times, time_horizon), time_horizon)
    event = is_event_label & (times <= time_horizon)

    events_cells, risk_cells = [], []
    per_arm = {}
    for level in (protocol.treatment_level, protocol.reference_level):
        stratum = protocol.stratum(level)
        rows = _arm_mask(d, stratum) & has_followup
        if not np.any(rows):
            raise DegenerateStratum(stratum)
        per_arm[level] = (exit_time[rows], event[rows], w[rows])
    event_periods = sorted(
        {int(t) for arm in per_arm.values() for t in arm[0][arm[1]]}
    )
    for level, (ex, ev, ww) in per_arm.items():
        if not np.any(ev):
            raise NoEvents(f"no events in arm {level} ({protocol.protocol.value}) by period {time_horizon}")
        for t in event_periods:
            events_cells.append(((level, t), int(ww[ev & (ex == t)].sum())))
            risk_cells.append(((level, t), int(ww[ex >= t].sum())))
    value = _hazard_ratio_from_cells(events_cells, risk_cells, method)
    return EffectEstimate(
        value=value,
        metric="hazard_ratio",
        estimand=Estimand.CONDITIONAL,
        protocol=protocol,
        label=f"HR {protocol.protocol.value} {protocol.treatment_level} vs {protocol.reference_level}",
        numerator_cells=tuple(events_cells),
        denominator_cells=tuple(risk_cells),
        method=method,
        details={"time_horizon": time_horizon},
    )
