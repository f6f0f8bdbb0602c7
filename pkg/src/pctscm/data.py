"""Patient-level trial data: schema, CSV ingestion, censoring filter, tabulation.

Datasets are stored column-wise as integer level codes (``-1`` marks a
missing value) with a per-row multiplicity, so the aggregated ``count`` CSV
form and million-row simulations are tabulated without building one Python
object per patient.  :attr:`TrialDataset.records` expands rows on demand.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

import numpy as np

from .errors import DataError

PRESCRIBED = "x_prescribed"
RECEIVED = "x_received"
OUTCOME = "outcome"
EVENT_TIME = "event_time"
COMPLETED = "completed"
PATIENT_ID = "patient_id"
COUNT = "count"

BASE_COLUMNS = (PATIENT_ID, PRESCRIBED, RECEIVED, OUTCOME, EVENT_TIME, COMPLETED)
COMPLETED_LEVELS = ("0", "1")
MISSING = None


@dataclass(frozen=True)
class TrialRecord:
    patient_id: str
    x_prescribed: str
    x_received: str | None
    outcome: str | None
    event_time: int | None
    completed: bool
    covariates: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.completed and self.outcome is MISSING:
            raise DataError(f"patient {self.patient_id}: completed record without an outcome")
        if self.event_time is not None:
            if self.outcome is MISSING:
                raise DataError(f"patient {self.patient_id}: event_time given without an outcome")
            if self.event_time < 0:
                raise DataError(f"patient {self.patient_id}: negative event_time")


@dataclass(frozen=True)
class DatasetSchema:
    """Declared label sets, plus optional analysis defaults.

    ``event``, ``treatment`` and ``reference`` are not validation rules; they
    let command-line tools pick the outcome event and the arms to compare
    without extra flags.
    """

    arm_labels: tuple[str, ...]
    outcome_labels: tuple[str, ...]
    covariates: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    allow_missing_received: bool = False
    event: str | None = None
    treatment: str | None = None
    reference: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "arm_labels", tuple(self.arm_labels))
        object.__setattr__(self, "outcome_labels", tuple(self.outcome_labels))
        object.__setattr__(
            self, "covariates", MappingProxyType({k: tuple(v) for k, v in self.covariates.items()})
        )
        for name, labels in [("arm", self.arm_labels), ("outcome", self.outcome_labels)] + [
            (f"covariate {k}", v) for k, v in self.covariates.items()
        ]:
            if len(set(labels)) != len(labels) or "" in labels:
                raise DataError(f"{name} labels must be distinct and non-empty: {list(labels)}")
        for col in self.covariates:
            if col in BASE_COLUMNS or col == COUNT:
                raise DataError(f"covariate name {col!r} collides with a reserved column")
        if self.event is not None and self.event not in self.outcome_labels:
            raise DataError(f"event label {self.event!r} is not a declared outcome")
        for arm in (self.treatment, self.reference):
            if arm is not None and arm not in self.arm_labels:
                raise DataError(f"arm {arm!r} is not a declared arm label")

    def levels(self, variable: str) -> tuple[str, ...]:
        if variable in (PRESCRIBED, RECEIVED):
            return self.arm_labels
        if variable == OUTCOME:
            return self.outcome_labels
        if variable == COMPLETED:
            return COMPLETED_LEVELS
        if variable in self.covariates:
            return self.covariates[variable]
        raise DataError(f"unknown variable {variable!r}")

    @property
    def variables(self) -> tuple[str, ...]:
        return (PRESCRIBED, RECEIVED, OUTCOME, COMPLETED, *self.covariates)

    def to_dict(self) -> dict:
        doc = {
            "arm_labels": list(self.arm_labels),
            "outcome_labels": list(self.outcome_labels),
            "covariates": {k: list(v) for k, v in self.covariates.items()},
        }
        if self.allow_missing_received:
            doc["allow_missing_received"] = True
        for key in ("event", "treatment", "reference"):
            if getattr(self, key) is not None:
                doc[key] = getattr(self, key)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> DatasetSchema:
        known = {"arm_labels", "outcome_labels", "covariates", "allow_missing_received", "event", "treatment", "reference"}
        extra = set(doc) - known
        if extra:
            raise DataError("unknown schema field(s): " + ", ".join(sorted(extra)))
        try:
            return cls(
                arm_labels=doc["arm_labels"],
                outcome_labels=doc["outcome_labels"],
                covariates=doc.get("covariates", {}),
                allow_missing_received=bool(doc.get("allow_missing_received", False)),
                event=doc.get("event"),
                treatment=doc.get("treatment"),
                reference=doc.get("reference"),
            )
        except KeyError as exc:
            raise DataError(f"schema is missing field {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path) -> DatasetSchema:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def schema_sidecar(data_path) -> Path:
    """``trial.csv`` -> ``trial.schema.json``."""
    p = Path(data_path)
    return p.with_name(p.stem + ".schema.json")


class TrialDataset:
    """Immutable, validated trial data.

    Construct with :func:`load_dataset` or :meth:`from_records`; the raw
    constructor takes already-validated code arrays.
    """

    def __init__(self, schema, codes, event_time, completed, weights=None, patient_ids=None):
        n_rows = len(completed)
        self.schema = schema
        self._codes = {k: _frozen(np.asarray(v, dtype=np.int64)) for k, v in codes.items()}
        self._event_time = _frozen(np.asarray(event_time, dtype=np.int64))
        self._completed = _frozen(np.asarray(completed, dtype=bool))
        if weights is None:
            weights = np.ones(n_rows, dtype=np.int64)
        self._weights = _frozen(np.asarray(weights, dtype=np.int64))
        self._ids = None if patient_ids is None else tuple(patient_ids)
        expected = set((PRESCRIBED, RECEIVED, OUTCOME, *schema.covariates))
        if set(self._codes) != expected:
            raise DataError("code columns do not match the schema")
        for arr in (*self._codes.values(), self._event_time, self._weights):
            if len(arr) != n_rows:
                raise DataError("column lengths differ")
        if self._ids is not None and len(self._ids) != n_rows:
            raise DataError("patient id count differs from row count")

    # -- construction ------------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord], schema: DatasetSchema) -> TrialDataset:
        records = list(records)
        builder = _Builder(schema, individual=True)
        for i, r in enumerate(records, start=1):
            builder.add(
                i,
                r.patient_id,
                r.x_prescribed,
                r.x_received,
                r.outcome,
                r.event_time,
                r.completed,
                r.covariates,
            )
        return builder.build()

    # -- size and access ---------------------------------------------------

    @property
    def n_rows(self) -> int:
        """Stored rows (aggregate rows count once)."""
        return len(self._completed)

    def __len__(self) -> int:
        return int(self._weights.sum())

    @property
    def arm_labels(self):
        return self.schema.arm_labels

    @property
    def outcome_labels(self):
        return self.schema.outcome_labels

    @property
    def covariate_schema(self):
        return self.schema.covariates

    @property
    def is_aggregate(self) -> bool:
        return self._ids is None

    def codes(self, variable: str) -> np.ndarray:
        """Per-row level codes (``-1`` = missing) for a tabulable variable."""
        if variable == COMPLETED:
            return self._completed.astype(np.int64)
        if variable not in self._codes:
            raise DataError(f"unknown variable {variable!r}")
        return self._codes[variable]

    @property
    def event_time(self) -> np.ndarray:
        return self._event_time

    @property
    def completed(self) -> np.ndarray:
        return self._completed

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def iter_records(self):
        s = self.schema
        cov_names = list(s.covariates)
        for row in range(self.n_rows):
            def lab(col, levels):
                c = self._codes[col][row]
                return None if c < 0 else levels[c]

            base = dict(
                x_prescribed=lab(PRESCRIBED, s.arm_labels),
                x_received=lab(RECEIVED, s.arm_labels),
                outcome=lab(OUTCOME, s.outcome_labels),
                event_time=None if self._event_time[row] < 0 else int(self._event_time[row]),
                completed=bool(self._completed[row]),
                covariates=MappingProxyType({c: lab(c, s.covariates[c]) for c in cov_names}),
            )
            w = int(self._weights[row])
            if self._ids is not None:
                yield TrialRecord(patient_id=self._ids[row], **base)
            else:
                for k in range(1, w + 1):
                    yield TrialRecord(patient_id=f"r{row + 1}.{k}", **base)

    @property
    def records(self) -> tuple[TrialRecord, ...]:
        return tuple(self.iter_records())

    def __iter__(self):
        return self.iter_records()

    def __eq__(self, other):
        if not isinstance(other, TrialDataset):
            return NotImplemented
        return self.schema == other.schema and self.records == other.records

    def select(self, mask) -> TrialDataset:
        """Rows where ``mask`` is true, order preserved."""
        mask = np.asarray(mask, dtype=bool)
        return TrialDataset(
            self.schema,
            {k: v[mask] for k, v in self._codes.items()},
            self._event_time[mask],
            self._completed[mask],
            self._weights[mask],
            None if self._ids is None else [i for i, keep in zip(self._ids, mask) if keep],
        )

    def with_schema(self, schema: DatasetSchema) -> TrialDataset:
        """Same rows under a schema with identical label sets (analysis defaults may differ)."""
        old = self.schema
        if (schema.arm_labels, schema.outcome_labels, dict(schema.covariates)) != (
            old.arm_labels,
            old.outcome_labels,
            dict(old.covariates),
        ):
            raise DataError("with_schema requires identical label sets")
        return TrialDataset(schema, self._codes, self._event_time, self._completed, self._weights, self._ids)


def _frozen(arr):
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


class _Builder:
    """Row-at-a-time validation into code arrays."""

    def __init__(self, schema: DatasetSchema | None, individual: bool):
        self.schema = schema
        self.individual = individual
        self.ids: list[str] = []
        self.seen_ids: set[str] = set()
        self.cols: dict[str, list[int]] = {PRESCRIBED: [], RECEIVED: [], OUTCOME: [], EVENT_TIME: []}
        self.completed: list[bool] = []
        self.weights: list[int] = []
        if schema is not None:
            self.index = {
                PRESCRIBED: {v: i for i, v in enumerate(schema.arm_labels)},
                OUTCOME: {v: i for i, v in enumerate(schema.outcome_labels)},
            }
            self.index[RECEIVED] = self.index[PRESCRIBED]
            for c, levels in schema.covariates.items():
                self.index[c] = {v: i for i, v in enumerate(levels)}
                self.cols[c] = []
        else:
            arms: dict[str, int] = {}
            self.index = {PRESCRIBED: arms, RECEIVED: arms, OUTCOME: {}}

    def declare_covariates(self, names):
        if self.schema is None:
            for c in names:
                self.index[c] = {}
                self.cols[c] = []

    def _code(self, col, value, line, what):
        table = self.index[col]
        code = table.get(value)
        if code is None:
            if self.schema is not None:
                raise DataError(f"undeclared {what} label {value!r} in column {col}", line)
            code = table[value] = len(table)
        return code

    def add(self, line, pid, x, xr, y, t, completed, covariates, weight=1):
        if self.individual:
            if not pid:
                raise DataError("empty patient_id", line)
            if pid in self.seen_ids:
                raise DataError(f"duplicate patient_id {pid!r}", line)
            self.seen_ids.add(pid)
            self.ids.append(pid)
        if not x:
            raise DataError("x_prescribed is required", line)
        self.cols[PRESCRIBED].append(self._code(PRESCRIBED, x, line, "arm"))
        if xr is MISSING:
            allowed = not completed or (self.schema is not None and self.schema.allow_missing_received)
            if not allowed:
                raise DataError("x_received missing for a completed record", line)
            self.cols[RECEIVED].append(-1)
        else:
            self.cols[RECEIVED].append(self._code(RECEIVED, xr, line, "arm"))
        if y is MISSING:
            if completed:
                raise DataError("completed=1 but outcome is missing", line)
            self.cols[OUTCOME].append(-1)
        else:
            self.cols[OUTCOME].append(self._code(OUTCOME, y, line, "outcome"))
        if t is None:
            self.cols[EVENT_TIME].append(-1)
        else:
            if y is MISSING:
                raise DataError("event_time present but outcome missing", line)
            if t < 0:
                raise DataError(f"negative event_time {t}", line)
            self.cols[EVENT_TIME].append(t)
        self.completed.append(bool(completed))
        for c in self.cols:
            if c in (PRESCRIBED, RECEIVED, OUTCOME, EVENT_TIME):
                continue
            v = covariates.get(c, "")
            if v is None or v == "":
                raise DataError(f"covariate {c} is missing", line)
            self.cols[c].append(self._code(c, v, line, f"covariate {c}"))
        extra = set(covariates) - set(self.cols)
        if extra:
            raise DataError("undeclared covariate(s): " + ", ".join(sorted(extra)), line)
        self.weights.append(weight)

    def build(self) -> TrialDataset:
        schema = self.schema
        if schema is None:
            schema = DatasetSchema(
                arm_labels=tuple(self.index[PRESCRIBED]),
                outcome_labels=tuple(self.index[OUTCOME]),
                covariates={c: tuple(self.index[c]) for c in self.cols if c not in (PRESCRIBED, RECEIVED, OUTCOME, EVENT_TIME)},
            )
        codes = {c: np.array(v, dtype=np.int64) for c, v in self.cols.items() if c != EVENT_TIME}
        return TrialDataset(
            schema,
            codes,
            np.array(self.cols[EVENT_TIME], dtype=np.int64),
            np.array(self.completed, dtype=bool),
            np.array(self.weights, dtype=np.int64),
            self.ids if self.individual else None,
        )


def _parse_int(text, line, column, minimum):
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"{column} must be an integer, got {text!r}", line) from None
    if value < minimum or text.strip() != text:
        raise DataError(f"{column} must be an integer >= {minimum}, got {text!r}", line)
    return value


def load_dataset(source, schema: DatasetSchema | None = None) -> TrialDataset:
    """Parse and validate trial CSV.

    ``source`` is a path, a text stream or a binary stream (decoded as UTF-8).
    Both the per-patient form and the aggregate form (no ``patient_id``,
    trailing ``count`` column) are accepted.  Without ``schema`` the label
    sets are inferred in order of first appearance.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return _load_text(fh, schema)
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if isinstance(source.read(0), bytes):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")
    return _load_text(source, schema)


def _load_text(fh, schema):
    reader = csv.reader(fh, strict=True)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file: a header row is required", 1) from None
    except csv.Error as exc:
        raise DataError(f"malformed CSV: {exc}", 1) from None
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header", 1)
    aggregate = PATIENT_ID not in header
    required = [c for c in BASE_COLUMNS if not (aggregate and c == PATIENT_ID)]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError("missing column(s): " + ", ".join(missing), 1)
    if aggregate:
        if header[-1] != COUNT:
            raise DataError("aggregate CSV (no patient_id) needs a trailing 'count' column", 1)
    elif COUNT in header:
        raise DataError("'count' column is only valid in the aggregate form (without patient_id)", 1)
    pos = {c: header.index(c) for c in header}
    covariate_cols = [c for c in header if c not in BASE_COLUMNS and c != COUNT]
    if schema is not None:
        undeclared = [c for c in covariate_cols if c not in schema.covariates]
        if undeclared:
            raise DataError("undeclared covariate column(s): " + ", ".join(undeclared), 1)
        absent = [c for c in schema.covariates if c not in covariate_cols]
        if absent:
            raise DataError("declared covariate column(s) absent: " + ", ".join(absent), 1)
    builder = _Builder(schema, individual=not aggregate)
    builder.declare_covariates(covariate_cols)
    width = len(header)
    i_pid = pos.get(PATIENT_ID)
    i_x, i_xr, i_y, i_t, i_c = (pos[c] for c in (PRESCRIBED, RECEIVED, OUTCOME, EVENT_TIME, COMPLETED))
    i_cov = [(c, pos[c]) for c in covariate_cols]
    i_n = pos.get(COUNT)
    line = 1
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            raise DataError(f"malformed CSV: {exc}", reader.line_num) from None
        line = reader.line_num
        if not row:
            continue
        if len(row) != width:
            raise DataError(f"malformed CSV: expected {width} fields, got {len(row)}", line)
        flag = row[i_c]
        if flag not in COMPLETED_LEVELS:
            raise DataError(f"completed must be 0 or 1, got {flag!r}", line)
        t = row[i_t]
        weight = 1
        if aggregate:
            weight = _parse_int(row[i_n], line, COUNT, 1)
        builder.add(
            line,
            row[i_pid] if i_pid is not None else None,
            row[i_x],
            row[i_xr] or MISSING,
            row[i_y] or MISSING,
            None if t == "" else _parse_int(t, line, EVENT_TIME, 0),
            flag == "1",
            {c: row[j] for c, j in i_cov},
            weight,
        )
    return builder.build()


def write_dataset(d: TrialDataset, target) -> None:
    """Write the per-patient CSV form (aggregate rows are expanded)."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_dataset(d, fh)
            return
    s = d.schema
    covs = list(s.covariates)
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow([*BASE_COLUMNS, *covs])
    arms, outs = s.arm_labels, s.outcome_labels
    code_cols = [d.codes(c) for c in (PRESCRIBED, RECEIVED, OUTCOME)]
    cov_cols = [(d.codes(c), s.covariates[c]) for c in covs]
    times, done, weights = d.event_time, d.completed, d.weights
    for row in range(d.n_rows):
        x, xr, y = (int(col[row]) for col in code_cols)
        fields = [
            arms[x],
            "" if xr < 0 else arms[xr],
            "" if y < 0 else outs[y],
            "" if times[row] < 0 else str(int(times[row])),
            "1" if done[row] else "0",
            *(levels[int(col[row])] for col, levels in cov_cols),
        ]
        if d.is_aggregate:
            for k in range(1, int(weights[row]) + 1):
                writer.writerow([f"r{row + 1}.{k}", *fields])
        else:
            writer.writerow([d._ids[row], *fields])


def dataset_to_csv(d: TrialDataset) -> str:
    buf = io.StringIO()
    write_dataset(d, buf)
    return buf.getvalue()


def complete_cases(d: TrialDataset) -> TrialDataset:
    return d.select(d.completed)


# --- Contingency tables ---------------------------------------------------


class ContingencyTable:
    """Dense integer counts over a product of named categorical dimensions.

    ``counts`` is an object array of Python ints so population tables with
    very large exact counts never overflow.
    """

    __slots__ = ("dims", "counts")

    def __init__(self, dims: Sequence[tuple[str, Sequence[str]]], counts):
        dims = tuple((str(n), tuple(levels)) for n, levels in dims)
        names = [n for n, _ in dims]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate table dimensions: {names}")
        arr = np.empty(tuple(len(levels) for _, levels in dims), dtype=object)
        src = np.asarray(counts, dtype=object)
        if src.shape != arr.shape:
            raise DataError(f"counts shape {src.shape} does not match dims {arr.shape}")
        flat = src.reshape(-1)
        out = arr.reshape(-1)
        for i, v in enumerate(flat):
            iv = int(v)
            if iv != v or iv < 0:
                raise DataError(f"counts must be non-negative integers, got {v!r}")
            out[i] = iv
        arr.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "counts", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ContingencyTable is immutable")

    @classmethod
    def from_cells(cls, dims, cells: Mapping[tuple[str, ...], int]) -> ContingencyTable:
        dims = tuple((n, tuple(levels)) for n, levels in dims)
        arr = np.zeros(tuple(len(l) for _, l in dims), dtype=object)
        arr[...] = 0
        lookup = [{lev: i for i, lev in enumerate(levels)} for _, levels in dims]
        for key, n in cells.items():
            arr[tuple(lookup[d][k] for d, k in enumerate(key))] += n
        return cls(dims, arr)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.dims)

    def levels(self, name: str) -> tuple[str, ...]:
        return self.dims[self.axis(name)][1]

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"table has no dimension {name!r}; dims are {list(self.names)}") from None

    @property
    def total(self) -> int:
        return int(np.sum(self.counts)) if self.counts.size else 0

    def count(self, assignment: Mapping[str, str] | None = None, **kw) -> int:
        """Sum of cells matching a partial assignment of levels."""
        fixed = dict(assignment or {}, **kw)
        idx: list = [slice(None)] * len(self.dims)
        for name, level in fixed.items():
            ax = self.axis(name)
            try:
                idx[ax] = self.dims[ax][1].index(level)
            except ValueError:
                raise DataError(f"{level!r} is not a level of {name}") from None
        sub = self.counts[tuple(idx)]
        if isinstance(sub, np.ndarray):
            return int(np.sum(sub)) if sub.size else 0
        return int(sub)

    def cells(self, assignment: Mapping[str, str] | None = None):
        """Yield ``(level tuple, count)`` in row-major order, optionally filtered."""
        fixed = dict(assignment or {})
        for key in itertools.product(*(levels for _, levels in self.dims)):
            if all(key[self.axis(n)] == v for n, v in fixed.items()):
                idx = tuple(levels.index(k) for (_, levels), k in zip(self.dims, key))
                yield key, int(self.counts[idx])

    def marginal(self, names: Sequence[str]) -> ContingencyTable:
        axes = [self.axis(n) for n in names]
        drop = tuple(a for a in range(len(self.dims)) if a not in axes)
        summed = np.sum(self.counts, axis=drop) if drop else self.counts
        kept = [a for a in range(len(self.dims)) if a in axes]
        arr = np.asarray(summed, dtype=object).reshape(tuple(len(self.dims[a][1]) for a in kept))
        order = [kept.index(a) for a in axes]
        return ContingencyTable([self.dims[a] for a in axes], np.transpose(arr, order))

    def transpose(self, names: Sequence[str]) -> ContingencyTable:
        if sorted(names) != sorted(self.names):
            raise DataError("transpose needs a permutation of the table dimensions")
        return self.marginal(names)

    def rename(self, mapping: Mapping[str, str]) -> ContingencyTable:
        return ContingencyTable([(mapping.get(n, n), l) for n, l in self.dims], self.counts)

    def scaled(self, k: int) -> ContingencyTable:
        return ContingencyTable(self.dims, self.counts * k)

    def __eq__(self, other):
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return self.dims == other.dims and bool(np.all(self.counts == other.counts))

    def __repr__(self):
        return f"ContingencyTable(dims={[n for n, _ in self.dims]}, total={self.total})"


def tabulate(d: TrialDataset, variables: Sequence[str]) -> ContingencyTable:
    variables = list(variables)
    if len(set(variables)) != len(variables):
        raise DataError(f"repeated variable in {variables}")
    dims = [(v, d.schema.levels(v)) for v in variables]
    shape = tuple(len(l) for _, l in dims)
    weights = d.weights
    if not variables:
        return ContingencyTable([], np.array(int(weights.sum()), dtype=object))
    cols = []
    for v in variables:
        c = d.codes(v)
        if np.any(c < 0):
            raise DataError(f"missing values in {v}; filter rows (e.g. complete_cases) before tabulating")
        cols.append(c)
    flat = np.ravel_multi_index(cols, shape) if len(cols) else np.zeros(0, dtype=np.int64)
    size = int(np.prod(shape))
    if np.all(weights == 1):
        acc = np.bincount(flat, minlength=size)
    else:
        acc = np.zeros(size, dtype=np.int64)
        np.add.at(acc, flat, weights)
    return ContingencyTable(dims, acc.astype(object).reshape(shape))
