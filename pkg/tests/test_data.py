from __future__ import annotations

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import conftest
from pctscm.data import (
    ContingencyTable,
    DatasetSchema,
    TrialRecord,
    complete_cases,
    dataset_to_csv,
    load_dataset,
    schema_sidecar,
    tabulate,
)
from pctscm.errors import DataError

FIX = conftest.FIXTURES
HEADER = "patient_id,x_prescribed,x_received,outcome,event_time,completed,Z\n"


def _load(text, schema=None):
    return load_dataset(io.StringIO(text), schema)


def test_reference_fixture_counts():
    d = load_dataset(FIX / "mccoy_table1.csv", DatasetSchema.load(schema_sidecar(FIX / "mccoy_table1.csv")))
    assert d.is_aggregate and d.n_rows == 6 and len(d) == 200
    t = tabulate(d, ["x_prescribed", "x_received", "outcome"])
    assert t.count(x_prescribed="A") == 100 and t.count(x_prescribed="B") == 100
    assert t.count(x_prescribed="A", x_received="B") == 15
    assert t.count(x_prescribed="A", x_received="B", outcome="death") == 15
    assert t.count(x_prescribed="A", x_received="A", outcome="death") == 15
    assert t.count(x_prescribed="B", x_received="B", outcome="death") == 30
    assert t.count(x_prescribed="B", x_received="A") == 0


def test_aggregate_expands_to_records():
    d = load_dataset(FIX / "mccoy_table1.csv")
    records = d.records
    assert len(records) == 200
    assert records[0].patient_id == "r1.1"
    assert len({r.patient_id for r in records}) == 200


def test_individual_round_trip():
    text = HEADER + "p1,A,A,death,3,1,lo\np2,B,,,,0,hi\np3,B,B,alive,12,1,lo\n"
    d = _load(text)
    assert d.schema.arm_labels == ("A", "B")
    assert d.schema.outcome_labels == ("death", "alive")
    assert d.records[1].x_received is None and d.records[1].outcome is None
    assert dataset_to_csv(d) == text
    assert _load(dataset_to_csv(d)) == d


def test_bytes_and_binary_stream():
    text = HEADER + "p1,A,A,death,3,1,lo\n"
    assert load_dataset(text.encode()) == _load(text)
    assert load_dataset(io.BytesIO(text.encode())) == _load(text)


@pytest.mark.parametrize(
    "body, line, fragment",
    [
        ("p1,A,A,death,3,1,lo\np1,B,B,death,3,1,lo\n", 3, "duplicate patient_id"),
        ("p1,,A,death,3,1,lo\n", 2, "x_prescribed"),
        ("p1,A,A,,,1,lo\n", 2, "outcome is missing"),
        ("p1,A,,death,,1,lo\n", 2, "x_received missing"),
        ("p1,A,A,death,-1,1,lo\n", 2, "event_time"),
        ("p1,A,A,death,3,2,lo\n", 2, "completed"),
        ("p1,A,A,death,3,1,\n", 2, "covariate Z"),
        ("p1,A,A,death,3,1\n", 2, "expected 7 fields"),
        ("p1,A,A,,3,0,lo\n", 2, "event_time present"),
    ],
)
def test_validation_errors_carry_line_numbers(body, line, fragment):
    with pytest.raises(DataError) as exc:
        _load(HEADER + body)
    assert exc.value.line == line
    assert fragment in str(exc.value)


def test_schema_rejects_undeclared_labels():
    schema = DatasetSchema(("A", "B"), ("death", "alive"), {"Z": ("lo", "hi")})
    with pytest.raises(DataError, match="undeclared arm label 'C'"):
        _load(HEADER + "p1,C,C,death,3,1,lo\n", schema)
    with pytest.raises(DataError, match="undeclared covariate column"):
        _load("patient_id,x_prescribed,x_received,outcome,event_time,completed,W\np1,A,A,death,,1,x\n", schema)


def test_missing_received_allowed_by_schema():
    schema = DatasetSchema(("A", "B"), ("death", "alive"), {"Z": ("lo", "hi")}, allow_missing_received=True)
    d = _load(HEADER + "p1,A,,death,,1,lo\n", schema)
    assert d.codes("x_received")[0] == -1


def test_header_errors():
    with pytest.raises(DataError, match="missing column"):
        _load("patient_id,x_prescribed\np1,A\n")
    with pytest.raises(DataError, match="count"):
        _load("x_prescribed,x_received,outcome,event_time,completed\nA,A,death,1,1\n")
    with pytest.raises(DataError, match="empty file"):
        _load("")


def test_schema_json_round_trip(tmp_path):
    s = DatasetSchema(("A", "B"), ("n", "y"), {"Z": ("0", "1")}, event="y", treatment="A", reference="B")
    s.dump(tmp_path / "s.json")
    assert DatasetSchema.load(tmp_path / "s.json") == s
    with pytest.raises(DataError):
        DatasetSchema.from_dict({**s.to_dict(), "colour": "red"})
    with pytest.raises(DataError):
        DatasetSchema(("A",), ("n",), event="y")


def test_record_invariants():
    with pytest.raises(DataError):
        TrialRecord("p", "A", "A", None, None, True)
    with pytest.raises(DataError):
        TrialRecord("p", "A", "A", None, 3, False)


def test_contingency_table_basics():
    t = ContingencyTable.from_cells(
        [("a", ("0", "1")), ("b", ("x", "y", "z"))], {("0", "x"): 2, ("1", "z"): 5, ("1", "x"): 1}
    )
    assert t.total == 8
    assert t.count(a="1") == 6
    assert t.marginal(["b"]).count(b="x") == 3
    assert t.transpose(["b", "a"]).count(a="0", b="x") == 2
    assert t.scaled(3).total == 24
    assert t.rename({"a": "A"}).names == ("A", "b")
    assert t.marginal([]).total == t.total


def test_tabulate_on_empty_variables():
    d = load_dataset(FIX / "mccoy_table1.csv")
    t = tabulate(d, [])
    assert t.total == 200


def test_tabulate_refuses_missing_values():
    d = _load(HEADER + "p1,A,A,death,3,1,lo\np2,B,,,,0,hi\n")
    with pytest.raises(DataError):
        tabulate(d, ["outcome"])
    assert tabulate(complete_cases(d), ["outcome"]).total == 1


rows = st.lists(
    st.tuples(st.sampled_from("AB"), st.sampled_from("AB"), st.sampled_from(["y", "n"]), st.sampled_from(["0", "1"]), st.booleans()),
    min_size=1,
    max_size=40,
)


def _dataset(rs):
    text = HEADER + "".join(
        f"p{i},{x},{'' if not done else xr},{'' if not done else y},,{int(done)},{z}\n" for i, (x, xr, y, z, done) in enumerate(rs)
    )
    schema = DatasetSchema(("A", "B"), ("y", "n"), {"Z": ("0", "1")})
    return _load(text, schema)


@settings(max_examples=100, deadline=None)
@given(rows, st.randoms())
def test_tabulate_is_row_order_invariant(rs, rnd):
    d = complete_cases(_dataset(rs))
    shuffled = list(rs)
    rnd.shuffle(shuffled)
    e = complete_cases(_dataset(shuffled))
    cols = ["x_prescribed", "x_received", "outcome", "Z"]
    assert tabulate(d, cols) == tabulate(e, cols)


@settings(max_examples=100, deadline=None)
@given(rows)
def test_tabulate_marginals_agree(rs):
    d = complete_cases(_dataset(rs))
    full = tabulate(d, ["x_prescribed", "x_received", "outcome", "Z"])
    assert full.marginal(["outcome", "Z"]) == tabulate(d, ["outcome", "Z"])
    assert full.total == len(d)


@settings(max_examples=100, deadline=None)
@given(rows)
def test_complete_cases_idempotent(rs):
    d = _dataset(rs)
    once = complete_cases(d)
    assert complete_cases(once) == once
    assert all(r.completed for r in once)


@settings(max_examples=50, deadline=None)
@given(rows)
def test_csv_round_trip(rs):
    d = _dataset(rs)
    assert _load(dataset_to_csv(d), d.schema) == d
