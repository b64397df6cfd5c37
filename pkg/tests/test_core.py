from __future__ import annotations

import math

import numpy as np
import pytest

from factorial_iv.core import (
    AssumedInterval,
    Assumption,
    CellMoments,
    CellTable,
    Dataset,
    Observation,
    build_cell_table,
    check_one_sided,
    ingest,
    parse_cell_key,
    read_csv,
    weighted_term,
)
from factorial_iv.errors import IdentificationError, SchemaError, ValidationError


def _rows(*rows):
    keys = ("y", "d_a", "d_b", "z_a", "z_b")
    return [dict(zip(keys, r)) for r in rows]


# ---------------------------------------------------------------- intervals


def test_interval_rejects_reversed_and_nan():
    with pytest.raises(ValueError):
        AssumedInterval(2.0, 1.0)
    with pytest.raises(ValueError):
        AssumedInterval(math.nan, 1.0)


def test_interval_clip_records_k_and_stays_inside():
    iv = AssumedInterval(-5.0, 120.0, {Assumption.BOUNDED_OUTCOMES}).clip(100.0)
    assert (iv.lo, iv.hi, iv.clipped, iv.k) == (0.0, 100.0, True, 100.0)
    assert Assumption.BOUNDED_OUTCOMES in iv.assumptions


def test_clipped_interval_must_lie_in_range():
    with pytest.raises(ValueError):
        AssumedInterval(-1.0, 3.0, clipped=True, k=10.0)
    with pytest.raises(ValueError):
        AssumedInterval(0.0, 3.0, clipped=True)


def test_interval_arithmetic():
    a = AssumedInterval(1.0, 2.0, {Assumption.Y11_GE_Y00})
    b = AssumedInterval(-1.0, 4.0, {Assumption.BOUNDED_OUTCOMES})
    s = a + b
    assert (s.lo, s.hi) == (0.0, 6.0)
    assert s.assumptions == {Assumption.Y11_GE_Y00, Assumption.BOUNDED_OUTCOMES}
    neg = a.scale(-2.0)
    assert (neg.lo, neg.hi) == (-4.0, -2.0)
    assert (a.shift(3.0).lo, a.shift(3.0).hi) == (4.0, 5.0)
    assert (a.hull(b).lo, a.hull(b).hi) == (-1.0, 4.0)
    cut = a.intersect(b)
    assert (cut.lo, cut.hi) == (1.0, 2.0)


def test_intersect_disjoint_raises_but_tolerates_rounding():
    with pytest.raises(ValueError):
        AssumedInterval(0.0, 1.0).intersect(AssumedInterval(2.0, 3.0))
    touch = AssumedInterval(0.0, 1.0).intersect(AssumedInterval(1.0 + 1e-14, 2.0))
    assert touch.lo == touch.hi == pytest.approx(1.0)


def test_interval_contains_with_relative_tolerance():
    iv = AssumedInterval(0.0, 1.0)
    assert iv.contains(1.0 + 1e-12)
    assert not iv.contains(1.001)


def test_interval_endpoints_are_python_floats():
    iv = AssumedInterval(np.float64(1.0), np.float64(2.0))
    assert type(iv.lo) is float and type(iv.hi) is float


def test_interval_as_dict_is_sorted_and_serializable():
    d = AssumedInterval(0.0, 1.0, {Assumption.Y11_GE_MAX, Assumption.BOUNDED_OUTCOMES}).as_dict()
    assert d["assumptions"] == ["BOUNDED_OUTCOMES", "Y11_GE_MAX"]


# ---------------------------------------------------------------- ingestion


def test_ingest_drops_missing_outcomes_and_counts_them():
    data = ingest(_rows((1.0, 0, 0, 0, 0), ("", 1, 0, 1, 0), ("NA", 0, 0, 0, 0), (2.0, 1, 1, 1, 1)))
    assert len(data) == 2
    assert data.n_dropped == 2


def test_ingest_rejects_missing_treatment_with_location():
    with pytest.raises(SchemaError) as exc:
        ingest(_rows((1.0, 0, 0, 0, 0), (1.0, "", 0, 0, 0)))
    assert exc.value.row == 2 and exc.value.column == "d_a"


def test_ingest_rejects_non_binary_values():
    with pytest.raises(SchemaError) as exc:
        ingest(_rows((1.0, 2, 0, 0, 0)))
    assert exc.value.column == "d_a"
    with pytest.raises(SchemaError):
        ingest(_rows((1.0, "yes", 0, 0, 0)))
    assert ingest(_rows((1.0, "yes", "no", "1", "0")), lenient=True).d_a[0] == 1


def test_ingest_rejects_absent_column_and_empty_input():
    with pytest.raises(SchemaError):
        ingest([{"y": 1, "d_a": 0, "d_b": 0, "z_a": 0}])
    with pytest.raises(ValidationError):
        ingest([])
    with pytest.raises(ValidationError):
        ingest(_rows(("", 0, 0, 0, 0)))


def test_ingest_column_remapping_and_weights():
    recs = [{"gpa": 3, "tut": 1, "inc": 0, "za": 1, "zb": 0, "w": "2.5"}]
    schema = {"y": "gpa", "d_a": "tut", "d_b": "inc", "z_a": "za", "z_b": "zb", "weight": "w"}
    data = ingest(recs, schema=schema)
    assert data.y[0] == 3.0 and data.d_a[0] == 1 and data.weight[0] == 2.5


def test_ingest_rejects_negative_weight():
    with pytest.raises(SchemaError):
        ingest([{"y": 1, "d_a": 0, "d_b": 0, "z_a": 0, "z_b": 0, "weight": -1}])


def test_dataset_validates_before_casting():
    with pytest.raises(SchemaError):
        Dataset(y=[1.0], d_a=[0.5], d_b=[0], z_a=[0], z_b=[0], weight=[1.0])
    with pytest.raises(ValidationError):
        Dataset(y=[1.0, 2.0], d_a=[0], d_b=[0], z_a=[0], z_b=[0], weight=[1.0])


def test_observation_validation():
    with pytest.raises(SchemaError):
        Observation(1.0, 2, 0, 0, 0)
    with pytest.raises(SchemaError):
        Observation(math.inf, 0, 0, 0, 0)


def test_csv_round_trip(tmp_path):
    data = ingest(_rows((1.5, 0, 0, 0, 0), (2.25, 1, 1, 1, 1), (0.0, 0, 1, 0, 1)))
    path = tmp_path / "d.csv"
    data.write_csv(path)
    back = read_csv(path)
    np.testing.assert_array_equal(back.y, data.y)
    np.testing.assert_array_equal(back.d_b, data.d_b)
    assert list(back) == list(data)


# ---------------------------------------------------------------- cell tables


def test_cell_table_from_data():
    data = ingest(_rows(
        (1.0, 0, 0, 0, 0), (3.0, 0, 0, 0, 0),
        (5.0, 1, 0, 1, 0), (1.0, 0, 0, 1, 0),
        (2.0, 0, 1, 0, 1),
        (4.0, 1, 1, 1, 1), (6.0, 1, 1, 1, 1), (0.0, 0, 0, 1, 1),
    ))
    t = build_cell_table(data)
    t.check_invariants()
    assert t.n(0, 0) == 2 and t.y(0, 0) == 2.0
    assert t.d_a(1, 0) == 0.5 and t.prob(1, 0, 1, 0) == 0.5
    assert t.mean(1, 1, 1, 1) == 5.0
    assert t.mean(0, 0, 1, 1) is None
    assert t.d_ab(1, 1) == pytest.approx(2 / 3)


def test_weights_act_as_frequency_weights():
    rows = _rows((1.0, 0, 0, 0, 0), (3.0, 0, 0, 0, 0))
    rows[1]["weight"] = 3
    t = build_cell_table(ingest(rows))
    assert t.y(0, 0) == pytest.approx(2.5)
    assert t.n(0, 0) == 4


def test_cell_table_empty_cell_is_nan():
    t = build_cell_table(ingest(_rows((1.0, 0, 0, 0, 0))))
    assert not t.nonempty(1, 1)
    assert math.isnan(t.prob(1, 1, 0, 0))


def test_from_moments_checks_probabilities():
    good = {(0, 0): CellMoments(10, {(0, 0): 1.0}, {(0, 0): 5.0})}
    assert CellTable.from_moments(good).y(0, 0) == 5.0
    with pytest.raises(ValidationError):
        CellTable.from_moments({(0, 0): CellMoments(10, {(0, 0): 0.9}, {(0, 0): 5.0})})
    with pytest.raises(ValidationError):
        CellTable.from_moments({(0, 0): CellMoments(10, {(0, 1): 1.0}, {})})
    with pytest.raises(ValidationError):
        CellTable.from_moments({(0, 0): CellMoments(10, {(0, 0): 0.5, (1, 0): 0.5}, {(0, 0): 1, (1, 0): 2}, d_a_mean=0.9)})


def test_one_sided_report():
    data = ingest(_rows((1.0, 1, 0, 0, 0), (1.0, 0, 0, 0, 0), (1.0, 0, 1, 1, 0), (1.0, 0, 0, 1, 1)))
    rep = check_one_sided(build_cell_table(data))
    assert not rep.passed
    assert rep.violation_a == 1.0 and rep.violation_b == 1.0
    assert set(rep.cells) == {"z00/d10", "z10/d01"}


def test_weighted_term_zero_weight_kills_undefined_mean():
    assert weighted_term(None, 0.0) == 0.0
    assert weighted_term(2.0, 0.5) == 1.0
    with pytest.raises(IdentificationError):
        weighted_term(None, 0.1, "m")


def test_parse_cell_key():
    assert parse_cell_key("z10", "z") == (1, 0)
    with pytest.raises(ValidationError):
        parse_cell_key("z2", "z")
