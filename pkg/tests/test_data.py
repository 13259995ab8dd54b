import json

import numpy as np
import pytest

from conftest import random_dataset
from reggkm import data
from reggkm.errors import (ConstantColumn, DimensionMismatch, MissingValue, NonFinite,
                           ParseError, SchemaMismatch)


def _ds(time, status, x=None, z=None):
    n = len(time)
    x = np.arange(n, dtype=float)[:, None] if x is None else x
    z = np.arange(n, dtype=float)[:, None] ** 2 if z is None else z
    return data.SurvivalDataset(time=np.array(time, float), status=np.array(status), x=x, z=z)


def test_standardize_three_point_column():
    ds = _ds([1, 2, 3], [1, 1, 1], x=np.array([[1.0], [2.0], [3.0]]))
    out = data.standardize(ds)
    np.testing.assert_allclose(out.x[:, 0], [-1, 0, 1], atol=1e-15)
    assert out.standardized


def test_standardize_moments(rng):
    ds = data.SurvivalDataset(time=rng.exponential(size=100), status=np.ones(100, int),
                              x=rng.normal(size=(100, 2)), z=rng.uniform(0, 3, (100, 5)))
    out = data.standardize(ds)
    for block in (out.x, out.z):
        assert np.abs(block.mean(axis=0)).max() < 1e-10
        assert np.abs(block.std(axis=0, ddof=1) - 1).max() < 1e-10
    np.testing.assert_array_equal(out.time, ds.time)
    np.testing.assert_array_equal(out.status, ds.status)


def test_standardize_idempotent_on_normalized(rng):
    ds = data.standardize(random_dataset(rng, 30, 2, 2))
    raw = data.SurvivalDataset(time=ds.time, status=ds.status, x=ds.x, z=ds.z)
    again = data.standardize(raw)
    np.testing.assert_allclose(again.x, ds.x, atol=1e-12)
    np.testing.assert_allclose(again.z, ds.z, atol=1e-12)


def test_constant_column_rejected():
    ds = _ds([1, 2, 3], [1, 0, 1], z=np.ones((3, 1)))
    with pytest.raises(ConstantColumn) as err:
        data.standardize(ds)
    assert err.value.name == "z1"


def test_nonfinite_rejected():
    with pytest.raises(NonFinite):
        _ds([1, 2, 3], [1, 1, 1], x=np.array([[1.0], [np.nan], [3.0]]))


def test_dimension_and_status_checks():
    with pytest.raises(DimensionMismatch):
        _ds([1, 2, 3], [1, 1])
    with pytest.raises(SchemaMismatch):
        _ds([1, 2, 3], [1, 2, 0])


def test_apply_standardization_uses_training_statistics(rng):
    train = data.standardize(random_dataset(rng, 50, 2, 3))
    test = random_dataset(rng, 10, 2, 3)
    out = data.apply_standardization(test, train.standardizer)
    st = train.standardizer
    np.testing.assert_allclose(out.x, (test.x - st.x_mean) / st.x_sd)
    back = data.unstandardize(out)
    np.testing.assert_allclose(back.z, test.z, atol=1e-12)


def test_order_events_before_censorings_at_ties():
    ds = _ds([1, 1, 2], [0, 1, 1])
    assert list(ds.order) == [1, 0, 2]
    assert np.all(np.diff(ds.time[ds.order]) >= 0)


@pytest.mark.parametrize("time", [[3, 1, 2], [1, 2, 3]])
def test_risk_sets_small(time):
    ds = _ds(time, [1, 1, 1])
    risk = data.build_risk_index(ds)
    i_min = int(np.argmin(time))
    i_max = int(np.argmax(time))
    assert list(risk.risk_set(i_min)) == [0, 1, 2]
    assert list(risk.risk_set(i_max)) == [i_max]


def test_risk_sets_match_enumeration(rng):
    for _ in range(20):
        ds = random_dataset(rng, 15, 1, 1, ties=True)
        risk = data.build_risk_index(ds)
        for i in range(ds.n):
            expect = [l for l in range(ds.n) if ds.time[l] >= ds.time[i]]
            assert list(risk.risk_set(i)) == expect
            assert i in risk.risk_set(i)
            contain = [m for m in range(ds.n) if i in set(np.flatnonzero(ds.time >= ds.time[m]))]
            assert list(risk.containing(i)) == contain


def test_risk_sets_with_tied_event_and_censoring():
    ds = _ds([1, 1, 2], [1, 0, 1])
    risk = data.build_risk_index(ds)
    assert list(risk.risk_set(0)) == [0, 1, 2]
    assert list(risk.risk_set(1)) == [0, 1, 2]
    assert list(risk.risk_set(2)) == [2]


# ------------------------------------------------------------------ CSV I/O

def _write(tmp_path, text, schema=None):
    schema = schema or {"time": "t", "status": "d", "x": ["a"], "z": ["b", "c"]}
    p = tmp_path / "d.csv"
    p.write_text(text)
    s = tmp_path / "s.json"
    s.write_text(json.dumps(schema))
    return p, s


def test_read_csv_partitions_columns(tmp_path):
    p, s = _write(tmp_path, "t,d,b,a,c\n1.5,1,2,3,4\n2.5,0,5,6,7\n")
    ds = data.read_csv(p, s)
    assert (ds.n, ds.P, ds.Q) == (2, 1, 2)
    np.testing.assert_array_equal(ds.x[:, 0], [3, 6])
    np.testing.assert_array_equal(ds.z, [[2, 4], [5, 7]])
    assert ds.x_names == ("a",) and ds.z_names == ("b", "c")


def test_read_csv_missing_value(tmp_path):
    p, s = _write(tmp_path, "t,d,a,b,c\n1,1,2,3,4\n2,0,,6,7\n")
    with pytest.raises(MissingValue) as err:
        data.read_csv(p, s)
    assert (err.value.row, err.value.col) == (2, "a")


def test_read_csv_parse_error(tmp_path):
    p, s = _write(tmp_path, "t,d,a,b,c\n1,1,2,x3,4\n")
    with pytest.raises(ParseError) as err:
        data.read_csv(p, s)
    assert (err.value.row, err.value.col) == (1, "b")


def test_read_csv_schema_mismatch(tmp_path):
    p, s = _write(tmp_path, "t,d,a,b\n1,1,2,3\n")
    with pytest.raises(SchemaMismatch):
        data.read_csv(p, s)
    p, s = _write(tmp_path, "t,d,a,b,c\n1,3,2,3,4\n")
    with pytest.raises(SchemaMismatch):
        data.read_csv(p, s)


def test_csv_round_trip_is_exact(tmp_path, rng):
    ds = random_dataset(rng, 25, 2, 3)
    path = tmp_path / "r.csv"
    data.write_csv(path, ds)
    back = data.read_csv(path, data.schema_for(ds))
    for name in ("time", "status", "x", "z"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))
