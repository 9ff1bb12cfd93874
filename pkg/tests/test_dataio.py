import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anomkit.dataio import (
    AnomalyGrade,
    ColumnKind,
    ColumnSchema,
    Dataset,
    derive_bmi,
    drop_missing,
    inject_anomalies,
    load_csv,
    one_hot_encode,
    standardize,
    write_csv,
)
from anomkit.errors import (
    ConstantColumnWarning,
    DuplicateId,
    EmptyResult,
    MissingColumn,
    NonPositiveHeight,
    SchemaMismatch,
)
from anomkit.pipeline import BmiSpec, PrepConfig, preprocess

ID = ColumnSchema("id", ColumnKind.IDENTIFIER)


def cont(name):
    return ColumnSchema(name, ColumnKind.CONTINUOUS)


def cat(name):
    return ColumnSchema(name, ColumnKind.CATEGORICAL)


def numeric(X, names=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"x{j}" for j in range(X.shape[1])]
    cols = {"id": [str(i) for i in range(X.shape[0])]}
    cols.update({nm: X[:, j] for j, nm in enumerate(names)})
    return Dataset([ID] + [cont(nm) for nm in names], cols)


# -- schema and loading --------------------------------------------------------


def test_schema_needs_one_identifier():
    with pytest.raises(SchemaMismatch):
        Dataset([cont("a")], {"a": [1.0]})
    with pytest.raises(SchemaMismatch):
        Dataset([ID, ColumnSchema("id2", ColumnKind.IDENTIFIER)], {"id": ["1"], "id2": ["1"]})
    with pytest.raises(SchemaMismatch):
        Dataset([ID, cont("a"), cont("a")], {"id": ["1"], "a": [1.0]})


def test_load_csv_basic(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("id,age\n1,30\n2,40\n", encoding="utf-8")
    ds = load_csv(p, [ID, cont("age")])
    assert (ds.n, ds.d) == (2, 2)
    assert ds.row_ids == ("1", "2")
    assert list(ds.column("age")) == [30.0, 40.0]


def test_load_csv_unparseable_cell_is_missing(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("id,age\n1,30\n3,abc\n", encoding="utf-8")
    ds = load_csv(p, [ID, cont("age")])
    assert math.isnan(ds.column("age")[1])
    assert ds.missing_mask().tolist() == [False, True]


def test_load_csv_any_column_order(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("age,sex,id\n30,m,a\n40,f,b\n", encoding="utf-8")
    ds = load_csv(p, [ID, cont("age"), cat("sex")])
    assert ds.names == ["id", "age", "sex"]
    assert list(ds.column("sex")) == ["m", "f"]


def test_load_csv_errors(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("id,age\n1,30\n1,40\n", encoding="utf-8")
    with pytest.raises(DuplicateId):
        load_csv(p, [ID, cont("age")])
    with pytest.raises(MissingColumn):
        load_csv(p, [ID, cont("weight")])


def test_load_csv_generated_ids(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("age\n30\n40\n50\n", encoding="utf-8")
    ds = load_csv(p, [ID, cont("age")], generate_ids=True)
    assert ds.row_ids == ("1", "2", "3")


def test_dataset_is_immutable():
    ds = numeric([[1.0], [2.0]])
    with pytest.raises(ValueError):
        ds.column("x0")[0] = 5.0


row_values = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False, width=64))
cat_values = st.one_of(st.none(), st.text(alphabet="ab,\"\n xé", min_size=1, max_size=4))


@given(st.lists(st.tuples(row_values, cat_values), min_size=1, max_size=12))
def test_csv_round_trip(tmp_path_factory, rows):
    schema = [ID, cont("v"), cat("c")]
    ds = Dataset(schema, {
        "id": [f"r{i}" for i in range(len(rows))],
        "v": [np.nan if v is None else v for v, _ in rows],
        "c": [c for _, c in rows],
    })
    path = tmp_path_factory.mktemp("rt") / "ds.csv"
    write_csv(ds, path)
    back = load_csv(path, schema)
    # blank-only strings cannot survive the whitespace strip, compare after it
    expect = [None if c is None or c.strip() == "" else c.strip() for _, c in rows]
    assert list(back.column("c")) == expect
    assert np.array_equal(back.column("v"), ds.column("v"), equal_nan=True)


# -- cleaning ------------------------------------------------------------------


def test_drop_missing_identity_and_count():
    ds = numeric([[1, 2], [3, 4]])
    out, k = drop_missing(ds)
    assert k == 0 and out == ds
    X = np.arange(10.0).reshape(5, 2)
    X[1, 0] = np.nan
    X[3, 1] = np.nan
    out, k = drop_missing(numeric(X))
    assert k == 2 and out.n == 3
    assert out.row_ids == ("0", "2", "4")
    assert not out.missing_mask().any()


def test_drop_missing_all_rows():
    with pytest.raises(EmptyResult):
        drop_missing(numeric([[np.nan], [np.nan]]))


def test_derive_bmi():
    ds = numeric([[80.0, 2.0], [80.0, 180.0]], ["Weight", "Height"])
    out = derive_bmi(ds, "Weight", "Height")
    bmi = out.column("BMI")
    assert bmi[0] == 20.0
    assert bmi[1] == pytest.approx(80 / 1.8 ** 2, abs=1e-12)
    assert round(bmi[1], 3) == 24.691
    assert out.d == ds.d + 1
    with pytest.raises(NonPositiveHeight):
        derive_bmi(numeric([[80.0, 0.0]], ["Weight", "Height"]))


def test_one_hot():
    ds = Dataset([ID, cat("gender"), cont("a")], {
        "id": ["1", "2", "3"], "gender": ["male", "female", "other"], "a": [1.0, 2.0, 3.0],
    })
    out = one_hot_encode(ds)
    assert out.names == ["id", "gender=male", "gender=female", "gender=other", "a"]
    assert out.matrix(["gender=male", "gender=female", "gender=other"])[0].tolist() == [1, 0, 0]
    plain = numeric([[1.0]])
    assert one_hot_encode(plain) is plain


def test_one_hot_constant_column_warns():
    ds = Dataset([ID, cat("c")], {"id": ["1", "2"], "c": ["x", "x"]})
    with pytest.warns(ConstantColumnWarning):
        one_hot_encode(ds)


@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=30))
def test_one_hot_blocks_sum_to_one(values):
    ds = Dataset([ID, cat("c")], {"id": [str(i) for i in range(len(values))], "c": values})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantColumnWarning)
        out = one_hot_encode(ds)
    assert np.all(out.matrix().sum(axis=1) == 1.0)
    assert out.d - 1 == len(set(values))


def test_standardize_examples():
    out, sc = standardize(numeric([[0.0, 7.0], [10.0, 7.0]]))
    assert out.column("x0").tolist() == [-1.0, 1.0]
    assert sc.mean[0] == 5.0 and sc.std[0] == 5.0
    assert out.column("x1").tolist() == [7.0, 7.0]
    assert sc.zero_variance == ("x1",)


def test_standardize_moments():
    X = np.random.default_rng(0).normal(3.0, 4.0, size=(50, 3))
    out, _ = standardize(numeric(X))
    Z = out.matrix()
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-12)
    assert np.all(np.abs(Z.std(axis=0) - 1.0) < 1e-12)


@given(st.integers(0, 10_000))
def test_standardize_idempotent(seed):
    X = np.random.default_rng(seed).normal(size=(20, 3))
    once, _ = standardize(numeric(X))
    twice, _ = standardize(once)
    assert np.allclose(once.matrix(), twice.matrix(), atol=1e-12, rtol=0)


def test_preprocess_counts_and_order():
    ds = Dataset([ID, cont("Weight"), cont("Height"), cat("sex")], {
        "id": ["1", "2", "3"], "Weight": [80.0, np.nan, 60.0],
        "Height": [180.0, 170.0, 160.0], "sex": ["m", "f", "f"],
    })
    out, rep, scaler = preprocess(ds, PrepConfig(BmiSpec(), one_hot=True))
    assert rep["rows_in"] == 3 and rep["rows_out"] == 2 and rep["dropped_rows"] == 1
    assert rep["columns_in"] == 4 and rep["columns_out"] == 6
    assert rep["added_columns"] == ["BMI", "sex=m", "sex=f"]
    assert scaler is None


# -- injection -----------------------------------------------------------------


def _gaussian(n=200, d=4, seed=0):
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(d, d))
    return numeric(rng.normal(size=(n, d)) @ L)


def test_inject_appends_four_rows_with_fresh_ids():
    ds = _gaussian()
    out, recs = inject_anomalies(ds, seed=3)
    assert out.n == ds.n + 4
    assert [r.grade for r in recs] == list(AnomalyGrade)
    ids = {r.assigned_id for r in recs}
    assert len(ids) == 4 and not ids & set(ds.row_ids)
    assert out.row_ids[-4:] == tuple(r.assigned_id for r in recs)


def test_inject_deterministic():
    ds = _gaussian()
    a, ra = inject_anomalies(ds, seed=11)
    b, rb = inject_anomalies(ds, seed=11)
    assert a == b
    assert [r.to_dict() for r in ra] == [r.to_dict() for r in rb]


def test_inject_grade_one_on_standardized_data():
    z, _ = standardize(_gaussian(n=500))
    out, recs = inject_anomalies(z, seed=5)
    Z = out.matrix()
    assert np.max(np.abs(Z[z.n])) >= 10.0 - 1e-9
    assert np.max(np.abs(Z[: z.n])) < 10.0


def test_inject_grades_magnitudes():
    ds = _gaussian(n=400, seed=1)
    X = ds.matrix()
    mu, sd = X.mean(axis=0), X.std(axis=0)
    out, recs = inject_anomalies(ds, seed=2)
    Z = (out.matrix()[ds.n:] - mu) / sd
    assert np.isclose(Z[0].max(), 10.0)
    assert np.isclose(Z[1].max(), 4.0)
    # grade 3: every value inside its marginal range
    assert np.all((out.matrix()[ds.n + 2] >= X.min(axis=0)) & (out.matrix()[ds.n + 2] <= X.max(axis=0)))
    # grade 4: a base row shifted by 1.5 sd in every feature
    diffs = (out.matrix()[ds.n + 3] - X) / sd
    assert np.any(np.all(np.isclose(diffs, 1.5), axis=1))


def test_inject_explicit_spec():
    ds = numeric([[0.0, 0.0], [1.0, 1.0]])
    spec = [{"grade": g, "values": {"x0": float(g), "x1": -float(g)}} for g in (1, 2, 3, 4)]
    out, recs = inject_anomalies(ds, seed=0, spec=spec)
    assert out.matrix()[2:].tolist() == [[1, -1], [2, -2], [3, -3], [4, -4]]
    with pytest.raises(SchemaMismatch):
        inject_anomalies(ds, seed=0, spec=[{"grade": 1, "values": {"x0": 1.0}}] * 4)
    with pytest.raises(SchemaMismatch):
        inject_anomalies(ds, seed=0, spec=spec[:3])
