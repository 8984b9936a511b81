import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraudforge.data import (
    KAGGLE_FEATURES,
    Dataset,
    ScalerParams,
    class_counts,
    deduplicate,
    load_csv,
    load_synthetic_csv,
    minmax_fit,
    minmax_transform,
    row_digest,
    stratified_split,
    write_csv,
    write_synthetic_csv,
)
from fraudforge.errors import (
    EmptyDataset,
    EmptyFile,
    HeaderMismatch,
    ParseError,
    SchemaMismatch,
    SingleClass,
)
from fraudforge.fixtures import blob_fixture, two_gaussians
from fraudforge.oversample import augment_dataset
from fraudforge.errors import WidthMismatch

HEADER = ",".join(KAGGLE_FEATURES + ["Class"])


def kaggle_row(t, v, amount, label):
    return ",".join([str(t)] + [str(v + i) for i in range(28)] + [str(amount), str(label)])


def test_three_row_fixture_parses_exactly(tmp_path):
    p = tmp_path / "three.csv"
    p.write_text(
        "\n".join([HEADER, kaggle_row(0, 0.5, 149.62, 0), kaggle_row(1, -1.25, 2.69, 1), kaggle_row(2, 3, 0, 0)])
        + "\n"
    )
    d = load_csv(p)
    assert len(d) == 3 and d.n_features == 30
    assert d.labels.tolist() == [0, 1, 0]
    assert d.features[0, 0] == 0.0 and d.features[0, 1] == 0.5 and d.features[0, 28] == 27.5
    assert d.features[1, 29] == 2.69 and d.features[1, 2] == -0.25
    assert not d.synthetic_mask.any()


def test_wrong_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("Time,V2,V1\n0,1,1\n")
    with pytest.raises(HeaderMismatch):
        load_csv(p)
    p.write_text(HEADER.replace("V3,V4", "V4,V3") + "\n" + kaggle_row(0, 0, 1, 0) + "\n")
    with pytest.raises(HeaderMismatch):
        load_csv(p)


def test_parse_error_reports_row_and_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,Class\n1,2,0\n1,x,1\n")
    with pytest.raises(ParseError) as err:
        load_csv(p, None)
    assert (err.value.row, err.value.col) == (3, 2)
    p.write_text("a,b,Class\n1,2,3\n")
    with pytest.raises(ParseError):
        load_csv(p, None)


def test_empty_files(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(EmptyFile):
        load_csv(p)
    p.write_text(HEADER + "\n")
    with pytest.raises(EmptyFile):
        load_csv(p)


def test_fixture_round_trip_bit_exact(tmp_path):
    d = two_gaussians(30, 7, 4, 1.5, seed=3)
    p = tmp_path / "rt.csv"
    write_csv(d, p)
    back = load_csv(p, None)
    assert back.features.tobytes() == d.features.tobytes()
    assert back.labels.tolist() == d.labels.tolist()
    assert back.feature_names == d.feature_names
    write_csv(back, tmp_path / "rt2.csv")
    assert (tmp_path / "rt2.csv").read_bytes() == p.read_bytes()


def test_synthetic_flag_round_trip(tmp_path):
    d = augment_dataset(two_gaussians(5, 3, 2, 1.0), np.ones((2, 2)))
    write_csv(d, tmp_path / "f.csv", with_flag=True)
    back = load_csv(tmp_path / "f.csv", None)
    assert back.synthetic_mask.tolist() == d.synthetic_mask.tolist()


def test_synthetic_csv_schema(tmp_path):
    rows = np.arange(6.0).reshape(3, 2)
    write_synthetic_csv(rows, ["a", "b"], tmp_path / "s.csv")
    np.testing.assert_array_equal(load_synthetic_csv(tmp_path / "s.csv", ["a", "b"]), rows)
    with pytest.raises(SchemaMismatch):
        load_synthetic_csv(tmp_path / "s.csv", ["a", "b", "c"])


def test_dataset_invariants():
    with pytest.raises(SchemaMismatch):
        Dataset(np.zeros((2, 1)), np.array([0, 2]), ["a"])
    with pytest.raises(SchemaMismatch):
        Dataset(np.zeros((2, 1)), np.array([0, 1]), ["a"], np.zeros(3, dtype=bool))


def test_deduplicate_cases():
    d = Dataset(np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0], [1.0, 2.0]]), [0, 1, 0, 1], ["a", "b"])
    out = deduplicate(d)
    # same features with a different label is not a duplicate
    assert out.features.tolist() == [[1, 2], [3, 4], [1, 2]]
    assert out.labels.tolist() == [0, 1, 1]
    unique = two_gaussians(10, 5, 3, 1.0)
    assert deduplicate(unique).features.tobytes() == unique.features.tobytes()


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 1)), min_size=0, max_size=30))
def test_deduplicate_idempotent_and_order_preserving(rows):
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), 3)
    d = Dataset(arr[:, :2], arr[:, 2].astype(int), ["a", "b"])
    once = deduplicate(d)
    twice = deduplicate(once)
    assert once.features.tobytes() == twice.features.tobytes()
    seen = []
    for r in rows:
        if r not in seen:
            seen.append(r)
    assert [tuple(int(v) for v in f) + (int(y),) for f, y in zip(once.features, once.labels)] == seen


def test_minmax_examples():
    d = Dataset(np.array([[10.0, 5.0], [20.0, 5.0], [30.0, 5.0]]), [0, 1, 0], ["a", "b"])
    s = minmax_fit(d, ["a", "b"])
    assert s.minimum == [10.0, 5.0] and s.maximum == [30.0, 5.0]
    out = minmax_transform(d, s)
    assert out.features[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert out.features[:, 1].tolist() == [0.0, 0.0, 0.0]
    far = Dataset(np.array([[40.0, 7.0]]), [0], ["a", "b"])
    assert minmax_transform(far, s).features[0, 0] == 1.5


def test_minmax_errors():
    with pytest.raises(EmptyDataset):
        minmax_fit(Dataset(np.zeros((0, 1)), np.zeros(0), ["a"]), ["a"])
    d = Dataset(np.zeros((2, 1)), [0, 1], ["a"])
    with pytest.raises(SchemaMismatch):
        minmax_fit(d, ["z"])
    with pytest.raises(SchemaMismatch):
        minmax_transform(d, ScalerParams(["z"], [0.0], [1.0]))


def test_scaler_json_round_trip():
    s = ScalerParams(["Amount", "Time"], [0.0, 1.5], [25691.16, 172792.0])
    assert ScalerParams.from_json(s.to_json()) == s


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=40))
def test_minmax_fitted_column_spans_unit_interval(values):
    x = np.array(values)
    d = Dataset(x[:, None], np.zeros(len(x), dtype=int), ["a"])
    out = minmax_transform(d, minmax_fit(d, ["a"])).features[:, 0]
    if x.max() > x.min():
        assert out.min() == 0.0 and out.max() == pytest.approx(1.0)
    else:
        assert (out == 0.0).all()


def test_split_ten_ten_toy():
    d = two_gaussians(10, 10, 2, 1.0)
    s = stratified_split(d, 0.8, seed=1)
    assert len(s.train_idx) == 16 and len(s.test_idx) == 4
    assert d.labels[s.test_idx].sum() == 2


def test_split_reference_counts_from_labels():
    labels = np.zeros(284_315 + 492, dtype=np.int64)
    labels[:492] = 1
    d = Dataset(np.zeros((len(labels), 1)), labels, ["a"])
    s = stratified_split(d, 0.8, seed=0)
    test = d.labels[s.test_idx]
    assert int(test.sum()) == 98
    assert int((test == 0).sum()) == 56_863


def test_split_single_class():
    with pytest.raises(SingleClass):
        stratified_split(Dataset(np.zeros((4, 1)), [0, 0, 0, 0], ["a"]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(1, 60), st.integers(0, 2**32 - 1), st.sampled_from([0.5, 0.7, 0.8, 0.9]))
def test_split_properties(n_neg, n_pos, seed, frac):
    labels = np.array([0] * n_neg + [1] * n_pos)
    d = Dataset(np.arange(len(labels), dtype=float)[:, None], labels, ["a"])
    s = stratified_split(d, frac, seed)
    assert set(s.train_idx).isdisjoint(s.test_idx)
    assert sorted(np.concatenate([s.train_idx, s.test_idx]).tolist()) == list(range(len(labels)))
    for cls, n in ((0, n_neg), (1, n_pos)):
        in_test = int((d.labels[s.test_idx] == cls).sum())
        assert abs(in_test - (1 - frac) * n) < 1 + 1e-9
    again = stratified_split(d, frac, seed)
    assert again.test_idx.tolist() == s.test_idx.tolist()


def test_class_counts():
    assert class_counts(Dataset(np.zeros((0, 1)), np.zeros(0), ["a"])) == (0, 0)
    d = blob_fixture()
    assert class_counts(d) == (10_000, 50)
    aug = augment_dataset(d, np.zeros((5000, d.n_features)))
    assert class_counts(aug) == (10_000, 5050)
    assert aug.synthetic_mask.sum() == 5000 and not aug.synthetic_mask[: len(d)].any()


def test_augment_empty_and_width():
    d = two_gaussians(5, 3, 2, 1.0)
    same = augment_dataset(d, np.empty((0, 2)))
    assert row_digest(same) == row_digest(d)
    with pytest.raises(WidthMismatch):
        augment_dataset(d, np.ones((2, 3)))


def test_row_digest_is_order_sensitive():
    d = two_gaussians(5, 3, 2, 1.0)
    assert row_digest(d) == row_digest(d.subset(np.arange(len(d))))
    assert row_digest(d) != row_digest(d.subset(np.arange(len(d))[::-1]))
