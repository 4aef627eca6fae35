import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwbnet.data import (
    CLASS_NAMES,
    FEATURE_NAMES,
    DataError,
    Dataset,
    SynthConfig,
    add_awgn,
    awgn_stream,
    fit_apply_standardization,
    generate_synthetic,
    kfold_splits,
    load_csv,
    save_csv,
)


def _write(path, rows, header=None):
    header = header or [*FEATURE_NAMES, "label"]
    lines = [",".join(header)] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


# csv -------------------------------------------------------------------------

def test_two_row_file(tmp_path):
    path = _write(tmp_path / "d.csv", [[0.5] * 48 + ["left"], [1.5] * 48 + ["right"]])
    ds = load_csv(path)
    assert len(ds) == 2
    np.testing.assert_array_equal(ds.labels, [0, 5])
    assert ds.features[1, 0] == 1.5


def test_unknown_label_names_row_and_valid_labels(tmp_path):
    path = _write(tmp_path / "d.csv", [[0.0] * 48 + ["left"], [0.0] * 48 + ["door"]])
    with pytest.raises(DataError) as exc:
        load_csv(path)
    msg = str(exc.value)
    assert "row 3" in msg and "'door'" in msg
    assert all(name in msg for name in CLASS_NAMES)


def test_non_numeric_cell_names_coordinates(tmp_path):
    row = [0.0] * 48 + ["back"]
    row[7] = "n/a"
    with pytest.raises(DataError, match=rf"row 2, column '{FEATURE_NAMES[7]}'"):
        load_csv(_write(tmp_path / "d.csv", [row]))


def test_missing_column(tmp_path):
    header = [*FEATURE_NAMES[:-1], "label"]
    with pytest.raises(DataError, match=FEATURE_NAMES[-1]):
        load_csv(_write(tmp_path / "d.csv", [[0.0] * 47 + ["back"]], header))


def test_csv_round_trip_is_exact(tmp_path):
    ds = generate_synthetic(SynthConfig(samples_per_class=3, seed=4))
    save_csv(ds, tmp_path / "s.csv", ["generated for a test"])
    back = load_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_column_order_does_not_matter(tmp_path):
    header = ["label", *reversed(FEATURE_NAMES)]
    vals = list(range(48))
    ds = load_csv(_write(tmp_path / "d.csv", [["front", *reversed(vals)]], header))
    np.testing.assert_array_equal(ds.features[0], vals)


# synthetic -------------------------------------------------------------------

def test_synthetic_is_seeded():
    a, b = generate_synthetic(SynthConfig(seed=3)), generate_synthetic(SynthConfig(seed=3))
    assert a.features.tobytes() == b.features.tobytes() and np.array_equal(a.labels, b.labels)
    assert generate_synthetic(SynthConfig(seed=4)).features.tobytes() != a.features.tobytes()


def test_synthetic_balance():
    ds = generate_synthetic(SynthConfig(samples_per_class=50))
    assert len(ds) == 300
    np.testing.assert_array_equal(np.bincount(ds.labels), [50] * 6)


def test_default_dataset_size():
    assert len(generate_synthetic()) == 600


def test_well_separated_blobs_are_nearest_centroid_separable():
    ds = generate_synthetic(SynthConfig(separation=10.0, within_class_sigma=0.5, seed=1))
    train_idx, test_idx = kfold_splits(ds, 1, 0)[0]
    means = np.stack([ds.features[train_idx][ds.labels[train_idx] == k].mean(0) for k in range(6)])
    x = ds.features[test_idx]
    pred = np.argmin(((x[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
    assert np.mean(pred == ds.labels[test_idx]) > 0.99


def test_bad_synth_config():
    with pytest.raises(ValueError):
        SynthConfig(separation=0.0)


# standardisation -------------------------------------------------------------

def test_train_columns_are_standardised(rng):
    ds = Dataset(rng.normal(5, 3, (40, 48)), np.repeat(np.arange(6), 7)[:40])
    train, _ = fit_apply_standardization(ds)
    assert np.abs(train.features.mean(0)).max() < 1e-9
    np.testing.assert_allclose(train.features.var(0), 1.0, rtol=1e-12)
    np.testing.assert_allclose(train.unstandardize(), ds.features, atol=1e-12)


def test_constant_column_maps_to_zero(rng):
    x = rng.standard_normal((10, 48))
    x[:, 3] = 7.0
    train, _ = fit_apply_standardization(Dataset(x, np.zeros(10, dtype=int)))
    assert train.std[0, 3] == 1e-8
    np.testing.assert_array_equal(train.features[:, 3], 0.0)


def test_test_set_uses_train_statistics(rng):
    train = Dataset(rng.standard_normal((50, 48)), np.zeros(50, dtype=int))
    shifted = Dataset(rng.standard_normal((50, 48)) * 2 + 3, np.zeros(50, dtype=int))
    _, (with_train,) = fit_apply_standardization(train, [shifted])
    self_std, _ = fit_apply_standardization(shifted)
    assert np.abs(with_train.features - self_std.features).max() > 1.0
    np.testing.assert_allclose(with_train.features, (shifted.features - train.features.mean(0)) / train.features.std(0))


# splits ----------------------------------------------------------------------

def test_single_fold_is_300_300():
    ((train, test),) = kfold_splits(generate_synthetic(), 1, 0)
    assert (train.size, test.size) == (300, 300)


def test_first_resplit_is_the_fixed_split():
    ds = generate_synthetic()
    fixed = kfold_splits(ds, 1, 5)[0]
    first = kfold_splits(ds, 10, 5)[0]
    assert all(np.array_equal(a, b) for a, b in zip(fixed, first))


def test_resplits_are_reproducible_and_distinct():
    ds = generate_synthetic()
    a, b = kfold_splits(ds, 10, 2), kfold_splits(ds, 10, 2)
    assert all(np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) for x, y in zip(a, b))
    assert len({tuple(tr) for tr, _ in a}) == 10


def test_unsupported_fold_count():
    with pytest.raises(ValueError, match="folds"):
        kfold_splits(generate_synthetic(), 5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=6, max_size=6), st.integers(0, 2**32 - 1))
def test_splits_partition_with_class_balance(counts, seed):
    labels = np.concatenate([np.full(c, k) for k, c in enumerate(counts)])
    ds = Dataset(np.zeros((labels.size, 1)), labels)
    for train, test in kfold_splits(ds, 10, seed):
        assert np.intersect1d(train, test).size == 0
        np.testing.assert_array_equal(np.union1d(train, test), np.arange(labels.size))
        for k in range(6):
            assert abs(np.sum(labels[train] == k) - np.sum(labels[test] == k)) <= 1


# noise -----------------------------------------------------------------------

def test_zero_sigma_is_identity(rng):
    x = rng.standard_normal((3, 48))
    np.testing.assert_array_equal(add_awgn(x, 0.0, rng).data, x)


def test_awgn_variance_monte_carlo():
    x = np.zeros((1000, 1000))
    noisy = add_awgn(x, 0.1, np.random.default_rng(9)).data
    assert abs(noisy.var() - 0.01) < 0.05 * 0.01


def test_awgn_is_seeded():
    x = np.zeros((4, 48))
    a = add_awgn(x, 0.1, np.random.default_rng(1)).data
    b = add_awgn(x, 0.1, np.random.default_rng(1)).data
    assert a.tobytes() == b.tobytes()
    assert awgn_stream(0, 3, 10).tobytes() == awgn_stream(0, 3, 10).tobytes()


def test_awgn_stream_rows_belong_to_samples():
    np.testing.assert_array_equal(awgn_stream(0, 1, 5), awgn_stream(0, 1, 20)[:5])
    assert not np.array_equal(awgn_stream(0, 1, 5), awgn_stream(0, 2, 5))


def test_negative_sigma_rejected(rng):
    with pytest.raises(ValueError):
        add_awgn(np.zeros((1, 2)), -0.1, rng)
