"""Ingestion, sentinel partitioning, standardization, and splits."""

import math

import numpy as np
import pytest

from exoticnet.core import Prng
from exoticnet.dataset import (
    FEATURE_NAMES,
    N_FEATURES,
    SENTINEL,
    Dataset,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    missingness_signature,
    partition_by_missingness,
    split_stratified,
    subsample_stratified,
)
from exoticnet.errors import SchemaError
from exoticnet.synth import make_challenge_like

from conftest import make_train_row


def _features(value=1.0, **overrides):
    row = [value] * N_FEATURES
    for idx, v in overrides.items():
        row[int(idx)] = v
    return row


class TestLoadCsv:
    def test_three_row_train_file(self, write_train_csv):
        path = write_train_csv(
            [
                make_train_row(100, _features(1.5), 0.2, "s"),
                make_train_row(101, _features(-2.0), 1.1, "b"),
                make_train_row(102, _features(0.0), 0.5, "s"),
            ]
        )
        d = load_csv(path, "train")
        assert len(d) == 3
        assert d.has_weights and d.has_labels
        assert d.feature_names == FEATURE_NAMES
        assert d.ids.tolist() == [100, 101, 102]
        assert d.labels.tolist() == [1, 0, 1]
        assert d.weights.tolist() == [0.2, 1.1, 0.5]

    def test_test_schema_has_no_weights_or_labels(self, tmp_path):
        path = tmp_path / "test.csv"
        header = ",".join(["EventId", *FEATURE_NAMES])
        row = ",".join(["7"] + ["1.0"] * N_FEATURES)
        path.write_text(header + "\n" + row + "\n")
        d = load_csv(str(path), "test")
        assert len(d) == 1
        assert not d.has_weights and not d.has_labels

    def test_permuted_header_names_first_mismatch(self, tmp_path):
        names = list(FEATURE_NAMES)
        names[0], names[1] = names[1], names[0]
        path = tmp_path / "bad.csv"
        path.write_text(",".join(["EventId", *names, "Weight", "Label"]) + "\n")
        with pytest.raises(SchemaError, match="DER_mass_MMC"):
            load_csv(str(path), "train")

    def test_unparseable_numeric_reports_line(self, write_train_csv):
        path = write_train_csv(
            [
                make_train_row(1, _features(1.0), 0.3, "s"),
                make_train_row(2, _features("oops"), 0.3, "s"),
            ]
        )
        with pytest.raises(SchemaError, match=":3"):
            load_csv(path, "train")

    def test_bad_label_rejected(self, write_train_csv):
        path = write_train_csv([make_train_row(1, _features(), 0.3, "x")])
        with pytest.raises(SchemaError, match="label"):
            load_csv(path, "train")

    def test_negative_weight_rejected(self, write_train_csv):
        path = write_train_csv([make_train_row(1, _features(), -0.5, "s")])
        with pytest.raises(SchemaError, match="negative weight"):
            load_csv(path, "train")

    def test_row_order_preserved(self, write_train_csv):
        ids = [30, 10, 20]
        path = write_train_csv([make_train_row(i, _features(float(i)), 1.0, "b") for i in ids])
        assert load_csv(path, "train").ids.tolist() == ids


class TestMissingness:
    def test_no_sentinels_gives_zero_mask(self):
        d = make_challenge_like(50, seed=1, sentinels=False)
        assert missingness_signature(d.event(0)) == 0
        assert np.all(d.signatures() == 0)

    def test_single_sentinel_sets_its_bit(self):
        d = make_challenge_like(5, seed=1, sentinels=False)
        feats = d.features.copy()
        feats[2, 0] = SENTINEL
        d2 = Dataset(d.ids, feats, d.weights, d.labels, d.feature_names)
        assert missingness_signature(d2.event(2)) == 1
        assert d2.signatures()[2] == 1

    def test_vectorized_matches_per_event(self):
        d = make_challenge_like(300, seed=3)
        masks = d.signatures()
        for i in range(0, 300, 37):
            assert masks[i] == missingness_signature(d.event(i))

    def test_synthetic_challenge_data_has_six_patterns(self):
        d = make_challenge_like(20_000, seed=5)
        assert len(set(d.signatures().tolist())) == 6


class TestPartition:
    def test_sentinel_free_data_single_group(self):
        d = make_challenge_like(200, seed=2, sentinels=False)
        groups = partition_by_missingness(d)
        assert len(groups) == 1
        mask, g = groups[0]
        assert mask == 0
        assert g.n_features == N_FEATURES

    def test_groups_are_sentinel_free_and_ordered(self):
        d = make_challenge_like(5000, seed=4)
        groups = partition_by_missingness(d)
        assert len(groups) == 6
        sizes = [len(g) for _, g in groups]
        assert sizes == sorted(sizes, reverse=True)
        for mask, g in groups:
            assert not np.any(g.features == SENTINEL)
            assert g.n_features == N_FEATURES - bin(mask).count("1")

    def test_round_trip_preserves_event_ids(self):
        d = make_challenge_like(3000, seed=6)
        groups = partition_by_missingness(d)
        collected = np.concatenate([g.ids for _, g in groups])
        assert sorted(collected.tolist()) == sorted(d.ids.tolist())
        assert len(collected) == len(d)


class TestStandardizer:
    def _one_column_dataset(self, column):
        n = len(column)
        feats = np.tile(np.asarray(column, dtype=float)[:, None], (1, N_FEATURES))
        return Dataset(np.arange(n), feats, np.ones(n), np.zeros(n, dtype=np.int8), FEATURE_NAMES)

    def test_two_point_column(self):
        d = self._one_column_dataset([1.0, 3.0])
        out = apply_standardizer(fit_standardizer(d), d)
        assert out.features[:, 0] == pytest.approx([-1.0, 1.0])

    def test_sentinel_column_imputes_zero(self):
        d = self._one_column_dataset([SENTINEL, 1.0, 3.0])
        out = apply_standardizer(fit_standardizer(d), d)
        assert out.features[:, 0] == pytest.approx([0.0, -1.0, 1.0])

    def test_constant_column_flagged(self):
        d = self._one_column_dataset([5.0, 5.0, 5.0])
        scaler = fit_standardizer(d)
        assert scaler.flagged[0]
        assert scaler.stds[0] == 1.0
        out = apply_standardizer(scaler, d)
        assert out.features[:, 0] == pytest.approx([0.0, 0.0, 0.0])

    def test_all_sentinel_column_flagged(self):
        d = self._one_column_dataset([SENTINEL, SENTINEL])
        scaler = fit_standardizer(d)
        assert scaler.flagged[0]
        assert scaler.means[0] == 0.0 and scaler.stds[0] == 1.0

    def test_fit_apply_normalizes(self):
        d = make_challenge_like(2000, seed=7, sentinels=False)
        out = apply_standardizer(fit_standardizer(d), d)
        means = out.features.mean(axis=0)
        stds = out.features.std(axis=0)
        assert np.all(np.abs(means) < 1e-12)
        assert np.allclose(stds, 1.0, atol=1e-12)

    def test_save_load_round_trip(self, tmp_path):
        d = make_challenge_like(500, seed=8)
        scaler = fit_standardizer(d)
        path = tmp_path / "scaler.txt"
        scaler.save(path)
        loaded = type(scaler).load(path)
        assert np.array_equal(scaler.means, loaded.means)
        assert np.array_equal(scaler.stds, loaded.stds)
        assert np.array_equal(scaler.flagged, loaded.flagged)


class TestSplits:
    def _tiny(self):
        n = 10
        feats = np.arange(n * N_FEATURES, dtype=float).reshape(n, N_FEATURES)
        labels = np.array([1] * 5 + [0] * 5, dtype=np.int8)
        weights = np.linspace(1.0, 2.0, n)
        return Dataset(np.arange(n), feats, weights, labels, FEATURE_NAMES)

    def test_stratified_counts(self):
        train, valid = split_stratified(self._tiny(), 0.2, Prng(1))
        assert len(train) == 8 and len(valid) == 2
        assert int(train.labels.sum()) == 4
        assert int(valid.labels.sum()) == 1

    def test_class_weight_totals_preserved(self):
        d = make_challenge_like(4000, seed=9)
        train, valid = split_stratified(d, 0.2, Prng(2))
        s_full, b_full = d.class_weight_totals()
        for part in (train, valid):
            s, b = part.class_weight_totals()
            assert s == pytest.approx(s_full, rel=1e-9)
            assert b == pytest.approx(b_full, rel=1e-9)

    def test_half_signal_weight_scales_by_two(self):
        n = 4
        feats = np.ones((n, N_FEATURES))
        d = Dataset(
            np.arange(n),
            feats,
            np.array([1.0, 1.0, 3.0, 3.0]),
            np.array([1, 1, 0, 0], dtype=np.int8),
            FEATURE_NAMES,
        )
        train, valid = split_stratified(d, 0.5, Prng(3))
        assert valid.weights[valid.labels == 1].sum() == pytest.approx(2.0)
        assert train.weights[train.labels == 1].sum() == pytest.approx(2.0)

    def test_equal_seeds_identical_split(self):
        d = make_challenge_like(1000, seed=10)
        t1, v1 = split_stratified(d, 0.25, Prng(4))
        t2, v2 = split_stratified(d, 0.25, Prng(4))
        assert np.array_equal(v1.ids, v2.ids)
        assert np.array_equal(t1.weights, t2.weights)

    def test_fraction_bounds(self):
        d = self._tiny()
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                split_stratified(d, bad, Prng(1))

    def test_valid_size_near_fraction(self):
        d = make_challenge_like(997, seed=11)
        f = 0.2
        _, valid = split_stratified(d, f, Prng(5))
        assert f - 2 / len(d) <= len(valid) / len(d) <= f + 2 / len(d)

    def test_subsample_preserves_totals_and_balance(self):
        d = make_challenge_like(20_000, seed=12)
        sub = subsample_stratified(d, 1000, Prng(6))
        assert len(sub) == 1000
        s, b = sub.class_weight_totals()
        s_full, b_full = d.class_weight_totals()
        assert s == pytest.approx(s_full, rel=1e-9)
        assert b == pytest.approx(b_full, rel=1e-9)
        frac = sub.labels.mean()
        assert abs(frac - d.labels.mean()) < 0.01
