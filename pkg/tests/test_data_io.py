"""
Tests for oml_stream.core.data_io module.
"""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oml_stream.core.data_io import (
    StreamDataset,
    dataset_stats,
    generate_synthetic,
    load_dataset,
    parse_dense_csv,
    parse_sparse_multilabel,
    split_seed,
    synthetic_factors,
    write_dense_csv,
    write_sparse_multilabel,
)
from oml_stream.exceptions import ConfigError, DataParseError, DimensionError
from oml_stream.models.schemas import SynthConfig, synth_preset


def _sparse_round_trip(ds):
    buf = io.StringIO()
    write_sparse_multilabel(ds, buf)
    return parse_sparse_multilabel(buf.getvalue())


class TestStreamDataset:
    """Test the dataset container."""

    def test_shapes_and_iteration(self, tiny_dataset):
        assert (tiny_dataset.n, tiny_dataset.p, tiny_dataset.q) == (6, 2, 3)
        assert len(tiny_dataset) == 6
        first = tiny_dataset[0]
        assert first.labels.tolist() == [1, 0, 0]
        assert [ex.features.tolist() for ex in tiny_dataset][3] == [1.0, 1.0]

    def test_arrays_are_read_only_copies(self):
        features = np.ones((2, 2))
        ds = StreamDataset(features=features, labels=np.eye(2, dtype=int))
        features[0, 0] = 5.0
        assert ds.features[0, 0] == 1.0
        assert features.flags.writeable
        with pytest.raises(ValueError):
            ds.features[0, 0] = 2.0

    def test_non_binary_labels_rejected(self):
        with pytest.raises(DataParseError):
            StreamDataset(features=np.ones((1, 2)), labels=np.array([[2, 0]]))

    def test_row_count_mismatch(self):
        with pytest.raises(DimensionError):
            StreamDataset(features=np.ones((3, 2)), labels=np.zeros((2, 2)))

    def test_empty_dataset_rejected(self):
        with pytest.raises(DataParseError):
            StreamDataset(features=np.zeros((0, 2)), labels=np.zeros((0, 2)))

    def test_subset_keeps_order(self, tiny_dataset):
        sub = tiny_dataset.subset(np.array([4, 1]), name="sub")
        assert sub.name == "sub"
        assert sub.features.tolist() == [[2.0, 0.5], [1.0, 0.0]]


class TestParseSparse:
    """Test the sparse multi-label reader."""

    def test_declared_dims(self):
        ds = parse_sparse_multilabel("#dims 3 3\n0,2 1:1.0 3:0.5\n")
        assert ds.features.tolist() == [[1.0, 0.0, 0.5]]
        assert ds.labels.tolist() == [[1, 0, 1]]

    def test_empty_label_set(self):
        ds = parse_sparse_multilabel("#dims 2 2\n 2:1\n")
        assert ds.features.tolist() == [[0.0, 1.0]]
        assert ds.labels.tolist() == [[0, 0]]

    def test_sample_file(self, sparse_text):
        ds = parse_sparse_multilabel(sparse_text, name="sample")
        assert (ds.n, ds.p, ds.q) == (4, 4, 3)
        assert ds.labels.tolist() == [[1, 0, 1], [0, 1, 0], [0, 0, 0], [1, 1, 1]]
        assert ds.features[2].tolist() == [0.0, 0.0, 0.0, -1.5]
        assert ds.name == "sample"

    def test_inferred_dims(self):
        ds = parse_sparse_multilabel("0 1:1\n2 3:2\n")
        assert (ds.p, ds.q) == (3, 3)
        assert ds.labels.tolist() == [[1, 0, 0], [0, 0, 1]]

    def test_blank_lines_skipped(self):
        ds = parse_sparse_multilabel("#dims 2 2\n\n0 1:1\n\n1 2:1\n")
        assert ds.n == 2

    def test_whitespace_only_line_is_empty_example(self):
        ds = parse_sparse_multilabel("#dims 2 2\n \n0 1:1\n")
        assert ds.n == 2
        assert ds.features[0].tolist() == [0.0, 0.0]
        assert ds.labels[0].tolist() == [0, 0]

    def test_reads_from_stream(self, sparse_text):
        ds = parse_sparse_multilabel(io.StringIO(sparse_text))
        assert ds.n == 4

    def test_duplicate_feature_index(self):
        with pytest.raises(DataParseError) as exc_info:
            parse_sparse_multilabel("0 1:1 1:2\n")
        assert exc_info.value.details["line"] == 1
        assert "duplicate" in exc_info.value.message

    @pytest.mark.parametrize(
        "line",
        ["0 1-2", "a 1:1", "0 x:1", "0 1:abc", "0 0:1", "-1 1:1", "0 1:nan"],
    )
    def test_malformed_tokens(self, line):
        with pytest.raises(DataParseError) as exc_info:
            parse_sparse_multilabel(f"#dims 3 3\n0 1:1\n{line}\n")
        assert exc_info.value.details["line"] == 3
        assert exc_info.value.message.startswith("line 3:")

    def test_label_out_of_declared_range(self):
        with pytest.raises(DimensionError) as exc_info:
            parse_sparse_multilabel("#dims 3 2\n0 1:1\n2 1:1\n")
        assert exc_info.value.details["line"] == 3

    def test_feature_out_of_declared_range(self):
        with pytest.raises(DimensionError):
            parse_sparse_multilabel("#dims 3 2\n0 4:1\n")

    def test_header_not_first(self):
        with pytest.raises(DataParseError):
            parse_sparse_multilabel("0 1:1\n#dims 3 3\n")

    def test_bad_header(self):
        with pytest.raises(DataParseError):
            parse_sparse_multilabel("#dims three 3\n0 1:1\n")

    def test_empty_input(self):
        with pytest.raises(DataParseError):
            parse_sparse_multilabel("")

    def test_no_labels_without_header(self):
        with pytest.raises(DimensionError):
            parse_sparse_multilabel(" 1:1\n")


class TestWriteSparse:
    """Test the sparse writer."""

    def test_round_trip_sample(self, sparse_text):
        ds = parse_sparse_multilabel(sparse_text)
        assert _sparse_round_trip(ds).equals(ds)

    def test_round_trip_synthetic(self, small_dataset):
        assert _sparse_round_trip(small_dataset).equals(small_dataset)

    def test_exact_float_text(self):
        ds = StreamDataset(features=np.array([[0.1, 0.0]]), labels=np.array([[0, 1]]))
        buf = io.StringIO()
        write_sparse_multilabel(ds, buf)
        assert buf.getvalue() == "#dims 2 2\n1 1:0.1\n"

    def test_without_header(self, tiny_dataset):
        buf = io.StringIO()
        write_sparse_multilabel(tiny_dataset, buf, include_header=False)
        assert not buf.getvalue().startswith("#")
        assert buf.getvalue().splitlines()[0] == "0 "

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=1, max_value=5),
        st.integers(min_value=1, max_value=8),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_round_trip_random(self, p, q, n, seed):
        rng = np.random.default_rng(seed)
        features = rng.normal(size=(n, p)) * (rng.random((n, p)) < 0.6)
        labels = (rng.random((n, q)) < 0.4).astype(int)
        ds = StreamDataset(features=features, labels=labels)
        assert _sparse_round_trip(ds).equals(ds)


class TestDenseCsv:
    """Test the dense CSV reader and writer."""

    def test_single_label(self):
        ds = parse_dense_csv("f1,f2,l1\n0.5,1.0,1\n", q=1)
        assert ds.features.tolist() == [[0.5, 1.0]]
        assert ds.labels.tolist() == [[1]]

    def test_shape(self):
        ds = parse_dense_csv("a,b,c,d\n1,2,0,1\n3,4,1,1\n5,6,0,0\n", q=2)
        assert (ds.n, ds.p, ds.q) == (3, 2, 2)

    def test_non_binary_label(self):
        with pytest.raises(DataParseError) as exc_info:
            parse_dense_csv("f1,f2,l1\n0.5,1.0,2\n", q=1)
        assert exc_info.value.details["line"] == 2

    def test_ragged_row(self):
        with pytest.raises(DataParseError):
            parse_dense_csv("f1,f2,l1\n0.5,1.0,1\n0.5,1\n", q=1)

    def test_too_many_fields(self):
        with pytest.raises(DataParseError):
            parse_dense_csv("f1,f2,l1\n0.5,1.0,1,7\n", q=1)

    def test_non_numeric_feature(self):
        with pytest.raises(DataParseError) as exc_info:
            parse_dense_csv("f1,f2,l1\n0.5,1.0,1\nx,1.0,0\n", q=1)
        assert exc_info.value.details["line"] == 3

    def test_empty(self):
        with pytest.raises(DataParseError):
            parse_dense_csv("", q=1)

    def test_no_feature_columns(self):
        with pytest.raises(DimensionError):
            parse_dense_csv("l1,l2\n0,1\n", q=2)

    def test_round_trip(self, small_dataset):
        buf = io.StringIO()
        write_dense_csv(small_dataset, buf)
        text = buf.getvalue()
        assert text.splitlines()[0] == "f1,f2,f3,f4,f5,f6,l1,l2,l3,l4"
        assert parse_dense_csv(text, q=small_dataset.q).equals(small_dataset)


class TestLoadDataset:
    """Test file loading by extension."""

    def test_sparse_file(self, tmp_path, sparse_text):
        path = tmp_path / "sample.txt"
        path.write_text(sparse_text)
        ds = load_dataset(path)
        assert ds.name == "sample"
        assert ds.n == 4

    def test_csv_file_needs_q(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("f1,l1\n1.0,1\n")
        with pytest.raises(ConfigError):
            load_dataset(path)
        assert load_dataset(path, q=1).n == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataParseError):
            load_dataset(tmp_path / "missing.txt")

    @pytest.mark.parametrize("name", ["latin1.txt", "latin1.csv"])
    def test_invalid_utf8(self, tmp_path, name):
        path = tmp_path / name
        path.write_bytes(b"#dims 2 2\n0 1:1.0 2:\xe9\n")
        with pytest.raises(DataParseError) as exc_info:
            load_dataset(path, q=2)
        assert name in exc_info.value.message
        assert exc_info.value.details["path"] == str(path)

    def test_unknown_format(self, tmp_path, sparse_text):
        path = tmp_path / "sample.txt"
        path.write_text(sparse_text)
        with pytest.raises(ConfigError):
            load_dataset(path, fmt="arff")


class TestSplitSeed:
    """Test the seed/stream split."""

    def test_sizes(self):
        ds = StreamDataset(features=np.arange(10.0)[:, None], labels=np.ones((10, 2)))
        seed, stream = split_seed(ds, 0.2, rng_seed=1)
        assert (seed.n, stream.n) == (2, 8)

    def test_deterministic(self, small_dataset):
        a = split_seed(small_dataset, 0.2, rng_seed=5)
        b = split_seed(small_dataset, 0.2, rng_seed=5)
        assert a[0].equals(b[0]) and a[1].equals(b[1])

    def test_is_permutation(self, small_dataset):
        seed, stream = split_seed(small_dataset, 0.3, rng_seed=9)
        joined = np.vstack([seed.features, stream.features])
        original = np.sort(small_dataset.features, axis=0)
        assert np.array_equal(np.sort(joined, axis=0), original)
        assert seed.n + stream.n == small_dataset.n

    def test_no_shuffle_keeps_order(self, tiny_dataset):
        seed, stream = split_seed(tiny_dataset, 0.5, rng_seed=0, shuffle=False)
        assert seed.features.tolist() == tiny_dataset.features[:3].tolist()
        assert stream.features.tolist() == tiny_dataset.features[3:].tolist()

    def test_empty_stream(self):
        ds = StreamDataset(features=np.arange(10.0)[:, None], labels=np.ones((10, 2)))
        with pytest.raises(ConfigError):
            split_seed(ds, 0.999, rng_seed=0)

    def test_empty_seed(self):
        ds = StreamDataset(features=np.arange(10.0)[:, None], labels=np.ones((10, 2)))
        with pytest.raises(ConfigError):
            split_seed(ds, 0.01, rng_seed=0)

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.5])
    def test_fraction_out_of_range(self, tiny_dataset, fraction):
        with pytest.raises(ConfigError):
            split_seed(tiny_dataset, fraction, rng_seed=0)


class TestGenerateSynthetic:
    """Test the synthetic stream generator."""

    def test_shapes(self):
        ds = generate_synthetic(SynthConfig(n=2000, p=20, q=8, latent_dim=4))
        assert (ds.n, ds.p, ds.q) == (2000, 20, 8)
        assert 0.0 < dataset_stats(ds).cardinality < 8.0

    def test_deterministic(self, small_synth_config):
        a = generate_synthetic(small_synth_config)
        b = generate_synthetic(small_synth_config)
        assert a.equals(b)

    def test_different_seeds_differ(self, small_synth_config):
        other = small_synth_config.model_copy(update={"rng_seed": 8})
        assert not generate_synthetic(small_synth_config).equals(generate_synthetic(other))

    def test_huge_threshold_gives_no_labels(self):
        cfg = SynthConfig(n=50, p=4, q=4, latent_dim=4, noise_std=0.0, label_threshold=1e9)
        assert generate_synthetic(cfg).labels.sum() == 0

    def test_noise_free_labels_follow_features(self):
        cfg = SynthConfig(n=200, p=10, q=5, latent_dim=3, noise_std=0.0, rng_seed=4)
        ds = generate_synthetic(cfg)
        B, W = synthetic_factors(cfg)
        Z = np.linalg.lstsq(B, ds.features.T, rcond=None)[0].T
        recovered = (Z @ W.T > cfg.label_threshold).astype(np.int8)
        # only scores sitting on the threshold could flip
        scores = Z @ W.T
        stable = np.abs(scores - cfg.label_threshold) > 1e-8
        assert np.array_equal(recovered[stable], ds.labels[stable])

    def test_latent_dim_too_large(self):
        with pytest.raises(ValueError):
            SynthConfig(n=20, p=3, q=8, latent_dim=4)

    def test_presets(self):
        cfg = synth_preset("emotions", rng_seed=2)
        assert (cfg.n, cfg.p, cfg.q, cfg.rng_seed) == (593, 72, 6, 2)
        with pytest.raises(KeyError):
            synth_preset("corel5k")


class TestDatasetStats:
    """Test dataset statistics."""

    def test_tiny(self, tiny_dataset):
        stats = dataset_stats(tiny_dataset)
        assert stats.n == 6
        assert stats.cardinality == pytest.approx(10 / 6)
        assert stats.density == pytest.approx(10 / 18)
        assert stats.distinct_labelsets == 6
