"""File format round-trips, validation errors, and config parsing."""

from __future__ import annotations

import numpy as np
import pytest

from cdem.errors import ConfigError, DataError, FormatError
from cdem.matio import (
    MAGIC,
    DomainPair,
    load_config,
    load_domain_pair,
    load_eval_labels,
    read_labels,
    read_matrix,
    write_labels,
    write_matrix,
)


def test_binary_round_trip_bit_identical(tmp_path):
    rng = np.random.default_rng(11)
    for shape in [(1, 1), (3, 5), (17, 2)]:
        mat = rng.standard_normal(shape)
        path = tmp_path / "mat.cdm"
        write_matrix(mat, path)
        back = read_matrix(path)
        assert back.dtype == np.float64
        assert back.tobytes() == mat.astype("<f8").tobytes()


def test_binary_header_layout(tmp_path):
    mat = np.array([[1.5, -2.0], [0.25, 8.0]])
    path = tmp_path / "mat.cdm"
    write_matrix(mat, path)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 2
    assert len(raw) == 12 + 4 * 8


def test_csv_parse_fixed_example(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n3.0,4.0\n")
    mat = read_matrix(path)
    assert mat.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(5)
    mat = rng.standard_normal((4, 3)) * 1e-7
    path = tmp_path / "m.csv"
    write_matrix(mat, path)
    back = read_matrix(path)
    # repr round-trip keeps every float bit-exact
    assert np.array_equal(back, mat)


def test_empty_matrix_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("\n")
    with pytest.raises(FormatError):
        read_matrix(path)
    with pytest.raises(FormatError):
        write_matrix(np.zeros((0, 3)), tmp_path / "z.cdm")


def test_ragged_csv_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(FormatError):
        read_matrix(path)


def test_non_numeric_csv_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,abc\n")
    with pytest.raises(FormatError):
        read_matrix(path)


def test_truncated_binary_rejected(tmp_path):
    mat = np.ones((3, 3))
    path = tmp_path / "m.cdm"
    write_matrix(mat, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        read_matrix(path)
    path.write_bytes(raw[:7])
    with pytest.raises(FormatError):
        read_matrix(path)


def test_payload_size_mismatch_rejected(tmp_path):
    path = tmp_path / "m.cdm"
    header = MAGIC + (2).to_bytes(4, "little") + (2).to_bytes(4, "little")
    path.write_bytes(header + b"\x00" * 24)
    with pytest.raises(FormatError):
        read_matrix(path)


def test_non_finite_rejected(tmp_path):
    path = tmp_path / "m.cdm"
    write_matrix(np.array([[1.0, 2.0]]), path)
    raw = bytearray(path.read_bytes())
    raw[12:20] = np.array([np.nan]).tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(DataError):
        read_matrix(path)
    with pytest.raises(DataError):
        write_matrix(np.array([[np.inf]]), tmp_path / "x.cdm")


def test_labels_round_trip(tmp_path):
    labels = np.array([0, 3, 1, 1, 2])
    path = tmp_path / "y.txt"
    write_labels(labels, path)
    assert path.read_text() == "0\n3\n1\n1\n2\n"
    assert np.array_equal(read_labels(path), labels)


def test_labels_validation(tmp_path):
    path = tmp_path / "y.txt"
    path.write_text("1\nx\n")
    with pytest.raises(FormatError):
        read_labels(path)
    path.write_text("1\n-2\n")
    with pytest.raises(DataError):
        read_labels(path)
    path.write_text("")
    with pytest.raises(FormatError):
        read_labels(path)


def test_domain_pair_validation():
    xs = np.zeros((4, 3))
    xt = np.zeros((2, 3))
    pair = DomainPair(xs, [0, 1, 0, 1], xt, 2)
    assert pair.n_source == 4 and pair.n_target == 2 and pair.n_features == 3
    assert pair.source_class_counts.tolist() == [2, 2]
    with pytest.raises(DataError):
        DomainPair(xs, [0, 0, 0, 0], xt, 2)  # class 1 missing
    with pytest.raises(DataError):
        DomainPair(xs, [0, 1, 0, 2], xt, 2)  # label out of range
    with pytest.raises(DataError):
        DomainPair(xs, [0, 1, 0], xt, 2)  # label count mismatch
    with pytest.raises(DataError):
        DomainPair(xs, [0, 1, 0, 1], np.zeros((2, 4)), 2)  # width mismatch
    with pytest.raises(DataError):
        DomainPair(xs, [0, 0, 0, 0], xt, 1)  # single class


def _write_task(tmp_path, n_classes=2):
    rng = np.random.default_rng(0)
    xs = rng.standard_normal((6, 4))
    ys = np.array([0, 1] * 3)
    xt = rng.standard_normal((5, 4))
    yt = np.array([0, 1, 0, 1, 0])
    write_matrix(xs, tmp_path / "xs.cdm")
    write_labels(ys, tmp_path / "ys.txt")
    write_matrix(xt, tmp_path / "xt.cdm")
    write_labels(yt, tmp_path / "yt.txt")


def test_config_parse_and_load(tmp_path):
    _write_task(tmp_path)
    cfg_path = tmp_path / "exp.txt"
    cfg_path.write_text(
        "# comment\n"
        "source_features=xs.cdm\n"
        "source_labels=ys.txt\n"
        "target_features=xt.cdm\n"
        "target_labels=yt.txt\n"
        "pca_dim=4\n"
        "subspace_dim=2\n"
        "iterations=3\n"
        "lambda=0.5\n"
        "normalize=false\n"
    )
    config = load_config(cfg_path)
    assert config.pca_dim == 4 and config.subspace_dim == 2
    assert config.lam == 0.5
    assert config.normalize is False
    assert config.beta == 0.1  # default untouched
    pair = load_domain_pair(config)
    assert pair.n_source == 6 and pair.n_target == 5 and pair.n_classes == 2
    labels = load_eval_labels(config, pair)
    assert labels is not None and labels.tolist() == [0, 1, 0, 1, 0]


def test_config_rejects_unknown_and_duplicate_keys(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("bogus_key=1\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("pca_dim=4\npca_dim=8\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("subspace_dim=8\npca_dim=4\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("iterations=0\n")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("beta=-0.5\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_registry_tasks(tmp_path):
    _write_task(tmp_path)
    cfg_path = tmp_path / "exp.txt"
    cfg_path.write_text(
        "dataset.S.features=xs.cdm\n"
        "dataset.S.labels=ys.txt\n"
        "dataset.T.features=xt.cdm\n"
        "dataset.T.labels=yt.txt\n"
        "pca_dim=4\nsubspace_dim=2\n"
    )
    config = load_config(cfg_path)
    pair = load_domain_pair(config, "S-T")
    assert pair.n_source == 6 and pair.n_target == 5
    labels = load_eval_labels(config, pair, "S-T")
    assert labels is not None
    with pytest.raises(ConfigError):
        load_domain_pair(config, "S-X")
    with pytest.raises(ConfigError):
        load_domain_pair(config)  # no explicit paths in this file


def test_eval_labels_validated(tmp_path):
    _write_task(tmp_path)
    (tmp_path / "yt.txt").write_text("0\n1\n0\n1\n7\n")
    cfg_path = tmp_path / "exp.txt"
    cfg_path.write_text(
        "source_features=xs.cdm\nsource_labels=ys.txt\n"
        "target_features=xt.cdm\ntarget_labels=yt.txt\n"
        "pca_dim=4\nsubspace_dim=2\n"
    )
    config = load_config(cfg_path)
    pair = load_domain_pair(config)
    with pytest.raises(DataError):
        load_eval_labels(config, pair)
