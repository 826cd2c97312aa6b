import json

import numpy as np
import pytest

from pertcs.io import atomic_write_text, read_manifest, read_matrix, read_vector, write_matrix, write_vector


def test_matrix_round_trip_with_manifest(tmp_path, rng):
    M = rng.normal(size=(3, 5))
    path = tmp_path / "A.csv"
    write_matrix(path, M, ensemble="gaussian", seed=4, scale=1 / 3)
    np.testing.assert_array_equal(read_matrix(path), M)  # 17 digits round-trip exactly
    assert read_manifest(path) == {"m": 3, "n": 5, "ensemble": "gaussian", "seed": 4, "scale": 1 / 3}
    assert len(path.read_text().splitlines()) == 3


def test_vector_round_trip(tmp_path, rng):
    v = rng.normal(size=7)
    write_vector(tmp_path / "b.csv", v)
    np.testing.assert_array_equal(read_vector(tmp_path / "b.csv"), v)


def test_manifest_shape_mismatch_is_rejected(tmp_path):
    path = tmp_path / "A.csv"
    write_matrix(path, np.ones((2, 2)))
    (tmp_path / "A.json").write_text(json.dumps({"m": 3, "n": 2}))
    with pytest.raises(ValueError, match="manifest"):
        read_matrix(path)


def test_matrix_without_manifest_is_accepted(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("1,0\n0,1\n")
    np.testing.assert_array_equal(read_matrix(path), np.eye(2))


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "out" / "x.txt", "hello\n")
    assert [p.name for p in (tmp_path / "out").iterdir()] == ["x.txt"]
