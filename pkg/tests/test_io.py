import numpy as np
import pytest

from sparsekaczmarz.io import (
    read_matrix,
    read_pgm,
    read_vector,
    write_matrix,
    write_pgm,
    write_vector,
)


@pytest.mark.parametrize("sparse", [False, True])
def test_matrix_round_trip(tmp_path, sparse):
    A = np.random.default_rng(0).standard_normal((4, 6))
    A[1, 2] = 0.0
    path = tmp_path / "a.mtx"
    write_matrix(path, A, sparse=sparse)
    np.testing.assert_array_equal(read_matrix(path), A)


def test_vector_round_trip(tmp_path):
    x = np.array([1.0, -2.5, 1e-17, 3.0 / 7.0])
    path = tmp_path / "x.txt"
    write_vector(path, x)
    np.testing.assert_array_equal(read_vector(path), x)
    path.write_text("# header\n1.5\n\n2 # trailing\n")
    np.testing.assert_array_equal(read_vector(path), [1.5, 2.0])


def test_pgm_round_trip(tmp_path):
    img = np.arange(12.0).reshape(3, 4)
    path = tmp_path / "u.pgm"
    write_pgm(path, img, maxval=11)
    text = path.read_text().splitlines()
    assert text[:3] == ["P2", "4 3", "11"]
    np.testing.assert_array_equal(read_pgm(path), img)
    write_pgm(path, np.ones((2, 2)))
    assert not read_pgm(path).any()


def test_pgm_rejects_garbage(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_text("P5\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        read_pgm(path)
    path.write_text("P2\n2 2\n255\n0 1 2\n")
    with pytest.raises(ValueError):
        read_pgm(path)
