"""File formats: MatrixMarket matrices, plain-text vectors, ASCII PGM images."""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse


def read_matrix(path) -> np.ndarray:
    """Dense array from a MatrixMarket file (coordinate or array format)."""
    A = scipy.io.mmread(path)
    if scipy.sparse.issparse(A):
        A = A.toarray()
    A = np.asarray(A)
    if np.iscomplexobj(A):
        raise ValueError("complex matrices are not supported")
    return np.atleast_2d(A.astype(float))


def write_matrix(path, A, sparse: bool = False) -> None:
    A = np.asarray(A, dtype=float)
    scipy.io.mmwrite(path, scipy.sparse.coo_matrix(A) if sparse else A)


def read_vector(path) -> np.ndarray:
    """One decimal per line; blank lines and ``#`` comments are ignored."""
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                vals.append(float(line))
    return np.array(vals)


def write_vector(path, x) -> None:
    with open(path, "w") as fh:
        for v in np.ravel(x):
            fh.write(f"{float(v)!r}\n")


def write_pgm(path, image, maxval: int = 255) -> None:
    """ASCII PGM (P2) with linear min-max scaling to ``0..maxval``."""
    img = np.asarray(image, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        q = np.rint((img - lo) / (hi - lo) * maxval).astype(int)
    else:
        q = np.zeros(img.shape, dtype=int)
    h, w = img.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n{maxval}\n")
        for row in q:
            fh.write(" ".join(str(v) for v in row) + "\n")


def read_pgm(path) -> np.ndarray:
    """Read an ASCII PGM (P2) into a float array of raw gray levels."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ValueError("not an ASCII PGM (P2) file")
    w, h, _maxval = (int(t) for t in tokens[1:4])
    data = np.array([float(t) for t in tokens[4:]])
    if data.size != w * h:
        raise ValueError(f"expected {w * h} pixels, found {data.size}")
    return data.reshape(h, w)
