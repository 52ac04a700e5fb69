"""Linear-system containers and the linear operators the iterations apply.

Images are plain ``(height, width)`` float arrays in row-major order.
Vector fields are ``(2, height, width)`` arrays holding the horizontal
(``dx``) and vertical (``dy``) channels.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, FrequencyOutOfRange, ZeroRhs, ZeroRow


class RowSystem:
    """A growable dense system ``A x = b`` stored row by row.

    Rows live in an over-allocated buffer so that online appends are
    amortised O(n). ``rows``, ``rhs`` and ``row_sq_norms`` are views of
    the filled part and must not be written to.
    """

    def __init__(self, n: int, rows=None, rhs=None):
        if n < 1:
            raise DimensionMismatch(f"row length must be positive, got {n}")
        self.n = int(n)
        self._m = 0
        self._A = np.empty((0, self.n))
        self._b = np.empty(0)
        self._sq = np.empty(0)
        if rows is not None:
            self.append(rows, rhs)

    @classmethod
    def from_dense(cls, A, b) -> "RowSystem":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A.shape[1], A, b)

    @property
    def m(self) -> int:
        return self._m

    @property
    def rows(self) -> np.ndarray:
        return self._A[: self._m]

    @property
    def rhs(self) -> np.ndarray:
        return self._b[: self._m]

    @property
    def row_sq_norms(self) -> np.ndarray:
        return self._sq[: self._m]

    def __len__(self) -> int:
        return self._m

    def __repr__(self) -> str:
        return f"RowSystem(m={self._m}, n={self.n})"

    def _reserve(self, m_new: int) -> None:
        cap = self._A.shape[0]
        if m_new <= cap:
            return
        cap = max(m_new, 2 * cap, 8)
        A = np.empty((cap, self.n))
        b = np.empty(cap)
        sq = np.empty(cap)
        A[: self._m] = self.rows
        b[: self._m] = self.rhs
        sq[: self._m] = self.row_sq_norms
        self._A, self._b, self._sq = A, b, sq

    def append(self, new_rows, new_rhs) -> "RowSystem":
        """Append rows in order; existing rows and caches are left untouched."""
        new_rows = np.asarray(new_rows, dtype=float)
        if new_rows.size == 0 and new_rows.ndim < 2:
            new_rows = new_rows.reshape(0, self.n)
        if new_rows.ndim == 1:
            new_rows = new_rows[None, :]
        new_rhs = np.atleast_1d(np.asarray(new_rhs, dtype=float)).ravel()
        if new_rows.ndim != 2 or new_rows.shape[1] != self.n:
            raise DimensionMismatch(
                f"rows must have length {self.n}, got shape {new_rows.shape}"
            )
        if new_rows.shape[0] != new_rhs.shape[0]:
            raise DimensionMismatch(
                f"{new_rows.shape[0]} rows but {new_rhs.shape[0]} rhs entries"
            )
        k = new_rows.shape[0]
        if k == 0:
            return self
        self._reserve(self._m + k)
        sl = slice(self._m, self._m + k)
        self._A[sl] = new_rows
        self._b[sl] = new_rhs
        self._sq[sl] = np.einsum("ij,ij->i", new_rows, new_rows)
        self._m += k
        return self

    def copy(self) -> "RowSystem":
        return RowSystem(self.n, self.rows.copy(), self.rhs.copy())

    def residual(self, x) -> np.ndarray:
        return self.rows @ x - self.rhs

    def residual_norm_rel(self, x) -> float:
        return residual_norm_rel(self, x)


def append_rows(system: RowSystem, new_rows, new_rhs) -> RowSystem:
    return system.append(new_rows, new_rhs)


def residual_norm_rel(system: RowSystem, x) -> float:
    """Relative residual ``||A x - b|| / ||b||``."""
    nb = np.linalg.norm(system.rhs)
    if nb == 0.0:
        raise ZeroRhs("relative residual undefined for b = 0")
    return float(np.linalg.norm(system.residual(x)) / nb)


class BlockPartition:
    """Contiguous partition of row indices ``0..m-1`` into blocks.

    ``offsets`` has ``L + 1`` strictly increasing entries starting at 0;
    block ``l`` covers rows ``offsets[l]:offsets[l + 1]``.
    """

    def __init__(self, offsets: Sequence[int]):
        offsets = [int(o) for o in offsets]
        if not offsets or offsets[0] != 0:
            raise ValueError("offsets must start at 0")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("offsets must be strictly increasing")
        self.offsets = offsets

    @classmethod
    def singletons(cls, m: int) -> "BlockPartition":
        return cls(range(m + 1))

    @classmethod
    def whole(cls, m: int) -> "BlockPartition":
        return cls([0, m] if m > 0 else [0])

    @classmethod
    def from_sizes(cls, sizes: Iterable[int]) -> "BlockPartition":
        return cls(np.concatenate([[0], np.cumsum(list(sizes), dtype=int)]))

    @property
    def n_blocks(self) -> int:
        return len(self.offsets) - 1

    @property
    def m(self) -> int:
        return self.offsets[-1]

    def __len__(self) -> int:
        return self.n_blocks

    def __repr__(self) -> str:
        return f"BlockPartition({self.offsets})"

    def block(self, l: int) -> slice:
        return slice(self.offsets[l], self.offsets[l + 1])

    def sizes(self) -> list[int]:
        return [b - a for a, b in zip(self.offsets, self.offsets[1:])]

    def add_block(self, size: int) -> None:
        if size > 0:
            self.offsets.append(self.offsets[-1] + int(size))

    def extend_last(self, size: int) -> None:
        """Grow the final block (or create the first one) by ``size`` rows."""
        if size <= 0:
            return
        if self.n_blocks == 0:
            self.offsets.append(int(size))
        else:
            self.offsets[-1] += int(size)


def row_project(x, a, beta: float) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the hyperplane ``a^T x = beta``."""
    a = np.asarray(a, dtype=float)
    nrm2 = float(a @ a)
    if nrm2 == 0.0:
        raise ZeroRow("cannot project onto a hyperplane with a zero normal")
    return np.asarray(x, dtype=float) - ((a @ x - beta) / nrm2) * a


def grad2d(u) -> np.ndarray:
    """Forward-difference gradient with a zero last difference (Neumann)."""
    u = np.asarray(u, dtype=float)
    g = np.zeros((2,) + u.shape)
    g[0, :, :-1] = u[:, 1:] - u[:, :-1]
    g[1, :-1, :] = u[1:, :] - u[:-1, :]
    return g


def grad2d_adjoint(p) -> np.ndarray:
    """Exact adjoint of :func:`grad2d` (a negative divergence)."""
    p = np.asarray(p, dtype=float)
    dx, dy = p[0], p[1]
    out = np.zeros(dx.shape)
    out[:, :-1] -= dx[:, :-1]
    out[:, 1:] += dx[:, :-1]
    out[:-1, :] -= dy[:-1, :]
    out[1:, :] += dy[:-1, :]
    return out


def stacked_apply(u, p) -> np.ndarray:
    """Apply ``B = [grad, -I]`` to the pair ``(u, p)``."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) + u.shape:
        raise DimensionMismatch(f"field shape {p.shape} does not match image {u.shape}")
    return grad2d(u) - p


def stacked_adjoint(w) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    if w.ndim != 3 or w.shape[0] != 2:
        raise DimensionMismatch(f"expected a (2, h, w) field, got {w.shape}")
    return grad2d_adjoint(w), -w


def fourier_rows(image_shape, freq_samples) -> np.ndarray:
    """Real and imaginary DFT rows for each integer frequency pair.

    Returns an array of shape ``(k, 2, h*w)``; for frequency ``(f1, f2)``
    the first row dotted with a flattened image gives the real part of
    ``sum u[i, j] exp(-2 pi i (f1 i / h + f2 j / w))`` and the second the
    imaginary part, matching ``numpy.fft.fft2``.

    Frequencies must satisfy ``|f1| <= h // 2`` and ``|f2| <= w // 2``.
    """
    h, w = image_shape
    freqs = np.asarray(freq_samples, dtype=int).reshape(-1, 2)
    bad = (np.abs(freqs[:, 0]) > h // 2) | (np.abs(freqs[:, 1]) > w // 2)
    if bad.any():
        raise FrequencyOutOfRange(
            f"frequency {tuple(freqs[bad][0])} outside the {h}x{w} grid"
        )
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    # reduce the integer phase mod the grid before scaling, keeps the angle in [0, 2pi)
    num = (freqs[:, 0, None] * ii.ravel() * w + freqs[:, 1, None] * jj.ravel() * h) % (h * w)
    theta = -2.0 * np.pi * num / (h * w)
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)
