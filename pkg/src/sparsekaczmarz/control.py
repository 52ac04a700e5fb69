"""Control sequences: which row or block the next iteration touches.

Indices are 0-based. Random modes draw from numpy's PCG64 generator
seeded once per :class:`Control`, so a (mode, seed, append history)
triple fully determines the emitted stream.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptySystem

MODES = ("cyclic", "uniform_random", "rownorm_weighted", "newest_first_cyclic")


class Control:
    """Index generator over a (possibly growing) range ``0..m-1``.

    ``cyclic`` fixes the sweep length when a sweep starts; indices added
    mid-sweep join on the next wrap. ``newest_first_cyclic`` emits the
    most recently appended index right after each :meth:`grow`, then
    restarts a cyclic sweep at index 0.
    """

    def __init__(self, mode: str = "cyclic", m: int = 0, seed: int = 0, weights=None):
        if mode not in MODES:
            raise ValueError(f"unknown control mode {mode!r}; expected one of {MODES}")
        self.mode = mode
        self.seed = seed
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.m = 0
        self.k = 0
        self._cursor = 0
        self._sweep_len = 0
        self._pending_newest = None
        self._weights = np.empty(0)
        self._cum = None
        if m:
            self.grow(m, weights)
            self._pending_newest = None

    def grow(self, m: int, weights=None) -> None:
        """Register that the index range now has ``m`` entries.

        ``weights`` holds the sampling weights (squared norms) of all
        ``m`` indices and is required for ``rownorm_weighted``.
        """
        if m < self.m:
            raise ValueError("the index range can only grow")
        if self.mode == "rownorm_weighted":
            if weights is None:
                raise ValueError("rownorm_weighted needs per-index weights")
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (m,):
                raise ValueError(f"expected {m} weights, got shape {weights.shape}")
            self._weights = weights.copy()
            self._cum = np.cumsum(weights)
        if m > self.m:
            self._pending_newest = m - 1
            if self.mode == "newest_first_cyclic":
                self._cursor = 0
        self.m = m
        if self._sweep_len == 0:
            self._sweep_len = m

    def next_index(self) -> int:
        if self.m == 0:
            raise EmptySystem("no indices to choose from")
        mode = self.mode
        if mode == "cyclic":
            if self._cursor >= self._sweep_len:
                self._cursor = 0
                self._sweep_len = self.m
            i = self._cursor
            self._cursor += 1
        elif mode == "newest_first_cyclic":
            if self._pending_newest is not None:
                i = self._pending_newest
                self._pending_newest = None
            else:
                i = self._cursor
                self._cursor = (self._cursor + 1) % self.m
        elif mode == "uniform_random":
            i = int(self.rng.integers(self.m))
        else:
            total = self._cum[-1]
            i = int(np.searchsorted(self._cum, self.rng.random() * total, side="right"))
            i = min(i, self.m - 1)
        self.k += 1
        return i


def is_admissible_window(history, m: int) -> bool:
    """True iff every index ``0..m-1`` occurs in ``history``."""
    if m <= 0:
        return True
    seen = np.zeros(m, dtype=bool)
    h = np.asarray(list(history), dtype=int)
    h = h[(h >= 0) & (h < m)]
    seen[h] = True
    return bool(seen.all())
