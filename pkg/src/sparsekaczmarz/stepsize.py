"""Stepsize rules for the dual update ``z <- z - t * A_l^T r``.

* ``exact``: the ``t`` that makes the shrunk iterate satisfy the touched
  equation exactly (single rows only).
* ``dynamic``: ``t = ||r||^2 / ||A_l^T r||^2``; on a single row this is
  the classical Kaczmarz step ``1 / ||a||^2``.
* ``constant``: ``t = ||A_l||_2^{-2}``, cached per block.
"""

from __future__ import annotations

import numpy as np

from .errors import InconsistentBlock, ZeroBlock, ZeroRow

KINDS = ("exact", "dynamic", "constant")


def _line_coefficients(z, a, lam, t):
    """Intercept and slope of ``g(s) = a^T S_lam(z - s a)`` on the piece containing ``t``."""
    y = z - t * a
    act = np.abs(y) > lam
    sgn = np.sign(y[act])
    aa = a[act]
    return float(aa @ (z[act] - lam * sgn)), -float(aa @ aa)


def exact_step(z, a, beta: float, lam: float) -> float:
    """Solve ``a^T S_lam(z - t a) = beta`` for ``t``.

    ``g(t) = a^T S_lam(z - t a)`` is continuous, piecewise linear and
    nonincreasing, unbounded in both directions. Each component with
    ``a_i != 0`` is dead on ``[(z_i - lam s_i) / a_i, (z_i + lam s_i) / a_i]``
    with ``s_i = sign(a_i)`` and contributes a line of slope ``-a_i^2``
    elsewhere, so sorting the ``2n`` breakpoints and accumulating
    intercept/slope changes gives ``g`` at every breakpoint in O(n log n).
    When ``g`` equals ``beta`` on a whole interval the left end is returned.
    """
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    nz = a != 0.0
    if not nz.any():
        raise ZeroRow("exact stepsize needs a nonzero row")
    zi, ai = z[nz], a[nz]
    si = np.sign(ai)
    left = (zi - lam * si) / ai
    right = (zi + lam * si) / ai

    # leaving the left line at `left`, entering the right line at `right`
    events = np.concatenate([left, right])
    d_icpt = np.concatenate([-ai * (zi - lam * si), ai * (zi + lam * si)])
    d_slope = np.concatenate([ai * ai, -ai * ai])
    order = np.argsort(events, kind="stable")
    events = events[order]

    icpt0 = float(ai @ (zi - lam * si))
    slope0 = -float(ai @ ai)
    icpt = icpt0 + np.cumsum(d_icpt[order])
    slope = slope0 + np.cumsum(d_slope[order])
    # g at each event, evaluated with the line valid just before it
    icpt_before = np.concatenate([[icpt0], icpt[:-1]])
    slope_before = np.concatenate([[slope0], slope[:-1]])
    g = icpt_before + slope_before * events

    j = int(np.searchsorted(-g, -beta, side="left"))
    if j == 0:
        probe = events[0] - 1.0
    elif j == len(events):
        probe = events[-1] + 1.0
    else:
        lo, hi = events[j - 1], events[j]
        if hi <= lo:
            return float(hi)
        probe = 0.5 * (lo + hi)

    # recompute the line exactly from the active set on that piece
    c, s = _line_coefficients(z, a, lam, probe)
    if s == 0.0:
        return float(events[j])
    t = (beta - c) / s
    if 0 < j < len(events):
        t = min(max(t, events[j - 1]), events[j])
    elif j == 0:
        t = min(t, events[0])
    else:
        t = max(t, events[-1])
    return float(t)


def dynamic_step(block_rows, block_rhs, x) -> float:
    """``||r||^2 / ||A^T r||^2`` for ``r = A x - b``; 0 when ``r = 0``."""
    A = np.atleast_2d(np.asarray(block_rows, dtype=float))
    r = A @ x - np.atleast_1d(block_rhs)
    rr = float(r @ r)
    if rr == 0.0:
        return 0.0
    g = r @ A
    gg = float(g @ g)
    if gg == 0.0:
        raise InconsistentBlock("block residual is orthogonal to the block's row space")
    return rr / gg


def spectral_norm_sq(A, rtol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of ``A^T A`` by power iteration on the smaller Gram matrix."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    G = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    if not np.any(G):
        raise ZeroBlock("block is identically zero")
    v = np.random.default_rng(0).standard_normal(G.shape[0]) + 1.0
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


def constant_step(block_rows) -> float:
    return 1.0 / spectral_norm_sq(block_rows)


class StepsizeRule:
    """Chosen stepsize kind plus the per-block cache used by ``constant``."""

    def __init__(self, kind: str = "dynamic"):
        if kind not in KINDS:
            raise ValueError(f"unknown stepsize kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self._constants: dict = {}

    def __repr__(self):
        return f"StepsizeRule({self.kind!r})"

    def constant(self, key, block_rows) -> float:
        t = self._constants.get(key)
        if t is None:
            t = self._constants[key] = constant_step(block_rows)
        return t

    def block_step(self, block_rows, block_rhs, x, key=None) -> float:
        if self.kind == "dynamic":
            return dynamic_step(block_rows, block_rhs, x)
        if self.kind == "constant":
            if key is None:
                return constant_step(block_rows)
            return self.constant(key, block_rows)
        raise ValueError("exact stepsizes are only available for single-row steps")
