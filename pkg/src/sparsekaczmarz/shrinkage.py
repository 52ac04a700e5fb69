"""Shrinkage maps and the regularised objective they belong to."""

import numpy as np


def _check_lambda(lam):
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")


def soft_shrink(z, lam):
    """Componentwise ``max(|z| - lam, 0) * sign(z)``."""
    _check_lambda(lam)
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def nonneg_shrink(z, lam):
    """Soft shrinkage after truncating negative entries: ``max(z - lam, 0)``."""
    _check_lambda(lam)
    return np.maximum(np.asarray(z, dtype=float) - lam, 0.0)


def group_shrink2(p, lam):
    """Two-dimensional shrinkage of a ``(2, h, w)`` field, pixel by pixel.

    Each vector ``v`` is scaled to length ``max(|v| - lam, 0)``; the zero
    vector stays zero.
    """
    _check_lambda(lam)
    p = np.asarray(p, dtype=float)
    mag = np.sqrt(p[0] ** 2 + p[1] ** 2)
    scale = np.zeros_like(mag)
    nz = mag > lam
    scale[nz] = (mag[nz] - lam) / mag[nz]
    return p * scale


def shrink(z, lam, mode="signed"):
    if mode == "signed":
        return soft_shrink(z, lam)
    if mode == "nonnegative":
        return nonneg_shrink(z, lam)
    raise ValueError(f"unknown shrink mode {mode!r}")


def objective(x, lam):
    """``lam * ||x||_1 + 0.5 * ||x||_2^2``."""
    x = np.asarray(x, dtype=float)
    return float(lam * np.abs(x).sum() + 0.5 * (x * x).sum())


def tv_objective(u, p, lam):
    """Split TV objective ``lam * sum |p| + 0.5 * (||u||^2 + ||p||^2)``."""
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    mag = np.sqrt(p[0] ** 2 + p[1] ** 2)
    return float(lam * mag.sum() + 0.5 * ((u * u).sum() + (p * p).sum()))


def conjugate_value(z, lam):
    """Convex conjugate of :func:`objective`: ``0.5 * ||soft_shrink(z)||^2``."""
    s = soft_shrink(z, lam)
    return float(0.5 * (s * s).sum())
