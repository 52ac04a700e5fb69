"""Deterministic test problems and brute-force reference solvers.

Three generators mirror the experiments the solvers are meant for:
Gaussian compressed sensing with rows arriving one at a time, a
parallel-beam tomography projector for a piecewise-constant phantom, and
blocks of rotated Fourier samples for interferometric imaging. All are
pure functions of their parameters and seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import BadSparsity, NoFeasiblePattern, SingularSystem
from .operators import RowSystem, fourier_rows, grad2d


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def box_muller(rng, size):
    """Standard normals from pairs of uniforms (Box-Muller transform)."""
    k = (size + 1) // 2
    u1 = 1.0 - rng.random(k)  # in (0, 1]
    u2 = rng.random(k)
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return out[:size]


# -- compressed sensing -------------------------------------------------------

def gen_gaussian_cs(n: int, sparsity: int, seed: int = 0):
    """Sparse ground truth plus an endless stream of Gaussian measurements.

    Returns ``(x_true, stream)``; ``stream`` yields ``(a_k, b_k)`` with
    i.i.d. standard normal ``a_k`` and ``b_k = a_k^T x_true``.
    """
    if not 0 < sparsity <= n:
        raise BadSparsity(f"need 0 < sparsity <= n, got sparsity={sparsity}, n={n}")
    rng = _rng(seed)
    support = np.sort(rng.choice(n, size=sparsity, replace=False))
    x_true = np.zeros(n)
    x_true[support] = box_muller(rng, sparsity)
    row_rng = _rng([seed, 1])

    def stream() -> Iterator[tuple[np.ndarray, float]]:
        while True:
            a = box_muller(row_rng, n)
            yield a, float(a @ x_true)

    return x_true, stream()


def take_rows(stream, count: int) -> tuple[np.ndarray, np.ndarray]:
    rows, rhs = [], []
    for _, (a, b) in zip(range(count), stream):
        rows.append(a)
        rhs.append(b)
    return np.array(rows), np.array(rhs)


# -- phantom and tomography ---------------------------------------------------

PHANTOM_LEVELS = (0.0, 0.4, 0.8, 1.0)


def gen_phantom(width: int, height: int) -> np.ndarray:
    """Piecewise-constant, left-right symmetric test image of shape ``(height, width)``.

    Background 0, a centred ellipse at 0.8 covering about 40 % of the
    image, and two rectangles inside it at 0.4 (upper) and 1.0 (lower).
    """
    if width < 8 or height < 8:
        raise ValueError("phantom needs at least 8x8 pixels")
    xs = (np.arange(width) + 0.5 - width / 2) / (width / 2)
    ys = (np.arange(height) + 0.5 - height / 2) / (height / 2)
    X, Y = np.meshgrid(np.abs(xs), ys)
    img = np.zeros((height, width))
    img[(X / 0.8) ** 2 + (Y / 0.64) ** 2 <= 1.0] = 0.8
    img[(X <= 0.4) & (Y >= 0.1) & (Y <= 0.4)] = 0.4
    img[(X <= 0.2) & (Y >= -0.45) & (Y <= -0.15)] = 1.0
    return img


def total_variation(u) -> float:
    g = grad2d(u)
    return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())


def siddon_ray(p0, p1, shape):
    """Pixels crossed by the segment ``p0 -> p1`` and the length inside each.

    The image occupies ``[-w/2, w/2] x [-h/2, h/2]`` with unit pixels;
    pixel ``(i, j)`` spans ``x in [j - w/2, j + 1 - w/2]`` and
    ``y in [i - h/2, i + 1 - h/2]``. Returns flat row-major indices and
    intersection lengths.
    """
    h, w = shape
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    length = float(np.hypot(d[0], d[1]))
    lo = np.array([-w / 2, -h / 2])
    hi = -lo
    a_min, a_max = 0.0, 1.0
    crossings = []
    for ax, npl in ((0, w), (1, h)):
        if abs(d[ax]) < 1e-12:
            if not lo[ax] < p0[ax] < hi[ax]:
                return np.empty(0, dtype=int), np.empty(0)
            continue
        planes = lo[ax] + np.arange(npl + 1)
        alphas = (planes - p0[ax]) / d[ax]
        a_min = max(a_min, alphas.min())
        a_max = min(a_max, alphas.max())
        crossings.append(alphas)
    if a_max <= a_min:
        return np.empty(0, dtype=int), np.empty(0)
    alphas = np.concatenate([[a_min, a_max]] + crossings)
    alphas = np.unique(alphas[(alphas >= a_min) & (alphas <= a_max)])
    seg = np.diff(alphas) * length
    mid = 0.5 * (alphas[1:] + alphas[:-1])
    j = np.floor(p0[0] + mid * d[0] - lo[0]).astype(int)
    i = np.floor(p0[1] + mid * d[1] - lo[1]).astype(int)
    keep = (seg > 1e-12) & (i >= 0) & (i < h) & (j >= 0) & (j < w)
    idx = i[keep] * w + j[keep]
    return idx, seg[keep]


@dataclass
class Ray:
    angle: float
    offset: float
    p0: np.ndarray
    p1: np.ndarray


class ParallelBeamProjector:
    """Parallel-beam ray geometry with exact intersection-length rows.

    Angles are evenly spaced over ``[0, pi)``; detector bins are evenly
    spaced across the image diagonal. Rays that miss the image are
    dropped unless ``drop_empty`` is false.
    """

    def __init__(self, shape, n_angles: int, n_bins: int, drop_empty: bool = True):
        if n_angles < 1 or n_bins < 1:
            raise ValueError("need at least one angle and one detector bin")
        h, w = shape
        self.shape = (h, w)
        diag = float(np.hypot(h, w))
        reach = diag / 2 + 1.0
        offsets = -diag / 2 + (np.arange(n_bins) + 0.5) * diag / n_bins
        rows, rays = [], []
        for theta in np.arange(n_angles) * np.pi / n_angles:
            d = np.array([np.cos(theta), np.sin(theta)])
            nrm = np.array([-d[1], d[0]])
            for s in offsets:
                p0 = s * nrm - reach * d
                p1 = s * nrm + reach * d
                idx, seg = siddon_ray(p0, p1, self.shape)
                if drop_empty and idx.size == 0:
                    continue
                row = np.zeros(h * w)
                np.add.at(row, idx, seg)
                rows.append(row)
                rays.append(Ray(float(theta), float(s), p0, p1))
        self.matrix = np.array(rows).reshape(len(rows), h * w)
        self.rays = rays

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def project(self, image) -> np.ndarray:
        return self.matrix @ np.ravel(image)

    def system(self, image) -> RowSystem:
        return RowSystem.from_dense(self.matrix, self.project(image))


def gen_tomo_system(image_shape, n_angles: int, n_bins: int) -> ParallelBeamProjector:
    """Projector whose ``system(image)`` builds the consistent ``RowSystem``."""
    return ParallelBeamProjector(image_shape, n_angles, n_bins)


# -- interferometry -----------------------------------------------------------

def ri_block_frequencies(image_shape, n_blocks: int, block: int, n_arms: int = 5,
                         offset: int = 0, radial_step: float = 0.5) -> np.ndarray:
    """Integer frequencies sampled by block ``block``.

    The base pattern is ``n_arms`` lines through the origin at angles
    ``pi * j / n_arms``; block ``l`` rotates it by ``l * pi / n_blocks``.
    Points along each line are taken every ``radial_step`` up to the
    Nyquist radius and rounded to the grid; duplicates and conjugate
    mirrors ``-f`` of an included ``f`` are removed within the block.
    Angles are formed from integer numerators so that rotations that
    coincide produce identical sets.
    """
    h, w = image_shape
    rmax = min(h, w) // 2
    denom = n_arms * n_blocks
    radii = np.arange(radial_step, rmax + 1e-9, radial_step)
    radii = np.concatenate([-radii[::-1], [0.0], radii])
    pts = []
    for j in range(n_arms):
        num = (j * n_blocks + block * n_arms + offset) % (2 * denom)
        theta = np.pi * num / denom
        f1 = np.rint(radii * np.sin(theta))
        f2 = np.rint(radii * np.cos(theta))
        pts.append(np.stack([f1, f2], axis=1))
    f = np.concatenate(pts).astype(int)
    f = f[(np.abs(f[:, 0]) <= h // 2) & (np.abs(f[:, 1]) <= w // 2)]
    canon = {}
    for a, b in f:
        key = max((a, b), (-a, -b))
        canon.setdefault(key, None)
    return np.array(sorted(canon), dtype=int).reshape(-1, 2)


@dataclass
class RIScenario:
    x_true: np.ndarray
    blocks: list  # list of (rows, rhs)
    frequencies: list  # per-block integer frequency arrays


def gen_ri_scenario(image_shape, n_blocks: int, samples_per_block: int = 0, seed: int = 0,
                    n_arms: int = 5) -> RIScenario:
    """Phantom ground truth and one block of Fourier row-pairs per rotation.

    ``samples_per_block`` bounds the number of frequencies kept per block
    (0 keeps all of them); ``seed`` picks the base orientation on the
    discrete rotation grid. Row-pairs are flattened into consecutive
    cosine/sine rows.
    """
    if n_blocks < 1:
        raise ValueError("need at least one block")
    h, w = image_shape
    x_true = gen_phantom(w, h)
    offset = int(_rng(seed).integers(2 * n_arms * n_blocks))
    xf = x_true.ravel()
    blocks, freqs = [], []
    for l in range(n_blocks):
        f = ri_block_frequencies(image_shape, n_blocks, l, n_arms, offset)
        if samples_per_block and len(f) > samples_per_block:
            # keep the lowest frequencies, they carry most of the image energy
            order = np.argsort(np.hypot(f[:, 0], f[:, 1]), kind="stable")
            f = f[np.sort(order[:samples_per_block])]
        rows = fourier_rows(image_shape, f).reshape(-1, h * w)
        blocks.append((rows, rows @ xf))
        freqs.append(f)
    return RIScenario(x_true, blocks, freqs)


def ri_lambda(x_true) -> float:
    """Shrinkage level ``1e-4 * ||x_true||_1`` used for interferometric runs."""
    return 1e-4 * float(np.abs(x_true).sum())


# -- oracles ------------------------------------------------------------------

def oracle_min_norm(system: RowSystem, ridge: float = 1e-12) -> np.ndarray:
    """Minimum-norm solution ``A^T (A A^T)^{-1} b`` of a consistent system."""
    A, b = system.rows, system.rhs
    G = A @ A.T
    G = G + ridge * np.trace(G) / max(len(G), 1) * np.eye(len(G))
    if np.linalg.cond(G) > 1e14:
        raise SingularSystem("A A^T is numerically singular")
    return A.T @ np.linalg.solve(G, b)


def _sign_patterns(n: int, chunk: int):
    total = 3 ** n
    powers = 3 ** np.arange(n)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        yield (codes[:, None] // powers) % 3 - 1


def oracle_min_objective(system: RowSystem, lam: float, feas_tol: float = 1e-9,
                         chunk: int = 20_000) -> np.ndarray:
    """Minimiser of ``lam ||x||_1 + 0.5 ||x||^2`` s.t. ``A x = b`` by enumerating
    all ``3^n`` sign patterns.

    For a pattern ``sigma`` with support ``S`` the optimality conditions
    read ``x_S = A_S^T y - lam sigma_S`` and ``A_S x_S = b``, i.e.
    ``A_S A_S^T y = b + lam A_S sigma_S``. Each candidate is kept when
    its signs match ``sigma``, ``|(A^T y)_i| <= lam`` off the support and
    ``A x = b``; the feasible candidate with the smallest objective wins.
    """
    A, b = system.rows, system.rhs
    m, n = A.shape
    if n > 15:
        raise ValueError("sign-pattern enumeration is limited to n <= 15")
    scale = 1.0 + np.linalg.norm(b)
    best, best_val = None, np.inf
    for sig in _sign_patterns(n, chunk):
        mask = sig != 0
        G = np.einsum("ik,pk,jk->pij", A, mask.astype(float), A)
        rhs = b + lam * sig @ A.T
        y = np.einsum("pij,pj->pi", np.linalg.pinv(G, hermitian=True), rhs)
        aty = y @ A
        x = np.where(mask, aty - lam * sig, 0.0)
        tol = 1e-9 * (1.0 + np.abs(x).max(axis=1, keepdims=True))
        ok = np.all(~mask | (sig * x >= -tol), axis=1)
        ok &= np.all(mask | (np.abs(aty) <= lam + 1e-9 * (1 + lam)), axis=1)
        ok &= np.linalg.norm(x @ A.T - b, axis=1) <= feas_tol * scale
        if not ok.any():
            continue
        vals = lam * np.abs(x).sum(axis=1) + 0.5 * (x * x).sum(axis=1)
        vals[~ok] = np.inf
        p = int(np.argmin(vals))
        if vals[p] < best_val:
            best_val, best = vals[p], x[p]
    if best is None:
        raise NoFeasiblePattern("no sign pattern satisfies the optimality conditions")
    return best
