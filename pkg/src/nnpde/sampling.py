"""Deterministic collocation, boundary, holdout and supervision point sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class PointSet:
    """Batch of evaluation points plus the quadrature bookkeeping they carry.

    `weight` is the scalar Monte Carlo factor (|domain| / N for interior sets,
    |faces| / N for boundary sets). `quad` holds per-point trapezoid weights
    on holdout grids, where endpoint halving matters.
    """

    points: np.ndarray  # (N, d)
    kind: str  # interior | boundary | holdout | data
    seed: int
    weight: float
    quad: np.ndarray = None
    labels: np.ndarray = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def box_volume(lo, hi) -> float:
    return float(np.prod(np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)))


def box_surface(lo, hi) -> float:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    ext = hi - lo
    total = 0.0
    for i in range(lo.size):
        total += 2.0 * np.prod(np.delete(ext, i)) if lo.size > 1 else 2.0
    return float(total) if lo.size > 1 else 2.0


def sample_interior(lo, hi, n: int, strategy: str = "uniform_grid", seed: int = 0) -> PointSet:
    """Interior collocation points, strictly inside the box.

    uniform_grid: tensor grid with ceil(n^(1/d)) points per axis at
    x_j = lo + j (hi - lo) / (k + 1), excluding the faces. monte_carlo:
    i.i.d. uniform draws from a seeded generator.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    if n < 1:
        raise ConfigurationError("interior point count must be >= 1")
    if strategy == "uniform_grid":
        k = int(np.ceil(n ** (1.0 / d)))
        if k < 2 and d >= 2:
            raise ConfigurationError(
                f"uniform_grid with n={n} gives fewer than 2 points per axis in "
                f"{d}-D; use strategy='monte_carlo'"
            )
        axes = [lo[i] + (hi[i] - lo[i]) * np.arange(1, k + 1) / (k + 1) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    elif strategy == "monte_carlo":
        rng = np.random.default_rng(seed)
        pts = rng.uniform(lo, hi, size=(n, d))
    else:
        raise ConfigurationError(f"unknown sampling strategy {strategy!r}")
    return PointSet(pts, "interior", seed, box_volume(lo, hi) / pts.shape[0])


def sample_boundary(lo, hi, n: int, seed: int = 0) -> PointSet:
    """Boundary points spread evenly over the 2d faces; one pinned coordinate each."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    if n < 2 * d:
        raise ConfigurationError(f"need at least {2 * d} boundary points for {d}-D box")
    rng = np.random.default_rng(seed)
    counts = np.full(2 * d, n // (2 * d))
    counts[: n % (2 * d)] += 1
    chunks = []
    for face in range(2 * d):
        axis, side = divmod(face, 2)
        m = counts[face]
        pts = rng.uniform(lo, hi, size=(m, d))
        pts[:, axis] = lo[axis] if side == 0 else hi[axis]
        chunks.append(pts)
    pts = np.concatenate(chunks, axis=0)
    return PointSet(pts, "boundary", seed, box_surface(lo, hi) / pts.shape[0])


_HOLDOUT_AXIS_POINTS = {1: 1001, 2: 101, 3: 21}


def holdout_grid(lo, hi, seed: int = 0, n_mc: int = 4096) -> PointSet:
    """Dense evaluation grid: inclusive tensor grid for d <= 3, seeded Monte
    Carlo for d in {4, 5}. Carries per-point quadrature weights."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    if d <= 3:
        k = _HOLDOUT_AXIS_POINTS[d]
        axes = [np.linspace(lo[i], hi[i], k) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        quad = np.ones(k)
        quad[0] = quad[-1] = 0.5
        w = quad.copy()
        for _ in range(d - 1):
            w = np.multiply.outer(w, quad)
        h = np.prod((hi - lo) / (k - 1))
        return PointSet(pts, "holdout", seed, box_volume(lo, hi) / pts.shape[0], quad=h * w.ravel())
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n_mc, d))
    w = box_volume(lo, hi) / n_mc
    return PointSet(pts, "holdout", seed, w, quad=np.full(n_mc, w))


def quadrature_grid(lo, hi, n: int, seed: int = 0) -> PointSet:
    """Inclusive tensor grid with composite-trapezoid weights.

    Variational and weak-form losses integrate gradient-quadratic terms that
    do not vanish on the faces; the open collocation grid's flat weights
    carry an O(h) boundary bias there, while the inclusive trapezoid rule is
    O(h^2). Falls back to Monte Carlo (unbiased) above three dimensions.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    if d > 3:
        rng = np.random.default_rng(seed)
        pts = rng.uniform(lo, hi, size=(n, d))
        w = box_volume(lo, hi) / n
        return PointSet(pts, "interior", seed, w, quad=np.full(n, w))
    k = max(2, int(np.ceil(n ** (1.0 / d))) + 2)
    axes = [np.linspace(lo[i], hi[i], k) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    aw = np.ones(k)
    aw[0] = aw[-1] = 0.5
    w = aw.copy()
    for _ in range(d - 1):
        w = np.multiply.outer(w, aw)
    h = np.prod((hi - lo) / (k - 1))
    return PointSet(pts, "interior", seed, box_volume(lo, hi) / pts.shape[0], quad=h * w.ravel())


def data_subset(source: PointSet, evaluate, fraction: float) -> PointSet:
    """First floor(fraction * N) points of `source` in lexicographic coordinate
    order, labeled with the exact solution."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigurationError("data fraction must lie in (0, 1]")
    n = len(source)
    m = int(np.floor(fraction * n))
    if m < 1:
        raise ConfigurationError(f"data fraction {fraction} of {n} points is empty")
    order = np.lexsort(source.points.T[::-1])  # primary key: first coordinate
    pts = source.points[order[:m]]
    return PointSet(
        pts,
        "data",
        source.seed,
        source.weight * n / m,
        labels=np.asarray(evaluate(pts), dtype=float),
    )


def default_counts(dim: int) -> tuple:
    """(interior, boundary) collocation counts used by the benchmark presets."""
    return (1000 if dim <= 2 else 4096), 200


def default_strategy(dim: int) -> str:
    return "uniform_grid" if dim <= 3 else "monte_carlo"
