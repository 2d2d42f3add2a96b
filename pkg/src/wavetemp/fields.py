"""Uniform grids, sampled fields and the differential/integral toolkit.

Periodic grids are differentiated spectrally; ``dirichlet-zero`` grids use
fourth-order finite-difference stencils (central in the interior, one-sided
near the two ends of each axis). Integration is the rectangle rule on
periodic grids and the trapezoidal rule otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import InvariantViolation

PERIODIC = "periodic"
DIRICHLET = "dirichlet-zero"
BOUNDARIES = (PERIODIC, DIRICHLET)

MAX_POINTS = 2**22
MIN_POINTS = 8


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    dim: int
    extents: tuple
    points: tuple
    boundary: str
    max_points: int = MAX_POINTS

    def __post_init__(self):
        extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        points = tuple(int(n) for n in self.points)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "points", points)
        if self.dim not in (1, 2):
            raise InvariantViolation("Grid: dim in {1, 2}", f"got {self.dim}")
        if len(extents) != self.dim or len(points) != self.dim:
            raise InvariantViolation("Grid: one extent and point count per axis")
        if self.boundary not in BOUNDARIES:
            raise InvariantViolation("Grid: boundary in {periodic, dirichlet-zero}",
                                     f"got {self.boundary!r}")
        for lo, hi in extents:
            if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
                raise InvariantViolation("Grid: max > min per axis", f"got ({lo}, {hi})")
        for n in points:
            if n < MIN_POINTS:
                raise InvariantViolation("Grid: points >= 8 per axis", f"got {n}")
        if int(np.prod(points)) > self.max_points:
            raise InvariantViolation("Grid: total points <= cap",
                                     f"{int(np.prod(points))} > {self.max_points}")

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def spacing(self) -> tuple:
        if self.periodic:
            return tuple((hi - lo) / n for (lo, hi), n in zip(self.extents, self.points))
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.extents, self.points))

    @property
    def shape(self) -> tuple:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> tuple:
        """Coordinate arrays, one per axis."""
        return tuple(lo + h * np.arange(n)
                     for (lo, _), h, n in zip(self.extents, self.spacing, self.points))

    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def length(self, axis: int) -> float:
        lo, hi = self.extents[axis]
        return hi - lo


def make_grid(dim: int, extents: Sequence, points: Sequence, boundary: str,
              max_points: int = MAX_POINTS) -> Grid:
    return Grid(dim, tuple(extents), tuple(points), boundary, max_points)


def product_grid(g1: Grid, g2: Grid, max_points: int = MAX_POINTS) -> Grid:
    """The 2D configuration-space grid built from two 1D grids."""
    if g1.dim != 1 or g2.dim != 1:
        raise InvariantViolation("product grid: both factors must be 1D")
    if g1.boundary != g2.boundary:
        raise InvariantViolation("product grid: factors must share a boundary type")
    return Grid(2, g1.extents + g2.extents, g1.points + g2.points, g1.boundary, max_points)


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0
    k_b: float = 1.0
    gamma: float | None = None
    node_epsilon: float = 1e-10

    def __post_init__(self):
        for name in ("hbar", "mass", "k_b", "gamma", "node_epsilon"):
            v = getattr(self, name)
            if name == "gamma" and v is None:
                object.__setattr__(self, "gamma", self.hbar**2 / self.mass)
            elif not (np.isfinite(v) and v > 0):
                raise InvariantViolation(f"PhysicalConstants: {name} > 0", f"got {v}")


def _check_shape(grid, values, what):
    values = np.asarray(values)
    if values.shape != grid.shape:
        if values.size == grid.size:
            values = values.reshape(grid.shape)
        else:
            raise InvariantViolation(f"{what}: one value per grid point",
                                     f"got {values.shape}, grid {grid.shape}")
    return values


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        v = _check_shape(self.grid, self.values, "ScalarField")
        object.__setattr__(self, "values", _frozen(v, float))
        if self.mask is not None:
            m = _check_shape(self.grid, self.mask, "ScalarField mask")
            object.__setattr__(self, "mask", _frozen(m, bool))

    @property
    def unmasked(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.grid.shape, dtype=bool)
        return ~self.mask

    def with_mask(self, mask) -> "ScalarField":
        return ScalarField(self.grid, self.values, mask)


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _check_shape(self.grid, self.values, "ComplexField")
        object.__setattr__(self, "values", _frozen(v, complex))

    def density(self) -> ScalarField:
        return ScalarField(self.grid, np.abs(self.values) ** 2)

    def norm(self) -> float:
        return integrate(self.density())

    def normalized(self) -> "ComplexField":
        return ComplexField(self.grid, self.values / np.sqrt(self.norm()))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    components: tuple
    mask: np.ndarray | None = None

    def __post_init__(self):
        comps = tuple(_frozen(_check_shape(self.grid, c, "VectorField"), float)
                      for c in self.components)
        if len(comps) != self.grid.dim:
            raise InvariantViolation("VectorField: dim components",
                                     f"got {len(comps)} for dim {self.grid.dim}")
        object.__setattr__(self, "components", comps)
        if self.mask is not None:
            object.__setattr__(self, "mask", _frozen(_check_shape(self.grid, self.mask, "mask"), bool))

    def norm(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.components))


def sample(grid: Grid, fn: Callable, kind: str = "complex"):
    """Evaluate ``fn`` on the grid coordinates.

    ``fn`` receives one coordinate array per axis. ``kind`` selects the
    returned container: ``"complex"`` or ``"scalar"``.
    """
    vals = fn(*grid.mesh())
    if kind == "complex":
        return ComplexField(grid, vals)
    if kind == "scalar":
        return ScalarField(grid, np.real_if_close(vals))
    raise ValueError(f"unknown field kind {kind!r}")


def node_mask(density: np.ndarray, eps: float) -> np.ndarray:
    """True where the density falls below ``eps`` times its maximum."""
    density = np.asarray(density)
    return density < eps * np.max(density)


# --- finite-difference machinery -------------------------------------------

@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Stencil weights (unit spacing) for the ``order``-th derivative at 0.

    Solves the Taylor moment conditions on the integer ``offsets``.
    """
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    w = np.linalg.solve(A, rhs)
    w.setflags(write=False)
    return w


# stencil offsets per row: first two rows and last two rows use one-sided shapes
_FD_PLAN = {
    1: {"central": (-2, -1, 0, 1, 2), "edge": [(0, 1, 2, 3, 4), (-1, 0, 1, 2, 3)]},
    2: {"central": (-2, -1, 0, 1, 2), "edge": [(0, 1, 2, 3, 4, 5), (-1, 0, 1, 2, 3, 4)]},
}


def _fd_derivative(f: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    f = np.moveaxis(f, axis, 0)
    n = f.shape[0]
    out = np.empty_like(f)
    plan = _FD_PLAN[order]
    c = plan["central"]
    wc = fd_weights(c, order)
    acc = 0
    for k, w in zip(c, wc):
        acc = acc + w * f[2 + k: n - 2 + k]
    out[2:n - 2] = acc
    for row, offs in enumerate(plan["edge"]):
        w = fd_weights(offs, order)
        out[row] = sum(wk * f[row + k] for k, wk in zip(offs, w))
        # mirrored stencil at the far end: f(-x) flips odd derivatives
        sign = (-1) ** order
        out[n - 1 - row] = sign * sum(wk * f[n - 1 - row - k] for k, wk in zip(offs, w))
    return np.moveaxis(out / h**order, 0, axis)


def _spectral_derivative(f: np.ndarray, grid: Grid, axis: int, order: int) -> np.ndarray:
    # real and imaginary parts are differentiated separately so a real
    # input stays exactly real
    if np.iscomplexobj(f):
        return (_spectral_derivative(f.real, grid, axis, order)
                + 1j * _spectral_derivative(f.imag, grid, axis, order))
    n = grid.points[axis]
    k = 2 * np.pi * np.fft.rfftfreq(n, d=grid.spacing[axis])
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * f.ndim
    shape[axis] = mult.size
    return np.fft.irfft(np.fft.rfft(f, axis=axis) * mult.reshape(shape), n=n, axis=axis)


def partial(values: np.ndarray, grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    """Derivative of a real or complex array along one axis."""
    values = np.asarray(values)
    if grid.periodic:
        return _spectral_derivative(values, grid, axis, order)
    return _fd_derivative(values.astype(np.result_type(values, float)), grid.spacing[axis],
                          axis, order)


def grad_arrays(values: np.ndarray, grid: Grid) -> list:
    return [partial(values, grid, ax, 1) for ax in range(grid.dim)]


def laplacian_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(partial(values, grid, ax, 2) for ax in range(grid.dim))


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, tuple(grad_arrays(f.values, f.grid)), f.mask)


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, laplacian_array(f.values, f.grid), f.mask)


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, sum(partial(c, v.grid, ax, 1)
                                   for ax, c in enumerate(v.components)), v.mask)


# --- quadrature --------------------------------------------------------------

@lru_cache(maxsize=64)
def quadrature_weights(grid: Grid) -> np.ndarray:
    w = np.ones(grid.shape)
    for ax, (n, h) in enumerate(zip(grid.points, grid.spacing)):
        wa = np.full(n, h)
        if not grid.periodic:
            wa[0] = wa[-1] = h / 2
        shape = [1] * grid.dim
        shape[ax] = n
        w = w * wa.reshape(shape)
    w.setflags(write=False)
    return w


def integrate_array(values: np.ndarray, grid: Grid) -> float:
    return float(np.sum(quadrature_weights(grid) * np.asarray(values)))


def integrate(f) -> float:
    """Integral of a ScalarField over its grid."""
    return integrate_array(f.values, f.grid)


def is_density(p: ScalarField, tol: float = 1e-8) -> bool:
    return bool(np.all(p.values >= 0) and abs(integrate(p) - 1.0) <= tol)
