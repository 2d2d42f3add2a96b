"""Time evolution of psi and Bohmian trajectories through its velocity field.

Periodic grids use Strang split-step Fourier stepping; dirichlet-zero
grids (the box) use Crank-Nicolson with a second-order Laplacian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import bicgstab

from .errors import InvariantViolation, NumericalFailure
from .fields import ComplexField, Grid, PhysicalConstants, ScalarField, integrate_array, node_mask
from .madelung import log_derivatives

_DEFAULT = PhysicalConstants()


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    snapshots: tuple      # ((t, ComplexField), ...)
    dt: float
    scheme: str
    norms: tuple

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def grid(self) -> Grid:
        return self.snapshots[0][1].grid

    def at(self, t: float, atol: float = 1e-9) -> ComplexField:
        for ts, psi in self.snapshots:
            if abs(ts - t) <= atol:
                return psi
        raise KeyError(f"no snapshot at t={t}")

    @property
    def final(self) -> ComplexField:
        return self.snapshots[-1][1]


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    seeds: np.ndarray     # (n, dim)
    times: np.ndarray     # (steps + 1,)
    paths: np.ndarray     # (steps + 1, n, dim); NaN after truncation
    dt: float
    truncated: np.ndarray  # (n,) bool

    def __len__(self):
        return len(self.seeds)


def _check_run(dt, steps, snapshot_every):
    if not dt > 0:
        raise InvariantViolation("evolve: dt > 0", f"got {dt}")
    if steps < 0 or int(steps) != steps:
        raise InvariantViolation("evolve: steps is a non-negative integer", f"got {steps}")
    if snapshot_every < 1:
        raise InvariantViolation("evolve: snapshot_every >= 1", f"got {snapshot_every}")


def _norm(psi, grid):
    return integrate_array(np.abs(psi) ** 2, grid)


def _potential(V, grid):
    if V is None:
        return np.zeros(grid.shape)
    if V.grid != grid:
        raise InvariantViolation("evolve: potential on the state's grid")
    return np.asarray(V.values, dtype=float)


def _drive(step, psi, grid, dt, steps, snapshot_every, t0):
    snaps = [(t0, ComplexField(grid, psi))]
    norms = [_norm(psi, grid)]
    for n in range(1, steps + 1):
        psi = step(psi)
        if n % snapshot_every == 0 or n == steps:
            snaps.append((t0 + n * dt, ComplexField(grid, psi)))
            norms.append(_norm(psi, grid))
    return snaps, norms


def split_step_evolve(psi0: ComplexField, V: ScalarField | None, dt: float, steps: int,
                      snapshot_every: int = 1, constants: PhysicalConstants = _DEFAULT,
                      t0: float = 0.0) -> EvolutionResult:
    """Strang splitting: half potential kick, exact kinetic drift in k-space,
    half potential kick."""
    grid = psi0.grid
    if not grid.periodic:
        raise InvariantViolation("split_step_evolve: periodic grid (use crank_nicolson_evolve)")
    _check_run(dt, steps, snapshot_every)
    c = constants
    ks = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(n, d=h)
                       for n, h in zip(grid.points, grid.spacing)], indexing="ij")
    k2 = sum(k**2 for k in ks)
    drift = np.exp(-1j * c.hbar * k2 * dt / (2 * c.mass))
    Vv = _potential(V, grid)
    has_v = bool(np.any(Vv != 0))
    kick = np.exp(-0.5j * Vv * dt / c.hbar)

    def step(psi):
        if has_v:
            psi = kick * psi
        psi = np.fft.ifftn(drift * np.fft.fftn(psi))
        if has_v:
            psi = kick * psi
        return psi

    snaps, norms = _drive(step, psi0.values.copy(), grid, dt, steps, snapshot_every, t0)
    return EvolutionResult(tuple(snaps), dt, "split_step", tuple(norms))


def _cn_step_1d(grid, Vv, dt, c):
    n = grid.points[0] - 2
    h = grid.spacing[0]
    kin = c.hbar**2 / (2 * c.mass * h**2)
    diag = 2 * kin + Vv[1:-1]
    off = -kin
    alpha = 0.5j * dt / c.hbar
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = alpha * off
    ab[1] = 1 + alpha * diag
    ab[2, :-1] = alpha * off

    def step(psi):
        u = psi[1:-1]
        rhs = (1 - alpha * diag) * u
        rhs[1:] -= alpha * off * u[:-1]
        rhs[:-1] -= alpha * off * u[1:]
        out = np.zeros_like(psi)
        out[1:-1] = solve_banded((1, 1), ab, rhs)
        return out

    return step


def _cn_step_2d(grid, Vv, dt, c, rtol, maxiter):
    n0, n1 = (n - 2 for n in grid.points)
    h0, h1 = grid.spacing

    def lap1(n, h):
        return sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2

    L = sp.kron(lap1(n0, h0), sp.eye(n1)) + sp.kron(sp.eye(n0), lap1(n1, h1))
    H = (-c.hbar**2 / (2 * c.mass)) * L + sp.diags(Vv[1:-1, 1:-1].ravel())
    alpha = 0.5j * dt / c.hbar
    I = sp.eye(n0 * n1)
    A = (I + alpha * H).tocsr()
    B = (I - alpha * H).tocsr()

    def step(psi):
        u = psi[1:-1, 1:-1].ravel()
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = bicgstab(A, B @ u, x0=u, rtol=rtol, atol=0.0, maxiter=maxiter, callback=cb)
        if info != 0:
            raise NumericalFailure("crank_nicolson_evolve: BiCGSTAB did not converge", count[0])
        out = np.zeros_like(psi)
        out[1:-1, 1:-1] = x.reshape(n0, n1)
        return out

    return step


def crank_nicolson_evolve(psi0: ComplexField, V: ScalarField | None, dt: float, steps: int,
                          snapshot_every: int = 1, constants: PhysicalConstants = _DEFAULT,
                          t0: float = 0.0, rtol: float = 1e-13,
                          maxiter: int = 1000) -> EvolutionResult:
    """Implicit midpoint stepping with psi = 0 on the walls.

    1D systems are solved with a banded direct solver, 2D systems with
    BiCGSTAB; a 2D solve that fails to converge raises NumericalFailure
    carrying the iteration count.
    """
    grid = psi0.grid
    if grid.periodic:
        raise InvariantViolation("crank_nicolson_evolve: dirichlet-zero grid")
    _check_run(dt, steps, snapshot_every)
    Vv = _potential(V, grid)
    if grid.dim == 1:
        step = _cn_step_1d(grid, Vv, dt, constants)
    else:
        step = _cn_step_2d(grid, Vv, dt, constants, rtol, maxiter)
    psi = psi0.values.copy()
    snaps, norms = _drive(step, psi, grid, dt, steps, snapshot_every, t0)
    return EvolutionResult(tuple(snaps), dt, "crank_nicolson", tuple(norms))


# --- trajectories ------------------------------------------------------------

def current_velocity(psi: ComplexField, constants: PhysicalConstants = _DEFAULT) -> list:
    """(hbar/m) Im(conj psi grad psi)/|psi|^2 per axis, NaN on masked points."""
    mask = node_mask(np.abs(psi.values) ** 2, constants.node_epsilon)
    _, im = log_derivatives(psi.values, psi.grid, mask)
    return [constants.hbar / constants.mass * i for i in im]


def _interp(grid: Grid, arr: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of ``arr`` at positions (n, dim).

    Outside a dirichlet-zero domain the result is NaN.
    """
    idx0, fracs = [], []
    outside = np.zeros(len(pos), dtype=bool)
    for ax in range(grid.dim):
        lo = grid.extents[ax][0]
        s = (pos[:, ax] - lo) / grid.spacing[ax]
        n = grid.points[ax]
        if grid.periodic:
            s = np.mod(s, n)
        else:
            outside |= (s < 0) | (s > n - 1)
            s = np.clip(s, 0, n - 1 - 1e-12)
        i = np.floor(s).astype(int)
        idx0.append(i)
        fracs.append(s - i)
    out = np.zeros(len(pos))
    for corner in range(2 ** grid.dim):
        w = np.ones(len(pos))
        ind = []
        for ax in range(grid.dim):
            bit = (corner >> ax) & 1
            i = idx0[ax] + bit
            if grid.periodic:
                i = np.mod(i, grid.points[ax])
            else:
                i = np.minimum(i, grid.points[ax] - 1)
            ind.append(i)
            w = w * (fracs[ax] if bit else 1 - fracs[ax])
        out += w * arr[tuple(ind)]
    out[outside] = np.nan
    return out


def _wrap(grid, pos):
    if not grid.periodic:
        return pos
    out = pos.copy()
    for ax, (lo, hi) in enumerate(grid.extents):
        out[:, ax] = lo + np.mod(out[:, ax] - lo, hi - lo)
    return out


def bohmian_trajectories(result: EvolutionResult, seeds, constants: PhysicalConstants = _DEFAULT,
                         step: float | None = None) -> TrajectorySet:
    """Integrate dx/dt = v(x, t) with classical RK4.

    Velocities come from the snapshots through linear interpolation in
    time and multilinear interpolation in space. A trajectory that meets a
    masked (near-node) point is truncated and flagged; seeds starting on a
    masked point are rejected.
    """
    grid = result.grid
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if grid.dim == 1 and seeds.shape[0] == 1 and seeds.shape[1] != 1:
        seeds = seeds.T
    if seeds.shape[1] != grid.dim:
        raise InvariantViolation("bohmian_trajectories: seeds have one coordinate per axis")
    times = result.times
    if len(times) < 2:
        raise InvariantViolation("bohmian_trajectories: at least two snapshots")
    spacing = float(np.max(np.diff(times)))
    h = spacing if step is None else float(step)
    if h < spacing * (1 - 1e-9):
        raise InvariantViolation("bohmian_trajectories: trajectory step >= snapshot spacing",
                                 f"step {h}, spacing {spacing}")
    vel = [current_velocity(psi, constants) for _, psi in result.snapshots]

    def velocity(t, pos):
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        theta = (t - times[k]) / (times[k + 1] - times[k])
        return np.stack([(1 - theta) * _interp(grid, vel[k][ax], pos)
                         + theta * _interp(grid, vel[k + 1][ax], pos)
                         for ax in range(grid.dim)], axis=1)

    v0 = velocity(times[0], seeds)
    if np.any(np.isnan(v0)):
        raise InvariantViolation("bohmian_trajectories: seeds outside masked regions",
                                 f"{int(np.isnan(v0).any(axis=1).sum())} seeds rejected")
    nsteps = int(round((times[-1] - times[0]) / h))
    ts = times[0] + h * np.arange(nsteps + 1)
    paths = np.full((nsteps + 1, len(seeds), grid.dim), np.nan)
    paths[0] = seeds
    alive = np.ones(len(seeds), dtype=bool)
    pos = seeds.copy()
    for n in range(nsteps):
        t = ts[n]
        k1 = velocity(t, pos)
        k2 = velocity(t + h / 2, pos + h / 2 * k1)
        k3 = velocity(t + h / 2, pos + h / 2 * k2)
        k4 = velocity(t + h, pos + h * k3)
        new = pos + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        bad = np.isnan(new).any(axis=1)
        alive &= ~bad
        pos = np.where(alive[:, None], _wrap(grid, np.nan_to_num(new)), np.nan)
        paths[n + 1] = pos
    return TrajectorySet(seeds, ts, paths, h, ~alive)


def sample_positions(p: ScalarField, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` positions from a 1D density by inverse-CDF sampling."""
    if p.grid.dim != 1:
        raise InvariantViolation("sample_positions: 1D density")
    rng = np.random.default_rng(seed)
    x = p.grid.axes()[0]
    cdf = cdf_on_grid(p)
    u = rng.uniform(0.0, 1.0, size=count)
    return np.interp(u, cdf, x)


def cdf_on_grid(p: ScalarField) -> np.ndarray:
    """Cumulative trapezoidal integral of a 1D density, scaled to end at 1."""
    v = p.values
    h = p.grid.spacing[0]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * h)])
    return cdf / cdf[-1]
