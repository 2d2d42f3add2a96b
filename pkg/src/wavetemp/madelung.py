"""Polar (Madelung) decomposition of a wave function and the hydrodynamic
quantities built on it.

Sign convention: i hbar d/dt psi = H psi and
Q = -(hbar^2 / 2m) lap(sqrt p) / sqrt p, so that the continuity and
Hamilton-Jacobi-Madelung residuals vanish on exact solutions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .fields import (ComplexField, Grid, PhysicalConstants, ScalarField, VectorField,
                     grad_arrays, integrate_array, laplacian_array, node_mask, partial)
from .information import uq_value

_DEFAULT = PhysicalConstants()
MAX_MASKED_FRACTION = 0.5


@dataclass(frozen=True, eq=False)
class PolarPair:
    density: ScalarField
    phase: ScalarField
    mask: np.ndarray
    masked_fraction: float
    hbar: float

    @property
    def grid(self) -> Grid:
        return self.density.grid

    @property
    def phase_reliable(self) -> bool:
        return self.masked_fraction <= MAX_MASKED_FRACTION

    def psi(self) -> ComplexField:
        """sqrt(p) exp(iS/hbar)."""
        return ComplexField(self.grid, np.sqrt(self.density.values)
                            * np.exp(1j * self.phase.values / self.hbar))


@dataclass(frozen=True, eq=False)
class MadelungResiduals:
    continuity_residual: ScalarField
    hjm_residual: ScalarField
    norms: dict


@dataclass(frozen=True)
class HamiltonianTerms:
    kinetic: float
    potential: float
    informational: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.informational


# --- pointwise helpers on psi -----------------------------------------------

def log_derivatives(psi: np.ndarray, grid: Grid, mask: np.ndarray):
    """Per-axis Re and Im of conj(psi) d_i psi / |psi|^2 (NaN on masked points).

    The real part is d_i|psi| / |psi|, the imaginary part d_i S / hbar.
    Neither requires forming |psi| or an unwrapped phase.
    """
    p = np.abs(psi) ** 2
    safe = np.where(mask, 1.0, p)
    re, im = [], []
    for d in grad_arrays(psi, grid):
        z = np.conj(psi) * d / safe
        re.append(np.where(mask, np.nan, z.real))
        im.append(np.where(mask, np.nan, z.imag))
    return re, im


def _unwrap(angle: np.ndarray) -> np.ndarray:
    if angle.ndim == 1:
        return np.unwrap(angle)
    rows = np.unwrap(angle, axis=1)
    # column consistency: align each row's first entry with the unwrapped first column
    col0 = np.unwrap(angle[:, 0])
    shift = np.round((col0 - rows[:, 0]) / (2 * np.pi)) * 2 * np.pi
    return rows + shift[:, None]


def polar_decompose(psi: ComplexField, constants: PhysicalConstants = _DEFAULT) -> PolarPair:
    """Split psi into density and unwrapped phase S (units of action).

    The 2 pi hbar ambiguity of S is fixed so that S takes its principal
    value at the point of maximum density; real positive states get S = 0
    and sqrt(p) exp(iS/hbar) reproduces psi. ``phase_reliable`` on the
    result is False when more than half of the grid is masked.
    """
    vals = psi.values
    p = np.abs(vals) ** 2
    mask = node_mask(p, constants.node_epsilon)
    ang = np.angle(vals)
    unwrapped = _unwrap(ang)
    ref = np.unravel_index(np.argmax(p), p.shape)
    k = np.round((unwrapped[ref] - ang[ref]) / (2 * np.pi))
    S = constants.hbar * (unwrapped - 2 * np.pi * k)
    frac = float(mask.mean())
    return PolarPair(ScalarField(psi.grid, p, mask), ScalarField(psi.grid, S, mask), mask,
                     frac, constants.hbar)


def quantum_potential(field, constants: PhysicalConstants = _DEFAULT,
                      form: str = "root") -> ScalarField:
    """Bohm quantum potential on unmasked points (NaN elsewhere).

    ``field`` is a density ScalarField or a ComplexField psi.
    ``form="root"``: -(hbar^2/2m) lap(sqrt p)/sqrt p. For a ComplexField this
    is evaluated as Re(conj psi lap psi)/|psi|^2 + |Im(conj psi grad psi)|^2/|psi|^4,
    which stays smooth through sign changes of psi.
    ``form="density"``: (hbar^2/8m)(grad p/p)^2 - (hbar^2/4m) lap p / p.
    """
    c = constants
    pref = c.hbar**2 / c.mass
    if isinstance(field, ComplexField):
        psi = field.values
        p = np.abs(psi) ** 2
        mask = node_mask(p, c.node_epsilon)
        if form == "root":
            safe = np.where(mask, 1.0, p)
            _, im = log_derivatives(psi, field.grid, mask)
            curv = (np.conj(psi) * laplacian_array(psi, field.grid)).real / safe
            curv = curv + sum(i**2 for i in im)
            return ScalarField(field.grid, np.where(mask, np.nan, -0.5 * pref * curv), mask)
        field = ScalarField(field.grid, p)
    p = field.values
    if np.any(p < -1e-12):
        raise InvariantViolation("quantum_potential: p >= 0", f"min {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    mask = node_mask(p, c.node_epsilon)
    if field.mask is not None:
        mask = mask | field.mask
    safe = np.where(mask, 1.0, p)
    grid = field.grid
    if form == "root":
        r = np.sqrt(p)
        Q = -0.5 * pref * laplacian_array(r, grid) / np.sqrt(safe)
    elif form == "density":
        g2 = sum(g**2 for g in grad_arrays(p, grid))
        Q = pref / 8 * g2 / safe**2 - pref / 4 * laplacian_array(p, grid) / safe
    else:
        raise ValueError(f"unknown form {form!r}")
    return ScalarField(grid, np.where(mask, np.nan, Q), mask)


def velocity_field(pair: PolarPair, constants: PhysicalConstants = _DEFAULT) -> VectorField:
    """grad S / m on unmasked points.

    grad S is taken through exp(iS/hbar), so phases that grow across a
    periodic domain (moving or spreading packets) differentiate cleanly.
    Check ``pair.phase_reliable`` when most of the grid is masked.
    """
    _, im = log_derivatives(pair.psi().values, pair.grid, pair.mask)
    comps = tuple(constants.hbar / constants.mass * i for i in im)
    return VectorField(pair.grid, comps, pair.mask)


def _norms(r: np.ndarray, keep: np.ndarray, grid: Grid) -> tuple:
    if not keep.any():
        return 0.0, 0.0
    linf = float(np.max(np.abs(r[keep])))
    l2 = float(np.sqrt(integrate_array(np.where(keep, r, 0.0) ** 2, grid)))
    return linf, l2


def madelung_residuals(psi_t0: ComplexField, psi_t1: ComplexField, dt: float,
                       V: ScalarField | None = None,
                       constants: PhysicalConstants = _DEFAULT) -> MadelungResiduals:
    """Continuity and HJM residuals at the midpoint of two states dt apart.

    Time derivatives are centered differences; spatial terms use the
    averaged state (psi_t0 + psi_t1)/2. The probability current and the
    phase increment are formed from psi directly.
    """
    if psi_t0.grid != psi_t1.grid or (V is not None and V.grid != psi_t0.grid):
        raise InvariantViolation("madelung_residuals: matching grids")
    if not dt > 0:
        raise InvariantViolation("madelung_residuals: dt > 0", f"got {dt}")
    c = constants
    grid = psi_t0.grid
    a, b = psi_t0.values, psi_t1.values
    mid = 0.5 * (a + b)
    p_mid = np.abs(mid) ** 2
    mask = node_mask(p_mid, c.node_epsilon)
    keep = ~mask

    dp_dt = (np.abs(b) ** 2 - np.abs(a) ** 2) / dt
    current = [c.hbar / c.mass * (np.conj(mid) * d).imag for d in grad_arrays(mid, grid)]
    div_j = sum(partial(j, grid, ax) for ax, j in enumerate(current))
    cont = dp_dt + div_j

    dS_dt = c.hbar * np.angle(b * np.conj(a)) / dt
    _, im = log_derivatives(mid, grid, mask)
    grad_S2 = c.hbar**2 * sum(i**2 for i in im)
    Q = quantum_potential(ComplexField(grid, mid), c).values
    Vv = 0.0 if V is None else V.values
    hjm = np.where(mask, np.nan, dS_dt + grad_S2 / (2 * c.mass) + Vv + Q)

    norms = {"continuity": _norms(cont, keep, grid), "hjm": _norms(hjm, keep, grid)}
    return MadelungResiduals(ScalarField(grid, cont, mask), ScalarField(grid, hjm, mask), norms)


def _check_loop(loop, grid, mask):
    pts = [tuple(int(i) for i in q) for q in loop]
    if len(pts) < 3:
        raise InvariantViolation("wallstrom_winding: loop of at least 3 points")
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    for q in pts:
        if len(q) != grid.dim or any(not 0 <= i < n for i, n in zip(q, grid.points)):
            raise InvariantViolation("wallstrom_winding: loop points on the grid", f"{q}")
        if mask[q]:
            raise InvariantViolation("wallstrom_winding: loop avoids masked points", f"{q}")
    for q0, q1 in zip(pts[:-1], pts[1:]):
        steps = [abs(i1 - i0) for i0, i1 in zip(q0, q1)]
        if grid.periodic:
            steps = [min(s, n - s) for s, n in zip(steps, grid.points)]
        if max(steps) > 1:
            raise InvariantViolation("wallstrom_winding: loop steps between neighbouring points",
                                     f"{q0} -> {q1}")
    return pts


def wallstrom_winding(psi: ComplexField, loop: Sequence,
                      constants: PhysicalConstants = _DEFAULT) -> int:
    """Integer n with closed-loop phase circulation 2 pi hbar n.

    Phase increments of psi between consecutive loop points are wrapped to
    (-pi, pi] and summed.
    """
    if psi.grid.dim != 2:
        raise InvariantViolation("wallstrom_winding: 2D grid")
    mask = node_mask(np.abs(psi.values) ** 2, constants.node_epsilon)
    pts = _check_loop(loop, psi.grid, mask)
    z = np.array([psi.values[q] for q in pts])
    total = np.sum(np.angle(z[1:] * np.conj(z[:-1])))
    return int(np.round(total / (2 * np.pi)))


def rectangle_loop(i0: int, i1: int, j0: int, j1: int) -> list:
    """Counter-clockwise index loop around the rectangle [i0, i1] x [j0, j1]."""
    loop = [(i, j0) for i in range(i0, i1)]
    loop += [(i1, j) for j in range(j0, j1)]
    loop += [(i, j1) for i in range(i1, i0, -1)]
    loop += [(i0, j) for j in range(j1, j0, -1)]
    loop.append((i0, j0))
    return loop


def hamiltonian_functional(pair: PolarPair, V: ScalarField | None = None,
                           constants: PhysicalConstants = _DEFAULT) -> HamiltonianTerms:
    """Kinetic, potential and informational (U_q) parts of H[p, S]."""
    c = constants
    grid = pair.grid
    p = pair.density.values
    _, im = log_derivatives(pair.psi().values, grid, pair.mask)
    grad_S2 = c.hbar**2 * sum(np.nan_to_num(i) ** 2 for i in im)
    kinetic = integrate_array(grad_S2 * p, grid) / (2 * c.mass)
    potential = 0.0 if V is None else integrate_array(V.values * p, grid)
    return HamiltonianTerms(kinetic, potential, uq_value(p, grid, c))


def uq_functional_gradient(p: ScalarField, constants: PhysicalConstants = _DEFAULT) -> ScalarField:
    """dU_q/dp = (hbar^2/8m)(grad p/p)^2 - (hbar^2/4m) lap p/p (zero on masked points).

    With the sign convention used here this equals +Q.
    """
    Q = quantum_potential(p, constants, form="density")
    return ScalarField(p.grid, np.nan_to_num(Q.values), Q.mask)


def uq_functional_derivative(p: ScalarField, test_fn: ScalarField,
                             constants: PhysicalConstants = _DEFAULT) -> tuple:
    """Weak-form check of the U_q functional derivative along ``test_fn``.

    Returns ``(lhs, rhs)``: the central difference
    (U_q[p + eps phi] - U_q[p - eps phi]) / (2 eps), eps = 1e-6 max p, and
    integral (dU_q/dp) phi.
    """
    if test_fn.grid != p.grid:
        raise InvariantViolation("uq_functional_derivative: matching grids")
    phi = test_fn.values
    pv = p.values
    scale = np.max(np.abs(phi))
    if scale == 0:
        return 0.0, 0.0
    mass = integrate_array(phi, p.grid)
    if abs(mass) > 1e-10 * integrate_array(np.abs(phi), p.grid):
        raise InvariantViolation("uq_functional_derivative: integral of test_fn is 0",
                                 f"got {mass:.3e}")
    mask = node_mask(pv, constants.node_epsilon)
    if np.any(np.abs(phi[mask]) > 1e-12 * scale):
        raise InvariantViolation("uq_functional_derivative: test_fn vanishes on masked points")
    eps = 1e-6 * pv.max()
    plus, minus = pv + eps * phi, pv - eps * phi
    if plus.min() < 0 or minus.min() < 0:
        raise InvariantViolation("uq_functional_derivative: perturbed density stays >= 0")
    lhs = (uq_value(plus, p.grid, constants) - uq_value(minus, p.grid, constants)) / (2 * eps)
    rhs = integrate_array(uq_functional_gradient(p, constants).values * phi, p.grid)
    return float(lhs), float(rhs)
