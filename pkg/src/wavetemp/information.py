"""Entropy, Jensen-Shannon distance, Fisher information and the
informational energy of a gridded probability density."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import xlog1py

from .errors import InvariantViolation
from .fields import (PhysicalConstants, ScalarField, grad_arrays, integrate, integrate_array,
                     node_mask, partial)

NORMALIZATION_TOL = 1e-6
_DEFAULT = PhysicalConstants()


@dataclass(frozen=True)
class FisherInformation:
    per_axis: tuple
    total: float


@dataclass(frozen=True)
class InfoReport:
    entropy: float
    fisher: float
    nu: tuple
    e_inf: float
    u_q: float

    def as_dict(self) -> dict:
        return {"entropy": self.entropy, "fisher": self.fisher, "nu": list(self.nu),
                "e_inf": self.e_inf, "u_q": self.u_q}


def require_density(p: ScalarField, tol: float = NORMALIZATION_TOL) -> None:
    if np.any(p.values < -1e-12):
        raise InvariantViolation("density: p >= 0", f"min {p.values.min():.3e}")
    total = integrate(p)
    if abs(total - 1.0) > tol:
        raise InvariantViolation("density: integral equals 1", f"integral {total:.12g}")


def differential_entropy(p: ScalarField, constants: PhysicalConstants = _DEFAULT) -> float:
    """-integral of p log p in nats, with p log p := 0 below the node threshold."""
    require_density(p)
    v = p.values
    keep = ~node_mask(v, constants.node_epsilon)
    integrand = np.zeros_like(v)
    integrand[keep] = v[keep] * np.log(v[keep])
    return -integrate_array(integrand, p.grid)


def js_divergence(p1: ScalarField, p2: ScalarField) -> float:
    """Jensen-Shannon divergence H[m] - H[p1]/2 - H[p2]/2, m = (p1 + p2)/2.

    Evaluated pointwise as m*g(d)/2 with d = (p1 - p2)/(p1 + p2) and
    g(d) = (1+d) log(1+d) + (1-d) log(1-d), which equals the entropy
    difference term by term but keeps full relative precision when the two
    densities are close.
    """
    if p1.grid != p2.grid:
        raise InvariantViolation("js_distance: densities on the same grid")
    a = np.clip(p1.values, 0.0, None)
    b = np.clip(p2.values, 0.0, None)
    s = a + b
    pos = s > 0
    d = np.zeros_like(s)
    d[pos] = (a[pos] - b[pos]) / s[pos]
    g = xlog1py(1 + d, d) + xlog1py(1 - d, -d)
    return 0.25 * integrate_array(s * g, p1.grid)


def _entropy_route_divergence(p1, p2, constants):
    m = ScalarField(p1.grid, 0.5 * (p1.values + p2.values))
    return (differential_entropy(m, constants)
            - 0.5 * differential_entropy(p1, constants)
            - 0.5 * differential_entropy(p2, constants))


def js_distance(p1: ScalarField, p2: ScalarField, method: str = "pointwise",
                constants: PhysicalConstants = _DEFAULT) -> float:
    """Square root of the Jensen-Shannon divergence.

    ``method="entropy"`` forms the divergence from three separate entropy
    integrals instead of the pointwise kernel; both give the same value up
    to round-off, the entropy route losing precision for nearby densities.
    """
    if method == "pointwise":
        rad = js_divergence(p1, p2)
    elif method == "entropy":
        if p1.grid != p2.grid:
            raise InvariantViolation("js_distance: densities on the same grid")
        rad = _entropy_route_divergence(p1, p2, constants)
    else:
        raise ValueError(f"unknown method {method!r}")
    if rad < -1e-10:
        raise InvariantViolation("js_distance: non-negative radicand", f"got {rad:.3e}")
    return float(np.sqrt(max(rad, 0.0)))


def shifted_density(p: ScalarField, h: float, axis: int) -> ScalarField:
    """p(x + h e_axis) on the same grid.

    Periodic grids shift exactly in Fourier space; dirichlet-zero grids use
    a cubic spline with zero extension beyond the walls.
    """
    grid = p.grid
    if grid.periodic:
        k = 2 * np.pi * np.fft.fftfreq(grid.points[axis], d=grid.spacing[axis])
        shape = [1] * grid.dim
        shape[axis] = -1
        phase = np.exp(1j * k * h).reshape(shape)
        vals = np.fft.ifft(np.fft.fft(p.values, axis=axis) * phase, axis=axis).real
        return ScalarField(grid, np.clip(vals, 0.0, None))
    x = grid.axes()[axis]
    spline = CubicSpline(x, p.values, axis=axis, extrapolate=False)
    vals = np.nan_to_num(spline(x + h), nan=0.0)
    return ScalarField(grid, np.clip(vals, 0.0, None))


def fisher_integrands(p_values: np.ndarray, grid, node_epsilon: float) -> list:
    """Per-axis (d_i p)^2 / p.

    Below the node threshold the ratio is 0/0; there it is replaced by
    2 d_i^2 p, its limit at a quadratic zero of p (walls and nodal lines).
    In density tails both expressions are negligible.
    """
    mask = node_mask(p_values, node_epsilon)
    safe = np.where(mask, 1.0, p_values)
    out = []
    for ax, g in enumerate(grad_arrays(p_values, grid)):
        limit = 2 * partial(p_values, grid, ax, 2)
        out.append(np.where(mask, limit, g**2 / safe))
    return out


def fisher_information(p: ScalarField, constants: PhysicalConstants = _DEFAULT) -> FisherInformation:
    """Location Fisher information, per axis and summed."""
    require_density(p)
    per_axis = tuple(integrate_array(f, p.grid)
                     for f in fisher_integrands(p.values, p.grid, constants.node_epsilon))
    return FisherInformation(per_axis, float(sum(per_axis)))


def nu_vector(p: ScalarField, mode: str = "closed_form", h: float | None = None,
              constants: PhysicalConstants = _DEFAULT) -> tuple:
    """Per-axis information speed.

    ``closed_form``: sqrt(Fisher_i / 8). ``limit``: d_JS[p(. + h e_i), p] / h,
    which tends to the closed form as h -> 0.
    """
    if mode == "closed_form":
        return tuple(float(np.sqrt(f / 8)) for f in fisher_information(p, constants).per_axis)
    if mode != "limit":
        raise ValueError(f"unknown mode {mode!r}")
    if h is None or not h > 0:
        raise InvariantViolation("nu_vector: h > 0", f"got {h}")
    require_density(p)
    out = []
    for ax in range(p.grid.dim):
        if h < 2 * p.grid.spacing[ax]:
            raise InvariantViolation("nu_vector: h >= 2 * grid spacing",
                                     f"h={h}, spacing={p.grid.spacing[ax]}")
        out.append(js_distance(shifted_density(p, h, ax), p) / h)
    return tuple(out)


def uq_value(p_values: np.ndarray, grid, constants: PhysicalConstants) -> float:
    """(hbar^2/8m) times the integral of the summed Fisher integrands."""
    integrand = sum(fisher_integrands(p_values, grid, constants.node_epsilon))
    return constants.hbar**2 / (8 * constants.mass) * integrate_array(integrand, grid)


def informational_energy(p: ScalarField, constants: PhysicalConstants = _DEFAULT) -> tuple:
    """Return ``(e_inf, u_q)``; they coincide when gamma = hbar^2/m."""
    fisher = fisher_information(p, constants)
    nu2 = fisher.total / 8
    e_inf = constants.gamma * nu2
    u_q = constants.hbar**2 / (8 * constants.mass) * fisher.total
    return float(e_inf), float(u_q)


def info_report(p: ScalarField, constants: PhysicalConstants = _DEFAULT) -> InfoReport:
    fisher = fisher_information(p, constants)
    e_inf, u_q = informational_energy(p, constants)
    return InfoReport(entropy=differential_entropy(p, constants), fisher=fisher.total,
                      nu=nu_vector(p, "closed_form", constants=constants),
                      e_inf=e_inf, u_q=u_q)
