"""Pointwise informational energy, wave-function temperature, and the
heat/work split of a density variation.

E = (hbar^2/8m)(grad p / p)^2 at every configuration point; equipartition
E = k_b T / 2 defines T. A variation p -> p + dp then changes E by
heat + work to first order, with heat = -k_b T dp/p and
work = k_b T d|grad p| / |grad p|.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .fields import (ComplexField, PhysicalConstants, ScalarField, grad_arrays, integrate_array,
                     node_mask, product_grid)
from .madelung import log_derivatives

_DEFAULT = PhysicalConstants()
SMALLNESS = 1e-3
GRADIENT_EPSILON = 1e-10


@dataclass(frozen=True, eq=False)
class ThermoLedger:
    delta_e: ScalarField
    heat: ScalarField
    work: ScalarField
    residual: ScalarField
    perturbation_scale: float

    def summary(self) -> dict:
        keep = self.residual.unmasked
        grid = self.residual.grid

        def sup(f):
            return float(np.max(np.abs(f.values[keep]))) if keep.any() else 0.0

        def total(f):
            return integrate_array(np.where(keep, f.values, 0.0), grid)

        return {"eps": self.perturbation_scale,
                "delta_e_inf": sup(self.delta_e), "heat_inf": sup(self.heat),
                "work_inf": sup(self.work), "residual_inf": sup(self.residual),
                "delta_e_integral": total(self.delta_e), "heat_integral": total(self.heat),
                "work_integral": total(self.work), "residual_integral": total(self.residual)}


@dataclass(frozen=True)
class AdditivityReport:
    heat_lhs: float
    heat_rhs: float
    work_lhs: float
    work_rhs: float
    heat_gap: float
    work_gap: float
    heat_additive: bool
    work_additive: bool
    probe: tuple | None = None

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _density_mask(p: ScalarField, constants) -> np.ndarray:
    mask = node_mask(p.values, constants.node_epsilon)
    if p.mask is not None:
        mask = mask | p.mask
    return mask


def _grad_ratio_sq(p: ScalarField, constants):
    """(|grad p| / p)^2 with NaN on masked points, plus the mask."""
    mask = _density_mask(p, constants)
    safe = np.where(mask, 1.0, p.values)
    g2 = sum(g**2 for g in grad_arrays(p.values, p.grid))
    return np.where(mask, np.nan, g2 / safe**2), mask


def pointwise_energy(p: ScalarField, constants: PhysicalConstants = _DEFAULT) -> ScalarField:
    r2, mask = _grad_ratio_sq(p, constants)
    return ScalarField(p.grid, constants.hbar**2 / (8 * constants.mass) * r2, mask)


def temperature_field(psi_or_p, constants: PhysicalConstants = _DEFAULT,
                      form: str | None = None) -> ScalarField:
    """Wave-function temperature T = 2E/k_b.

    ``form="density"``: (hbar^2/4 k_b m)(grad p/p)^2, the default for a
    density. ``form="modulus"``: (hbar^2/k_b m)(grad|psi|/|psi|)^2, the
    default for a ComplexField, where grad|psi|/|psi| is taken as
    Re(conj psi grad psi)/|psi|^2.
    """
    c = constants
    is_psi = isinstance(psi_or_p, ComplexField)
    form = form or ("modulus" if is_psi else "density")
    if form == "density":
        p = psi_or_p.density() if is_psi else psi_or_p
        E = pointwise_energy(p, c)
        return ScalarField(p.grid, 2 * E.values / c.k_b, E.mask)
    if form != "modulus":
        raise ValueError(f"unknown form {form!r}")
    if is_psi:
        psi = psi_or_p.values
        mask = node_mask(np.abs(psi) ** 2, c.node_epsilon)
        re, _ = log_derivatives(psi, psi_or_p.grid, mask)
        r2 = sum(r**2 for r in re)
        grid = psi_or_p.grid
    else:
        grid = psi_or_p.grid
        mask = _density_mask(psi_or_p, c)
        amp = np.sqrt(np.clip(psi_or_p.values, 0.0, None))
        safe = np.where(mask, 1.0, amp)
        r2 = np.where(mask, np.nan, sum(g**2 for g in grad_arrays(amp, grid)) / safe**2)
    return ScalarField(grid, c.hbar**2 / (c.k_b * c.mass) * r2, mask)


def pointwise_entropy(p: ScalarField, constants: PhysicalConstants = _DEFAULT) -> ScalarField:
    """-k_b log p on unmasked points."""
    mask = _density_mask(p, constants)
    safe = np.where(mask, 1.0, p.values)
    return ScalarField(p.grid, np.where(mask, np.nan, -constants.k_b * np.log(safe)), mask)


def _check_perturbation(p: ScalarField, delta_p, mass_preserving: bool):
    dp = delta_p.values if isinstance(delta_p, ScalarField) else np.asarray(delta_p, dtype=float)
    if dp.shape != p.grid.shape:
        dp = dp.reshape(p.grid.shape)
    bound = SMALLNESS * np.max(p.values)
    if np.max(np.abs(dp)) > bound * (1 + 1e-12):
        raise InvariantViolation("perturbation: |dp|_inf <= 1e-3 max p",
                                 f"|dp|_inf = {np.max(np.abs(dp)):.3e}, bound {bound:.3e}")
    if mass_preserving:
        m = integrate_array(dp, p.grid)
        if abs(m) > 1e-10 * max(integrate_array(np.abs(dp), p.grid), 1e-300):
            raise InvariantViolation("perturbation: integral of dp is 0", f"got {m:.3e}")
    return dp


def heat_exchange(p: ScalarField, delta_p, constants: PhysicalConstants = _DEFAULT,
                  mass_preserving: bool = False) -> ScalarField:
    """-k_b T dp / p."""
    dp = _check_perturbation(p, delta_p, mass_preserving)
    T = temperature_field(p, constants)
    safe = np.where(T.mask, 1.0, p.values)
    return ScalarField(p.grid, -constants.k_b * T.values * dp / safe, T.mask)


def _gradient_norm_change(values, dp, grid):
    """|grad(p + dp)| - |grad p| without subtracting two nearly equal norms."""
    g = grad_arrays(values, grid)
    dg = grad_arrays(dp, grid)
    g0 = np.sqrt(sum(c**2 for c in g))
    g1 = np.sqrt(sum((c + d) ** 2 for c, d in zip(g, dg)))
    num = sum(2 * c * d + d**2 for c, d in zip(g, dg))
    denom = g0 + g1
    return np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0), g0


def gradient_mask(norm: np.ndarray) -> np.ndarray:
    return norm < GRADIENT_EPSILON * np.max(norm)


def work_exchange(p: ScalarField, delta_p, constants: PhysicalConstants = _DEFAULT,
                  mass_preserving: bool = False) -> ScalarField:
    """k_b T d|grad p| / |grad p|, masked where |grad p| vanishes."""
    dp = _check_perturbation(p, delta_p, mass_preserving)
    T = temperature_field(p, constants)
    change, g0 = _gradient_norm_change(p.values, dp, p.grid)
    mask = T.mask | gradient_mask(g0)
    safe = np.where(mask, 1.0, g0)
    vals = np.where(mask, np.nan, constants.k_b * T.values * change / safe)
    return ScalarField(p.grid, vals, mask)


def _energy_change(values, dp, grid, mask, constants):
    """E[p + dp] - E[p], exact, written as (r1 - r0)(r1 + r0) with r = grad p / p.

    r1 - r0 = (p grad dp - dp grad p) / (p (p + dp)) is formed from the
    gradient of dp itself, so the difference keeps its relative precision
    where E is large and dp/p is small.
    """
    p0 = np.where(mask, 1.0, values)
    p1 = np.where(mask, 1.0, values + dp)
    total = 0.0
    for g, dg in zip(grad_arrays(values, grid), grad_arrays(dp, grid)):
        r0 = g / p0
        r1 = (g + dg) / p1
        total = total + (p0 * dg - dp * g) / (p0 * p1) * (r0 + r1)
    return constants.hbar**2 / (8 * constants.mass) * total


def first_law_ledger(p: ScalarField, delta_p, constants: PhysicalConstants = _DEFAULT,
                     mass_preserving: bool = False) -> ThermoLedger:
    """Direct energy change E[p + dp] - E[p] against heat + work."""
    dp = _check_perturbation(p, delta_p, mass_preserving)
    heat = heat_exchange(p, dp, constants)
    work = work_exchange(p, dp, constants)
    E1 = pointwise_energy(ScalarField(p.grid, p.values + dp), constants)
    mask = work.mask | E1.mask
    dE = np.where(mask, np.nan, _energy_change(p.values, dp, p.grid, mask, constants))
    resid = dE - heat.values - work.values
    scale = float(np.max(np.abs(dp)) / np.max(p.values))
    return ThermoLedger(ScalarField(p.grid, dE, mask), heat.with_mask(mask),
                        work.with_mask(mask), ScalarField(p.grid, np.where(mask, np.nan, resid), mask),
                        scale)


def tilt_direction(p: ScalarField, axis: int = 0) -> np.ndarray:
    """Mass-zero perturbation shape p (f - <f>), f = tanh(x - <x>) along ``axis``.

    Scaled so that its sup norm equals max p; multiply by eps <= 1e-3 to get
    an admissible perturbation. The bounded tanh profile keeps dp/p small in
    the density tails, where a linear tilt would dominate the second-order
    residual.
    """
    x = p.grid.mesh()[axis]
    w = p.values / integrate_array(p.values, p.grid)
    f = np.tanh(x - integrate_array(w * x, p.grid))
    d = p.values * (f - integrate_array(w * f, p.grid))
    return d * (np.max(p.values) / np.max(np.abs(d)))


def ledger_sweep(p: ScalarField, direction, eps_values: Sequence[float],
                 constants: PhysicalConstants = _DEFAULT,
                 mass_preserving: bool = False) -> dict:
    """Ledgers for dp = eps * direction over ``eps_values``.

    Returns the per-eps summaries and the least-squares log-log slope of
    |residual|_inf against eps.
    """
    d = direction.values if isinstance(direction, ScalarField) else np.asarray(direction, float)
    rows = []
    for eps in eps_values:
        s = first_law_ledger(p, eps * d, constants, mass_preserving).summary()
        s["eps"] = float(eps)
        rows.append(s)
    eps_arr = np.array([r["eps"] for r in rows])
    res = np.array([r["residual_inf"] for r in rows])
    slope = float(np.polyfit(np.log(eps_arr), np.log(res), 1)[0]) if len(rows) > 1 else float("nan")
    return {"ledgers": rows, "residual_slope": slope}


def _as_array(f):
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


def _relative_change_1d(p, dp, grid):
    change, g0 = _gradient_norm_change(p, dp, grid)
    mask = gradient_mask(g0)
    return np.where(mask, np.nan, change / np.where(mask, 1.0, g0)), mask


def product_additivity_report(p1: ScalarField, p2: ScalarField, delta_p1, delta_p2,
                              constants: PhysicalConstants = _DEFAULT,
                              probe: tuple | None = None, rtol: float = 1e-8) -> AdditivityReport:
    """Heat and work additivity for the product density p12 = p1 p2.

    The joint system lives on the 2D product grid with
    dp12 = dp1 p2 + p1 dp2. Heat additivity compares dp12/p12 with
    dp1/p1 + dp2/p2; work additivity compares d|grad p12|/|grad p12| with the
    sum of the single-particle ratios. ``heat_lhs``/``heat_rhs`` and
    ``work_lhs``/``work_rhs`` are p12-weighted RMS values of each side, or
    the pointwise values at ``probe`` for work when a probe point is given.
    Gaps are sup-norm relative differences (work: relative to the lhs at the
    probe point).
    """
    grid = product_grid(p1.grid, p2.grid)
    a, b = _as_array(p1), _as_array(p2)
    da, db = _as_array(delta_p1), _as_array(delta_p2)
    p12 = np.multiply.outer(a, b)
    dp12 = np.multiply.outer(da, b) + np.multiply.outer(a, db)
    w = p12 / integrate_array(p12, grid)

    def rms(f, keep):
        return float(np.sqrt(integrate_array(np.where(keep, w * f**2, 0.0), grid)))

    def rel_gap(lhs, rhs, keep, ref):
        diff = np.max(np.abs(lhs - rhs)[keep]) if keep.any() else 0.0
        denom = np.max(np.abs(ref)[keep]) if keep.any() else 0.0
        return float(diff / denom) if denom > 0 else float(diff)

    mask = node_mask(p12, constants.node_epsilon)
    keep = ~mask
    safe = np.where(mask, 1.0, p12)
    heat_lhs = np.where(mask, 0.0, dp12 / safe)
    m1 = node_mask(a, constants.node_epsilon)
    m2 = node_mask(b, constants.node_epsilon)
    r1 = np.where(m1, 0.0, da / np.where(m1, 1.0, a))
    r2 = np.where(m2, 0.0, db / np.where(m2, 1.0, b))
    heat_rhs = np.add.outer(r1, r2)
    heat_gap = rel_gap(heat_lhs, heat_rhs, keep, heat_rhs)

    change, g0 = _gradient_norm_change(p12, dp12, grid)
    w1, wm1 = _relative_change_1d(a, da, p1.grid)
    w2, wm2 = _relative_change_1d(b, db, p2.grid)
    wmask = mask | gradient_mask(g0) | np.add.outer(wm1, wm2)
    wkeep = ~wmask
    work_lhs = np.where(wmask, 0.0, change / np.where(wmask, 1.0, g0))
    work_rhs = np.where(wmask, 0.0, np.add.outer(np.nan_to_num(w1), np.nan_to_num(w2)))

    probe_idx = None
    if probe is not None:
        probe_idx = tuple(int(np.argmin(np.abs(ax - x))) for ax, x in zip(grid.axes(), probe))
        if wmask[probe_idx]:
            raise InvariantViolation("additivity: probe point is unmasked", f"{probe}")
        wl, wr = float(work_lhs[probe_idx]), float(work_rhs[probe_idx])
        work_gap = abs(wl - wr) / abs(wl) if wl != 0 else abs(wl - wr)
        probe_xy = tuple(float(ax[i]) for ax, i in zip(grid.axes(), probe_idx))
    else:
        wl, wr = rms(work_lhs, wkeep), rms(work_rhs, wkeep)
        work_gap = rel_gap(work_lhs, work_rhs, wkeep, work_lhs)
        probe_xy = None

    return AdditivityReport(heat_lhs=rms(heat_lhs, keep), heat_rhs=rms(heat_rhs, keep),
                            work_lhs=wl, work_rhs=wr, heat_gap=heat_gap, work_gap=float(work_gap),
                            heat_additive=heat_gap <= rtol, work_additive=work_gap <= rtol,
                            probe=probe_xy)
