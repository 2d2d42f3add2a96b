"""Closed-form states used as ground truth: the free Gaussian packet and
the particle in a one-dimensional box."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation
from .fields import PhysicalConstants


@dataclass(frozen=True)
class GaussianPacketParams:
    a: float = 1.0
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise InvariantViolation("GaussianPacketParams: a > 0", f"got {self.a}")

    def tau(self, t):
        """Dimensionless spreading time 2*hbar*t/(m*a^2)."""
        c = self.constants
        return 2 * c.hbar * np.asarray(t, dtype=float) / (c.mass * self.a**2)

    def sigma(self, t):
        """Standard deviation of |psi|^2 at time t."""
        return 0.5 * self.a * np.sqrt(1 + self.tau(t) ** 2)


@dataclass(frozen=True)
class BoxParams:
    a: float = 1.0
    n: int = 1
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise InvariantViolation("BoxParams: a > 0", f"got {self.a}")
        if int(self.n) != self.n or self.n < 1:
            raise InvariantViolation("BoxParams: n >= 1", f"got {self.n}")

    @property
    def energy(self) -> float:
        c = self.constants
        return (c.hbar * self.n * np.pi / self.a) ** 2 / (2 * c.mass)


def gaussian_packet(params: GaussianPacketParams, t: float = 0.0):
    """Return ``x -> psi(x, t)`` for the freely spreading Gaussian.

    psi(x, 0) = (2/(pi a^2))^(1/4) exp(-x^2/a^2); the width evolves as
    a^2 (1 + i tau) with tau = 2 hbar t / (m a^2).
    """
    if t < 0:
        raise InvariantViolation("gaussian_packet: t >= 0", f"got {t}")
    a = params.a
    w = a**2 * (1 + 1j * params.tau(t))
    pref = (2 / (np.pi * a**2)) ** 0.25 / np.sqrt(1 + 1j * params.tau(t))

    def psi(x):
        x = np.asarray(x, dtype=float)
        return pref * np.exp(-x**2 / w)

    return psi


def gaussian_velocity(params: GaussianPacketParams, x, t):
    """Exact guidance velocity of the spreading packet."""
    c = params.constants
    tau = params.tau(t)
    return np.asarray(x) * (4 * c.hbar**2 * t / (c.mass**2 * params.a**4)) / (1 + tau**2)


def gaussian_quantum_potential(params: GaussianPacketParams, x, t=0.0):
    c = params.constants
    w2 = params.a**2 * (1 + params.tau(t) ** 2)
    x = np.asarray(x, dtype=float)
    return c.hbar**2 / (c.mass * w2) - 2 * c.hbar**2 * x**2 / (c.mass * w2**2)


def box_eigenstate(params: BoxParams):
    """Return ``x -> psi_n(x) = sqrt(2/a) sin(n pi x / a)`` on [0, a]."""
    a, n = params.a, params.n

    def psi(x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(2 / a) * np.sin(n * np.pi * x / a)

    return psi


def analytic_temperature(kind: str, params, x, t: float = 0.0):
    """Closed-form wave-function temperature.

    ``kind`` is ``"box"`` (stationary, ``t`` ignored) or ``"gaussian"``.
    The Gaussian expression follows from the exact packet modulus:
    4 hbar^2 x^2 / (k_b m a^4 (1 + tau^2)^2).
    """
    c = params.constants
    x = np.asarray(x, dtype=float)
    if kind == "box":
        arg = params.n * np.pi * x / params.a
        s = np.sin(arg)
        if np.any(np.abs(s) < 1e-12):
            raise InvariantViolation("analytic_temperature: x away from density nodes")
        pref = (c.hbar * params.n * np.pi / params.a) ** 2 / (c.k_b * c.mass)
        return pref * (np.cos(arg) / s) ** 2
    if kind == "gaussian":
        tau = params.tau(t)
        return 4 * c.hbar**2 * x**2 / (c.k_b * c.mass * params.a**4 * (1 + tau**2) ** 2)
    raise ValueError(f"unknown kind {kind!r}")
