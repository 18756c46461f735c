"""Model parameters and discretisation of continuum baths.

Units throughout: hbar = 1 and the sweep velocity sets the scale, so
energies are in sqrt(hbar v), frequencies in sqrt(v/hbar) and times in
sqrt(hbar/v).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class QubitParams:
    """Linearly swept two-level system ``(v t / 2) sz + (delta / 2) sx``."""

    v: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not (self.v > 0 and math.isfinite(self.v)):
            raise ConfigError(f"sweep velocity must be positive, got v={self.v}")
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise ConfigError(f"tunneling strength must be >= 0, got delta={self.delta}")


@dataclass(frozen=True)
class SpectralDensity:
    """``J(w) = 2 alpha w_c^(1-s) w^s exp(-w / w_c)``."""

    alpha: float
    s: float = 1.0
    omega_c: float = 10.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not self.s > 0:
            raise ConfigError(f"spectral exponent must be > 0, got {self.s}")
        if not self.omega_c > 0:
            raise ConfigError(f"cutoff frequency must be > 0, got {self.omega_c}")

    def __call__(self, omega):
        return evaluate_spectral_density(self, omega)


@dataclass(frozen=True)
class BathMode:
    omega: float
    gamma: float
    theta: float = math.pi / 2

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError(f"mode frequency must be > 0, got {self.omega}")
        if not self.gamma >= 0:
            raise ConfigError(f"mode coupling must be >= 0, got {self.gamma}")
        if not (-1e-12 <= self.theta <= math.pi / 2 + 1e-12):
            raise ConfigError(f"interaction angle must lie in [0, pi/2], got {self.theta}")


@dataclass(frozen=True)
class ExplicitModes:
    modes: tuple

    def __init__(self, modes: Sequence[BathMode]):
        object.__setattr__(self, "modes", tuple(modes))


@dataclass(frozen=True)
class Continuum:
    density: SpectralDensity
    n_modes: int = 80
    omega_max: float | None = None  # None -> 5 omega_c
    scheme: str = "linear"
    theta: float = math.pi / 2
    omega_min: float = 1e-3

    def __post_init__(self):
        if self.scheme not in ("linear", "logarithmic"):
            raise ConfigError(f"unknown discretisation scheme {self.scheme!r}")
        if int(self.n_modes) < 1:
            raise ConfigError(f"n_modes must be >= 1, got {self.n_modes}")

    @property
    def resolved_omega_max(self) -> float:
        if self.omega_max is None:
            return 5.0 * self.density.omega_c
        return float(self.omega_max)


BathSpec = Union[ExplicitModes, Continuum]


def evaluate_spectral_density(sd: SpectralDensity, omega):
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise DomainError("spectral density is defined for omega >= 0 only")
    out = 2.0 * sd.alpha * sd.omega_c ** (1.0 - sd.s) * w**sd.s * np.exp(-w / sd.omega_c)
    return float(out) if out.ndim == 0 else out


def discretize_linear(sd: SpectralDensity, n: int, omega_max: float,
                      theta: float = math.pi / 2) -> list[BathMode]:
    """Midpoint grid on (0, omega_max] with ``gamma_q^2 = J(w_q) dw``."""
    if int(n) != n or n < 1:
        raise ConfigError(f"mode count must be a positive integer, got {n}")
    if not omega_max > 0:
        raise ConfigError(f"omega_max must be > 0, got {omega_max}")
    n = int(n)
    dw = omega_max / n
    w = (np.arange(1, n + 1) - 0.5) * dw
    g = np.sqrt(evaluate_spectral_density(sd, w) * dw)
    return [BathMode(float(a), float(b), theta) for a, b in zip(w, g)]


def log_edges(omega_min: float, omega_max: float, n: int) -> np.ndarray:
    k = np.arange(n + 1)
    return omega_min * (omega_max / omega_min) ** (k / n)


def discretize_logarithmic(sd: SpectralDensity, n: int, omega_min: float, omega_max: float,
                           theta: float = math.pi / 2) -> list[BathMode]:
    """Geometric bins; each mode carries the bin's weight at the bin's J-centroid."""
    if int(n) != n or n < 1:
        raise ConfigError(f"mode count must be a positive integer, got {n}")
    if not (0 < omega_min < omega_max):
        raise ConfigError(f"need 0 < omega_min < omega_max, got {omega_min}, {omega_max}")
    edges = log_edges(omega_min, omega_max, int(n))
    modes = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        weight, _ = integrate.quad(lambda w: evaluate_spectral_density(sd, w), lo, hi,
                                   epsabs=0.0, epsrel=1e-11, limit=200)
        if weight > 0:
            first, _ = integrate.quad(lambda w: w * evaluate_spectral_density(sd, w), lo, hi,
                                      epsabs=0.0, epsrel=1e-11, limit=200)
            centre = first / weight
        else:
            centre = math.sqrt(lo * hi)
        modes.append(BathMode(float(centre), math.sqrt(weight), theta))
    return modes


def integrated_quantities(modes: Sequence[BathMode]) -> tuple[float, float]:
    """Return ``(S, E0) = (sum gamma^2, sum gamma^2 / omega)``."""
    if len(modes) == 0:
        raise ConfigError("integrated quantities need at least one mode")
    w = np.array([m.omega for m in modes])
    if np.any(w <= 0):
        raise DomainError("mode frequencies must be positive")
    g2 = np.array([m.gamma for m in modes]) ** 2
    return float(g2.sum()), float((g2 / w).sum())


def resolve_modes(spec: BathSpec) -> list[BathMode]:
    if isinstance(spec, ExplicitModes):
        modes = list(spec.modes)
    elif isinstance(spec, Continuum):
        if spec.scheme == "linear":
            modes = discretize_linear(spec.density, spec.n_modes, spec.resolved_omega_max, spec.theta)
        else:
            modes = discretize_logarithmic(spec.density, spec.n_modes, spec.omega_min,
                                           spec.resolved_omega_max, spec.theta)
    else:
        raise ConfigError(f"not a bath specification: {spec!r}")
    check_mode_list(modes)
    return modes


def check_mode_list(modes: Sequence[BathMode]):
    w = np.array([m.omega for m in modes], dtype=float)
    if w.size and (np.any(w <= 0) or np.any(np.diff(w) <= 0)):
        raise ConfigError("mode frequencies must be positive and strictly increasing")


@dataclass(frozen=True)
class Model:
    """A qubit plus its discrete bath: everything the Hamiltonian needs."""

    qubit: QubitParams
    modes: tuple = field(default_factory=tuple)

    def __init__(self, qubit: QubitParams, modes: Sequence[BathMode] = ()):
        object.__setattr__(self, "qubit", qubit)
        object.__setattr__(self, "modes", tuple(modes))
        check_mode_list(self.modes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @cached_property
    def arrays(self):
        """``(omega, gamma cos(theta), gamma sin(theta))`` as float arrays."""
        w = np.array([m.omega for m in self.modes], dtype=float)
        g = np.array([m.gamma for m in self.modes], dtype=float)
        th = np.array([m.theta for m in self.modes], dtype=float)
        cos, sin = np.cos(th), np.sin(th)
        # cos(pi/2) is 6e-17, not 0: keep pure off-diagonal coupling exactly off-diagonal
        cos[np.abs(cos) < 1e-15] = 0.0
        return w, g * cos, g * sin
