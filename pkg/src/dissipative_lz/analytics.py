"""Closed-form asymptotic transition probabilities (hbar = 1)."""

import math

from .errors import DomainError


def _check_v(v):
    if not (v > 0 and math.isfinite(v)):
        raise DomainError(f"sweep velocity must be positive, got v={v}")


def lz_standard(delta: float, v: float = 1.0) -> float:
    """Bare two-level result ``1 - exp(-pi delta^2 / 2v)``."""
    _check_v(v)
    return -math.expm1(-math.pi * delta**2 / (2 * abs(v)))


def single_mode_final(delta: float, gamma: float, v: float = 1.0) -> float:
    """One oscillator coupled through sigma_x: tunneling and coupling add in quadrature."""
    _check_v(v)
    return -math.expm1(-math.pi * (delta**2 + gamma**2) / (2 * abs(v)))


def multimode_final(delta: float, v: float, theta: float, S: float, E0: float) -> float:
    """Zero-temperature result for a bath with a shared coupling angle.

    ``S = sum gamma_q^2`` and ``E0 = sum gamma_q^2 / omega_q`` of the discrete bath.
    """
    _check_v(v)
    if not S >= 0:
        raise DomainError(f"integrated spectral density must be >= 0, got {S}")
    eff = abs(delta - 0.5 * E0 * math.sin(2 * theta)) ** 2 + S * math.sin(theta) ** 2
    return -math.expm1(-math.pi * eff / (2 * v))
