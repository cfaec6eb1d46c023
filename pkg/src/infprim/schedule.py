"""Mapping between reverse-anneal points s' and bit uncertainties P.

A single qubit under ``-A(s) sx + B(s) sz`` has ground-state populations in
the ratio ``x**2`` with ``x = (sqrt(A^2 + B^2) + B) / A = exp(asinh(B/A))``.
Reading that ratio as a Boltzmann factor gives an effective temperature
``T' = 1 / asinh(B/A)``; equating it to the Nishimori temperature of an
error probability ``P`` gives ``P = 1 / (1 + x**2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import bisect
from scipy.special import expit

from .errors import DegenerateScheduleError, DomainError, InversionUnsupported

BISECT_XTOL = 1e-10
_MONOTONE_GRID = np.linspace(0.0, 1.0, 257)


@dataclass(frozen=True)
class ScheduleFunctions:
    """Driver and problem energy scales ``A(s)``, ``B(s)`` plus bath temperature."""

    A: Callable[[float], float]
    B: Callable[[float], float]
    T_phys: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.T_phys < 0:
            raise DomainError(f"T_phys must be >= 0, got {self.T_phys}")

    def at(self, s: float) -> tuple[float, float]:
        a, b = float(self.A(s)), float(self.B(s))
        if a < 0 or b < 0:
            raise DomainError(f"schedule values must be non-negative, got A={a}, B={b} at s={s}")
        if a == 0 and b == 0:
            raise DegenerateScheduleError(f"A and B both vanish at s={s}")
        return a, b

    def check_shape(self, ratio: float = 10.0) -> None:
        """Monotonicity of A and B and the endpoint dominance conditions."""
        a = np.array([self.A(s) for s in _MONOTONE_GRID], dtype=float)
        b = np.array([self.B(s) for s in _MONOTONE_GRID], dtype=float)
        if np.any(np.diff(a) > 1e-12) or np.any(np.diff(b) < -1e-12):
            raise DomainError("A(s) must be non-increasing and B(s) non-decreasing")
        if not a[0] > ratio * b[0]:
            raise DomainError("A(0) must dominate B(0)")
        if not b[-1] > ratio * a[-1]:
            raise DomainError("B(1) must dominate A(1)")


def linear_schedule(gamma0: float = 1.0, T_phys: float = 0.0) -> ScheduleFunctions:
    """``A(s) = gamma0 (1 - s)``, ``B(s) = s``."""
    return ScheduleFunctions(lambda s: gamma0 * (1.0 - s), lambda s: s, T_phys,
                             name=f"linear(gamma0={gamma0})")


def load_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column ``s value`` text table; ``#`` starts a comment."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise DomainError(f"{path}: expected two columns (s, value)")
    order = np.argsort(data[:, 0])
    s, v = data[order, 0], data[order, 1]
    if s[0] > 0 or s[-1] < 1:
        raise DomainError(f"{path}: table must cover s in [0, 1]")
    return s, v


def tabulated_schedule(a_table, b_table, T_phys: float = 0.0) -> ScheduleFunctions:
    """Linearly interpolated schedule from ``(s, value)`` tables or file paths."""
    sa, va = load_table(a_table) if isinstance(a_table, (str, Path)) else map(np.asarray, a_table)
    sb, vb = load_table(b_table) if isinstance(b_table, (str, Path)) else map(np.asarray, b_table)
    return ScheduleFunctions(lambda s: float(np.interp(s, sa, va)),
                             lambda s: float(np.interp(s, sb, vb)), T_phys, name="tabulated")


def _check_s(s_prime: float) -> None:
    if not 0.0 <= s_prime <= 1.0:
        raise DomainError(f"s' must lie in [0, 1], got {s_prime}")


def _inverse_temperature(s_prime: float, sf: ScheduleFunctions) -> float:
    """``1/T'`` = asinh(B/A); ``inf`` when A vanishes."""
    a, b = sf.at(s_prime)
    if a == 0.0:
        return math.inf
    return math.asinh(b / a)


def effective_temperature(s_prime: float, sf: ScheduleFunctions) -> float:
    """Transverse-field effective temperature at ``s'`` (``inf`` when B = 0, 0 when A = 0)."""
    _check_s(s_prime)
    beta = _inverse_temperature(s_prime, sf)
    if beta == 0.0:
        return math.inf
    return 1.0 / beta


def nishimori_temperature(P: float) -> float:
    """``T_N = 2 / ln((1 - P) / P)`` for ``P`` in ``(0, 0.5]``."""
    if not 0.0 < P <= 0.5:
        raise DomainError(f"P must lie in (0, 0.5], got {P}")
    if P == 0.5:
        return math.inf
    return 2.0 / math.log((1.0 - P) / P)


def uncertainty_at_temperature(T: float) -> float:
    """Inverse of :func:`nishimori_temperature`; ``T = 0`` maps to 0, ``inf`` to 0.5."""
    if T < 0:
        raise DomainError(f"temperature must be >= 0, got {T}")
    if T == 0:
        return 0.0
    return float(expit(-2.0 / T))


def uncertainty_from_s(s_prime: float, sf: ScheduleFunctions) -> float:
    """Zero-bath uncertainty ``[1 + x^2]^-1`` at ``s'``."""
    _check_s(s_prime)
    beta = _inverse_temperature(s_prime, sf)
    return float(expit(-2.0 * beta))


def uncertainty_from_s_thermal(s_prime: float, sf: ScheduleFunctions) -> float:
    """Uncertainty with quantum and bath temperatures added in quadrature.

    The bath term enters as ``T_phys / B(s')``; at ``B = 0`` the result is the
    fully uncertain limit 0.5.
    """
    _check_s(s_prime)
    if sf.T_phys == 0.0:
        return uncertainty_from_s(s_prime, sf)
    a, b = sf.at(s_prime)
    if b == 0.0:
        return 0.5
    t_quantum = 0.0 if a == 0.0 else 1.0 / math.asinh(b / a)
    t_total = math.hypot(t_quantum, sf.T_phys / b)
    return float(expit(-2.0 / t_total))


def uncertainty_curve(sf: ScheduleFunctions, thermal: bool = False) -> Callable[[float], float]:
    return (lambda s: uncertainty_from_s_thermal(s, sf)) if thermal else (lambda s: uncertainty_from_s(s, sf))


def check_invertible(sf: ScheduleFunctions, thermal: bool = False) -> None:
    f = uncertainty_curve(sf, thermal)
    p = np.array([f(s) for s in _MONOTONE_GRID])
    if np.any(np.diff(p) >= 0):
        raise InversionUnsupported(f"uncertainty is not strictly decreasing in s' for {sf.name}")


def s_from_uncertainty(P: float, sf: ScheduleFunctions, thermal: bool = False,
                       verify: bool = True) -> float:
    """Reverse-anneal point giving uncertainty ``P``, by bisection on ``[0, 1]``.

    ``P = 0.5`` gives 0 and ``P = 0`` gives 1. Values below the curve's floor
    ``P(1)`` (reachable only with a hot bath) also return 1.
    """
    if not 0.0 <= P <= 0.5:
        raise DomainError(f"P must lie in [0, 0.5], got {P}")
    if P == 0.5:
        return 0.0
    if P == 0.0:
        return 1.0
    if verify:
        check_invertible(sf, thermal)
    f = uncertainty_curve(sf, thermal)
    if P >= f(0.0):
        return 0.0
    if P <= f(1.0):
        return 1.0
    return float(bisect(lambda s: f(s) - P, 0.0, 1.0, xtol=BISECT_XTOL))


def uncertainty_heuristic(sf: ScheduleFunctions | None = None, thermal: bool = False) -> Callable[[float], float]:
    """Monotone ``P -> s'`` map used when building schedules."""
    sf = sf or linear_schedule()
    check_invertible(sf, thermal)
    return lambda P: s_from_uncertainty(P, sf, thermal, verify=False)
