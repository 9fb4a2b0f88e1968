"""Two-body point interaction in three dimensions, fully in closed form.

The extensions of ``-Delta`` restricted away from the origin form a
one-parameter family.  At a reference shift ``lam > 0`` an element of the
adjoint's domain is ``g = f + eta/(p**2+lam)**2 + xi/(p**2+lam)`` (momentum
space, ``f`` regular); the extension with parameter ``alpha`` keeps exactly
the ``g`` with ``eta = tau * xi``, ``tau = 2 sqrt(lam) (4 pi alpha + sqrt(lam))``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError, ParameterError
from .numerics import RadialGrid

__all__ = [
    "FRIEDRICHS",
    "AccuracyWarning",
    "ExtensionParam2B",
    "SingularPair2B",
    "RegularPart2B",
    "ChargeEstimates",
    "tau_from_alpha",
    "alpha_from_tau",
    "u_xi_hat",
    "u_xi_norm2",
    "shell_integral_2b",
    "asymptotic_coeffs_2b",
    "tms_check_2b",
    "charge_extract_2b",
    "bound_state_energy",
    "form_value_2b",
    "gaussian_trial",
    "greens_function",
]


class _Friedrichs:
    """Sentinel for ``alpha = tau = infinity`` (the Friedrichs extension)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FRIEDRICHS"

    def __reduce__(self):
        return (_Friedrichs, ())


FRIEDRICHS = _Friedrichs()


class AccuracyWarning(UserWarning):
    pass


def _check_lambda(lam):
    if not (np.isfinite(lam) and lam > 0):
        raise ParameterError(f"lambda must be positive, got {lam}")


def tau_from_alpha(alpha, lam):
    """``tau = 2 sqrt(lam) (4 pi alpha + sqrt(lam))``; Friedrichs maps to itself."""
    _check_lambda(lam)
    if alpha is FRIEDRICHS:
        return FRIEDRICHS
    s = math.sqrt(lam)
    return 2.0 * s * (4.0 * math.pi * alpha + s)


def alpha_from_tau(tau, lam):
    """``alpha = (tau - 2 lam) / (8 pi sqrt(lam))``."""
    _check_lambda(lam)
    if tau is FRIEDRICHS:
        return FRIEDRICHS
    return (tau - 2.0 * lam) / (8.0 * math.pi * math.sqrt(lam))


@dataclass(frozen=True)
class ExtensionParam2B:
    alpha: float
    lam: float

    def __post_init__(self):
        _check_lambda(self.lam)

    @property
    def tau(self):
        return tau_from_alpha(self.alpha, self.lam)

    @property
    def scattering_length(self):
        if self.alpha is FRIEDRICHS:
            return 0.0
        if self.alpha == 0:
            return math.inf
        return -1.0 / (4.0 * math.pi * self.alpha)


@dataclass(frozen=True)
class SingularPair2B:
    xi: complex
    eta: complex
    lam: float

    def __post_init__(self):
        _check_lambda(self.lam)
        if not (np.isfinite(self.xi) and np.isfinite(self.eta)):
            raise ParameterError("charges must be finite")

    @classmethod
    def tms(cls, xi, alpha, lam):
        """The pair obeying the boundary condition of parameter ``alpha``."""
        return cls(xi, tau_from_alpha(alpha, lam) * xi, lam)


@dataclass(frozen=True, eq=False)
class RegularPart2B:
    """Radial momentum-space samples of a spherically symmetric regular part."""

    samples: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if s.shape != (self.grid.n,) or not np.all(np.isfinite(s)):
            raise ParameterError("regular part must be finite samples on the grid")


def gaussian_trial(grid: RadialGrid, a: float = 1.0, amplitude: float = 1.0) -> RegularPart2B:
    """``amplitude * exp(-a p**2)`` sampled on ``grid``."""
    return RegularPart2B(amplitude * np.exp(-a * grid.nodes**2), grid)


def u_xi_hat(xi, lam, p):
    """Deficiency element ``xi / (p**2 + lam)`` in momentum space."""
    _check_lambda(lam)
    return xi / (np.asarray(p) ** 2 + lam)


def u_xi_norm2(xi, lam, grid: RadialGrid) -> float:
    """``||u_xi||**2`` by radial quadrature on ``grid`` (exact value ``|xi|**2 pi**2/sqrt(lam)``)."""
    u = u_xi_hat(xi, lam, grid.nodes)
    return float(4.0 * np.pi * np.sum(grid.measure * np.abs(u) ** 2))


def shell_integral_2b(pair: SingularPair2B, R):
    """``int_{|p|<R}`` of the singular part ``xi/(p**2+lam) + eta/(p**2+lam)**2``."""
    if not np.all(np.asarray(R) > 0):
        raise ParameterError("R must be positive")
    R = np.asarray(R, dtype=float)
    s = math.sqrt(pair.lam)
    x = R / s
    # x - atan x and atan x - x/(1+x**2) in a form without cancellation
    f1, f2 = _shell_profiles(x)
    val = 4.0 * np.pi * pair.xi * s * f1 + pair.eta * 2.0 * np.pi / s * f2
    return complex(val) if val.ndim == 0 else val


_SERIES_X = 0.5
_SERIES_TERMS = 30


def _shell_profiles(x):
    at = np.arctan(x)
    f1 = x - at
    f2 = at - x / (1.0 + x * x)
    small = x < _SERIES_X
    if np.any(small):
        xs = np.where(small, x, 0.0)
        s1 = np.zeros_like(xs)
        s2 = np.zeros_like(xs)
        for k in range(_SERIES_TERMS, 0, -1):
            sign = 1.0 if k % 2 else -1.0
            term = xs ** (2 * k + 1) / (2 * k + 1)
            s1 += sign * term
            s2 += sign * 2 * k * term
        f1 = np.where(small, s1, f1)
        f2 = np.where(small, s2, f2)
    return f1, f2


def asymptotic_coeffs_2b(pair: SingularPair2B):
    """Coefficients ``(linear, constant)`` of ``shell_integral_2b = linear*R + constant + o(1)``."""
    s = math.sqrt(pair.lam)
    linear = 4.0 * math.pi * pair.xi
    constant = -2.0 * math.pi**2 * s * pair.xi + math.pi**2 / s * pair.eta
    return complex(linear), complex(constant)


def tms_check_2b(pair: SingularPair2B, alpha) -> float:
    """``|eta - tau(alpha) xi|``; zero iff the pair obeys the condition at ``alpha``."""
    if alpha is FRIEDRICHS:
        return float(abs(pair.xi))
    return float(abs(pair.eta - tau_from_alpha(alpha, pair.lam) * pair.xi))


@dataclass(frozen=True)
class ChargeEstimates:
    R: tuple
    estimates: tuple
    rate: float


def charge_extract_2b(pair: SingularPair2B, R_ladder) -> ChargeEstimates:
    """Estimate ``xi`` as ``shell_integral_2b(R) / (4 pi R)`` along ``R_ladder``.

    ``rate`` is the log-log slope of successive estimate differences against
    ``R`` (close to -1); it is NaN when the estimates do not move.
    """
    R = np.asarray(R_ladder, dtype=float)
    if R.ndim != 1 or R.size < 3 or np.any(np.diff(R) <= 0) or R[0] <= 0:
        raise ParameterError("R_ladder must hold at least 3 increasing positive cutoffs")
    est = shell_integral_2b(pair, R) / (4.0 * np.pi * R)
    diffs = np.abs(np.diff(est))
    if np.all(diffs > 0):
        rate = float(np.polyfit(np.log(R[1:]), np.log(diffs), 1)[0])
    else:
        rate = math.nan
    return ChargeEstimates(tuple(R.tolist()), tuple(complex(e) for e in est), rate)


def bound_state_energy(alpha, lam_hint: float = 1.0):
    """Negative eigenvalue of the extension with parameter ``alpha``, or ``None``.

    Located by bisection on ``lam -> tau(lam)``: the bound state sits at
    ``-lam*`` with ``tau(lam*) = 0``.  The result does not depend on
    ``lam_hint``, which only seeds the bracket.
    """
    if alpha is FRIEDRICHS or alpha >= 0:
        return None
    if not np.isfinite(alpha):
        raise ParameterError("alpha must be finite or FRIEDRICHS")

    def tau(lam):
        return tau_from_alpha(alpha, lam)

    hi = float(lam_hint)
    while tau(hi) <= 0:
        hi *= 4.0
    lo = hi
    while tau(lo) >= 0:
        lo /= 4.0
        if lo < np.finfo(float).tiny:
            # the root (4 pi alpha)**2 underflows
            return -0.0
    root = optimize.bisect(tau, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=4000)
    return -root


def form_value_2b(phi: RegularPart2B, xi, lam, tau) -> float:
    """Quadratic form ``||grad phi||**2 - lam||phi+u_xi||**2 + lam||phi||**2 + tau pi**2/sqrt(lam)|xi|**2``.

    Norms of ``phi`` and its overlap with ``u_xi`` use the grid; ``||u_xi||**2``
    uses its closed form.
    """
    _check_lambda(lam)
    g = phi.grid
    f = phi.samples
    scale = np.max(np.abs(f))
    if scale > 0 and np.max(np.abs(f[-4:])) > 1e-6 * scale:
        warnings.warn("regular part does not decay on the grid; norms are truncated",
                      AccuracyWarning, stacklevel=2)
    m = 4.0 * np.pi * g.measure
    grad2 = np.sum(m * g.nodes**2 * f**2)
    phi2 = np.sum(m * f**2)
    u = u_xi_hat(xi, lam, g.nodes)
    cross = np.sum(m * f * u)
    u2 = abs(xi) ** 2 * math.pi**2 / math.sqrt(lam)
    total2 = phi2 + 2.0 * np.real(cross) + u2
    return float(grad2 - lam * total2 + lam * phi2 + tau * math.pi**2 / math.sqrt(lam) * abs(xi) ** 2)


def greens_function(x, lam):
    """``exp(-sqrt(lam) x) / (4 pi x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("the Green's function is singular at x = 0")
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    val = np.exp(-math.sqrt(lam) * x) / (4.0 * math.pi * x)
    return float(val) if val.ndim == 0 else val
