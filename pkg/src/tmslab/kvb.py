"""Kreĭn-Višik-Birman statements checked on the two-body point-interaction family.

The reference operator is ``S = -Delta + lam`` on functions vanishing at the
origin, with bottom ``m(S) = lam``.  Its extensions are labelled by the scalar
``tau`` acting on the one-dimensional deficiency space, so ``m(T) = tau``.  The
extension ``S_T`` is the shifted point interaction with bottom ``lam - (4 pi
alpha)**2`` when a bound state exists and ``lam`` otherwise (the essential
spectrum of the free Laplacian starts at 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitFailure, ParameterError
from .twobody import FRIEDRICHS, SingularPair2B, alpha_from_tau, bound_state_energy, tau_from_alpha

__all__ = [
    "KvbCheck",
    "kvb_bound_check",
    "PositivityCheck",
    "positivity_equivalence_check",
    "ExtremalReport",
    "friedrichs_krein_identify",
    "DecompositionCheck",
    "decomposition_uniqueness_check",
    "shifted_pair",
]


@dataclass(frozen=True)
class KvbCheck:
    """Bottoms and the two-sided bound ``m(T) >= m(S_T) >= m(S) m(T) / (m(S) + m(T))``.

    ``skipped`` carries a reason when ``m(T) > -m(S)`` fails; the bounds are
    then not evaluated.
    """

    alpha: float
    lam: float
    mS: float
    mT: float
    mST: float
    upper_margin: float = math.nan
    lower_margin: float = math.nan
    upper_ok: bool = False
    lower_ok: bool = False
    skipped: str | None = None

    @property
    def ok(self) -> bool:
        return self.skipped is None and self.upper_ok and self.lower_ok


def _bottom_shifted(alpha, lam):
    e = bound_state_energy(alpha)
    return lam if e is None else e + lam


def kvb_bound_check(alpha, lam) -> KvbCheck:
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    tau = tau_from_alpha(alpha, lam)
    mST = _bottom_shifted(alpha, lam)
    if not tau > -lam:
        return KvbCheck(alpha, lam, lam, tau, mST, skipped="requires m(T) > -m(S)")
    upper = tau - mST
    lower = mST - lam * tau / (lam + tau)
    # margins are differences of O(lam + |tau|) quantities
    slack = 1e-12 * (lam + abs(tau))
    return KvbCheck(alpha, lam, lam, tau, mST, upper, lower, upper >= -slack, lower >= -slack)


@dataclass(frozen=True)
class PositivityCheck:
    alpha: float
    lam: tuple
    sign_tau: tuple
    sign_bottom: tuple

    @property
    def ok(self) -> bool:
        return self.sign_tau == self.sign_bottom


def positivity_equivalence_check(alpha, lambda_grid) -> PositivityCheck:
    """Compare ``sign tau(lam)`` with the sign of the shifted bottom ``m(S_T)``.

    For ``alpha < 0`` the bottom sign is ``sign(lam - (4 pi alpha)**2)``; both
    signs are taken from exactly factored expressions so that they vanish
    together at the threshold.
    """
    lams = tuple(float(x) for x in lambda_grid)
    if any(not x > 0 for x in lams):
        raise ParameterError("lambda grid must be positive")
    st, sb = [], []
    for lam in lams:
        s = math.sqrt(lam)
        if alpha is FRIEDRICHS:
            st.append(1)
            sb.append(1)
            continue
        # tau = 2 s (s + 4 pi alpha), lam - (4 pi alpha)**2 = (s - 4 pi |alpha|)(s + 4 pi |alpha|)
        st.append(int(np.sign(s + 4.0 * math.pi * alpha)))
        sb.append(int(np.sign(s - 4.0 * math.pi * abs(alpha))) if alpha < 0 else 1)
    return PositivityCheck(alpha, lams, tuple(st), tuple(sb))


@dataclass(frozen=True)
class ExtremalReport:
    lam: float
    krein_alpha: float
    krein_bound_state: float
    krein_error: float
    friedrichs_bound_state: object

    @property
    def ok(self) -> bool:
        return self.krein_error <= 1e-12 and self.friedrichs_bound_state is None


def friedrichs_krein_identify(lam) -> ExtremalReport:
    """``tau = 0`` is the Krein-von Neumann extension at shift ``lam``: bottom exactly ``-lam``."""
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    a = alpha_from_tau(0.0, lam)
    e = bound_state_energy(a)
    return ExtremalReport(lam, a, e, abs(e + lam) / lam, bound_state_energy(FRIEDRICHS))


def shifted_pair(pair: SingularPair2B, lam2) -> SingularPair2B:
    """The same ``g`` decomposed at shift ``lam2``.

    ``xi`` is the leading ``1/p**2`` coefficient and does not move.  ``eta``
    follows from requiring the new regular part to integrate to zero, which
    keeps the constant of the shell-integral asymptotics unchanged.
    """
    s1, s2 = math.sqrt(pair.lam), math.sqrt(lam2)
    eta2 = s2 * (pair.eta / s1 + 2.0 * pair.xi * (s2 - s1))
    return SingularPair2B(pair.xi, eta2, lam2)


@dataclass(frozen=True)
class DecompositionCheck:
    lam1: float
    lam2: float
    xi_fit: complex
    eta_shifted: complex
    residual: float


def _g_hat(pair: SingularPair2B, p):
    d = p * p + pair.lam
    return pair.xi / d + pair.eta / d**2


def decomposition_uniqueness_check(pair: SingularPair2B, lam1, lam2, p_fit=(1e3, 1e5)) -> DecompositionCheck:
    """Re-decompose ``g`` (given at shift ``lam1``) at ``lam2``.

    ``xi'`` is fitted from the large-momentum tail of ``g`` against
    ``(p**2+lam2)**-k``, ``k = 1, 2, 3``, by linear least squares; ``eta'``
    comes from :func:`shifted_pair`.  ``residual`` is ``|xi' - xi|`` relative
    to the size of the pair: the action ``p**2 g - xi`` of the adjoint is
    shift-independent exactly when it vanishes.
    """
    if not (lam1 > 0 and lam2 > 0):
        raise ParameterError("shifts must be positive")
    if abs(pair.lam - lam1) > 1e-15 * lam1:
        raise ParameterError("pair is not decomposed at lam1")
    p = np.geomspace(*p_fit, 64)
    d = p * p + lam2
    # columns scaled by the leading decay so the system is well conditioned
    basis = np.column_stack([np.ones_like(p), 1.0 / d, 1.0 / d**2])
    rhs = _g_hat(pair, p) * d
    coef, *_ = np.linalg.lstsq(basis.astype(complex), rhs.astype(complex), rcond=None)
    fit_res = np.linalg.norm(basis @ coef - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if fit_res > 1e-6 and np.linalg.norm(rhs) > 0:
        raise FitFailure(f"tail fit at lam2={lam2} failed (residual {fit_res:.3g})")
    xi_fit = complex(coef[0])
    norm = max(abs(pair.xi), abs(pair.eta), 1.0)
    return DecompositionCheck(lam1, lam2, xi_fit, complex(shifted_pair(pair, lam2).eta),
                              abs(xi_fit - pair.xi) / norm)
