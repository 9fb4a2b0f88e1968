"""Charge-space operators of two identical fermions plus a third particle.

In one angular sector ``ell`` the operators act on radial samples:

    (T xi)(p) = 2 pi**2 sqrt(nu p**2 + lam) xi(p) + int k1_ell(p, q) xi(q) q**2 dq
    (W xi)(p) = 2 pi**2 / sqrt(nu p**2 + lam) xi(p) - 2 int k2_ell(p, q) xi(q) q**2 dq

with ``k*_ell`` the Legendre-projected kernels of
``1/(p**2 + q**2 + mu p.q + lam)`` and its square.  ``W`` is the Gram
operator of the deficiency space, ``<u_xi, u_eta> = <xi, W eta>``, and the
TMS extensions are generated by ``A = 2 W**-1 (T + alpha)`` (``S0`` in place of
``T`` on ``ell = 0``).

All matrices are stored measure-symmetrised (see :class:`SectorMatrix`).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NotBracketedError, NumericalFailure, ParameterError, SectorMismatch
from .numerics import (
    Charge,
    MassParams,
    RadialGrid,
    SectorMatrix,
    build_grid,
    sector_kernel_matrix,
    squared_denominator_integral,
    truncated_ball_integral,
    truncated_squared_ball_integral,
)

__all__ = [
    "mass_params",
    "ladder_grids",
    "build_Q",
    "build_T",
    "build_W",
    "SzeroSpec",
    "build_S0",
    "build_A",
    "w_inner",
    "pair_norm_u",
    "tms_residual_21",
    "shell_integral_21",
    "shell_constant_21",
    "NormLadder",
    "mapping_norm_estimate",
    "CounterexampleLadder",
    "counterexample_l0",
    "NormEquivalenceReport",
    "norm_equivalence_bounds",
    "spectral_bottom_A",
    "CriticalityResult",
    "classify_mass",
    "mass_criticality_scan",
]


def mass_params(m) -> MassParams:
    """``mu = 2/(m+1)``, ``nu = 1 - mu**2/4`` for third-particle mass ``m``."""
    return MassParams(float(m))


def ladder_grids(p_min, p_max_list, nodes_per_decade=64):
    """Composite grids sharing ``p_min`` and node density, one per cutoff."""
    grids = []
    for p_max in p_max_list:
        decades = math.log10(p_max / p_min)
        n = 16 * max(1, round(decades * nodes_per_decade / 16))
        grids.append(build_grid("gauss-legendre-composite", n, p_min, p_max))
    return grids


def _sym_kernel(ell, lam, mass, grid, power):
    k = sector_kernel_matrix(ell, mass.mu, lam, grid, power=power)
    d = grid.sym
    return d[:, None] * k * d[None, :]


def _check_lam(lam):
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")


def build_Q(ell, lam, mass: MassParams, grid: RadialGrid) -> SectorMatrix:
    """Integral part of ``T`` alone."""
    _check_lam(lam)
    return SectorMatrix("Q", ell, lam, grid, _sym_kernel(ell, lam, mass, grid, 1), mass)


def build_T(ell, lam, mass: MassParams, grid: RadialGrid) -> SectorMatrix:
    _check_lam(lam)
    m = _sym_kernel(ell, lam, mass, grid, 1)
    m[np.diag_indices_from(m)] += 2.0 * math.pi**2 * np.sqrt(mass.nu * grid.nodes**2 + lam)
    return SectorMatrix("T", ell, lam, grid, m, mass)


def build_W(ell, lam, mass: MassParams, grid: RadialGrid, check=True) -> SectorMatrix:
    """Gram operator of the deficiency space; positive definite (checked by Cholesky)."""
    _check_lam(lam)
    m = -2.0 * _sym_kernel(ell, lam, mass, grid, 2)
    m[np.diag_indices_from(m)] += 2.0 * math.pi**2 / np.sqrt(mass.nu * grid.nodes**2 + lam)
    if check:
        try:
            linalg.cholesky(m)
        except linalg.LinAlgError as exc:
            raise NumericalFailure(f"W is not positive definite (ell={ell}, lam={lam}, m={mass.m})") from exc
    return SectorMatrix("W", ell, lam, grid, m, mass)


@dataclass(frozen=True)
class SzeroSpec:
    """Symmetric operator used on the ``ell = 0`` sector in place of ``T``.

    ``mode='zero'`` is the zero operator.  ``mode='multiplication'`` multiplies
    by ``amplitude * bump((ln p - ln center)/width)`` with the smooth,
    compactly supported ``bump(x) = exp(1 - 1/(1 - x**2))`` on ``|x| < 1``.
    """

    mode: str = "zero"
    amplitude: float = 1.0
    center: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.mode not in ("zero", "multiplication"):
            raise ParameterError(f"unknown S0 mode {self.mode!r}")
        if self.center <= 0 or self.width <= 0:
            raise ParameterError("S0 profile needs positive center and width")

    def profile(self, p):
        p = np.asarray(p, dtype=float)
        if self.mode == "zero":
            return np.zeros_like(p)
        x = (np.log(p) - math.log(self.center)) / self.width
        out = np.zeros_like(x)
        inside = np.abs(x) < 1
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out


def build_S0(spec: SzeroSpec, lam, mass: MassParams, grid: RadialGrid) -> SectorMatrix:
    return SectorMatrix("S0", 0, lam, grid, np.diag(spec.profile(grid.nodes)), mass)


def build_A(ell, lam, mass: MassParams, alpha, grid: RadialGrid, s0: SzeroSpec = SzeroSpec(),
            W: SectorMatrix | None = None) -> SectorMatrix:
    """``A = 2 W**-1 (T + alpha)`` (``S0`` replaces ``T`` when ``ell = 0``)."""
    W = build_W(ell, lam, mass, grid) if W is None else W
    op = build_S0(s0, lam, mass, grid) if ell == 0 else build_T(ell, lam, mass, grid)
    rhs = 2.0 * (op.entries + alpha * np.eye(grid.n))
    entries = linalg.solve(W.entries, rhs, assume_a="pos")
    return SectorMatrix("A", ell, lam, grid, entries, mass)


def w_inner(W: SectorMatrix, xi: Charge, eta: Charge) -> complex:
    """``<xi, eta>_W = <xi, W eta>``."""
    if xi.ell != eta.ell:
        raise SectorMismatch("charges belong to different sectors")
    return complex(np.vdot(xi.sym(), W.entries @ eta.sym()))


def pair_norm_u(xi: Charge, eta: Charge, lam, mass: MassParams) -> complex:
    """``<u_xi, u_eta>`` by the reduced double radial quadrature.

    The diagonal part uses the closed form ``pi**2/sqrt(nu p**2 + lam)`` and
    the exchange part the squared-denominator sector kernel; no ``W`` matrix
    is formed.
    """
    if xi.ell != eta.ell:
        raise SectorMismatch("charges belong to different sectors")
    g = xi.grid
    p = g.nodes
    mu_w = g.measure
    xb = np.conj(xi.values)
    diag = np.sum(mu_w * xb * eta.values * squared_denominator_integral(p, mass.mu, mass.nu, lam))
    k2 = sector_kernel_matrix(xi.ell, mass.mu, lam, g, power=2)
    cross = (mu_w * xb) @ (k2 @ (mu_w * eta.values))
    return complex(2.0 * (diag - cross))


def tms_residual_21(xi: Charge, eta: Charge, alpha, op: SectorMatrix, W: SectorMatrix | None = None) -> float:
    """``L**2`` grid norm of ``alpha xi + op xi - W eta / 2`` (``op`` is ``T`` or ``S0``)."""
    if xi.ell != eta.ell or xi.ell != op.ell:
        raise SectorMismatch("charges and operator belong to different sectors")
    if W is None:
        W = build_W(op.ell, op.lam, op.mass, op.grid)
    v = xi.sym()
    r = alpha * v + op.entries @ v - 0.5 * (W.entries @ eta.sym())
    return float(np.linalg.norm(r))


def _value_at(charge: Charge, p1):
    g = charge.grid
    if p1 == 0:
        if charge.ell > 0:
            return 0.0
        # extrapolate the low-momentum plateau
        return complex(charge.values[0])
    i = int(np.argmin(np.abs(g.nodes - p1)))
    if not np.isclose(g.nodes[i], p1, rtol=1e-12, atol=0):
        raise ParameterError("p1 must be a grid node (or 0)")
    return complex(charge.values[i])


def _row_kernels(ell, lam, mass, grid, p1, power):
    return sector_kernel_matrix(ell, mass.mu, lam, grid, power=power, rows=[p1])[0]


def shell_integral_21(xi: Charge, eta: Charge, lam, mass: MassParams, p1, R) -> complex:
    """``int_{|p2|<R}`` of the singular part of ``g`` at fixed ``|p1|`` (radial sector amplitude).

    The diagonal terms use the closed-form truncated ball integrals; the
    exchange terms are grid sums over nodes below ``R``.
    """
    if xi.ell != eta.ell:
        raise SectorMismatch("charges belong to different sectors")
    g = xi.grid
    if R > g.p_max / 2:
        warnings.warn("R is close to the grid cutoff; exchange terms are truncated", stacklevel=2)
    inside = g.nodes < R
    mu_w = g.measure * inside
    k1 = _row_kernels(xi.ell, lam, mass, g, p1, 1)
    k2 = _row_kernels(xi.ell, lam, mass, g, p1, 2)
    val = (_value_at(xi, p1) * truncated_ball_integral(p1, mass.mu, mass.nu, lam, R)
           - np.sum(mu_w * k1 * xi.values)
           + _value_at(eta, p1) * truncated_squared_ball_integral(p1, mass.mu, mass.nu, lam, R)
           - np.sum(mu_w * k2 * eta.values))
    return complex(val)


def shell_constant_21(xi: Charge, eta: Charge, lam, mass: MassParams, p1) -> complex:
    """Predicted constant term ``-(T xi)(p1) + (W eta)(p1)/2``."""
    g = xi.grid
    S = math.sqrt(mass.nu * p1 * p1 + lam)
    k1 = _row_kernels(xi.ell, lam, mass, g, p1, 1)
    k2 = _row_kernels(xi.ell, lam, mass, g, p1, 2)
    t_xi = 2.0 * math.pi**2 * S * _value_at(xi, p1) + np.sum(g.measure * k1 * xi.values)
    w_eta = 2.0 * math.pi**2 / S * _value_at(eta, p1) - 2.0 * np.sum(g.measure * k2 * eta.values)
    return complex(-t_xi + 0.5 * w_eta)


# ---------------------------------------------------------------------------
# Ladder diagnostics


@dataclass(frozen=True)
class NormLadder:
    p_max: tuple
    norms: tuple

    @property
    def final_variation(self) -> float:
        return abs(self.norms[-1] - self.norms[-2]) / abs(self.norms[-2])

    @property
    def strictly_increasing(self) -> bool:
        return all(b > a for a, b in zip(self.norms, self.norms[1:]))

    def bounded(self, tol=0.05) -> bool:
        return self.final_variation < tol


def _weighted_operator_norm(entries, p, s):
    left = (1.0 + p**2) ** ((s - 1.0) / 2.0)
    right = (1.0 + p**2) ** (-s / 2.0)
    return float(linalg.svdvals(left[:, None] * entries * right[None, :])[0])


def mapping_norm_estimate(ell, s, lam, mass: MassParams, grid_ladder) -> NormLadder:
    """Norm of ``T: H^s -> H^(s-1)`` on each grid of the ladder."""
    norms = []
    for g in grid_ladder:
        T = build_T(ell, lam, mass, g)
        norms.append(_weighted_operator_norm(T.entries, g.nodes, s))
    return NormLadder(tuple(g.p_max for g in grid_ladder), tuple(norms))


@dataclass(frozen=True)
class CounterexampleLadder:
    p_max: tuple
    squared_norms: tuple
    increments: tuple
    slope: float
    profile_error: float

    def increments_constant(self, tol=0.1) -> bool:
        inc = np.asarray(self.increments)
        return bool(np.all(np.abs(inc / inc.mean() - 1.0) < tol))


def counterexample_l0(lam, mass: MassParams, cutoff_ladder, p_min=1e-3, nodes_per_decade=64):
    """Squared ``H^(1/2)`` norms of ``Q xi0`` for ``xi0`` the indicator of ``|p| <= 1``.

    ``Q xi0`` is computed by Nystrom quadrature on grids with a panel edge at
    ``p = 1``; ``profile_error`` is its largest relative deviation from the
    closed form ``truncated_ball_integral(p, R=1)``.  ``slope`` is the fitted
    growth of the squared norm per unit of ``ln p_max``.
    """
    cutoffs = sorted(cutoff_ladder)
    sq = []
    err = 0.0
    for g in ladder_grids(p_min, cutoffs, nodes_per_decade):
        xi0 = (g.nodes <= 1.0).astype(float)
        k = sector_kernel_matrix(0, mass.mu, lam, g, power=1)
        q = k @ (g.measure * xi0)
        exact = truncated_ball_integral(g.nodes, mass.mu, mass.nu, lam, 1.0)
        err = max(err, float(np.max(np.abs(q - exact) / exact)))
        sq.append(float(np.sum(g.measure * np.sqrt(1.0 + g.nodes**2) * q**2)))
    slope = float(np.polyfit(np.log(cutoffs), sq, 1)[0])
    return CounterexampleLadder(tuple(cutoffs), tuple(sq), tuple(np.diff(sq).tolist()), slope, err)


@dataclass(frozen=True)
class NormEquivalenceReport:
    c1_est: float
    c2_est: float
    c1_ladder: tuple
    c2_ladder: tuple
    p_max: tuple

    @property
    def stability(self) -> float:
        """Largest relative change of ``c1`` or ``c2`` across the last refinement."""
        if len(self.c1_ladder) < 2:
            return math.nan
        d1 = abs(self.c1_ladder[-1] / self.c1_ladder[-2] - 1.0)
        d2 = abs(self.c2_ladder[-1] / self.c2_ladder[-2] - 1.0)
        return max(d1, d2)


def norm_equivalence_bounds(ell, lam, mass: MassParams, grid_ladder) -> NormEquivalenceReport:
    """Extremal ``||u_xi|| / ||xi||_{H^(-1/2)}`` from generalized eigenvalues of ``W``."""
    c1, c2 = [], []
    for g in grid_ladder:
        W = build_W(ell, lam, mass, g)
        gram = np.diag((1.0 + g.nodes**2) ** -0.5)
        ev = linalg.eigh(W.entries, gram, eigvals_only=True)
        c1.append(math.sqrt(ev[0]))
        c2.append(math.sqrt(ev[-1]))
    return NormEquivalenceReport(c1[-1], c2[-1], tuple(c1), tuple(c2), tuple(g.p_max for g in grid_ladder))


# ---------------------------------------------------------------------------
# Mass criticality of odd sectors


def spectral_bottom_A(ell, lam, mass: MassParams, grid: RadialGrid, alpha=0.0) -> float:
    """Lowest eigenvalue of ``A`` in the ``W`` inner product.

    ``A v = sigma v`` is the generalized symmetric problem ``2 (T + alpha) v = sigma W v``.
    """
    T = build_T(ell, lam, mass, grid)
    W = build_W(ell, lam, mass, grid)
    ev = linalg.eigh(2.0 * (T.entries + alpha * np.eye(grid.n)), W.entries,
                     eigvals_only=True, subset_by_index=[0, 0])
    return float(ev[0])


@dataclass(frozen=True)
class CriticalityResult:
    ell: int
    m_crit: float
    bracket: tuple
    samples: tuple


def classify_mass(ell, lam, m, grid_ladder, alpha=0.0):
    """Return ``(stable, bottoms)`` for the spectral bottom of ``A`` across the ladder.

    Stable sectors keep a cutoff-independent positive bottom (``2 lam`` for
    heavy third particles).  Unstable means the bottom is negative at the
    largest cutoff and still falling, the onset of the divergence to minus
    infinity (it then scales like ``p_max**2``).
    """
    mass = mass_params(m)
    bottoms = tuple(spectral_bottom_A(ell, lam, mass, g, alpha) for g in grid_ladder)
    unstable = bottoms[-1] < 0 and bottoms[-1] < bottoms[-2]
    return (not unstable), bottoms


def mass_criticality_scan(ell, lam, grid_ladder, m_range, alpha=0.0, rtol=1e-2) -> CriticalityResult:
    """Bisect the third-particle mass separating stable from unstable sectors.

    ``m_range = (m_lo, m_hi)`` must bracket the transition: unstable at
    ``m_lo``, stable at ``m_hi``.  The boundary is located in ``ln m`` to
    relative ``rtol``.
    """
    if ell % 2 != 1:
        raise ParameterError("criticality scans are defined for odd sectors")
    lo, hi = m_range
    samples = []
    s_lo, b = classify_mass(ell, lam, lo, grid_ladder, alpha)
    samples.append((lo, s_lo, b))
    s_hi, b = classify_mass(ell, lam, hi, grid_ladder, alpha)
    samples.append((hi, s_hi, b))
    if s_lo or not s_hi:
        raise NotBracketedError(f"no stable/unstable transition in m in {m_range} for ell={ell}")
    while hi / lo - 1.0 > rtol / 2:
        mid = math.sqrt(lo * hi)
        st, b = classify_mass(ell, lam, mid, grid_ladder, alpha)
        samples.append((mid, st, b))
        if st:
            hi = mid
        else:
            lo = mid
    return CriticalityResult(ell, math.sqrt(lo * hi), (lo, hi), tuple(samples))
