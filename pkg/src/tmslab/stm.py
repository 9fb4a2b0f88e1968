"""Three identical bosons with zero-range interaction: the STM equation in the s-wave.

For a bound state at energy ``-E`` the charge solves

    alpha xi(p) + 2 pi**2 sqrt(3/4 p**2 + E) xi(p) - 2 int xi(q) / (p**2 + q**2 + p.q + E) dq = 0.

The exchange coefficient defaults to -2 (bosonic symmetrisation); it is kept
as a parameter because with +2 the operator is positive and has no zero modes.
The grid cutoff ``p_max`` plays the role of the three-body parameter: the
discretised problem has a discrete spectrum accumulating geometrically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .errors import FitFailure, ParameterError
from .numerics import Charge, RadialGrid, SectorMatrix, sector_kernel_matrix

__all__ = [
    "STM_EXCHANGE",
    "StmLevels",
    "DanilovFit",
    "build_stm_operator",
    "stm_smallest_singular",
    "stm_smallest_eigenvalue",
    "stm_negative_count",
    "stm_spectrum",
    "stm_null_vector",
    "danilov_fit",
    "thomas_ratio_check",
]

STM_EXCHANGE = -2.0
MU_BOSONS = 1.0
# trusted levels satisfy E < (TRUST_FRACTION * p_max)**2
TRUST_FRACTION = 0.01
SCAN_POINTS_PER_PERIOD = 16
DANILOV_MAX_RESIDUAL = 0.05


def build_stm_operator(E, alpha, grid: RadialGrid, exchange=STM_EXCHANGE) -> SectorMatrix:
    """Symmetrised Nystrom matrix ``M(E)``; ``M(E) xi = 0`` is the discretised equation."""
    if not E > 0:
        raise ParameterError(f"E must be positive, got {E}")
    k = sector_kernel_matrix(0, MU_BOSONS, E, grid, power=1)
    d = grid.sym
    m = exchange * (d[:, None] * k * d[None, :])
    m[np.diag_indices_from(m)] += alpha + 2.0 * math.pi**2 * np.sqrt(0.75 * grid.nodes**2 + E)
    return SectorMatrix("STM", 0, float(E), grid, m)


def _eigvalsh(E, alpha, grid, exchange):
    return linalg.eigvalsh(build_stm_operator(E, alpha, grid, exchange).entries)


def stm_smallest_singular(E, alpha, grid: RadialGrid, exchange=STM_EXCHANGE) -> float:
    """Smallest singular value of ``M(E)``; it vanishes at a bound state."""
    return float(np.min(np.abs(_eigvalsh(E, alpha, grid, exchange))))


def stm_smallest_eigenvalue(E, alpha, grid: RadialGrid, exchange=STM_EXCHANGE) -> float:
    return float(_eigvalsh(E, alpha, grid, exchange)[0])


def stm_negative_count(E, alpha, grid: RadialGrid, exchange=STM_EXCHANGE) -> int:
    """Number of negative eigenvalues of ``M(E)``: the levels deeper than ``E``."""
    return int(np.sum(_eigvalsh(E, alpha, grid, exchange) < 0))


@dataclass(frozen=True)
class StmLevels:
    """Bound-state energies ``E_n`` (states at ``-E_n``), shallowest first."""

    alpha: float
    energies: tuple
    cutoff: float
    trusted: tuple = None
    complete: bool = True
    ratios: tuple = field(init=False)
    s0_from_ratios: tuple = field(init=False)

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.size and (np.any(e <= 0) or np.any(np.diff(e) <= 0)):
            raise ParameterError("energies must be positive and strictly increasing")
        if self.trusted is None:
            object.__setattr__(self, "trusted", tuple(True for _ in e))
        r = e[1:] / e[:-1]
        object.__setattr__(self, "energies", tuple(e.tolist()))
        object.__setattr__(self, "ratios", tuple(r.tolist()))
        object.__setattr__(self, "s0_from_ratios", tuple((2 * math.pi / np.log(r)).tolist()))

    @property
    def trusted_energies(self):
        return tuple(E for E, t in zip(self.energies, self.trusted) if t)

    def trusted_ratio_indices(self):
        return [i for i in range(len(self.ratios)) if self.trusted[i] and self.trusted[i + 1]]


def _bisect_count(lo, hi, target, count, rtol):
    """Shrink ``[lo, hi]`` with ``count(lo) >= target > count(hi)`` in log space."""
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if count(mid) >= target:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def stm_spectrum(alpha, grid: RadialGrid, n_levels: int = 4, exchange=STM_EXCHANGE,
                 E_min=None, E_max=None, rtol=1e-10) -> StmLevels:
    """The ``n_levels`` shallowest bound states above ``E_min``.

    Levels are bracketed by a geometric scan of the negative-eigenvalue count
    of ``M(E)`` (monotone in ``E``) and refined by bisection to relative
    ``rtol``.  The scan starts at four points per decade and switches to 16
    points per period once two levels fix the period.  Levels with
    ``E > (0.01 p_max)**2`` are marked untrusted.
    """
    if n_levels < 1:
        raise ParameterError("n_levels must be positive")
    E_min = (10.0 * grid.p_min) ** 2 if E_min is None else E_min
    E_max = grid.p_max**2 if E_max is None else E_max
    cache = {}

    def count(E):
        if E not in cache:
            cache[E] = stm_negative_count(E, alpha, grid, exchange)
        return cache[E]

    roots = []
    step = 10.0**0.25
    E = E_min
    n_prev = count(E)
    while len(roots) < n_levels and E < E_max and n_prev > 0:
        E_next = min(E * step, E_max)
        n_next = count(E_next)
        # each unit drop of the count is one level inside (E, E_next]
        for target in range(n_prev, n_next, -1):
            roots.append(_bisect_count(E, E_next, target, count, rtol))
            if len(roots) >= n_levels:
                break
        if len(roots) >= 2:
            period = roots[-1] / roots[-2]
            step = max(period ** (1.0 / SCAN_POINTS_PER_PERIOD), 1.0 + 1e-3)
        E, n_prev = E_next, n_next
    roots = sorted(roots)[:n_levels]
    limit = (TRUST_FRACTION * grid.p_max) ** 2
    trusted = tuple(r <= limit for r in roots)
    complete = len(roots) == n_levels and sum(trusted) == n_levels
    return StmLevels(alpha, tuple(roots), grid.p_max, trusted, complete)


def stm_null_vector(E, alpha, grid: RadialGrid, exchange=STM_EXCHANGE) -> Charge:
    """Radial charge spanning the (near) kernel of ``M(E)``, unit ``L**2`` norm."""
    w, v = linalg.eigh(build_stm_operator(E, alpha, grid, exchange).entries)
    i = int(np.argmin(np.abs(w)))
    xi = v[:, i] / grid.sym
    # fix the sign by the low-momentum plateau
    if xi[np.argmax(np.abs(v[:, i]))] < 0:
        xi = -xi
    return Charge(0, xi, grid)


@dataclass(frozen=True)
class DanilovFit:
    """``p**2 xi(p) ~ A sin(s0 ln p) + B cos(s0 ln p)`` over a momentum window."""

    A: float
    B: float
    s0: float
    beta: float
    residual: float
    window: tuple


def danilov_fit(xi: Charge, window, s0_range=(0.05, 5.0)) -> DanilovFit:
    """Least-squares fit of the log-periodic tail of a charge.

    The frequency is located by scanning the linear least-squares residual
    in ``s0`` and polished jointly with the amplitudes.  ``beta = A/B``
    (infinite when ``B`` vanishes).  Raises :class:`FitFailure` when the
    relative residual exceeds 0.05.
    """
    g = xi.grid
    p_lo, p_hi = window
    if not (10 * g.p_min * (1 - 1e-12) <= p_lo < p_hi <= g.p_max / 10 * (1 + 1e-12)):
        raise ParameterError("window must lie inside [10 p_min, p_max/10]")
    sel = (g.nodes >= p_lo) & (g.nodes <= p_hi)
    if sel.sum() < 8:
        raise ParameterError("window holds too few grid nodes")
    lp = np.log(g.nodes[sel])
    y = np.real(g.nodes[sel] ** 2 * xi.values[sel])
    ynorm = np.linalg.norm(y)
    if ynorm == 0:
        raise FitFailure("charge vanishes on the window")

    def linear(s):
        basis = np.column_stack([np.sin(s * lp), np.cos(s * lp)])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return coef, np.linalg.norm(basis @ coef - y)

    s_grid = np.linspace(*s0_range, 2000)
    res = np.array([linear(s)[1] for s in s_grid])
    s_start = s_grid[int(np.argmin(res))]
    (a0, b0), _ = linear(s_start)

    def resid(x):
        a, b, s = x
        return (a * np.sin(s * lp) + b * np.cos(s * lp) - y) / ynorm

    sol = optimize.least_squares(resid, [a0, b0, s_start], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    A, B, s0 = (float(v) for v in sol.x)
    residual = float(np.linalg.norm(resid(sol.x)))
    if residual > DANILOV_MAX_RESIDUAL:
        raise FitFailure(f"log-periodic fit residual {residual:.3g} > {DANILOV_MAX_RESIDUAL}")
    beta = math.inf if abs(B) <= 1e-12 * max(abs(A), 1e-300) else A / B
    return DanilovFit(A, B, s0, beta, residual, (float(p_lo), float(p_hi)))


def thomas_ratio_check(levels: StmLevels):
    """``(s0_estimate, max_pairwise_deviation)`` from the trusted level ratios.

    The deviation is the largest relative spread between pairwise ``s0``
    estimates; it is ``None`` when fewer than two trusted ratios exist.
    """
    idx = levels.trusted_ratio_indices()
    if not idx:
        raise ParameterError("no trusted level ratio available")
    s = np.array([levels.s0_from_ratios[i] for i in idx])
    est = float(np.mean(s))
    if s.size < 2:
        return est, None
    return est, float((s.max() - s.min()) / est)
