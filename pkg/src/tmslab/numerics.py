"""Radial grids, Legendre polynomials, sector kernels and closed-form ball integrals.

Every operator in the package is discretised on a :class:`RadialGrid` in the
momentum magnitude ``p``.  Functions of a three-dimensional momentum that live
in one angular sector ``ell`` are stored as radial samples (:class:`Charge`);
the spherical harmonic is implicit and unit-normalised, so radial integrals
carry the measure ``p**2 dp``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DomainError, ParameterError

__all__ = [
    "TOLERANCES",
    "RadialGrid",
    "MassParams",
    "Charge",
    "SectorMatrix",
    "build_grid",
    "default_grid",
    "legendre",
    "angular_kernel",
    "sector_kernel_matrix",
    "sobolev_norm",
    "truncated_ball_integral",
    "truncated_squared_ball_integral",
    "squared_denominator_integral",
]

# quadrature: adaptive angular integrals; norm_exactness: grid moment check
TOLERANCES = {"quadrature": 1e-12, "norm_exactness": 1e-8}

SCHEMES = ("log-uniform", "gauss-legendre-composite")
PANEL_ORDER = 16


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature nodes and weights on the half-line ``(p_min, p_max)``.

    ``weights`` integrate ``dp`` (not ``p**2 dp``); use :meth:`measure` for the
    three-dimensional radial measure.
    """

    nodes: np.ndarray
    weights: np.ndarray
    p_min: float
    p_max: float
    scheme: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(self.nodes))
        object.__setattr__(self, "weights", _readonly(self.weights))
        p, w = self.nodes, self.weights
        if p.ndim != 1 or p.shape != w.shape:
            raise ParameterError("nodes and weights must be 1-d arrays of equal length")
        if not (np.all(p > 0) and np.all(np.diff(p) > 0)):
            raise ParameterError("nodes must be positive and strictly increasing")
        if not np.all(w > 0):
            raise ParameterError("weights must be positive")

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def measure(self) -> np.ndarray:
        """Weights of ``p**2 dp``."""
        return self.weights * self.nodes**2

    @property
    def sym(self) -> np.ndarray:
        """Diagonal of the measure symmetrisation ``sqrt(w_i p_i**2)``."""
        return np.sqrt(self.measure)

    def integrate(self, values) -> complex | float:
        return np.sum(self.weights * np.asarray(values))

    def scaled(self, c: float) -> "RadialGrid":
        """The same grid with every momentum multiplied by ``c``."""
        return RadialGrid(self.nodes * c, self.weights * c, self.p_min * c,
                          self.p_max * c, self.scheme)

    def describe(self) -> dict:
        return {"scheme": self.scheme, "n": self.n, "p_min": self.p_min, "p_max": self.p_max}


def _panel_order(n: int) -> int:
    for q in range(min(PANEL_ORDER, n), 0, -1):
        if n % q == 0:
            return q
    return 1


def build_grid(scheme: str, n: int, p_min: float, p_max: float) -> RadialGrid:
    """Build a radial quadrature grid.

    ``log-uniform`` places ``n`` nodes ``p_min * r**i`` (``i = 0..n-1``,
    ``r = (p_max/p_min)**(1/n)``) with the periodic trapezoid rule in ``ln p``.
    ``gauss-legendre-composite`` tiles ``[ln p_min, ln p_max]`` with equal
    panels carrying Gauss-Legendre rules of order up to 16 (so a grid from
    ``1e-4`` to ``1e4`` with 512 nodes has four panels per decade and panel
    edges on every power of ten).
    """
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown grid scheme {scheme!r}")
    if int(n) != n or n < 8:
        raise ParameterError("grid needs n >= 8 nodes")
    if not (np.isfinite(p_min) and np.isfinite(p_max) and 0 < p_min < p_max):
        raise ParameterError(f"need 0 < p_min < p_max, got ({p_min}, {p_max})")
    n = int(n)
    lo, hi = np.log(p_min), np.log(p_max)
    if scheme == "log-uniform":
        h = (hi - lo) / n
        p = p_min * np.exp(h * np.arange(n))
        return RadialGrid(p, h * p, float(p_min), float(p_max), scheme)
    q = _panel_order(n)
    x, w = leggauss(q)
    edges = np.linspace(lo, hi, n // q + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    t = (half[:, None] * x[None, :] + mid[:, None]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    p = np.exp(t)
    return RadialGrid(p, wt * p, float(p_min), float(p_max), scheme)


def default_grid(n: int = 512, p_min: float = 1e-4, p_max: float = 1e4) -> RadialGrid:
    return build_grid("gauss-legendre-composite", n, p_min, p_max)


@dataclass(frozen=True)
class MassParams:
    """Mass of the third particle (fermion mass 1) and the derived kernel constants."""

    m: float
    mu: float = field(init=False)
    nu: float = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m > 0):
            raise ParameterError(f"mass must be positive, got {self.m}")
        mu = 2.0 / (self.m + 1.0)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", 1.0 - mu * mu / 4.0)


@dataclass(frozen=True, eq=False)
class Charge:
    """Radial samples of a charge in angular sector ``ell``."""

    ell: int
    values: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.ell < 0 or int(self.ell) != self.ell:
            raise ParameterError("sector index must be a non-negative integer")
        if v.shape != (self.grid.n,):
            raise ParameterError("charge length does not match the grid")
        if not np.all(np.isfinite(v)):
            raise ParameterError("charge samples must be finite")

    @classmethod
    def from_function(cls, grid: RadialGrid, ell: int, f) -> "Charge":
        return cls(ell, f(grid.nodes), grid)

    def sym(self) -> np.ndarray:
        """Samples in the measure-symmetrised representation."""
        return self.grid.sym * self.values

    def __mul__(self, c):
        return Charge(self.ell, c * self.values, self.grid)

    __rmul__ = __mul__


SECTOR_KINDS = ("T", "W", "Q", "A", "S0", "STM")


@dataclass(frozen=True, eq=False)
class SectorMatrix:
    """Dense Nystrom matrix of a sector operator.

    ``entries`` holds the measure-symmetrised matrix ``D M D**-1`` with
    ``D = diag(grid.sym)``, where ``M`` acts on radial samples.
    """

    kind: str
    ell: int
    lam: float
    grid: RadialGrid
    entries: np.ndarray
    mass: MassParams | None = None

    def __post_init__(self):
        if self.kind not in SECTOR_KINDS:
            raise ParameterError(f"unknown operator kind {self.kind!r}")
        e = np.array(self.entries, dtype=float)
        if e.shape != (self.grid.n, self.grid.n):
            raise ParameterError("matrix shape does not match the grid")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def nystrom(self) -> np.ndarray:
        """The matrix acting on radial samples."""
        d = self.grid.sym
        return self.entries * (1.0 / d)[:, None] * d[None, :]

    def apply(self, xi: Charge) -> Charge:
        if xi.grid is not self.grid and not np.array_equal(xi.grid.nodes, self.grid.nodes):
            raise ParameterError("charge lives on a different grid")
        d = self.grid.sym
        return Charge(xi.ell, (self.entries @ (d * xi.values)) / d, xi.grid)

    def symmetry_defect(self) -> float:
        e = self.entries
        return float(np.linalg.norm(e - e.T) / np.linalg.norm(e))


# ---------------------------------------------------------------------------
# Legendre polynomials and angular integrals


def _legendre(ell: int, y):
    y = np.asarray(y, dtype=float)
    p_prev = np.ones_like(y)
    if ell == 0:
        return p_prev
    p = y.copy()
    for k in range(1, ell):
        p_prev, p = p, ((2 * k + 1) * y * p - k * p_prev) / (k + 1)
    return p


def legendre(ell: int, y):
    """Legendre polynomial ``P_ell(y)`` by the three-term recurrence."""
    if ell < 0 or int(ell) != ell:
        raise DomainError("ell must be a non-negative integer")
    ya = np.asarray(y, dtype=float)
    if np.any(np.abs(ya) > 1):
        raise DomainError("Legendre argument must satisfy |y| <= 1")
    out = _legendre(int(ell), ya)
    return float(out) if out.ndim == 0 else out


def _split_denominator(mu, lam, r, rp):
    """Return ``(b, d)`` with ``a + b*y = d + b*(1 + y)`` the angular denominator.

    ``d = r**2 + rp**2 - mu*r*rp + lam`` is formed without cancellation.
    """
    b = mu * r * rp
    d = (r - rp) ** 2 + (2.0 - mu) * r * rp + lam
    return b, d


def _angular_integral(ell, b, d, power, tol, max_nodes=4096):
    """``int_{-1}^{1} P_ell(y) (d + b(1+y))**(-power) dy`` elementwise.

    Gauss-Legendre in ``t = ln((a + b y)/d)``, doubling the order until the
    change is below ``tol`` times the ``ell = 0`` magnitude.  The substitution
    keeps nearly singular denominators (``mu`` close to 2) smooth.
    """
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    b, d = np.broadcast_arrays(b, d)
    shape = b.shape
    b = b.ravel()
    d = d.ravel()
    out = np.empty(b.size)

    small = b <= 1e-300
    x = np.where(small, 0.0, b / np.where(d > 0, d, 1.0))
    L = np.log1p(2.0 * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        # L/b stays accurate as b -> 0 through log1p
        l_over_b = np.where(small, 2.0 / d, L / np.where(small, 1.0, b))
    if power == 1:
        scale = l_over_b
    else:
        scale = 2.0 / (d * (d + 2.0 * b))
    if ell == 0 and power == 1:
        out[:] = l_over_b
        return out.reshape(shape)
    if ell > 0:
        out[small] = 0.0
    else:
        out[small] = scale[small]

    todo = np.flatnonzero(~small)
    q = 16
    prev = None
    while todo.size:
        xg, wg = leggauss(q)
        chunk = max(1, (1 << 22) // q)
        cur = np.empty(todo.size)
        for s in range(0, todo.size, chunk):
            idx = todo[s:s + chunk]
            Li = L[idx][:, None]
            t = 0.5 * Li * (xg[None, :] + 1.0)
            e = np.expm1(t)
            y = -1.0 + e / x[idx][:, None]
            y = np.clip(y, -1.0, 1.0)
            pl = _legendre(ell, y)
            if power == 1:
                integrand = pl
                pref = 0.5 * l_over_b[idx]
            else:
                integrand = pl * np.exp(-t)
                pref = 0.5 * l_over_b[idx] / d[idx]
            cur[s:s + chunk] = pref * (integrand @ wg)
        if prev is not None:
            ok = np.abs(cur - prev) <= tol * scale[todo]
            if q >= max_nodes:
                ok[:] = True
            out[todo[ok]] = cur[ok]
            todo = todo[~ok]
            prev = cur[~ok]
        else:
            prev = cur
        q *= 2
    return out.reshape(shape)


def _check_kernel_args(ell, mu, lam, power):
    if ell < 0 or int(ell) != ell:
        raise DomainError("ell must be a non-negative integer")
    if not (0 < mu < 2):
        raise DomainError(f"mu must lie in (0, 2), got {mu}")
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if power not in (1, 2):
        raise DomainError("power must be 1 or 2")


def angular_kernel(ell, mu, lam, r, rp, power=1, tol=None):
    """``2 pi int_{-1}^{1} P_ell(y) rp**2 / (r**2 + rp**2 + mu r rp y + lam)**power dy``.

    For ``ell = 0, power = 1`` this is the closed form
    ``(2 pi rp / (mu r)) ln[(r**2+rp**2+mu r rp+lam)/(r**2+rp**2-mu r rp+lam)]``;
    otherwise adaptive Gauss quadrature to relative ``tol`` (default 1e-12).
    """
    _check_kernel_args(ell, mu, lam, power)
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    if np.any(r <= 0) or np.any(rp <= 0):
        raise DomainError("momenta must be positive")
    tol = TOLERANCES["quadrature"] if tol is None else tol
    b, d = _split_denominator(mu, lam, r, rp)
    val = 2.0 * np.pi * rp**2 * _angular_integral(int(ell), b, d, power, tol)
    return float(val) if val.ndim == 0 else val


def sector_kernel_matrix(ell, mu, lam, grid: RadialGrid, power=1, tol=None, rows=None):
    """Matrix ``k[i, j]`` of the sector kernel without the ``rp**2`` factor.

    ``k`` is symmetric in its arguments; a Nystrom matrix acting on radial
    samples is ``k * grid.measure[None, :]``.  ``rows`` overrides the row
    momenta (they may include 0).
    """
    _check_kernel_args(ell, mu, lam, power)
    tol = TOLERANCES["quadrature"] if tol is None else tol
    r = grid.nodes if rows is None else np.asarray(rows, dtype=float)
    R, P = np.meshgrid(r, grid.nodes, indexing="ij")
    b, d = _split_denominator(mu, lam, R, P)
    if rows is None:
        # evaluate the upper triangle only and mirror it
        iu = np.triu_indices(grid.n)
        vals = _angular_integral(int(ell), b[iu], d[iu], power, tol)
        k = np.empty((grid.n, grid.n))
        k[iu] = vals
        k[(iu[1], iu[0])] = vals
    else:
        k = _angular_integral(int(ell), b, d, power, tol)
    return 2.0 * np.pi * k


# ---------------------------------------------------------------------------
# Norms


def sobolev_norm(xi: Charge, s: float) -> float:
    """Per-sector radial ``H^s`` norm ``(sum w p**2 (1+p**2)**s |xi|**2)**(1/2)``."""
    g = xi.grid
    return float(np.sqrt(np.sum(g.measure * (1.0 + g.nodes**2) ** s * np.abs(xi.values) ** 2)))


# ---------------------------------------------------------------------------
# Closed-form ball integrals of the 2+1 denominators


def _check_ball_args(mu, nu, lam):
    if not (0 < mu < 2):
        raise ParameterError(f"mu must lie in (0, 2), got {mu}")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if abs(nu - (1.0 - mu * mu / 4.0)) > 1e-12:
        raise ParameterError("nu must equal 1 - mu**2/4")


def _log_ratio_over_b(b, R, c):
    """``ln[(R**2+bR+c)/(R**2-bR+c)] / b`` including the ``b -> 0`` limit."""
    D = R * R - b * R + c
    x = b * R / (R * R + c)
    tiny = b * R < 1e-6 * c
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log1p(2.0 * b * R / D) / np.where(tiny, 1.0, b)
    # ln((1+x)/(1-x)) = 2 artanh x, three terms of the series
    series = 2.0 * R / (R * R + c) * (1.0 + x * x / 3.0 + x**4 / 5.0)
    return np.where(tiny, series, direct)

# the closed forms cancel when the ball is small against sqrt(p1**2 + lam);
# there the radial integrand is smooth on [0, R] and Gauss-Legendre is exact
_SMALL_BALL = 4.0
_BALL_PANELS = 8
_BALL_ORDER = 16


def _small_ball_quadrature(b, c, R, power):
    x, w = leggauss(_BALL_ORDER)
    edges = np.linspace(0.0, R, _BALL_PANELS + 1)
    half = 0.5 * np.diff(edges)
    q = ((edges[:-1] + half)[:, None] + half[:, None] * x[None, :]).ravel()
    wq = (half[:, None] * w[None, :]).ravel()
    b = np.asarray(b)[..., None]
    c = np.asarray(c)[..., None]
    a = c + q * q
    if power == 1:
        lo = a - b * q
        with np.errstate(divide="ignore", invalid="ignore"):
            ang = np.log1p(2.0 * b * q / lo) / (b * q)
        ang = np.where(b * q < 1e-8 * a, 2.0 / a, ang)
    else:
        ang = 2.0 / ((a - b * q) * (a + b * q))
    return 2.0 * np.pi * np.sum(wq * q * q * ang, axis=-1)


def truncated_ball_integral(p1, mu, nu, lam, R):
    """``int_{|p2|<R} dp2 / (p1**2 + p2**2 + mu p1.p2 + lam)`` in closed form."""
    _check_ball_args(mu, nu, lam)
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 < 0) or not R > 0:
        raise ParameterError("need p1 >= 0 and R > 0")
    b = mu * p1
    c = p1 * p1 + lam
    S = np.sqrt(nu * p1 * p1 + lam)
    lrb = _log_ratio_over_b(b, R, c)
    val = (2.0 * np.pi * R + np.pi * (R * R + 0.5 * (2.0 * c - b * b)) * lrb
           - 2.0 * np.pi * S * (np.arctan((2 * R + b) / (2 * S)) + np.arctan((2 * R - b) / (2 * S))))
    small = R < _SMALL_BALL * np.sqrt(c)
    if np.any(small):
        val = np.where(small, _small_ball_quadrature(b, c, R, 1), val)
    return float(val) if val.ndim == 0 else val


def truncated_squared_ball_integral(p1, mu, nu, lam, R):
    """``int_{|p2|<R} dp2 / (p1**2 + p2**2 + mu p1.p2 + lam)**2`` in closed form."""
    _check_ball_args(mu, nu, lam)
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 < 0) or not R > 0:
        raise ParameterError("need p1 >= 0 and R > 0")
    b = mu * p1
    c = p1 * p1 + lam
    S = np.sqrt(nu * p1 * p1 + lam)
    val = (np.pi / S * (np.arctan((2 * R - b) / (2 * S)) + np.arctan((2 * R + b) / (2 * S)))
           - np.pi * _log_ratio_over_b(b, R, c))
    small = R < _SMALL_BALL * np.sqrt(c)
    if np.any(small):
        val = np.where(small, _small_ball_quadrature(b, c, R, 2), val)
    return float(val) if val.ndim == 0 else val


def squared_denominator_integral(p1, mu, nu, lam):
    """``int dp2 / (p1**2 + p2**2 + mu p1.p2 + lam)**2 = pi**2 / sqrt(nu p1**2 + lam)``."""
    _check_ball_args(mu, nu, lam)
    p1 = np.asarray(p1, dtype=float)
    val = np.pi**2 / np.sqrt(nu * p1 * p1 + lam)
    return float(val) if val.ndim == 0 else val
