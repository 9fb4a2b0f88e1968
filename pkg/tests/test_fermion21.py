import math

import numpy as np
import pytest

from tmslab import fermion21 as f21
from tmslab.errors import NotBracketedError, ParameterError, SectorMismatch
from tmslab.numerics import Charge, build_grid, sobolev_norm, truncated_ball_integral, truncated_squared_ball_integral
from tmslab.twobody import SingularPair2B, shell_integral_2b

PI = math.pi
M1 = f21.mass_params(1.0)


@pytest.fixture(scope="module")
def g():
    return build_grid("gauss-legendre-composite", 160, 1e-3, 1e2)


@pytest.fixture(scope="module")
def small_ladder():
    return f21.ladder_grids(1e-2, [1e2, 1e3, 1e4], 24)


def gauss_charge(rng, ell, grid):
    a = rng.uniform(0.3, 2)
    c = complex(*rng.normal(size=2))
    return Charge(ell, c * grid.nodes**ell * np.exp(-a * grid.nodes**2), grid)


class TestMass:
    def test_values(self):
        assert (M1.mu, M1.nu) == (1.0, 0.75)
        m3 = f21.mass_params(3)
        assert (m3.mu, m3.nu) == (0.5, 15 / 16)
        heavy = f21.mass_params(1e9)
        assert heavy.mu < 1e-8 and heavy.nu == pytest.approx(1)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            f21.mass_params(0)


class TestOperators:
    def test_T_symmetric(self, g):
        assert f21.build_T(1, 1.0, M1, g).symmetry_defect() < 1e-13

    def test_T_diagonal_small_p(self, g):
        T = f21.build_T(0, 1.0, M1, g)
        Q = f21.build_Q(0, 1.0, M1, g)
        assert T.entries[0, 0] - Q.entries[0, 0] == pytest.approx(2 * PI**2, rel=1e-6)

    def test_Q_decays_with_ell(self, g):
        q1 = f21.build_Q(1, 1.0, M1, g).entries
        q5 = f21.build_Q(5, 1.0, M1, g).entries
        assert np.max(np.abs(q5)) < np.max(np.abs(q1))

    def test_W_diagonal_small_p(self, g):
        W = f21.build_W(0, 1.0, M1, g)
        Wd = W.entries[0, 0] + 2 * g.sym[0] ** 2 * f21.sector_kernel_matrix(0, 1.0, 1.0, g, power=2, rows=[g.nodes[0]])[0, 0]
        # twice the two-body eta coefficient pi**2/sqrt(lam)
        assert Wd == pytest.approx(2 * PI**2, rel=1e-6)

    @pytest.mark.parametrize("ell", range(5))
    @pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("m", [0.5, 1.0, 5.0])
    def test_W_positive(self, g, ell, lam, m):
        W = f21.build_W(ell, lam, f21.mass_params(m), g)
        assert np.linalg.eigvalsh(W.entries)[0] > 0

    def test_W_quadratic_form_positive(self, g, rng):
        W = f21.build_W(0, 1.0, M1, g)
        for _ in range(10):
            xi = gauss_charge(rng, 0, g)
            assert f21.w_inner(W, xi, xi).real > 0


class TestScalarProduct:
    @pytest.mark.parametrize("ell", range(4))
    def test_matches_W(self, g, rng, ell):
        W = f21.build_W(ell, 0.7, M1, g)
        for _ in range(50):
            xi, eta = gauss_charge(rng, ell, g), gauss_charge(rng, ell, g)
            ref = f21.w_inner(W, xi, eta)
            assert abs(f21.pair_norm_u(xi, eta, 0.7, M1) - ref) <= 1e-6 * abs(ref)

    def test_real_positive(self, g):
        xi = Charge(0, np.exp(-g.nodes**2), g)
        v = f21.pair_norm_u(xi, xi, 1.0, M1)
        assert v.real > 0 and abs(v.imag) == 0

    def test_mismatch(self, g):
        with pytest.raises(SectorMismatch):
            f21.pair_norm_u(Charge(0, np.ones(g.n), g), Charge(1, np.ones(g.n), g), 1.0, M1)

    @pytest.mark.slow
    def test_monte_carlo(self):
        """6D integral of |xi(p1) - xi(p2)|**2 / D**2 with xi = (1+p**2)**-2 Y00."""
        grid = build_grid("gauss-legendre-composite", 384, 1e-4, 1e4)
        xi = Charge(0, (1 + grid.nodes**2) ** -2, grid)
        ref = f21.pair_norm_u(xi, xi, 1.0, M1).real

        rng = np.random.default_rng(7)
        # radial sampling density 4 p**2 / (pi (1+p**2)**2) via its tabulated inverse CDF
        t = np.linspace(0, PI / 2, 200001)
        cdf = (t - np.sin(t) * np.cos(t)) / (PI / 4)

        def sample(n):
            theta = np.interp(rng.random(n), cdf, t)
            p = np.tan(theta)
            v = rng.normal(size=(n, 3))
            return p, v / np.linalg.norm(v, axis=1)[:, None] * p[:, None]

        total, n_total = 0.0, 0
        for _ in range(20):
            n = 500_000
            p1, v1 = sample(n)
            p2, v2 = sample(n)
            dens = 1 / (PI**2 * (1 + p1**2) ** 2) / (PI**2 * (1 + p2**2) ** 2)
            d = p1**2 + p2**2 + np.einsum("ij,ij->i", v1, v2) + 1.0
            diff = ((1 + p1**2) ** -2 - (1 + p2**2) ** -2) / math.sqrt(4 * PI)
            total += np.sum(diff**2 / d**2 / dens)
            n_total += n
        assert total / n_total == pytest.approx(ref, rel=1e-2)


class TestA:
    @pytest.mark.parametrize("ell", [1, 2])
    def test_identity_and_symmetry(self, g, rng, ell):
        T = f21.build_T(ell, 1.0, M1, g)
        W = f21.build_W(ell, 1.0, M1, g)
        A = f21.build_A(ell, 1.0, M1, 0.4, g, W=W)
        assert np.linalg.norm(W.entries @ A.entries - 2 * (T.entries + 0.4 * np.eye(g.n))) / np.linalg.norm(T.entries) < 1e-10
        WA = W.entries @ A.entries
        assert np.max(np.abs(WA - WA.T)) <= 1e-12 * np.max(np.abs(WA))
        for _ in range(20):
            x, y = rng.normal(size=g.n), rng.normal(size=g.n)
            lhs = y @ W.entries @ (A.entries @ x)
            rhs = (A.entries @ y) @ W.entries @ x
            assert abs(lhs - rhs) < 1e-10 * math.sqrt(y @ W.entries @ y) * np.linalg.norm(WA @ x) / 1e-3

    def test_ell0_zero(self, g):
        A = f21.build_A(0, 1.0, M1, 0.0, g)
        assert np.all(A.entries == 0)

    def test_s0_profile(self, g):
        spec = f21.SzeroSpec("multiplication", amplitude=2.0, center=1.0, width=0.5)
        S0 = f21.build_S0(spec, 1.0, M1, g)
        assert S0.symmetry_defect() == 0
        xi = Charge(0, np.ones(g.n), g)
        image = S0.apply(xi)
        assert np.isfinite(sobolev_norm(image, 0.5)) and np.count_nonzero(image.values) > 0
        assert np.all(image.values[(g.nodes < 0.6) | (g.nodes > 1.7)] == 0)

    def test_bad_mode(self):
        with pytest.raises(ParameterError):
            f21.SzeroSpec("identity")


class TestTmsResidual:
    def test_by_construction(self, g, rng):
        A = f21.build_A(1, 1.0, M1, 0.3, g)
        T = f21.build_T(1, 1.0, M1, g)
        xi = gauss_charge(rng, 1, g)
        eta_sym = A.entries @ xi.sym()
        eta = Charge(1, eta_sym / g.sym, g)
        assert f21.tms_residual_21(xi, eta, 0.3, T) < 1e-10

    def test_eta_zero_and_scaling(self, g, rng):
        T = f21.build_T(1, 1.0, M1, g)
        xi, eta = gauss_charge(rng, 1, g), gauss_charge(rng, 1, g)
        r0 = f21.tms_residual_21(xi, Charge(1, np.zeros(g.n), g), 1.0, T)
        assert r0 == pytest.approx(np.linalg.norm(T.entries @ xi.sym() + xi.sym()))
        assert r0 > 0
        r = f21.tms_residual_21(xi, eta, 1.0, T)
        assert f21.tms_residual_21(xi * (2 - 1j), eta * (2 - 1j), 1.0, T) == pytest.approx(abs(2 - 1j) * r)

    def test_s0_sector(self, g):
        S0 = f21.build_S0(f21.SzeroSpec(), 1.0, M1, g)
        xi = Charge(0, np.exp(-g.nodes**2), g)
        assert f21.tms_residual_21(xi, Charge(0, np.zeros(g.n), g), 0.0, S0) == 0

    def test_mismatch(self, g):
        T = f21.build_T(1, 1.0, M1, g)
        with pytest.raises(SectorMismatch):
            f21.tms_residual_21(Charge(0, np.ones(g.n), g), Charge(0, np.ones(g.n), g), 0.0, T)


@pytest.fixture(scope="module")
def gs():
    return build_grid("gauss-legendre-composite", 384, 1e-4, 1e5)


def node_near(grid, p):
    return float(grid.nodes[np.argmin(np.abs(grid.nodes - p))])


class TestShell:
    def test_xi_bump_trend(self, gs):
        p1 = node_near(gs, 1.0)
        xi = Charge(0, np.exp(-((np.log(gs.nodes)) ** 2) * 4), gs)
        eta = Charge(0, np.zeros(gs.n), gs)
        const = f21.shell_constant_21(xi, eta, 1.0, M1, p1)
        errs = []
        for R in (1e2, 1e3, 1e4):
            v = f21.shell_integral_21(xi, eta, 1.0, M1, p1, R) - 4 * PI * R * xi.values[np.argmin(np.abs(gs.nodes - p1))]
            errs.append(abs(v - const))
        assert errs[1] / errs[0] == pytest.approx(0.1, rel=0.05)
        assert errs[2] / errs[1] == pytest.approx(0.1, rel=0.05)

    @pytest.mark.parametrize("ell", [0, 1])
    def test_eta_bump_constant(self, gs, ell):
        p1 = node_near(gs, 1.0)
        xi = Charge(ell, np.zeros(gs.n), gs)
        eta = Charge(ell, np.exp(-((np.log(gs.nodes / 1.2)) ** 2) * 8), gs)
        const = f21.shell_constant_21(xi, eta, 1.0, M1, p1)
        v = f21.shell_integral_21(xi, eta, 1.0, M1, p1, 1e4)
        assert abs(v - const) <= 1e-3 * abs(const)

    def test_two_body_reduction(self):
        # p1 = 0 with a very heavy third particle: the diagonal terms are the two-body shell
        heavy = f21.mass_params(1e9)
        for R in (0.5, 3.0, 1e3):
            b2 = shell_integral_2b(SingularPair2B(1.0, 0.0, 2.0), R).real
            e2 = shell_integral_2b(SingularPair2B(0.0, 1.0, 2.0), R).real
            assert truncated_ball_integral(0.0, heavy.mu, heavy.nu, 2.0, R) == pytest.approx(b2, rel=1e-12)
            assert truncated_squared_ball_integral(0.0, heavy.mu, heavy.nu, 2.0, R) == pytest.approx(e2, rel=1e-12)

    def test_p1_zero_asymptotics(self):
        grid = build_grid("gauss-legendre-composite", 512, 1e-6, 1e5)
        heavy = f21.mass_params(1e9)
        xi = Charge(0, 1 / (1 + grid.nodes**2) ** 2, grid)
        eta = Charge(0, np.exp(-grid.nodes**2), grid)
        const = f21.shell_constant_21(xi, eta, 2.0, heavy, 0.0)
        v = f21.shell_integral_21(xi, eta, 2.0, heavy, 0.0, 1e4) - 4 * PI * 1e4 * xi.values[0]
        assert abs(v - const) <= 1e-3 * abs(const)
        # the diagonal part of the constant is the two-body one
        exch1 = np.sum(grid.measure * f21.sector_kernel_matrix(0, heavy.mu, 2.0, grid, rows=[0.0])[0] * xi.values)
        exch2 = np.sum(grid.measure * f21.sector_kernel_matrix(0, heavy.mu, 2.0, grid, power=2, rows=[0.0])[0] * eta.values)
        two_body = -2 * PI**2 * math.sqrt(2.0) * xi.values[0] + PI**2 / math.sqrt(2.0) * eta.values[0]
        assert (const + exch1 + exch2).real == pytest.approx(two_body.real, rel=1e-6)

    def test_p1_must_be_node(self, gs):
        xi = Charge(0, np.ones(gs.n), gs)
        with pytest.raises(ParameterError):
            f21.shell_integral_21(xi, xi, 1.0, M1, 1.2345, 10.0)

    def test_contamination_warning(self, gs):
        xi = Charge(0, np.exp(-gs.nodes**2), gs)
        with pytest.warns(UserWarning):
            f21.shell_integral_21(xi, xi, 1.0, M1, node_near(gs, 1.0), gs.p_max)


class TestLadders:
    def test_mapping_dichotomy(self, small_ladder):
        bounded = f21.mapping_norm_estimate(1, 1.5, 1.0, M1, small_ladder)
        unbounded = f21.mapping_norm_estimate(0, 1.5, 1.0, M1, small_ladder)
        assert bounded.bounded(0.05)
        assert unbounded.strictly_increasing and not unbounded.bounded(0.05)

    def test_counterexample(self):
        ce = f21.counterexample_l0(1.0, M1, [1e2, 1e3, 1e4], nodes_per_decade=32)
        assert ce.slope > 0 and ce.increments_constant(0.1)
        assert ce.profile_error < 1e-6
        # each decade adds about (4 pi / 3)**2 ln 10
        assert np.mean(ce.increments) == pytest.approx((4 * PI / 3) ** 2 * math.log(10), rel=0.02)

    def test_counterexample_profile(self):
        assert truncated_ball_integral(0.0, 1.0, 0.75, 1.0, 1.0) == pytest.approx(4 * PI * (1 - PI / 4))
        p = np.geomspace(10, 1e3, 30)
        scaled = truncated_ball_integral(p, 1.0, 0.75, 1.0, 1.0) * (1 + p * p)
        assert np.all(scaled > 3.5) and np.all(scaled < 5.5)

    def test_norm_window(self, small_ladder):
        reps = [f21.norm_equivalence_bounds(0, lam, M1, small_ladder) for lam in (0.5, 1.0, 2.0)]
        for r in reps:
            assert 0 < r.c1_est <= r.c2_est and r.stability < 0.1
        c1 = [r.c1_est for r in reps]
        assert max(c1) / min(c1) < 1.2

    def test_classification(self, small_ladder):
        assert f21.classify_mass(1, 1.0, 5.0, small_ladder)[0]
        assert not f21.classify_mass(1, 1.0, 0.01, small_ladder)[0]

    def test_not_bracketed(self, small_ladder):
        with pytest.raises(NotBracketedError):
            f21.mass_criticality_scan(1, 1.0, small_ladder, (1.0, 5.0))

    def test_even_sector(self, small_ladder):
        with pytest.raises(ParameterError):
            f21.mass_criticality_scan(2, 1.0, small_ladder, (0.01, 5.0))
