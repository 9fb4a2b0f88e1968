"""
Two identical fermions and a third particle
===========================================

In each angular sector the charge operators T (diagonal plus exchange) and W
(the metric of the singular part) act on radial functions.  W is positive and
invertible, and A = 2 W^-1 (T + alpha) is W-symmetric.  For odd sectors the
bottom of A stays bounded as the cutoff grows only above a critical mass.
"""
import numpy as np

from tmslab import fermion21 as f21
from tmslab.numerics import Charge, build_grid

grid = build_grid("gauss-legendre-composite", 256, 1e-3, 1e3)
mass = f21.mass_params(1.0)
print(f"m=1: mu={mass.mu}, nu={mass.nu}")

# %% W is positive, and its quadratic form is the norm of the singular part
for ell in range(4):
    W = f21.build_W(ell, 1.0, mass, grid)
    xi = Charge(ell, grid.nodes**ell * np.exp(-grid.nodes**2), grid)
    print(f"ell={ell}: smallest eigenvalue of W = {np.linalg.eigvalsh(W.entries)[0]:.4e}, "
          f"<xi,W xi> = {f21.w_inner(W, xi, xi).real:.6f}, ||u_xi||^2 = {f21.pair_norm_u(xi, xi, 1.0, mass).real:.6f}")

# %% A is W-symmetric
W, T = f21.build_W(1, 1.0, mass, grid), f21.build_T(1, 1.0, mass, grid)
A = f21.build_A(1, 1.0, mass, 0.5, grid, W=W)
WA = W.entries @ A.entries
print(f"\n||WA - (WA)^T|| / ||WA|| = {np.linalg.norm(WA - WA.T) / np.linalg.norm(WA):.1e}")

# %% Mapping norms of T along a cutoff ladder
# The bounded trends settle slowly: the ell=0, s=1 norm still moves a few percent per decade.
ladder = f21.ladder_grids(1e-2, (1e2, 1e3, 1e4, 1e5), 32)
for ell, s in ((0, 1.0), (1, 1.5), (0, 1.5)):
    est = f21.mapping_norm_estimate(ell, s, 1.0, mass, ladder)
    print(f"ell={ell}, s={s}: norms {np.round(est.norms, 3)}  bounded={est.bounded(0.05)}")

# %% Mass criticality in the p-wave
for m in (5.0, 0.5, 0.05, 0.01):
    stable, bottoms = f21.classify_mass(1, 1.0, m, ladder)
    print(f"m={m:5}: bottoms {np.round(bottoms, 3)}  {'stable' if stable else 'unstable'}")
crit = f21.mass_criticality_scan(1, 1.0, ladder, (0.005, 5.0))
print(f"m_crit(ell=1) ~ {crit.m_crit:.4f} in bracket {crit.bracket}")
