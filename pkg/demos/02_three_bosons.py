"""
Three identical bosons: the Thomas/Efimov cascade
=================================================

The s-wave charge equation for three bosons at unitarity has bound states
accumulating at zero, E_n/E_(n+1) -> exp(2 pi/s0) with s0 ~ 1.00624.  Deep
levels feel the momentum cutoff, so only levels well below p_max^2 are trusted.
"""
import math

from tmslab import stm
from tmslab.numerics import default_grid

grid = default_grid()
print(grid.describe())

# %% Levels from the inertia count of the symmetrised Nystrom matrix
levels = stm.stm_spectrum(0.0, grid, n_levels=4)
for n, (e, t) in enumerate(zip(levels.energies, levels.trusted)):
    print(f"E_{n} = {e:.6e}  {'trusted' if t else 'cutoff dominated'}")
s0, spread = stm.thomas_ratio_check(levels)
print(f"ratios {[round(r, 3) for r in levels.ratios]}; s0 from ratios = {s0:.5f} (spread {spread:.1e})")
print(f"exp(2 pi / s0) = {math.exp(2 * math.pi / s0):.2f}")

# %% The charge of a level is log-periodic at large momentum
e = levels.trusted_energies[0]
xi = stm.stm_null_vector(e, 0.0, grid)
fit = stm.danilov_fit(xi, (30 * math.sqrt(e), grid.p_max / 10))
print(f"\nfit p^2 xi(p) = A sin(s0 ln p) + B cos(s0 ln p) on {fit.window}: s0 = {fit.s0:.5f}, residual {fit.residual:.1e}")
