"""
Two-body point interaction
==========================

The zero-range interaction between two particles is a one-parameter family
labelled by the inverse scattering length alpha.  At a reference shift lambda
the same extension is described by tau = 2 sqrt(lambda) (sqrt(lambda) + 4 pi alpha).
"""
import math

import numpy as np

from tmslab import twobody as tb

# %% Parameters and the bound state
for alpha in (-0.2, -1 / (4 * math.pi), 0.0, 0.3):
    par = tb.ExtensionParam2B(alpha, 1.0)
    e = tb.bound_state_energy(alpha)
    shown = "none" if e is None else f"{e:.6f}"
    print(f"alpha={alpha:+.4f}  tau={par.tau:+.4f}  scattering length={par.scattering_length:+.4f}  bound state={shown}")

# %% A function in the adjoint domain: g = xi/(p^2+lam) + eta/(p^2+lam)^2
# Integrating over a ball of radius R grows like 4 pi xi R plus a constant.
pair = tb.SingularPair2B.tms(1.0, alpha=0.1, lam=1.0)
lin, const = tb.asymptotic_coeffs_2b(pair)
print(f"\nTMS pair: eta = tau xi = {pair.eta.real:.4f}")
print(f"constant / linear coefficient = {(const / lin).real:.6f}  (2 pi^2 alpha = {2 * math.pi**2 * 0.1:.6f})")
for R in (1e1, 1e2, 1e3, 1e4):
    rem = tb.shell_integral_2b(pair, R) - (lin * R + const)
    print(f"R={R:8.0f}  remainder={abs(rem):.3e}  R * remainder={abs(rem) * R:.4f}")

# %% Reading the charge back from shell integrals
est = tb.charge_extract_2b(pair, np.geomspace(10, 1e4, 7))
print(f"\ncharge estimates shell/(4 pi R): {np.round(np.real(est.estimates), 4)}  (rate {est.rate:.2f})")
