"""
Bounds on the bottom of extensions
==================================

For the two-body family the reference operator S has bottom lambda, the
label T is the number tau, and the extension S_T has bottom lambda - (4 pi alpha)^2
when a bound state exists.  The bottom of S_T lies between m(S) m(T) / (m(S) + m(T))
and m(T) whenever m(T) > -m(S).
"""
import math

from tmslab import kvb as kv
from tmslab.twobody import SingularPair2B

for alpha in (-0.05, -0.02, 0.0, 0.1, 1.0):
    c = kv.kvb_bound_check(alpha, 1.0)
    if c.skipped:
        print(f"alpha={alpha:+.2f}: skipped ({c.skipped})")
        continue
    print(f"alpha={alpha:+.2f}: m(T)={c.mT:+.4f}  m(S_T)={c.mST:+.4f}  margins {c.upper_margin:.3e}, {c.lower_margin:.3e}")

# %% The sign of tau matches the sign of the bottom, with both vanishing at threshold
a = -0.05
thr = (4 * math.pi * a) ** 2
pc = kv.positivity_equivalence_check(a, [thr / 2, thr, 2 * thr])
print(f"\nalpha={a}: sign tau {pc.sign_tau}, sign bottom {pc.sign_bottom}")

# %% tau = 0 is the Krein-von Neumann extension: its bottom is exactly -lambda
rep = kv.friedrichs_krein_identify(2.0)
print(f"lambda=2: bound state {rep.krein_bound_state:.12f}, Friedrichs bound state {rep.friedrichs_bound_state}")

# %% Changing the shift moves eta but not xi
pair = SingularPair2B(1.0, 0.5, 1.0)
d = kv.decomposition_uniqueness_check(pair, 1.0, 4.0)
print(f"xi refitted at lambda=4: {d.xi_fit.real:.10f}, shifted eta {d.eta_shifted.real:.6f}")
