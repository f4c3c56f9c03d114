"""From the interaction to the long-range-order threshold.

Run:  python3 demos/03_infrared_bound.py
"""

import math

from rpchain import irbound as ib
from rpchain.model import InteractionSpec

# R^(p) vanishes at p = 0.  How fast decides whether R^^-1/2 is integrable.
for spec in (InteractionSpec.nearest(1.0), InteractionSpec.power_law(1.5),
             InteractionSpec.power_law(2.5), InteractionSpec.power_law(3.0)):
    d = ib.c2_diagnostic(spec)
    label = spec.kind if spec.kind != "power_law" else f"power law {spec.alpha}"
    print(f"{label:>16}: small-p exponent {d['exponent']:.3f}, integrable: {d['holds']}  ({d['reason']})")

# For the power law with alpha = 1.5 the closed form at p = pi is a check on
# the polylogarithm summation.
spec = InteractionSpec.power_law(1.5)
exact = 8 * (1 - 2 ** -1.5) * 2.612375348685488
print(f"\nR^(pi) = {ib.r_hat(spec, math.pi):.15f} vs {exact:.15f}")

# sigma(t) = sigma0 - sqrt(t) I_1: linear in sqrt(t), positive below t*.
for t in (0.01, 0.1, 0.3):
    r = ib.sigma(spec, t, oracle=t == 0.01)
    extra = f", oracle difference {r.diagnostics['oracle_diff']:.1e}" if t == 0.01 else ""
    print(f"t={t:<5} sigma = {r.sigma:+.10f}{extra}")
closed, root = ib.t_star(spec, bisect=True)
print(f"t* = {closed:.12f} (closed form), {root:.12f} (root find)")
