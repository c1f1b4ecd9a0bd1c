"""
How much do the transverse trap modes spoil the 1D picture?

The x and y motion couple to S_x and S_y with strength lambda * gamma.  Their
first-order energy shift vanishes, so the evolution after one period differs
from the 1D result only at second order.  Here the overlap of the two states
is tabulated over lambda and gamma, with the trap ratio omega_x/omega_z = 1/gamma^2.
"""

import numpy as np

from nvramsey.perturb import perturbation_fidelity

lams = [0.025, 0.05, 0.1]
gams = [0.1, 0.2, 0.32, 0.4]

print("lambda \\ gamma " + "".join(f"{g:>12}" for g in gams))
for lam in lams:
    row = [perturbation_fidelity(lam, g, g) for g in gams]
    print(f"{lam:>14}" + "".join(f"{f:12.8f}" for f in row))

# the weakest point, with the coupling bookkeeping
res = perturbation_fidelity(0.1, 0.4, 0.4, details=True)
print("\nlambda=0.1, gamma=0.4:", f"F = {res.fidelity:.8f}")
for key, val in res.report.items():
    print(f"  {key}: {val}")

# doubling every truncation leaves F unchanged
f_big = perturbation_fidelity(0.1, 0.4, 0.4, specs=(16, 16, 48))
print(f"  doubled truncation: |dF| = {abs(f_big - res.fidelity):.1e}")
