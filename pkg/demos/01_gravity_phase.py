"""
Gravity-induced Ramsey phase in the one-dimensional model.

The NV spin is put in (|+1> + |-1>)/sqrt(2), the bead oscillates along z for
one trap period, and a second pulse maps the relative phase onto P0.  The
exact simulation is compared to the closed form for a few initial coherent
states, which all give the same answer.
"""

import numpy as np

from nvramsey.analytic import gravitational_phase, ramsey_population
from nvramsey.model import CouplingSet
from nvramsey.ramsey import SequenceSpec, run_sequence, spin_phase, spin_purity

c = CouplingSet(lambda_=0.05, dlambda=0.1)
print(f"lambda = {c.lambda_}, dlambda = {c.dlambda}")
print(f"closed-form phase 16 lambda dlambda t0 = {gravitational_phase(c):.6f} rad")
print(f"closed-form P0 = {ramsey_population(gravitational_phase(c)):.8f}\n")

print(" beta          P0 (exact)    phase (exact)  spin purity at t0")
for beta in (0, 1, 1 + 0.5j, -2j):
    spec = SequenceSpec(model="exact1d", motion="coherent", beta=beta)
    res = run_sequence(spec, c)
    print(f" {beta!s:12}  {res.p0:.8f}    {spin_phase(res.hold_state):.8f}     "
          f"{spin_purity(res.hold_state):.12f}")

# halfway through the period the spin is still entangled with the motion
half = run_sequence(SequenceSpec(model="exact1d", motion="coherent", beta=1, hold_time=np.pi), c)
print(f"\nspin purity at t0/2: {spin_purity(half.hold_state):.6f}")

# several periods accumulate phase linearly
for cycles in (1, 2, 5):
    res = run_sequence(SequenceSpec(model="exact1d", cycles=cycles), c)
    print(f"cycles={cycles}: P0 = {res.p0:.6f}  (phase {spin_phase(res.hold_state):+.4f})")
