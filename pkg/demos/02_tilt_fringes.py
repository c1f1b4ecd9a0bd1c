"""
Fringes in P0 as the trap axis is tilted away from horizontal.

With K = 8 lambda dlambda t0 = 10 the population sweeps from 1 to 0 within
pi/20 of horizontal.  Tilting the NV axis (direction cosine c_x) mixes spin
states through the transverse coupling and washes out part of the contrast.
"""

import time

import numpy as np

from nvramsey.model import CouplingSet
from nvramsey.ramsey import SequenceSpec, fringe_scan

lam = 0.01
K = 10.0
c = CouplingSet(lambda_=lam, dlambda=K / (8 * lam * 2 * np.pi), D=2.5)

theta = np.linspace(np.pi / 2 - np.pi / 20, np.pi / 2, 60)
cx = [0.0, 0.25, 0.5, 0.75, 1.0]

start = time.time()
scan = fringe_scan(theta, cx, SequenceSpec(model="misaligned"), c)
print(f"{len(theta)} x {len(cx)} scan in {time.time() - start:.1f} s\n")

print(" c_x   visibility   P0 at theta = pi/2 - pi/20 ... pi/2")
for row, v, x in zip(scan.p0, scan.visibility_per_row, cx):
    print(f" {x:4.2f}  {v:9.4f}    {row[0]:.4f} {row[15]:.4f} {row[30]:.4f} {row[45]:.4f} {row[-1]:.4f}")

aligned = np.cos(K * np.cos(theta)) ** 2
print(f"\naligned row vs cos^2(K cos theta): max deviation {np.max(np.abs(scan.p0[0] - aligned)):.1e}")
