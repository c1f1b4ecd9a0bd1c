"""
Spin-motion simulation of a levitated nanodiamond carrying a single NV centre.

Modules
-------
hilbert   truncated Fock spaces, coherent states, displacement operators
model     physical parameters, dimensionless couplings, Hamiltonians
analytic  closed-form coherent trajectories and the gravitational phase
evolver   exact eigendecomposition propagation
perturb   second-order perturbation theory for the transverse couplings
ramsey    Ramsey sequences, fringe scans and thermal averaging
trapdata  trap time series, PSD estimation and Lorentzian peak fits
cli       command-line front end
"""

__version__ = "0.1.0"
