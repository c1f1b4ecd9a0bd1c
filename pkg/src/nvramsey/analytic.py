"""Closed-form dynamics of the 1D spin-oscillator model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import HybridState, coherent_state, spin_basis, tensor
from .model import CouplingSet

T0 = 2 * np.pi


@dataclass(frozen=True)
class Trajectory:
    beta_t: complex
    phase: float
    u: float


def coherent_trajectory(beta: complex, s_z: int, t: float, c: CouplingSet) -> Trajectory:
    """Evolution of |beta>|s_z> under the 1D Hamiltonian.

    The result is ``exp(i phase) |beta_t> |s_z>`` with the oscillator centred at
    ``u = 2 (s_z lambda - dlambda)``.  Besides the dynamical phase
    ``-(D s_z^2 - u^2) t`` there is a geometric part from re-expressing the
    displaced coherent state in the original frame; it vanishes at every
    full period.
    """
    if s_z not in (-1, 0, 1):
        raise ValueError("s_z must be -1, 0 or +1")
    beta = complex(beta)
    u = c.displacement_z(s_z)
    rot = np.exp(-1j * t)
    beta_t = (beta - u) * rot + u
    phase = (-(c.D * s_z ** 2 - u * u) * t
             - u * u * np.sin(t)
             + u * (beta.imag - (beta * rot).imag))
    return Trajectory(beta_t=complex(beta_t), phase=float(phase), u=float(u))


def gravitational_phase(c: CouplingSet, hold_time: float = T0) -> float:
    """Relative phase of |-1> with respect to |+1> after ``hold_time``.

    Evaluated from the two trajectories, so it equals ``16 lambda dlambda t0``
    for one period and scales linearly with the number of full cycles.
    """
    plus = coherent_trajectory(0.0, 1, hold_time, c)
    minus = coherent_trajectory(0.0, -1, hold_time, c)
    return minus.phase - plus.phase


def gravitational_phase_formula(c: CouplingSet, cycles: int = 1) -> float:
    return 16 * c.lambda_ * c.dlambda * T0 * cycles


def ramsey_population(dphi: float) -> float:
    return float(np.cos(dphi / 2) ** 2)


def predicted_state(beta: complex, spin_amplitudes, t: float, c: CouplingSet, spec) -> HybridState:
    """Closed-form state at time ``t`` for ``|beta> ⊗ sum_s a_s |s>``, on the
    truncated Fock space ``spec`` (spin ⊗ z layout)."""
    spin_amplitudes = np.asarray(spin_amplitudes, dtype=complex)
    total = None
    for amp, s in zip(spin_amplitudes, (1, 0, -1)):
        if amp == 0:
            continue
        traj = coherent_trajectory(beta, s, t, c)
        piece = tensor([spin_basis(s), coherent_state(traj.beta_t, spec)]).amplitudes
        piece = amp * np.exp(1j * traj.phase) * piece
        total = piece if total is None else total + piece
    return HybridState.normalized(total, (3, spec.n_levels if hasattr(spec, "n_levels") else spec))
