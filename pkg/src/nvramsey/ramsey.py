"""
Ramsey protocol: pulse, hold for whole trap periods, pulse, read P0.

Models
------
analytic1d   closed form, any initial coherent amplitude
exact1d      full diagonalization of the 1D Hamiltonian
exact3d      full diagonalization including x, y motion and V_x, V_y
perturb3d    second-order treatment of V_x, V_y
misaligned   tilted NV axis; perturbative by default, ``engine="exact"`` to
             diagonalize instead
"""

from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import analytic, evolver, perturb
from .hilbert import (
    FockSpec,
    HybridState,
    LabeledOperator,
    TruncationError,
    coherent_leakage,
    coherent_state,
    reduced_density,
    tensor,
    thermal_density,
    LEAKAGE_BOUND,
)
from .model import (
    CouplingSet,
    hamiltonian_1d,
    hamiltonian_3d,
    hamiltonian_misaligned,
    microwave_pulse,
)

MODELS = ("analytic1d", "exact1d", "exact3d", "perturb3d", "misaligned")
MOTIONS = ("vacuum", "coherent", "thermal")


@dataclass(frozen=True)
class SequenceSpec:
    model: str = "analytic1d"
    motion: str = "vacuum"
    beta: complex = 0.0
    nbar: float = 0.0
    hold_time: float | None = None
    cycles: int = 1
    pulse: str = "ideal"
    rabi: float | None = None
    n_levels: int | None = None
    n_levels_xy: int = 8
    engine: str = "perturb"
    eps_degen: float = perturb.EPS_DEGEN

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.motion not in MOTIONS:
            raise ValueError(f"motion must be one of {MOTIONS}, got {self.motion!r}")
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise ValueError("cycles must be a positive integer")
        if self.hold_time is not None and not self.hold_time > 0:
            raise ValueError("hold_time must be positive")
        if self.engine not in ("perturb", "exact"):
            raise ValueError("engine must be 'perturb' or 'exact'")

    @property
    def t_hold(self) -> float:
        return self.hold_time if self.hold_time is not None else 2 * np.pi * self.cycles

    @property
    def initial_beta(self) -> complex:
        return complex(self.beta) if self.motion == "coherent" else 0j


@dataclass(frozen=True, eq=False)
class RamseyOutcome:
    """``p0`` after the second pulse; ``state`` after the second pulse and
    ``hold_state`` just before it (``None`` where the model keeps no ket)."""

    p0: float
    state: HybridState | None
    hold_state: HybridState | None = None

    def __iter__(self):
        return iter((self.p0, self.state))


@dataclass(frozen=True, eq=False)
class FringeScan:
    theta_grid: np.ndarray
    cx_grid: np.ndarray
    p0: np.ndarray
    visibility_per_row: np.ndarray
    model: str = ""


def visibility(values) -> float:
    v = np.asarray(values, dtype=float)
    hi, lo = v.max(), v.min()
    return float((hi - lo) / (hi + lo)) if hi + lo > 0 else 0.0


def auto_levels(c: CouplingSet, beta: complex = 0.0) -> int:
    """Fock cutoff holding every conditional trajectory within the leakage bound."""
    umax = max(abs(c.displacement_z(s)) for s in (-1, 0, 1))
    r = abs(beta) + 2 * umax
    n = int(np.ceil(r * r + 8 * r + 24))
    while coherent_leakage(r, n) > LEAKAGE_BOUND:
        n += 8
    return max(n, 16)


def _pulse(spec: SequenceSpec) -> np.ndarray:
    return microwave_pulse(spec.rabi, spec.pulse).dense()


def _prepared(spec: SequenceSpec, motion: HybridState) -> HybridState:
    zero = np.array([0, 1, 0], dtype=complex)
    spin = HybridState(_pulse(spec) @ zero, (3,))
    return tensor([spin, motion])


def _readout(spec: SequenceSpec, hold: HybridState):
    u = _pulse(spec)
    t = hold.tensor_view().reshape(3, -1)
    out = (u @ t).reshape(-1)
    final = HybridState(out, hold.layout)
    block = out.reshape(3, -1)[1]
    p0 = float(np.vdot(block, block).real)
    return min(max(p0, 0.0), 1.0), final


def spin_phase(hold: HybridState) -> float:
    """Relative phase of the |-1> component with respect to |+1>."""
    t = hold.tensor_view().reshape(3, -1)
    return float(np.angle(np.vdot(t[0], t[2])))


def spin_purity(state: HybridState) -> float:
    rho = reduced_density(state, 0)
    return float(np.trace(rho @ rho).real)


@lru_cache(maxsize=32)
def _eig_1d(c: CouplingSet, n: int):
    return evolver.eigendecompose(hamiltonian_1d(c, FockSpec(n)))


@lru_cache(maxsize=32)
def _eig_misaligned(c: CouplingSet, n: int):
    h0, hi = hamiltonian_misaligned(c, FockSpec(n))
    return evolver.eigendecompose(h0 + hi)


@lru_cache(maxsize=8)
def _eig_3d(c: CouplingSet, nxy: int, nz: int):
    h0, vx, vy = hamiltonian_3d(c, (nxy, nxy, nz))
    return evolver.eigendecompose(h0 + vx + vy)


def _analytic_p0(spec: SequenceSpec, c: CouplingSet, beta: complex) -> float:
    t = spec.t_hold
    plus = analytic.coherent_trajectory(beta, 1, t, c)
    minus = analytic.coherent_trajectory(beta, -1, t, c)
    a, b = plus.beta_t, minus.beta_t
    overlap = np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + np.conj(a) * b)
    val = 0.5 * (1 + (np.exp(1j * (minus.phase - plus.phase)) * overlap).real)
    return float(min(max(val, 0.0), 1.0))


def run_sequence(spec: SequenceSpec, c: CouplingSet) -> RamseyOutcome:
    if spec.motion == "thermal":
        sampling = "density_exact" if spec.model == "exact1d" else "p_sample"
        mean, _ = thermal_p0(spec, c, sampling=sampling)
        return RamseyOutcome(mean, None, None)
    beta = spec.initial_beta
    if spec.model == "analytic1d":
        return RamseyOutcome(_analytic_p0(spec, c, beta), None, None)

    n = spec.n_levels or auto_levels(c, beta)
    t = spec.t_hold
    if spec.model == "exact1d":
        psi0 = _prepared(spec, coherent_state(beta, n))
        hold = evolver.evolve(psi0, _eig_1d(c, n), t)
    elif spec.model == "misaligned":
        psi0 = _prepared(spec, coherent_state(beta, n))
        if spec.engine == "exact":
            hold = evolver.evolve(psi0, _eig_misaligned(c, n), t)
        else:
            hold = _misaligned_perturbative(c, n, spec.eps_degen, psi0, t)
    else:
        specs = (spec.n_levels_xy, spec.n_levels_xy, n)
        zero = np.array([0, 1, 0], dtype=complex)
        spin = _pulse(spec) @ zero
        psi0 = perturb.initial_state_3d(c, beta, specs, spin=spin)
        if spec.model == "exact3d":
            hold = evolver.evolve(psi0, _eig_3d(c, spec.n_levels_xy, n), t)
        else:
            _, vx, vy = hamiltonian_3d(c, specs)
            basis = perturb.unperturbed_eigensystem(c, specs)
            system = perturb.second_order(basis, perturb.matrix_elements(vx + vy, basis),
                                          spec.eps_degen)
            hold = perturb.perturbed_evolve(psi0, system, t)
    p0, final = _readout(spec, hold)
    return RamseyOutcome(p0, final, hold)


def _misaligned_perturbative(c, n, eps_degen, psi0, t):
    spec = FockSpec(n)
    basis = perturb.unperturbed_eigensystem(c, (spec,))
    _, hi = hamiltonian_misaligned(c, spec)
    if c.c_x == 0 and c.c_y == 0:
        return perturb.unperturbed_evolve(psi0, basis, t)
    system = perturb.second_order(basis, perturb.matrix_elements(hi, basis), eps_degen)
    return perturb.perturbed_evolve(psi0, system, t)


def _fringe_point(args):
    spec, c, theta, cx = args
    ci = c.with_orientation(cx).replace(dlambda=c.dlambda * np.cos(theta))
    return run_sequence(spec, ci).p0


def fringe_scan(theta_grid, cx_grid, spec: SequenceSpec, c: CouplingSet, jobs: int = 1) -> FringeScan:
    """P0 over tilt angle and NV direction cosine.

    ``c.dlambda`` is the gravitational coupling at cos(theta) = 1; each grid
    point uses ``dlambda * cos(theta)`` and an NV axis with ``c_y = 0``.  Any
    non-zero ``c_x`` switches every row to the misaligned model so rows are
    directly comparable.
    """
    theta_grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    cx_grid = np.atleast_1d(np.asarray(cx_grid, dtype=float))
    if theta_grid.size == 0 or cx_grid.size == 0:
        raise ValueError("fringe grids must be non-empty")
    if np.any(cx_grid != 0) and spec.model != "misaligned":
        spec = replace(spec, model="misaligned")
    tasks = [(spec, c, th, cx) for cx in cx_grid for th in theta_grid]
    if jobs > 1:
        with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(_fringe_point, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        values = [_fringe_point(t) for t in tasks]
    p0 = np.asarray(values).reshape(cx_grid.size, theta_grid.size)
    vis = np.array([visibility(row) for row in p0])
    return FringeScan(theta_grid, cx_grid, p0, vis, spec.model)


def sample_thermal_betas(nbar: float, count: int, seed: int) -> np.ndarray:
    """Draws from the Glauber P function of a thermal state (complex Gaussian,
    ``E|beta|^2 = nbar``)."""
    rng = np.random.default_rng(seed)
    return np.sqrt(nbar / 2) * (rng.standard_normal(count) + 1j * rng.standard_normal(count))


def thermal_p0(spec: SequenceSpec, c: CouplingSet, sampling: str = "p_sample",
               count: int = 256, seed: int = 0) -> tuple[float, float]:
    """Thermally averaged P0 and the spread across samples.

    ``p_sample`` averages coherent-state runs over P-function draws;
    ``density_exact`` evolves the thermal density matrix of the 1D model.
    """
    nbar = spec.nbar if spec.motion == "thermal" else 0.0
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if sampling == "density_exact":
        if spec.model != "exact1d":
            raise ValueError("density_exact is only available for the exact1d model")
        n = spec.n_levels or auto_levels(c, 3 * np.sqrt(nbar) + 3)
        return _thermal_density_p0(spec, c, nbar, n), 0.0
    if sampling != "p_sample":
        raise ValueError(f"unknown sampling {sampling!r}")
    betas = [0j] if nbar == 0 else sample_thermal_betas(nbar, count, seed)
    vals = []
    for b in betas:
        sub = replace(spec, motion="coherent", beta=complex(b))
        vals.append(run_sequence(sub, c).p0)
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std())


def _thermal_density_p0(spec, c, nbar, n):
    rho_m = thermal_density(nbar, FockSpec(n))
    u = _pulse(spec)
    spin = u @ np.array([0, 1, 0], dtype=complex)
    rho = np.kron(np.outer(spin, spin.conj()), rho_m)
    rho_t = evolver.evolve_density(rho, _eig_1d(c, n), spec.t_hold)
    big_u = np.kron(u, np.eye(n))
    out = big_u @ rho_t @ big_u.conj().T
    return float(np.trace(out[n:2 * n, n:2 * n]).real)


def converged(run, n_levels: int, tol: float = 1e-8) -> tuple[bool, float]:
    """Compare ``run(n)`` and ``run(2n)`` final states (spin ⊗ z layouts).

    The smaller state is zero-padded before taking the fidelity.
    """
    a, b = run(n_levels), run(2 * n_levels)
    ta = a.tensor_view()
    pad = [(0, 0)] * ta.ndim
    pad[-1] = (0, b.layout[-1] - a.layout[-1])
    ta = np.pad(ta, pad).ravel()
    f = abs(np.vdot(ta, b.amplitudes))
    return bool(1 - f <= tol), float(1 - f)
