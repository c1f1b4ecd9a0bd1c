"""
Laboratory parameters, dimensionless couplings and model Hamiltonians.

All Hamiltonians use hbar = 1, energies in units of hbar*omega_z and times in
units of 1/omega_z, so one trap period is ``t0 = 2*pi``.  Laboratory units only
appear in :func:`couplings_from_physical`.

Sign convention: the 1D Hamiltonian is

    H = D S_z^2 + c^dag c - 2 (lambda S_z - dlambda)(c + c^dag)

so for spin eigenvalue ``s`` the oscillator is centred at
``u = 2 (s lambda - dlambda)``, the same ``u`` that enters the closed-form
trajectory in :mod:`nvramsey.analytic`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const
import scipy.linalg

from .hilbert import FockSpec, LabeledOperator, kron_operator, spin1_ops, _as_spec

ZERO_FIELD_SPLITTING = 2 * np.pi * 2.87e9  # rad/s
G_NV = 2.0028
MU_B = const.physical_constants["Bohr magneton"][0]
DIAMOND_DENSITY = 3500.0


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory description of the trapped nanodiamond and the magnet."""

    omega_x: float
    omega_y: float
    omega_z: float
    mass: float | None = None
    radius: float | None = None
    density: float = DIAMOND_DENSITY
    theta: float = np.pi / 2
    theta_x: float | None = None
    theta_y: float | None = None
    magnet_radius: float = 40e-6
    magnetization: float = 1.5e6
    magnet_distance: float = 120e-6
    D: float = ZERO_FIELD_SPLITTING
    g_nv: float = G_NV
    c_x: float = 0.0
    c_y: float = 0.0
    c_z: float = 1.0
    gravity: float = const.g

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "omega_z"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.mass is None:
            if self.radius is None:
                raise ValueError("give either mass or radius")
            object.__setattr__(self, "mass", 4 / 3 * np.pi * self.radius ** 3 * self.density)
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if abs(self.magnet_distance) <= self.magnet_radius:
            raise ValueError("|magnet_distance| must exceed magnet_radius")
        check_direction_cosines(self.c_x, self.c_y, self.c_z)
        # gravity in the x-z plane unless told otherwise
        if self.theta_y is None:
            object.__setattr__(self, "theta_y", np.pi / 2)
        if self.theta_x is None:
            cx2 = 1 - np.cos(self.theta) ** 2 - np.cos(self.theta_y) ** 2
            object.__setattr__(self, "theta_x", float(np.arccos(np.sqrt(max(cx2, 0.0)))))
        total = np.cos(self.theta) ** 2 + np.cos(self.theta_x) ** 2 + np.cos(self.theta_y) ** 2
        if abs(total - 1) > 1e-9:
            raise ValueError(f"gravity direction cosines square-sum to {total}, not 1")

    @property
    def magnetic_moment(self) -> float:
        return self.magnetization * 4 / 3 * np.pi * self.magnet_radius ** 3


def check_direction_cosines(c_x, c_y, c_z, tol=1e-9):
    total = c_x ** 2 + c_y ** 2 + c_z ** 2
    if abs(total - 1) > tol:
        raise ValueError(f"direction cosines square-sum to {total}, not 1")


@dataclass(frozen=True)
class CouplingSet:
    """Dimensionless model constants (energies in units of hbar*omega_z).

    Either ``gamma_x`` or ``omega_x_ratio`` may be given; the other follows from
    ``gamma = sqrt(omega_z / omega_x)``.  Same for y.  With neither given the
    transverse frequencies default to ``10 omega_z``.
    """

    lambda_: float = 0.0
    dlambda: float = 0.0
    dlambda_x: float = 0.0
    dlambda_y: float = 0.0
    gamma_x: float | None = None
    gamma_y: float | None = None
    D: float = 0.0
    omega_x_ratio: float | None = None
    omega_y_ratio: float | None = None
    c_x: float = 0.0
    c_y: float = 0.0
    c_z: float = 1.0
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for axis in "xy":
            g = getattr(self, f"gamma_{axis}")
            r = getattr(self, f"omega_{axis}_ratio")
            if g is None and r is None:
                r = 10.0
            if r is None:
                if not g > 0:
                    raise ValueError(f"gamma_{axis} must be positive to fix omega_{axis}")
                r = 1.0 / g ** 2
            if not r > 0:
                raise ValueError(f"omega_{axis}_ratio must be positive")
            expected = np.sqrt(1.0 / r)
            if g is None:
                g = expected
            elif abs(g - expected) > 1e-12:
                raise ValueError(f"gamma_{axis}={g} inconsistent with omega_{axis}_ratio={r}")
            object.__setattr__(self, f"gamma_{axis}", float(g))
            object.__setattr__(self, f"omega_{axis}_ratio", float(r))
        check_direction_cosines(self.c_x, self.c_y, self.c_z)

    def replace(self, **changes) -> "CouplingSet":
        if "gamma_x" in changes and "omega_x_ratio" not in changes:
            changes["omega_x_ratio"] = None
        if "omega_x_ratio" in changes and "gamma_x" not in changes:
            changes["gamma_x"] = None
        if "gamma_y" in changes and "omega_y_ratio" not in changes:
            changes["omega_y_ratio"] = None
        if "omega_y_ratio" in changes and "gamma_y" not in changes:
            changes["gamma_y"] = None
        return dataclasses.replace(self, **changes)

    def with_orientation(self, c_x: float, c_y: float = 0.0) -> "CouplingSet":
        """Tilt the NV axis; ``c_z`` is fixed by normalization."""
        c_z = np.sqrt(max(0.0, 1.0 - c_x ** 2 - c_y ** 2))
        return self.replace(c_x=float(c_x), c_y=float(c_y), c_z=float(c_z))

    def displacement_z(self, s_z: int, c_z: float | None = None) -> float:
        """Centre of the z well for spin ``s_z``: ``2 (lambda c_z s - dlambda)``."""
        cz = 1.0 if c_z is None else c_z
        return 2.0 * (self.lambda_ * cz * s_z - self.dlambda)

    @property
    def K(self) -> float:
        """Fringe parameter ``8 lambda dlambda t0`` (per unit cos(theta) when
        ``dlambda`` is quoted at cos(theta) = 1)."""
        return 8 * self.lambda_ * self.dlambda * 2 * np.pi


def zeeman_gradient(p: PhysicalParams) -> float:
    """On-axis dB_z/dz (T/m) of the magnetized sphere at the trap centre."""
    return 6 * const.mu_0 * p.magnetic_moment / (4 * np.pi * abs(p.magnet_distance) ** 4)


def couplings_from_physical(p: PhysicalParams) -> CouplingSet:
    hbar = const.hbar
    z0 = p.magnet_distance
    zpf = np.sqrt(hbar / (2 * p.mass * p.omega_z))
    b0 = 3 * const.mu_0 * p.magnetic_moment * z0 / (4 * np.pi * abs(z0) ** 5)
    lam = b0 * p.g_nv * MU_B * zpf
    dlam = 0.5 * p.mass * p.gravity * np.cos(p.theta) * zpf

    def transverse(theta_i, omega_i):
        return 0.5 * p.mass * p.gravity * np.cos(theta_i) * np.sqrt(hbar / (2 * p.mass * omega_i))

    unit = hbar * p.omega_z
    return CouplingSet(
        lambda_=lam / unit,
        dlambda=dlam / unit,
        dlambda_x=transverse(p.theta_x, p.omega_x) / unit,
        dlambda_y=transverse(p.theta_y, p.omega_y) / unit,
        D=p.D / p.omega_z,
        omega_x_ratio=p.omega_x / p.omega_z,
        omega_y_ratio=p.omega_y / p.omega_z,
        c_x=p.c_x,
        c_y=p.c_y,
        c_z=p.c_z,
        diagnostics={
            "field_gradient_T_per_m": zeeman_gradient(p),
            "magnetic_moment_A_m2": p.magnetic_moment,
            "zero_point_length_m": zpf,
            "mass_kg": p.mass,
        },
    )


def _mode(n):
    n = _as_spec(n).n_levels
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1)
    return n, a, np.eye(n), np.diag(np.arange(n, dtype=float)), a + a.T


def _spin():
    sx, sy, sz = (s.dense() for s in spin1_ops())
    return np.eye(3), sx, sy, sz


def hamiltonian_1d(c: CouplingSet, spec: FockSpec) -> LabeledOperator:
    n, _, iz, num, xq = _mode(spec)
    i3, _, _, sz = _spin()
    terms = [
        (c.D, (sz @ sz, iz)),
        (1.0, (i3, num)),
        (-2 * c.lambda_, (sz, xq)),
        (2 * c.dlambda, (i3, xq)),
    ]
    return kron_operator(terms, (3, n), hermitian=True)


def hamiltonian_3d(c: CouplingSet, specs) -> tuple[LabeledOperator, LabeledOperator, LabeledOperator]:
    """Zeroth-order 3D Hamiltonian and the two transverse spin couplings."""
    (nx, _, ix, numx, xa), (ny, _, iy, numy, xb), (nz, _, iz, numz, xc) = (_mode(s) for s in specs)
    i3, sx, sy, sz = _spin()
    layout = (3, nx, ny, nz)
    h0 = kron_operator([
        (c.D, (sz @ sz, ix, iy, iz)),
        (c.omega_x_ratio, (i3, numx, iy, iz)),
        (c.omega_y_ratio, (i3, ix, numy, iz)),
        (1.0, (i3, ix, iy, numz)),
        (2 * c.dlambda_x, (i3, xa, iy, iz)),
        (2 * c.dlambda_y, (i3, ix, xb, iz)),
        (2 * c.dlambda, (i3, ix, iy, xc)),
        (-2 * c.lambda_, (sz, ix, iy, xc)),
    ], layout, hermitian=True)
    vx = kron_operator([(c.lambda_ * c.gamma_x, (sx, xa, iy, iz))], layout, hermitian=True)
    vy = kron_operator([(c.lambda_ * c.gamma_y, (sy, ix, xb, iz))], layout, hermitian=True)
    return h0, vx, vy


def hamiltonian_misaligned(c: CouplingSet, spec: FockSpec) -> tuple[LabeledOperator, LabeledOperator]:
    """Split of the tilted-NV Hamiltonian into a solvable part and the
    transverse-spin coupling."""
    check_direction_cosines(c.c_x, c.c_y, c.c_z)
    n, _, iz, num, xq = _mode(spec)
    i3, sx, sy, sz = _spin()
    h0 = kron_operator([
        (c.D, (sz @ sz, iz)),
        (1.0, (i3, num)),
        (2 * c.dlambda, (i3, xq)),
        (-2 * c.lambda_ * c.c_z, (sz, xq)),
    ], (3, n), hermitian=True)
    hi = kron_operator([
        (-2 * c.lambda_ * c.c_x, (sx, xq)),
        (-2 * c.lambda_ * c.c_y, (sy, xq)),
    ], (3, n), hermitian=True)
    return h0, hi


def pulse_duration(omega: float) -> float:
    return np.pi / (2 * np.sqrt(2) * omega)


def microwave_hamiltonian(omega: float) -> np.ndarray:
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = h[2, 1] = omega
    return h + h.conj().T


def microwave_pulse(omega: float | None = None, mode: str = "ideal") -> LabeledOperator:
    """Spin unitary of one Ramsey pulse; maps |0> to -i(|+1> + |-1>)/sqrt(2).

    ``ideal`` uses the closed form of ``exp(-i H_mw t_p)``; ``finite`` exponentiates
    ``H_mw`` at the given Rabi rate for ``t_p = pi / (2 sqrt(2) omega)``.  Motion
    during the pulse is neglected in both.
    """
    if mode == "ideal":
        bright = np.array([1, 0, 1]) / np.sqrt(2)
        dark = np.array([1, 0, -1]) / np.sqrt(2)
        zero = np.array([0, 1, 0])
        j = np.outer(bright, zero) + np.outer(zero, bright)
        u = np.outer(dark, dark) - 1j * j
    elif mode == "finite":
        if omega is None or not omega > 0:
            raise ValueError("finite pulse needs a positive Rabi rate")
        u = scipy.linalg.expm(-1j * microwave_hamiltonian(omega) * pulse_duration(omega))
    else:
        raise ValueError(f"unknown pulse mode {mode!r}")
    return LabeledOperator(u, (3,))
