"""
Second-order Rayleigh-Schrodinger treatment of transverse spin couplings.

The unperturbed Hamiltonian (3D zeroth order, or the tilted-NV solvable part)
is diagonal in products of S_z eigenstates and displaced number states.  All
perturbative bookkeeping happens in that *label* basis, whose flat index
ordering coincides with the Fock-space ordering ``spin ⊗ modes``: the vector
of label amplitudes for ``(s, n_x, n_y, n_z)`` sits where the Fock amplitude
for ``|s>|n_x n_y n_z>`` would.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hilbert import (
    FockSpec,
    HybridState,
    LabeledOperator,
    LayoutError,
    SPIN_VALUES,
    TruncationError,
    _as_spec,
    coherent_leakage,
    coherent_state,
    padded_displacement,
    tensor,
    LEAKAGE_BOUND,
)
from .model import CouplingSet, hamiltonian_3d

EPS_DEGEN = 1e-6
STORE_THRESHOLD = 1e-15


class DegeneracyError(ArithmeticError):
    """A coupled pair of unperturbed levels is (nearly) degenerate."""


@dataclass(frozen=True, eq=False)
class UnperturbedBasis:
    """Analytic eigensystem of the unperturbed Hamiltonian.

    ``displacement_table[(mode, s)]`` is the well centre for each mode and
    spin value; ``energies`` is indexed like the flattened Fock vector.
    """

    layout: tuple
    modes: tuple
    energies: np.ndarray
    displacement_table: dict
    _dmats: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return int(np.prod(self.layout))

    @property
    def labels(self) -> np.ndarray:
        """One row ``(n_modes..., s_z)`` per basis state in flat order."""
        grids = np.indices(self.layout).reshape(len(self.layout), -1)
        spins = np.asarray(SPIN_VALUES)[grids[0]]
        return np.column_stack([*grids[1:], spins])

    def label_of(self, index: int) -> tuple:
        return tuple(int(x) for x in self.labels[index])

    def _apply(self, vec: np.ndarray, adjoint: bool) -> np.ndarray:
        t = vec.reshape(self.layout).astype(complex, copy=True)
        out = np.empty_like(t)
        for si, s in enumerate(SPIN_VALUES):
            block = t[si]
            for axis, mode in enumerate(self.modes):
                d = self._dmats[(mode, s)]
                m = d.conj().T if adjoint else d
                block = np.moveaxis(np.tensordot(m, block, axes=([1], [axis])), 0, axis)
            out[si] = block
        return out.ravel()

    def to_labels(self, psi: HybridState) -> np.ndarray:
        if tuple(psi.layout) != self.layout:
            raise LayoutError(f"state layout {psi.layout} vs basis layout {self.layout}")
        return self._apply(psi.amplitudes, adjoint=True)

    def from_labels(self, coeffs: np.ndarray) -> HybridState:
        return HybridState(self._apply(np.asarray(coeffs), adjoint=False), self.layout)

    def vector(self, index: int) -> HybridState:
        e = np.zeros(self.dim, dtype=complex)
        e[index] = 1.0
        return self.from_labels(e)


def _mode_params(c: CouplingSet, n_modes: int):
    """(name, frequency ratio, linear coefficient per spin) for each mode."""
    if n_modes == 3:
        return [
            ("x", c.omega_x_ratio, {s: 2 * c.dlambda_x for s in SPIN_VALUES}),
            ("y", c.omega_y_ratio, {s: 2 * c.dlambda_y for s in SPIN_VALUES}),
            ("z", 1.0, {s: 2 * c.dlambda - 2 * c.lambda_ * s for s in SPIN_VALUES}),
        ]
    if n_modes == 1:
        return [("z", 1.0, {s: 2 * c.dlambda - 2 * c.lambda_ * c.c_z * s for s in SPIN_VALUES})]
    raise ValueError("specs must describe 1 (z) or 3 (x, y, z) modes")


def unperturbed_eigensystem(c: CouplingSet, specs) -> UnperturbedBasis:
    """Displaced-number eigenbasis of the unperturbed Hamiltonian.

    Three specs give the 3D zeroth-order problem (x, y, z); a single spec gives
    the tilted-NV solvable part, with spin-dependent z coupling ``lambda c_z``.
    Each mode with frequency ratio ``w`` and linear term ``k (a + a^dag)`` is
    centred at ``-k / w`` and lowered by ``k^2 / w``.
    """
    specs = [_as_spec(s) for s in specs]
    params = _mode_params(c, len(specs))
    layout = (3, *(s.n_levels for s in specs))
    energies = np.zeros(layout)
    table, dmats = {}, {}
    for si, s in enumerate(SPIN_VALUES):
        e = np.full(layout[1:], c.D * s * s, dtype=float)
        for axis, ((name, w, lin), spec) in enumerate(zip(params, specs)):
            k = lin[s]
            alpha = -k / w
            shape = [1] * len(specs)
            shape[axis] = spec.n_levels
            e = e + (w * np.arange(spec.n_levels) - k * k / w).reshape(shape)
            table[(name, s)] = alpha
            if (name, s) not in dmats:
                # the label set must at least hold the displaced vacuum
                if coherent_leakage(alpha, spec.n_levels) > LEAKAGE_BOUND:
                    raise TruncationError(
                        f"mode {name}: displacement {alpha:.4g} does not fit in {spec.n_levels} levels"
                    )
                dmats[(name, s)] = padded_displacement(alpha, spec.n_levels)
        energies[si] = e
    energies = energies.ravel()
    energies.setflags(write=False)
    return UnperturbedBasis(layout, tuple(p[0] for p in params), energies, table, dmats)


def _split_terms(v: LabeledOperator):
    if v.terms is not None:
        return v.terms
    return None


def matrix_elements(v: LabeledOperator, basis: UnperturbedBasis,
                    threshold: float = STORE_THRESHOLD) -> sp.csr_matrix:
    """Elements <E0_n| V |E0_k> as a sparse table in label order.

    Operators built as Kronecker sums are transformed factor by factor: the
    spin factor fixes which (s, s') blocks exist, each mode factor becomes
    ``D(alpha_s)^dag f D(alpha_s')``, whose z part is the Franck-Condon
    overlap between differently displaced wells.  Entries below
    ``threshold * max`` of a factor are dropped.
    """
    if tuple(v.layout) != basis.layout:
        raise LayoutError(f"operator layout {v.layout} vs basis layout {basis.layout}")
    m = basis.dim // 3
    terms = _split_terms(v)
    blocks = [[None] * 3 for _ in range(3)]

    def add(i, j, mat):
        blocks[i][j] = mat if blocks[i][j] is None else blocks[i][j] + mat

    if terms is not None:
        for coef, factors in terms:
            if coef == 0:
                continue
            spin, modes = factors[0], factors[1:]
            for i, s in enumerate(SPIN_VALUES):
                for j, s2 in enumerate(SPIN_VALUES):
                    amp = coef * spin[i, j]
                    if amp == 0:
                        continue
                    mat = None
                    for name, f in zip(basis.modes, modes):
                        g = basis._dmats[(name, s)].conj().T @ f @ basis._dmats[(name, s2)]
                        scale = np.max(np.abs(g)) if g.size else 0.0
                        g[np.abs(g) < threshold * scale] = 0.0
                        g = sp.csr_matrix(g)
                        mat = g if mat is None else sp.kron(mat, g, format="csr")
                    add(i, j, amp * mat)
    else:
        dense = v.dense()
        for i, s in enumerate(SPIN_VALUES):
            for j, s2 in enumerate(SPIN_VALUES):
                blk = dense[i * m:(i + 1) * m, j * m:(j + 1) * m]
                if not np.any(blk):
                    continue
                t = blk.reshape(basis.layout[1:] * 2)
                nm = len(basis.modes)
                for axis, name in enumerate(basis.modes):
                    dl = basis._dmats[(name, s)].conj().T
                    dr = basis._dmats[(name, s2)]
                    t = np.moveaxis(np.tensordot(dl, t, axes=([1], [axis])), 0, axis)
                    t = np.moveaxis(np.tensordot(t, dr, axes=([nm + axis], [0])), -1, nm + axis)
                g = t.reshape(m, m)
                g[np.abs(g) < threshold * max(np.max(np.abs(g)), 1e-300)] = 0.0
                add(i, j, sp.csr_matrix(g))
    zero = sp.csr_matrix((m, m), dtype=complex)
    table = sp.bmat([[b if b is not None else zero for b in row] for row in blocks], format="csr")
    table.eliminate_zeros()
    return table


@dataclass(frozen=True, eq=False)
class PerturbedSystem:
    basis: UnperturbedBasis
    corrected_energies: np.ndarray
    corrected_vectors: sp.csc_matrix
    coupling_report: dict

    def __post_init__(self):
        object.__setattr__(self, "_lu", None)

    def solve(self, coeffs: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
        """Expansion coefficients of a label-space vector in the corrected basis.

        The corrected-vector matrix is close to the identity, so GMRES converges
        in a handful of iterations; sparse LU is the fallback when it stalls.
        """
        b = np.asarray(coeffs, dtype=complex)
        w = self.corrected_vectors
        if self._lu is None:
            x, info = spla.gmres(w, b, rtol=rtol, atol=0.0, restart=50, maxiter=50)
            bnorm = np.linalg.norm(b)
            if info == 0 and np.linalg.norm(w @ x - b) <= 10 * rtol * max(bnorm, 1e-300):
                return x
            object.__setattr__(self, "_lu", spla.splu(w.tocsc()))
        return self._lu.solve(b)


def second_order(basis: UnperturbedBasis, hp: sp.spmatrix, eps_degen: float = EPS_DEGEN,
                 weak_ratio: float = 0.1) -> PerturbedSystem:
    """Energies to second order and eigenvectors to first order.

    ``hp`` is the perturbation table from :func:`matrix_elements`.  Any stored
    off-diagonal element linking levels closer than ``eps_degen`` raises
    :class:`DegeneracyError`.  The report counts coupled pairs and those whose
    mixing ratio ``|H'| / |dE|`` exceeds ``weak_ratio``.
    """
    if not eps_degen > 0:
        raise ValueError("eps_degen must be positive")
    e0 = np.asarray(basis.energies, dtype=float)
    n = e0.size
    coo = sp.coo_matrix(hp)
    diag = np.zeros(n)
    on = coo.row == coo.col
    np.add.at(diag, coo.row[on], coo.data[on].real)
    off = ~on & (coo.data != 0)
    rows, cols, vals = coo.row[off], coo.col[off], coo.data[off]
    gaps = e0[rows] - e0[cols]
    bad = np.abs(gaps) < eps_degen
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DegeneracyError(
            f"levels {basis.label_of(rows[k])} and {basis.label_of(cols[k])} are coupled "
            f"(|H'|={abs(vals[k]):.3e}) but split by only {gaps[k]:.3e}"
        )
    shifts = np.zeros(n)
    np.add.at(shifts, rows, (np.abs(vals) ** 2) / gaps)
    energies = e0 + diag + shifts
    # column j gets <k|V|j> / (E_j - E_k) on row k
    mix = vals / (e0[cols] - e0[rows])
    w = sp.csc_matrix((mix, (rows, cols)), shape=(n, n)) + sp.identity(n, format="csc")
    col_norm = np.sqrt(np.asarray(abs(w).power(2).sum(axis=0)).ravel())
    w = w @ sp.diags(1.0 / col_norm)
    ratios = np.abs(mix)
    report = {
        "coupled_pairs": int(rows.size),
        "min_gap": float(np.min(np.abs(gaps))) if gaps.size else float("inf"),
        "max_mixing": float(ratios.max()) if ratios.size else 0.0,
        "strong_pairs": int(np.count_nonzero(ratios > weak_ratio)),
    }
    energies.setflags(write=False)
    return PerturbedSystem(basis, energies, w.tocsc(), report)


def perturbed_evolve(psi0: HybridState, system: PerturbedSystem, t: float) -> HybridState:
    """Expand in the corrected eigenvectors, attach exp(-i E t), reassemble."""
    basis = system.basis
    a = basis.to_labels(psi0)
    c = system.solve(a)
    at = system.corrected_vectors @ (np.exp(-1j * system.corrected_energies * t) * c)
    out = basis.from_labels(at)
    return HybridState.normalized(out.amplitudes, out.layout)


def unperturbed_evolve(psi0: HybridState, basis: UnperturbedBasis, t: float) -> HybridState:
    a = basis.to_labels(psi0)
    out = basis.from_labels(np.exp(-1j * basis.energies * t) * a)
    return HybridState.normalized(out.amplitudes, out.layout)


BRIGHT = np.array([1.0, 0.0, 1.0]) / np.sqrt(2)


def transverse_couplings(lambda_, gamma_x, gamma_y, dlambda=0.1, D=0.0,
                         dlambda_x=0.0, dlambda_y=0.0, default_ratio=10.0) -> CouplingSet:
    """CouplingSet whose transverse trap frequencies follow from gamma.

    A zero gamma means no transverse coupling; the trap ratio then falls back
    to ``default_ratio`` (it does not affect the result).
    """
    def ratio(g):
        return 1.0 / g ** 2 if g > 0 else default_ratio

    return CouplingSet(lambda_=lambda_, dlambda=dlambda, dlambda_x=dlambda_x,
                       dlambda_y=dlambda_y, D=D, omega_x_ratio=ratio(gamma_x),
                       omega_y_ratio=ratio(gamma_y))


def initial_state_3d(c: CouplingSet, beta: complex, specs, spin=BRIGHT) -> HybridState:
    """``spin ⊗ D(alpha_x)|0> ⊗ D(alpha_y)|0> ⊗ |beta>`` with x, y in the ground
    states of their gravity-shifted wells."""
    sx, sy, sz = (_as_spec(s) for s in specs)
    ax = -2 * c.dlambda_x / c.omega_x_ratio
    ay = -2 * c.dlambda_y / c.omega_y_ratio
    return tensor([HybridState.normalized(spin, (3,)), coherent_state(ax, sx),
                   coherent_state(ay, sy), coherent_state(beta, sz)])


@dataclass(frozen=True)
class FidelityResult:
    fidelity: float
    report: dict
    perturbed: HybridState = field(repr=False)
    unperturbed: HybridState = field(repr=False)


def perturbation_fidelity(lambda_, gamma_x, gamma_y, beta=0.0, specs=(8, 8, 24), *,
                          dlambda=0.1, D=0.0, dlambda_x=0.0, dlambda_y=0.0,
                          t=2 * np.pi, eps_degen=EPS_DEGEN, details=False):
    """Fidelity between the perturbed and the 1D-model state after ``t``.

    The initial state is the bright spin superposition times ``|beta>`` in z,
    with x and y in the displaced ground states of the zeroth-order wells.
    Trap ratios follow ``omega_i / omega_z = 1 / gamma_i^2``.
    """
    c = transverse_couplings(lambda_, gamma_x, gamma_y, dlambda, D, dlambda_x, dlambda_y)
    specs = tuple(_as_spec(s) for s in specs)
    h0, vx, vy = hamiltonian_3d(c, specs)
    basis = unperturbed_eigensystem(c, specs)
    v = None
    if gamma_x != 0:
        v = vx
    if gamma_y != 0:
        v = vy if v is None else v + vy
    psi0 = initial_state_3d(c, beta, specs)
    psi_0t = unperturbed_evolve(psi0, basis, t)
    if v is None:
        system = second_order(basis, sp.csr_matrix((basis.dim, basis.dim), dtype=complex), eps_degen)
        psi_2t = psi_0t
    else:
        system = second_order(basis, matrix_elements(v, basis), eps_degen)
        psi_2t = perturbed_evolve(psi0, system, t)
    f = float(min(1.0, abs(np.vdot(psi_2t.amplitudes, psi_0t.amplitudes))))
    if details:
        return FidelityResult(f, system.coupling_report, psi_2t, psi_0t)
    return f
