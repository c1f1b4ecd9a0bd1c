"""Exact time evolution by full eigendecomposition of a time-independent H."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import HybridState, LabeledOperator, LayoutError, hermitian_defect

MAX_DIM = 20_000


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EigSystem:
    energies: np.ndarray
    vectors: np.ndarray
    source_dim: int
    layout: tuple

    def propagator(self, t: float) -> np.ndarray:
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.energies) @ self.vectors.conj().T


def eigendecompose(h: LabeledOperator) -> EigSystem:
    if h.dim > MAX_DIM:
        raise DimensionError(
            f"dimension {h.dim} exceeds {MAX_DIM}; reduce the Fock truncation"
        )
    m = h.dense()
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if hermitian_defect(m) > 1e-12 * scale:
        raise ValueError("eigendecompose needs a Hermitian operator")
    w, v = np.linalg.eigh(m)
    w.setflags(write=False)
    v.setflags(write=False)
    return EigSystem(w, v, h.dim, h.layout)


def evolve(psi: HybridState, eig: EigSystem, t: float) -> HybridState:
    if tuple(psi.layout) != tuple(eig.layout):
        raise LayoutError(f"state layout {psi.layout} vs Hamiltonian layout {eig.layout}")
    v = eig.vectors
    coeff = v.conj().T @ psi.amplitudes
    out = v @ (np.exp(-1j * eig.energies * t) * coeff)
    return HybridState(out, psi.layout)


def check_density(rho: np.ndarray, tol: float = 1e-10) -> None:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real}, not 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")


def evolve_density(rho: np.ndarray, eig: EigSystem, t: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (eig.source_dim, eig.source_dim):
        raise LayoutError(f"density shape {rho.shape} vs Hamiltonian dimension {eig.source_dim}")
    check_density(rho)
    v = eig.vectors
    phase = np.exp(-1j * eig.energies * t)
    r = v.conj().T @ rho @ v
    r = phase[:, None] * r * phase.conj()[None, :]
    return v @ r @ v.conj().T
