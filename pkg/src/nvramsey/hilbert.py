"""
Truncated Fock spaces, spin-1 operators and tensor composition.

Conventions used throughout the package
---------------------------------------
- Composite ordering is ``spin ⊗ x ⊗ y ⊗ z`` (modes present in that order).
- Spin-1 basis ordering is ``|+1>, |0>, |-1>``; ``S_z = diag(1, 0, -1)``.
- The displacement operator is ``D(alpha) = exp(alpha a^dag - alpha^* a)``,
  so ``D(alpha)|0> = |alpha>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln
from scipy.stats import poisson

LEAKAGE_BOUND = 1e-10
THERMAL_LEAKAGE_BOUND = 1e-8
NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-12
# above this dimension ``tensor`` keeps operators sparse
SPARSE_DIM = 1000


class TruncationError(ValueError):
    """The Fock cutoff is too small for the requested state or operator."""


class LayoutError(ValueError):
    """Tensor-factor layouts of two objects are incompatible."""


@dataclass(frozen=True)
class FockSpec:
    n_levels: int

    def __post_init__(self):
        if int(self.n_levels) != self.n_levels or self.n_levels < 2:
            raise ValueError(f"n_levels must be an integer >= 2, got {self.n_levels!r}")


def _as_spec(spec) -> FockSpec:
    return spec if isinstance(spec, FockSpec) else FockSpec(int(spec))


@dataclass(frozen=True, eq=False)
class HybridState:
    """Normalized ket on a declared tensor layout."""

    amplitudes: np.ndarray
    layout: tuple
    norm_tolerance: float = NORM_TOL

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        layout = tuple(int(d) for d in self.layout)
        if int(np.prod(layout)) != amps.size:
            raise LayoutError(f"layout {layout} does not match vector length {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "layout", layout)

    @classmethod
    def normalized(cls, amplitudes, layout, norm_tolerance=NORM_TOL) -> "HybridState":
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm, layout, norm_tolerance)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout)

    def expect(self, op) -> complex:
        m = op.matrix if isinstance(op, LabeledOperator) else op
        return complex(np.vdot(self.amplitudes, m @ self.amplitudes))

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """Square matrix (dense or scipy.sparse) on a tensor layout.

    ``terms`` optionally records the operator as a sum of Kronecker products,
    ``[(coef, (factor_0, factor_1, ...)), ...]`` with one factor per layout slot.
    Perturbative code uses it to avoid touching the full matrix.
    """

    matrix: object
    layout: tuple
    hermitian: bool = False
    terms: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        layout = tuple(int(d) for d in self.layout)
        m = self.matrix
        if sp.issparse(m):
            m = sp.csr_matrix(m, dtype=complex)
        else:
            m = np.array(m, dtype=complex)
            m.setflags(write=False)
        n = int(np.prod(layout))
        if m.shape != (n, n):
            raise LayoutError(f"matrix shape {m.shape} does not match layout {layout}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "layout", layout)
        if self.hermitian:
            defect = hermitian_defect(m)
            if defect > HERMITIAN_TOL:
                raise ValueError(f"operator flagged Hermitian but max|M - M^dag| = {defect:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def dag(self) -> "LabeledOperator":
        terms = None
        if self.terms is not None:
            terms = tuple((np.conj(c), tuple(f.conj().T for f in fs)) for c, fs in self.terms)
        return LabeledOperator(self.matrix.conj().T, self.layout, self.hermitian, terms)

    def __matmul__(self, other):
        if isinstance(other, LabeledOperator):
            _check_layouts(self.layout, other.layout)
            return LabeledOperator(self.matrix @ other.matrix, self.layout)
        if isinstance(other, HybridState):
            _check_layouts(self.layout, other.layout)
            return HybridState(np.asarray(self.matrix @ other.amplitudes).ravel(), other.layout)
        return self.matrix @ other

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        _check_layouts(self.layout, other.layout)
        terms = None
        if self.terms is not None and other.terms is not None:
            terms = self.terms + other.terms
        return LabeledOperator(self.matrix + other.matrix, self.layout,
                               self.hermitian and other.hermitian, terms)

    def scaled(self, factor: complex) -> "LabeledOperator":
        terms = None
        if self.terms is not None:
            terms = tuple((c * factor, fs) for c, fs in self.terms)
        herm = self.hermitian and np.isreal(factor)
        return LabeledOperator(self.matrix * factor, self.layout, herm, terms)


def hermitian_defect(m) -> float:
    d = m - m.conj().T
    if sp.issparse(d):
        return float(abs(d).max()) if d.nnz else 0.0
    return float(np.max(np.abs(d))) if d.size else 0.0


def _check_layouts(a, b):
    if tuple(a) != tuple(b):
        raise LayoutError(f"layout mismatch: {tuple(a)} vs {tuple(b)}")


def fock_ops(spec) -> tuple[LabeledOperator, LabeledOperator, LabeledOperator]:
    """Annihilation, creation and number operators on a truncated mode."""
    spec = _as_spec(spec)
    n = spec.n_levels
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1)
    layout = (n,)
    ann = LabeledOperator(a, layout)
    cre = LabeledOperator(a.T, layout)
    num = LabeledOperator(np.diag(np.arange(n, dtype=float)), layout, hermitian=True)
    return ann, cre, num


def spin1_ops() -> tuple[LabeledOperator, LabeledOperator, LabeledOperator]:
    r = 1 / np.sqrt(2)
    sx = np.array([[0, r, 0], [r, 0, r], [0, r, 0]], dtype=complex)
    sy = np.array([[0, -1j * r, 0], [1j * r, 0, -1j * r], [0, 1j * r, 0]])
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return tuple(LabeledOperator(m, (3,), hermitian=True) for m in (sx, sy, sz))


SPIN_VALUES = (1, 0, -1)


def spin_basis(s_z: int) -> HybridState:
    """Eigenstate of S_z with eigenvalue ``s_z``."""
    v = np.zeros(3, dtype=complex)
    v[SPIN_VALUES.index(int(s_z))] = 1.0
    return HybridState(v, (3,))


def coherent_leakage(beta: complex, n_levels: int) -> float:
    """Probability weight of |beta> outside the first ``n_levels`` Fock states."""
    mu = abs(beta) ** 2
    if mu == 0:
        return 0.0
    return float(poisson.sf(n_levels - 1, mu))


def _check_leakage(alpha, n_levels, what="coherent state"):
    leak = coherent_leakage(alpha, n_levels)
    if leak > LEAKAGE_BOUND:
        raise TruncationError(
            f"{what} with |alpha|={abs(alpha):.4g} leaks {leak:.3e} beyond "
            f"n_levels={n_levels}; increase the truncation"
        )
    return leak


def coherent_amplitudes(beta: complex, n_levels: int) -> np.ndarray:
    """Unnormalized Fock amplitudes <n|beta>, evaluated in log space."""
    n = np.arange(n_levels)
    out = np.zeros(n_levels, dtype=complex)
    if beta == 0:
        out[0] = 1.0
        return out
    r, phi = abs(beta), np.angle(beta)
    logmag = -0.5 * r * r + n * np.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * phi * n)


def coherent_state(beta: complex, spec) -> HybridState:
    spec = _as_spec(spec)
    _check_leakage(beta, spec.n_levels)
    amps = coherent_amplitudes(beta, spec.n_levels)
    return HybridState.normalized(amps, (spec.n_levels,))


@lru_cache(maxsize=64)
def _quadrature_eig(n_levels: int):
    # P = i(a^dag - a) is Hermitian and exp(r(a^dag - a)) = exp(-i r P)
    a = np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1)
    p = 1j * (a.T - a)
    w, v = np.linalg.eigh(p)
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def displacement_matrix(alpha: complex, n_levels: int) -> np.ndarray:
    """exp(alpha a^dag - alpha^* a) on ``n_levels`` states, no leakage check.

    The generator is diagonalized once per dimension: for ``alpha = r e^{i phi}``
    the operator is the phase rotation ``e^{i phi n}`` applied to ``D(r)``.
    """
    if alpha == 0:
        return np.eye(n_levels, dtype=complex)
    r, phi = abs(alpha), np.angle(alpha)
    w, v = _quadrature_eig(n_levels)
    d = (v * np.exp(-1j * r * w)) @ v.conj().T
    if phi != 0:
        rot = np.exp(1j * phi * np.arange(n_levels))
        d = rot[:, None] * d * rot.conj()[None, :]
    return d


def displacement(alpha: complex, spec) -> LabeledOperator:
    spec = _as_spec(spec)
    _check_leakage(alpha, spec.n_levels, "displacement")
    return LabeledOperator(displacement_matrix(alpha, spec.n_levels), (spec.n_levels,))


def padded_displacement(alpha: complex, n_levels: int, pad: int | None = None) -> np.ndarray:
    """Displacement block on the first ``n_levels`` states, computed on a larger space.

    Columns ``D(alpha)|n>`` for n well below the cutoff are then exact up to the
    Fock tails that fall outside ``n_levels`` itself.
    """
    if pad is None:
        pad = default_pad(alpha, n_levels)
    # round up so that the cached generator eigensystem is reused across alphas
    total = -(-(n_levels + pad) // 64) * 64
    big = displacement_matrix(alpha, total)
    return big[:n_levels, :n_levels].copy()


def default_pad(alpha: complex, n_levels: int) -> int:
    r = abs(alpha)
    return int(np.ceil(r * r + 2 * r * np.sqrt(n_levels) + 12 * r + 20))


def displaced_number_state(alpha: complex, n: int, spec) -> HybridState:
    """D(alpha)|n>, normalized on the truncated space."""
    spec = _as_spec(spec)
    if not 0 <= n < spec.n_levels:
        raise IndexError(f"number state {n} outside truncation {spec.n_levels}")
    # weight of D(alpha)|n> sits around (sqrt(n) + |alpha|)^2
    if alpha != 0:
        r = np.sqrt(n) + abs(alpha)
        _check_leakage(r, spec.n_levels, "displaced number state")
    col = padded_displacement(alpha, spec.n_levels)[:, n]
    return HybridState.normalized(col, (spec.n_levels,))


def identity(dim: int) -> LabeledOperator:
    return LabeledOperator(np.eye(dim), (dim,), hermitian=True)


def tensor(factors: Sequence):
    """Kronecker composite of states or operators (left factor slowest)."""
    factors = list(factors)
    if not factors:
        raise ValueError("tensor of an empty list")
    if all(isinstance(f, HybridState) for f in factors):
        amps = factors[0].amplitudes
        layout = tuple(factors[0].layout)
        for f in factors[1:]:
            amps = np.kron(amps, f.amplitudes)
            layout += tuple(f.layout)
        return HybridState(amps, layout)
    if all(isinstance(f, LabeledOperator) for f in factors):
        layout = tuple(d for f in factors for d in f.layout)
        dim = int(np.prod(layout))
        sparse = dim > SPARSE_DIM or any(f.is_sparse for f in factors)
        if sparse:
            m = sp.csr_matrix(factors[0].matrix)
            for f in factors[1:]:
                m = sp.kron(m, sp.csr_matrix(f.matrix), format="csr")
        else:
            m = factors[0].dense()
            for f in factors[1:]:
                m = np.kron(m, f.dense())
        herm = all(f.hermitian for f in factors)
        terms = None
        if all(len(f.layout) == 1 for f in factors):
            terms = ((1.0, tuple(f.dense() for f in factors)),)
        return LabeledOperator(m, layout, herm, terms)
    raise TypeError("tensor() needs all HybridState or all LabeledOperator factors")


def kron_operator(terms, layout, hermitian=False) -> LabeledOperator:
    """Assemble ``sum coef * kron(factors)`` keeping the term list."""
    layout = tuple(int(d) for d in layout)
    dim = int(np.prod(layout))
    sparse = dim > SPARSE_DIM
    total = sp.csr_matrix((dim, dim), dtype=complex) if sparse else np.zeros((dim, dim), complex)
    clean = []
    for coef, fs in terms:
        fs = tuple(np.asarray(f, dtype=complex) for f in fs)
        if len(fs) != len(layout) or any(f.shape != (d, d) for f, d in zip(fs, layout)):
            raise LayoutError("term factors do not match the layout")
        clean.append((coef, fs))
        if coef == 0:
            continue
        if sparse:
            m = sp.csr_matrix(fs[0])
            for f in fs[1:]:
                m = sp.kron(m, sp.csr_matrix(f), format="csr")
        else:
            m = fs[0]
            for f in fs[1:]:
                m = np.kron(m, f)
        total = total + coef * m
    return LabeledOperator(total, layout, hermitian, tuple(clean))


def fidelity(psi: HybridState, phi: HybridState) -> float:
    """|<psi|phi>|, insensitive to global phase."""
    _check_layouts(psi.layout, phi.layout)
    return float(min(1.0, abs(np.vdot(psi.amplitudes, phi.amplitudes))))


def reduced_density(state: HybridState, keep: int = 0) -> np.ndarray:
    """Reduced density matrix of layout slot ``keep``."""
    t = np.moveaxis(state.tensor_view(), keep, 0).reshape(state.layout[keep], -1)
    return t @ t.conj().T


def schmidt_coefficients(state: HybridState, split: int = 1) -> np.ndarray:
    """Singular values across the cut after the first ``split`` factors."""
    left = int(np.prod(state.layout[:split]))
    return np.linalg.svd(state.amplitudes.reshape(left, -1), compute_uv=False)


def thermal_density(nbar: float, spec, leakage_bound: float = THERMAL_LEAKAGE_BOUND) -> np.ndarray:
    """Thermal (Bose-Einstein) state of one mode, renormalized on the cutoff.

    The geometric tail decays slowly, so the default bound is looser than the
    one used for coherent states (n_levels=120 at nbar=5 leaves ~3e-10).
    """
    spec = _as_spec(spec)
    n = np.arange(spec.n_levels)
    if nbar == 0:
        p = (n == 0).astype(float)
    else:
        q = nbar / (1.0 + nbar)
        tail = q ** spec.n_levels
        if tail > leakage_bound:
            raise TruncationError(
                f"thermal state with nbar={nbar} leaks {tail:.3e} beyond n_levels={spec.n_levels}"
            )
        p = (1 - q) * q ** n
    return np.diag(p / p.sum()).astype(complex)
