import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy.special import eval_genlaguerre, gammaln

from nvramsey.hilbert import (
    FockSpec, HybridState, LabeledOperator, LayoutError, TruncationError,
    coherent_leakage, coherent_state, displaced_number_state, displacement,
    displacement_matrix, fidelity, fock_ops, hermitian_defect, identity,
    padded_displacement, reduced_density, schmidt_coefficients, spin1_ops,
    spin_basis, tensor, thermal_density,
)

complexes = st.builds(complex, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))


def _expm_displacement(alpha, n):
    # independent oracle: direct matrix exponential of the generator
    a = np.diag(np.sqrt(np.arange(1, n)), k=1)
    return scipy.linalg.expm(alpha * a.T - np.conj(alpha) * a)


def _franck_condon(m, n, alpha):
    """Closed form <m|D(alpha)|n> via associated Laguerre polynomials."""
    x = abs(alpha) ** 2
    lo, hi = min(m, n), max(m, n)
    z = alpha if m >= n else -np.conj(alpha)
    pref = np.exp(0.5 * (gammaln(lo + 1) - gammaln(hi + 1)))
    return pref * z ** (hi - lo) * np.exp(-x / 2) * eval_genlaguerre(lo, hi - lo, x)


class TestFockOps:
    def test_lowering_two_levels(self):
        a, _, _ = fock_ops(FockSpec(2))
        one = np.array([0, 1])
        assert a.dense() @ one == pytest.approx(np.array([1.0, 0]))

    def test_number_diagonal(self):
        _, _, n = fock_ops(FockSpec(5))
        assert n.dense()[3, 3] == pytest.approx(3)

    def test_commutator_bulk(self):
        a, ad, _ = fock_ops(FockSpec(40))
        comm = a.dense() @ ad.dense() - ad.dense() @ a.dense()
        assert np.max(np.abs(comm[:39, :39] - np.eye(39))) <= 1e-12
        # the top level violates the algebra by construction
        assert abs(comm[39, 39] - 1) > 1

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            FockSpec(1)


class TestSpin:
    def test_sz_spectrum(self):
        _, _, sz = spin1_ops()
        assert sorted(np.linalg.eigvalsh(sz.dense())) == pytest.approx([-1, 0, 1])

    def test_algebra(self):
        sx, sy, sz = (o.dense() for o in spin1_ops())
        for a, b, c in [(sx, sy, sz), (sy, sz, sx), (sz, sx, sy)]:
            assert np.max(np.abs(a @ b - b @ a - 1j * c)) <= 1e-12
        assert np.max(np.abs(sx @ sx + sy @ sy + sz @ sz - 2 * np.eye(3))) <= 1e-12

    def test_transverse_diagonal_vanishes(self):
        sx, sy, _ = spin1_ops()
        for s in (1, 0, -1):
            v = spin_basis(s)
            assert abs(v.expect(sx)) == 0
            assert abs(v.expect(sy)) == 0

    def test_spin_ordering(self):
        _, _, sz = spin1_ops()
        assert np.diag(sz.dense()).real == pytest.approx([1, 0, -1])


class TestCoherent:
    def test_vacuum(self):
        psi = coherent_state(0, 10)
        assert psi.amplitudes[0] == 1 and np.count_nonzero(psi.amplitudes) == 1

    def test_mean_number(self):
        _, _, n = fock_ops(30)
        assert coherent_state(1.0, 30).expect(n).real == pytest.approx(1.0, abs=1e-10)

    def test_matches_displaced_vacuum(self):
        beta = 1 + 0.5j
        d = displacement(beta, 40)
        vac = np.zeros(40)
        vac[0] = 1
        assert abs(np.vdot(coherent_state(beta, 40).amplitudes, d.dense() @ vac)) == pytest.approx(1, abs=1e-10)

    def test_amplitudes_against_factorial_formula(self):
        beta = 0.7 - 0.2j
        n = np.arange(12)
        from math import factorial
        ref = np.exp(-abs(beta) ** 2 / 2) * beta ** n / np.sqrt([factorial(k) for k in n])
        psi = coherent_state(beta, 40)
        assert np.max(np.abs(psi.amplitudes[:12] - ref)) < 1e-14

    def test_truncation_guard(self):
        with pytest.raises(TruncationError):
            coherent_state(3.0, 10)

    def test_leakage_is_poisson_tail(self):
        # |beta|^2 = 4: P(n >= 3) = 1 - e^-4 (1 + 4 + 8)
        assert coherent_leakage(2.0, 3) == pytest.approx(1 - np.exp(-4) * 13, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(complexes)
    def test_normalized(self, beta):
        assert abs(coherent_state(beta, 40).norm - 1) <= 1e-10


class TestDisplacement:
    def test_zero_is_identity(self):
        assert np.max(np.abs(displacement(0, 12).dense() - np.eye(12))) == 0

    def test_inverse(self):
        d, dm = displacement(0.5, 40).dense(), displacement(-0.5, 40).dense()
        assert np.max(np.abs(d @ dm - np.eye(40))) <= 1e-8

    def test_conjugation_identity_on_bulk(self):
        alpha = 0.5 + 0.3j
        n = 40
        d = displacement(alpha, n).dense()
        a = fock_ops(n)[0].dense()
        lhs = d.conj().T @ a @ d
        bulk = slice(0, 25)
        assert np.max(np.abs(lhs[bulk, bulk] - (a + alpha * np.eye(n))[bulk, bulk])) <= 1e-8

    def test_matches_expm_oracle(self):
        alpha = 0.8 - 0.4j
        assert np.max(np.abs(displacement_matrix(alpha, 30) - _expm_displacement(alpha, 30))) < 1e-12

    def test_unitarity_defect_decreases_with_truncation(self):
        alpha = 1.5
        defects = []
        for n in (20, 40, 80):
            d = padded_displacement(alpha, n)
            defects.append(np.max(np.abs(d.conj().T @ d - np.eye(n))[: n // 2, : n // 2]))
        # cropping a larger space: the bulk block is unitary to the leakage level
        assert defects[0] >= defects[1] >= defects[2] - 1e-15
        assert defects[-1] < 1e-12

    def test_franck_condon_closed_form(self):
        alpha = 0.6 + 0.25j
        d = padded_displacement(alpha, 20)
        for m in range(8):
            for n in range(8):
                assert d[m, n] == pytest.approx(_franck_condon(m, n, alpha), abs=1e-12)


class TestDisplacedNumber:
    def test_zero_alpha_is_number_state(self):
        psi = displaced_number_state(0, 3, 10)
        assert abs(psi.amplitudes[3]) == pytest.approx(1)

    def test_orthonormal(self):
        states = [displaced_number_state(0.4 - 0.2j, k, 40) for k in range(5)]
        gram = np.array([[np.vdot(a.amplitudes, b.amplitudes) for b in states] for a in states])
        assert np.max(np.abs(gram - np.eye(5))) <= 1e-8

    def test_number_expectation(self):
        _, _, num = fock_ops(40)
        psi = displaced_number_state(0.3, 2, 40)
        assert psi.expect(num).real == pytest.approx(2 + 0.09, abs=1e-6)

    def test_index_range(self):
        with pytest.raises(IndexError):
            displaced_number_state(0.1, 10, 10)


class TestTensorAndFidelity:
    def test_identity_product(self):
        op = tensor([identity(3), identity(7)])
        assert np.array_equal(op.dense(), np.eye(21))

    def test_mixed_product(self):
        _, _, sz = spin1_ops()
        a = fock_ops(6)[0]
        lhs = tensor([sz, identity(6)]) @ tensor([identity(3), a])
        assert np.max(np.abs(lhs.dense() - tensor([sz, a]).dense())) == 0

    def test_norm_multiplicative(self):
        s = HybridState(np.array([1, 2, 0.5j]), (3,))
        m = HybridState(np.array([0.3, -1.0]), (2,))
        assert tensor([s, m]).norm == pytest.approx(s.norm * m.norm)

    def test_fidelity_basic(self):
        psi = coherent_state(0.5, 20)
        assert fidelity(psi, psi) == pytest.approx(1)
        rot = HybridState(np.exp(0.7j) * psi.amplitudes, psi.layout)
        assert fidelity(psi, rot) == pytest.approx(1)
        zero = HybridState(np.eye(2)[0], (2,))
        one = HybridState(np.eye(2)[1], (2,))
        assert fidelity(zero, one) == 0

    def test_fidelity_layout_mismatch(self):
        with pytest.raises(LayoutError):
            fidelity(coherent_state(0, 4), HybridState(np.eye(6)[0], (2, 3)))

    def test_product_state_has_one_schmidt_value(self):
        psi = tensor([spin_basis(1), coherent_state(0.4, 20)])
        sv = schmidt_coefficients(psi)
        assert sv[0] == pytest.approx(1) and np.all(sv[1:] < 1e-12)
        rho = reduced_density(psi, 0)
        assert np.trace(rho @ rho).real == pytest.approx(1)


class TestOperators:
    def test_hermitian_flag_is_checked(self):
        with pytest.raises(ValueError):
            LabeledOperator(np.array([[0, 1], [0, 0]]), (2,), hermitian=True)

    def test_layout_checked(self):
        with pytest.raises(LayoutError):
            LabeledOperator(np.eye(4), (3,))

    def test_hermitian_defect(self):
        assert hermitian_defect(np.array([[1, 2j], [-2j, 0]])) == 0


class TestThermal:
    def test_populations(self):
        rho = thermal_density(2.0, 80)
        n = np.arange(80)
        assert np.trace(rho).real == pytest.approx(1)
        assert float(np.sum(n * np.diag(rho).real)) == pytest.approx(2.0, rel=1e-8)

    def test_guard(self):
        with pytest.raises(TruncationError):
            thermal_density(5.0, 30)
