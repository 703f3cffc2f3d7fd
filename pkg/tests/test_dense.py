import numpy as np
import pytest
from numpy.testing import assert_allclose

from monitored_shadows.dense import (
    DenseState,
    TwoQubitGate,
    apply_gate,
    haar_2q_gate,
    haar_unitary,
    measure_z,
    pauli_expect,
    purity,
    spectrum,
    subsystem_purity,
)
from monitored_shadows.errors import ImpossibleRecord, ResourceGuard
from monitored_shadows.pauli import PauliString

SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


class TestApplyGate:
    def test_identity_gate(self, rng):
        st = DenseState.from_vector(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        before = st.matrix.copy()
        apply_gate(st, TwoQubitGate(np.eye(4), (0, 2)))
        assert_allclose(st.matrix, before, atol=1e-13)

    def test_swap_on_01(self):
        # |01>: site1=0, site0=1 -> swap(1,0) gives |10>: site1=1, site0=0
        st = DenseState.computational(2, 0b01)
        apply_gate(st, TwoQubitGate(SWAP, (1, 0)))
        assert_allclose(np.diag(st.matrix).real, [0, 0, 1, 0], atol=1e-13)

    def test_gate_then_adjoint_roundtrip(self, rng):
        st = DenseState.fully_mixed(3)
        st.matrix[0, 0] += 0.1  # make it non-trivial
        st.matrix[5, 5] -= 0.1
        before = st.matrix.copy()
        g = haar_2q_gate(rng, (0, 2))
        apply_gate(st, g)
        apply_gate(st, TwoQubitGate(g.matrix.conj().T, (0, 2)))
        assert_allclose(st.matrix, before, atol=1e-12)

    def test_trace_preserved(self, rng):
        st = DenseState.fully_mixed(3)
        for _ in range(10):
            apply_gate(st, haar_2q_gate(rng, tuple(rng.choice(3, 2, replace=False))))
        assert abs(st.trace - 1.0) < 1e-12

    def test_rejects_nonunitary(self):
        with pytest.raises(ValueError):
            TwoQubitGate(np.ones((4, 4)), (0, 1))

    def test_rejects_bad_sites(self, rng):
        st = DenseState.fully_mixed(2)
        with pytest.raises(ValueError):
            apply_gate(st, TwoQubitGate(np.eye(4), (0, 5)))


class TestMeasure:
    def test_measure_zero_state(self, rng):
        st = DenseState.computational(1, 0)
        _, outcome, prob = measure_z(st, 0, rng=rng)
        assert outcome == 0 and prob == pytest.approx(1.0)

    def test_fully_mixed_half_half(self, rng):
        st = DenseState.fully_mixed(1)
        _, outcome, prob = measure_z(st, 0, rng=rng)
        assert prob == pytest.approx(0.5)

    def test_born_frequencies(self, rng):
        psi = np.array([np.sqrt(0.3), np.sqrt(0.7)])
        hits = 0
        n_rep = 2000
        for _ in range(n_rep):
            st = DenseState.from_vector(psi)
            _, outcome, _ = measure_z(st, 0, rng=rng)
            hits += outcome
        p_hat = hits / n_rep
        assert abs(p_hat - 0.7) < 5 * np.sqrt(0.7 * 0.3 / n_rep)

    def test_forced_log_weight_chain_rule(self, rng):
        # forced replay reproduces the product of step probabilities
        st = DenseState.fully_mixed(3)
        for _ in range(3):
            apply_gate(st, haar_2q_gate(rng, (0, 1)))
            apply_gate(st, haar_2q_gate(rng, (1, 2)))
        ref = st.copy()
        logp = 0.0
        outcomes = []
        for site in (0, 2, 1, 0):
            _, o, p = measure_z(st, site, rng=rng)
            outcomes.append(o)
            logp += np.log(p)
        replay = ref.copy()
        for site, o in zip((0, 2, 1, 0), outcomes):
            measure_z(replay, site, forced=o)
        assert_allclose(replay.log_weight, logp, atol=1e-10)
        assert_allclose(replay.matrix, st.matrix, atol=1e-10)

    def test_forced_impossible(self):
        st = DenseState.computational(1, 0)
        with pytest.raises(ImpossibleRecord):
            measure_z(st, 0, forced=1)


class TestSpectraAndPurity:
    def test_pure_spectrum(self, rng):
        st = DenseState.from_vector(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        ev = spectrum(st)
        assert_allclose(ev[0], 1.0, atol=1e-10)
        assert_allclose(ev[1:], 0.0, atol=1e-10)

    def test_mixed_spectrum(self):
        st = DenseState.fully_mixed(2)
        assert_allclose(spectrum(st), [0.25] * 4, atol=1e-12)

    def test_rank2_spectrum(self):
        m = np.diag([0.7, 0.3, 0.0, 0.0]).astype(complex)
        assert_allclose(spectrum(DenseState(2, m))[:2], [0.7, 0.3], atol=1e-12)

    def test_purity_empty_subset(self, rng):
        st = DenseState.fully_mixed(3)
        assert subsystem_purity(st, 0) == 1.0

    def test_purity_fully_mixed(self):
        st = DenseState.fully_mixed(3)
        for mask in range(8):
            assert_allclose(subsystem_purity(st, mask), 0.5 ** bin(mask).count("1"), atol=1e-12)

    def test_purity_schmidt_oracle(self, rng):
        # purity of one side of a pure 2-qubit state = sum of squared
        # Schmidt weights from an independent eigendecomposition
        psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        st = DenseState.from_vector(psi)
        rho_a = np.zeros((2, 2), dtype=complex)
        psi_n = psi / np.linalg.norm(psi)
        m = psi_n.reshape(2, 2)  # index (site1, site0)
        rho_a = m.conj().T @ m  # reduce onto site 0
        weights = np.linalg.eigvalsh(rho_a)
        assert_allclose(subsystem_purity(st, 0b01), np.sum(weights**2), atol=1e-10)
        assert subsystem_purity(st, 0b01) == pytest.approx(subsystem_purity(st, 0b10), abs=1e-10)

    def test_purity_bounds(self, rng):
        st = DenseState.fully_mixed(3)
        for _ in range(8):
            apply_gate(st, haar_2q_gate(rng, (0, 1)))
            measure_z(st, int(rng.integers(3)), rng=rng)
        for mask in range(8):
            p = subsystem_purity(st, mask)
            assert 0.5 ** bin(mask).count("1") - 1e-10 <= p <= 1 + 1e-10


class TestPauliExpect:
    def test_identity(self, rng):
        st = DenseState.fully_mixed(2)
        assert pauli_expect(st, PauliString.from_str("II")) == pytest.approx(1.0)

    def test_z_on_zero(self):
        st = DenseState.computational(1, 0)
        assert pauli_expect(st, PauliString.from_str("Z")) == pytest.approx(1.0)

    def test_against_matrix_contraction(self, rng):
        n = 3
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        st = DenseState(n, rho)
        for _ in range(10):
            p = PauliString(n, tuple(rng.integers(0, 4, n)))
            assert_allclose(pauli_expect(st, p), np.trace(rho @ p.to_matrix()).real, atol=1e-10)


class TestHaar:
    def test_unitarity(self, rng):
        for _ in range(20):
            u = haar_unitary(4, rng)
            assert np.abs(u.conj().T @ u - np.eye(4)).max() < 1e-12

    def test_first_and_second_moments(self, rng):
        # Haar first moment vanishes; E|U_00|^2 = 1/D
        n_draws = 20000
        acc = 0.0 + 0.0j
        acc2 = 0.0
        for _ in range(n_draws):
            u = haar_unitary(2, rng)
            acc += u[0, 0]
            acc2 += abs(u[0, 0]) ** 2
        mean = acc / n_draws
        # var of each complex component is 1/(2D) per part
        se = np.sqrt(1 / (2 * 2) / n_draws)
        assert abs(mean.real) < 5 * se and abs(mean.imag) < 5 * se
        se2 = np.sqrt(1.0 / n_draws)  # crude bound on Var(|U00|^2) <= 1
        assert abs(acc2 / n_draws - 0.5) < 5 * se2


class TestGuards:
    def test_resource_guard(self):
        with pytest.raises(ResourceGuard):
            DenseState.fully_mixed(14)
