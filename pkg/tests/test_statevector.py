import numpy as np
import pytest

from qccc import gates
from qccc.statevector import (
    CapacityError,
    PureState,
    QuditRegister,
    RegionOperator,
    global_phase_equal,
    pauli_on,
)


def qubits(n):
    return QuditRegister([(i, "s", 2) for i in range(n)])


def ghz(n):
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return PureState(qubits(n), amps)


class TestInitProduct:
    def test_all_zero(self):
        st = PureState.product(qubits(3))
        assert st.amps[0] == 1 and np.count_nonzero(st.amps) == 1

    def test_plus(self):
        st = PureState.product(qubits(1), {(0, "s"): np.array([1, 1]) / np.sqrt(2)})
        assert np.allclose(st.amps, [1 / np.sqrt(2)] * 2)

    def test_mixed_dims_index_arithmetic(self):
        reg = QuditRegister([(0, "s", 2), (1, "s", 3)])
        st = PureState.product(reg, {(1, "s"): [0, 0, 1]})
        assert st.amps[2] == 1

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            PureState.product(qubits(1), {(0, "s"): [1.0, 1.0]})


class TestApply:
    def test_x_flip(self):
        st = PureState.product(qubits(1))
        st.apply(pauli_on((0, "s"), "X"))
        assert abs(st.amps[1] - 1) < 1e-12

    def test_cnot(self):
        st = PureState.product(qubits(2), {(0, "s"): [0, 1]})
        st.apply(RegionOperator(((0, "s"), (1, "s")), gates.CNOT))
        assert abs(st.amps[3] - 1) < 1e-12

    def test_cat_rotation(self):
        # direct 8x8 matrix-vector oracle
        m = (np.eye(8) + 1j * np.kron(np.kron(gates.X, gates.X), gates.X)) / np.sqrt(2)
        st = PureState.product(qubits(3))
        st.apply(RegionOperator(((0, "s"), (1, "s"), (2, "s")), m))
        oracle = m @ np.eye(8)[0]
        assert np.allclose(st.amps, oracle)

    def test_nonunitary_rejected(self):
        st = PureState.product(qubits(1))
        with pytest.raises(ValueError):
            st.apply(RegionOperator(((0, "s"),), np.array([[1, 0], [0, 2.0]])))

    def test_norm_preserved_over_many_gates(self):
        rng = np.random.default_rng(0)
        st = PureState.product(qubits(5))
        for _ in range(1000):
            i, j = map(int, rng.choice(5, 2, replace=False))
            st.apply(
                RegionOperator(((i, "s"), (j, "s")), gates.random_unitary(4, rng)),
                unitary_check=False,
            )
        assert abs(np.linalg.norm(st.amps) - 1) < 1e-10

    def test_swap_is_exact(self):
        rng = np.random.default_rng(2)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        st = PureState(qubits(3), psi)
        st.apply_named("SWAP", [(0, "s"), (2, "s")])
        oracle = psi.reshape(2, 2, 2).transpose(2, 1, 0).reshape(-1)
        assert np.allclose(st.amps, oracle)


class TestMeasure:
    def test_plus_forced_zero(self):
        st = PureState.product(qubits(1), {(0, "s"): np.array([1, 1]) / np.sqrt(2)})
        k, p = st.measure((0, "s"), force=0)
        assert k == 0 and abs(p - 0.5) < 1e-12
        assert np.allclose(st.amps, [1, 0])

    def test_zero_state_deterministic(self):
        st = PureState.product(qubits(1))
        k, p = st.measure((0, "s"), rng=np.random.default_rng(0))
        assert k == 0 and abs(p - 1) < 1e-12

    def test_bell_correlation(self):
        st = PureState.product(qubits(2))
        st.apply_named("H", [(0, "s")])
        st.apply_named("CNOT", [(0, "s"), (1, "s")])
        k, p = st.measure((0, "s"), force=1)
        assert abs(p - 0.5) < 1e-12
        assert abs(st.amps[3] - 1) < 1e-12

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(7)
        reg = QuditRegister([(0, "s", 3), (1, "s", 2)])
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        psi /= np.linalg.norm(psi)
        st = PureState(reg, psi)
        basis = gates.random_unitary(3, rng)
        probs = st.branch_probabilities((0, "s"), basis)
        assert abs(probs.sum() - 1) < 1e-10

    def test_forced_vanishing_probability(self):
        st = PureState.product(qubits(1))
        with pytest.raises(ValueError):
            st.measure((0, "s"), force=1)

    def test_non_orthonormal_basis_rejected(self):
        st = PureState.product(qubits(1))
        with pytest.raises(ValueError):
            st.measure((0, "s"), basis=np.array([[1, 1], [0, 1.0]]), force=0)

    def test_measure_remove_matches_measure_plus_remove(self):
        rng = np.random.default_rng(11)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        a = PureState(qubits(3), psi.copy())
        b = PureState(qubits(3), psi.copy())
        ka, pa = a.measure((1, "s"), force=1)
        a.remove_entry((1, "s"))
        kb, pb = b.measure_remove((1, "s"), force=1)
        assert ka == kb and abs(pa - pb) < 1e-12
        assert abs(abs(np.vdot(a.amps, b.amps)) - 1) < 1e-12


class TestExpectation:
    def test_z_on_zero(self):
        st = PureState.product(qubits(1))
        assert abs(st.expectation(pauli_on((0, "s"), "Z")) - 1) < 1e-12

    def test_ghz4_zz(self):
        st = ghz(4)
        op = RegionOperator(((0, "s"), (2, "s")), np.kron(gates.Z, gates.Z))
        assert abs(st.expectation(op) - 1) < 1e-12

    def test_ghz4_single_z(self):
        st = ghz(4)
        assert abs(st.expectation(pauli_on((0, "s"), "Z"))) < 1e-12

    def test_hermitian_real(self):
        rng = np.random.default_rng(5)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        st = PureState(qubits(2), psi)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        val = st.expectation(RegionOperator(((0, "s"), (1, "s")), h))
        assert abs(val.imag) < 1e-10


class TestEntropyAndTrace:
    def test_product_zero_entropy(self):
        st = PureState.product(qubits(4))
        assert st.max_entropy([(0, "s"), (1, "s")]) == 0.0

    def test_ghz6_half_cut(self):
        st = ghz(6)
        assert st.max_entropy([(i, "s") for i in range(3)]) == 1.0

    def test_three_bell_pairs(self):
        st = PureState.product(qubits(6))
        for i in range(3):
            st.apply_named("H", [(i, "s")])
            st.apply_named("CNOT", [(i, "s"), (i + 3, "s")])
        assert st.max_entropy([(i, "s") for i in range(3)]) == 3.0

    def test_entropy_symmetric(self):
        rng = np.random.default_rng(1)
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        psi /= np.linalg.norm(psi)
        st = PureState(qubits(5), psi)
        a = [(0, "s"), (2, "s")]
        ac = [(1, "s"), (3, "s"), (4, "s")]
        assert st.max_entropy(a) == st.max_entropy(ac)

    def test_bell_reduced_maximally_mixed(self):
        st = PureState.product(qubits(2))
        st.apply_named("H", [(0, "s")])
        st.apply_named("CNOT", [(0, "s"), (1, "s")])
        rho = st.reduced_density([(0, "s")])
        assert np.allclose(rho, np.eye(2) / 2)

    def test_product_purity_one(self):
        st = PureState.product(qubits(3), {(1, "s"): np.array([1, 1j]) / np.sqrt(2)})
        assert abs(st.purity([(1, "s")]) - 1) < 1e-12
        assert st.is_product_across([(1, "s")])

    def test_ghz3_partial_trace(self):
        st = ghz(3)
        rho = st.reduced_density([(0, "s"), (1, "s")])
        assert np.allclose(rho, np.diag([0.5, 0, 0, 0.5]))

    def test_trace_everything_rejected(self):
        st = PureState.product(qubits(2))
        with pytest.raises(ValueError):
            st.reduced_density([])


class TestFidelity:
    def test_identical(self):
        st = ghz(3)
        assert abs(st.fidelity(st) - 1) < 1e-12

    def test_global_phase(self):
        st = PureState.product(qubits(1))
        st2 = PureState(qubits(1), np.exp(0.7j) * np.eye(2)[0])
        assert global_phase_equal(st, st2)

    def test_orthogonal_component(self):
        a = PureState.product(qubits(1))
        b = PureState.product(qubits(1), {(0, "s"): np.array([1, 1]) / np.sqrt(2)})
        assert abs(a.fidelity(b) - 0.5) < 1e-12

    def test_register_mismatch(self):
        a = PureState.product(qubits(2))
        b = PureState.product(QuditRegister([(0, "s", 2), (5, "s", 2)]))
        with pytest.raises(ValueError):
            a.fidelity(b)


class TestDynamicRegister:
    def test_add_then_remove(self):
        st = PureState.product(qubits(2))
        st.add_entry(0, "a", 3, [0, 1, 0])
        assert st.register.size == 3
        st.remove_entry((0, "a"))
        assert st.register.size == 2 and abs(st.amps[0]) > 1 - 1e-12

    def test_remove_entangled_rejected(self):
        st = PureState.product(qubits(2))
        st.apply_named("H", [(0, "s")])
        st.apply_named("CNOT", [(0, "s"), (1, "s")])
        with pytest.raises(ValueError):
            st.remove_entry((1, "s"))

    def test_capacity_cap(self, monkeypatch):
        monkeypatch.setenv("QCCC_MAX_AMPLITUDES", "64")
        with pytest.raises(CapacityError):
            QuditRegister([(i, "s", 2) for i in range(7)])

    def test_permuted(self):
        rng = np.random.default_rng(4)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        st = PureState(qubits(3), psi)
        perm = st.permuted([(2, "s"), (0, "s"), (1, "s")])
        oracle = psi.reshape(2, 2, 2).transpose(2, 0, 1).reshape(-1)
        assert np.allclose(perm.amps, oracle)


class TestDump:
    def test_round_trip(self):
        rng = np.random.default_rng(9)
        reg = QuditRegister([(0, "s", 2), (0, "a", 3)])
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        psi /= np.linalg.norm(psi)
        st = PureState(reg, psi)
        st2 = PureState.load(st.dumps())
        assert st2.register == reg
        assert np.allclose(st2.amps, st.amps)
