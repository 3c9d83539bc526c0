"""Core engine tests: gates, measurement, channels, and algebraic invariants."""

import math

import numpy as np
import pytest

from losskit.qsim import (
    CNOT_MATRIX,
    CZ_MATRIX,
    HADAMARD,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    NoiseSpec,
    PauliString,
    Seed,
    StateVector,
    apply_channel,
    apply_gate,
    basis_vectors,
    expectation,
    fidelity_pure,
    measure,
    partial_trace,
    rz_matrix,
)

SQ2 = math.sqrt(2.0)


def ket(*amps):
    return StateVector.from_amplitudes(list(amps), normalize=True)


def bell_phi_plus():
    return ket(1, 0, 0, 1)


def random_state(rng, n):
    amps = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return StateVector.from_amplitudes(amps, normalize=True)


class TestGates:
    def test_hadamard_on_zero(self):
        out = apply_gate(StateVector.basis_state(1, 0), "H", [0])
        np.testing.assert_allclose(out.amplitudes, [1 / SQ2, 1 / SQ2], atol=1e-12)

    def test_cnot_builds_bell_pair(self):
        plus0 = apply_gate(StateVector.basis_state(2, 0), "H", [0])
        out = apply_gate(plus0, "CNOT", [0, 1])
        np.testing.assert_allclose(out.amplitudes, bell_phi_plus().amplitudes, atol=1e-12)

    def test_rz_on_plus_matches_matrix_exponential(self):
        # oracle: exp(-i alpha Z / 2) evaluated elementwise
        alpha = -math.pi / 2
        oracle = np.diag([np.exp(-0.5j * alpha), np.exp(0.5j * alpha)])
        expected = oracle @ np.array([1, 1]) / SQ2
        out = apply_gate(ket(1, 1), "RZ", [0], alpha=alpha)
        np.testing.assert_allclose(out.amplitudes, expected, atol=1e-12)
        # proportional to |0> - i|1>
        ratio = out.amplitudes[1] / out.amplitudes[0]
        assert abs(ratio - (-1j)) < 1e-12

    def test_gate_application_on_density_matrix(self):
        rho = apply_gate(StateVector.basis_state(1, 0).density(), "H", [0])
        np.testing.assert_allclose(rho.matrix, np.full((2, 2), 0.5), atol=1e-12)

    @pytest.mark.parametrize("gate,targets,alpha", [
        ("H", [0], None), ("X", [1], None), ("Y", [2], None), ("Z", [0], None),
        ("RZ", [1], 0.7), ("CNOT", [0, 2], None), ("CZ", [2, 1], None),
    ])
    def test_unitarity_roundtrip(self, gate, targets, alpha):
        rng = np.random.default_rng(3)
        psi = random_state(rng, 3)
        out = apply_gate(psi, gate, targets, alpha=alpha)
        # apply the inverse
        if gate == "RZ":
            out = apply_gate(out, "RZ", targets, alpha=-alpha)
        else:
            out = apply_gate(out, gate, targets, alpha=alpha)
        np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-10)

    def test_gate_errors(self):
        psi = StateVector.basis_state(2, 0)
        with pytest.raises(ValueError):
            apply_gate(psi, "H", [2])
        with pytest.raises(ValueError):
            apply_gate(psi, "CNOT", [1, 1])
        with pytest.raises(ValueError):
            apply_gate(psi, "CNOT", [0])
        with pytest.raises(ValueError):
            apply_gate(psi, "FOO", [0])

    def test_purity_consistency_statevector_vs_density(self):
        rng = np.random.default_rng(8)
        psi = random_state(rng, 3)
        seq = [("H", [1], None), ("CNOT", [1, 2], None), ("RZ", [0], 1.1), ("CZ", [0, 2], None)]
        sv, dm = psi, psi.density()
        for gate, tg, alpha in seq:
            sv = apply_gate(sv, gate, tg, alpha=alpha)
            dm = apply_gate(dm, gate, tg, alpha=alpha)
        np.testing.assert_allclose(dm.matrix, sv.density().matrix, atol=1e-10)

    def test_hzh_equals_x(self):
        np.testing.assert_allclose(HADAMARD @ PAULI_Z @ HADAMARD, PAULI_X, atol=1e-12)


class TestPartialTrace:
    def test_bell_marginal_is_maximally_mixed(self):
        rho = partial_trace(bell_phi_plus().density(), [0])
        np.testing.assert_allclose(rho.matrix, np.eye(2) / 2, atol=1e-12)

    def test_product_state_marginal(self):
        rho = partial_trace(StateVector.basis_state(2, "01").density(), [1])
        np.testing.assert_allclose(rho.matrix, np.diag([1.0, 0.0]), atol=1e-12)

    def test_ghz_two_qubit_marginal(self):
        ghz = ket(1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1)
        rho = partial_trace(ghz.density(), [0, 1])
        expected = np.zeros((4, 4))
        expected[0, 0] = expected[3, 3] = 0.5
        np.testing.assert_allclose(rho.matrix, expected, atol=1e-12)

    def test_trace_preserved_and_errors(self):
        rng = np.random.default_rng(11)
        rho = random_state(rng, 3).density()
        out = partial_trace(rho, [1])
        assert abs(np.trace(out.matrix) - 1) < 1e-10
        with pytest.raises(ValueError):
            partial_trace(rho, [0, 1, 2])
        with pytest.raises(ValueError):
            partial_trace(rho, [])
        with pytest.raises(ValueError):
            partial_trace(rho, [5])


class TestMeasure:
    def test_bell_z_measurement(self):
        out, state, p = measure(bell_phi_plus().density(), 0, "z", forced=0)
        assert out == 0
        assert abs(p - 0.5) < 1e-12
        np.testing.assert_allclose(state.matrix, np.diag([1.0, 0.0]), atol=1e-12)

    def test_x_measurement_of_product_factor(self):
        psi = ket(1, 1).tensor(ket(0.3, 0.954))
        out, state, p = measure(psi.density(), 0, "x", forced=0)
        assert abs(p - 1.0) < 1e-10
        np.testing.assert_allclose(state.matrix, ket(0.3, 0.954).density().matrix, atol=1e-10)

    def test_equatorial_basis_on_circular_state(self):
        # |<-alpha|R>|^2 with alpha = -pi/2: |-alpha> = (|0>+i|1>)/sqrt2 = |R>
        r_state = ket(1, 1j)
        out, _, p = measure(r_state.density(), 0, "b", alpha=-math.pi / 2, forced=1)
        assert abs(p - 1.0) < 1e-12

    def test_forced_zero_probability_raises(self):
        with pytest.raises(ValueError, match="zero probability"):
            measure(StateVector.basis_state(1, 0).density(), 0, "z", forced=1)

    def test_outcome_probabilities_sum_to_one(self):
        rng = np.random.default_rng(4)
        rho = random_state(rng, 3).density()
        for basis, alpha in (("z", None), ("x", None), ("b", 0.9)):
            _, _, p0 = measure(rho, 1, basis, alpha=alpha, forced=0)
            _, _, p1 = measure(rho, 1, basis, alpha=alpha, forced=1)
            assert abs(p0 + p1 - 1.0) < 1e-10

    def test_branch_average_reproduces_partial_trace(self):
        rng = np.random.default_rng(5)
        rho = random_state(rng, 3).density()
        _, s0, p0 = measure(rho, 2, "z", forced=0)
        _, s1, p1 = measure(rho, 2, "z", forced=1)
        averaged = p0 * s0.matrix + p1 * s1.matrix
        np.testing.assert_allclose(averaged, partial_trace(rho, [2]).matrix, atol=1e-10)

    def test_basis_vector_conventions(self):
        b0, b1 = basis_vectors("b", alpha=0.0)
        x0, x1 = basis_vectors("x")
        np.testing.assert_allclose(b0, x0)
        np.testing.assert_allclose(b1, x1)


class TestExpectationAndFidelity:
    def test_ghz_stabilizer_expectations(self):
        ghz = ket(1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1)
        assert abs(expectation(ghz, PauliString("ZZZZ")) - 1) < 1e-10
        assert abs(expectation(ghz, PauliString("XXXX")) - 1) < 1e-10

    def test_bell_single_qubit_marginal_expectation(self):
        assert abs(expectation(bell_phi_plus(), PauliString("ZI"))) < 1e-12

    def test_expectation_length_mismatch(self):
        with pytest.raises(ValueError):
            expectation(bell_phi_plus(), PauliString("Z"))

    def test_fidelity_identity_and_mixed(self):
        zero = StateVector.basis_state(1, 0)
        assert abs(fidelity_pure(zero, zero.density()) - 1.0) < 1e-12
        rng = np.random.default_rng(6)
        psi = random_state(rng, 4)
        assert abs(fidelity_pure(psi, DensityMatrix.maximally_mixed(4)) - 1 / 16) < 1e-12

    def test_fidelity_of_half_admixture(self):
        rng = np.random.default_rng(7)
        psi = random_state(rng, 4)
        mat = 0.5 * psi.density().matrix + 0.5 * np.eye(16) / 16
        assert abs(fidelity_pure(psi, DensityMatrix(4, mat)) - 0.53125) < 1e-12

    def test_fidelity_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fidelity_pure(StateVector.basis_state(1, 0), DensityMatrix.maximally_mixed(2))


class TestPauliString:
    def test_product_closure_and_square(self):
        xy = PauliString("XY")
        yx = PauliString("YX")
        prod = xy * yx
        assert prod.letters == "ZZ"
        assert abs(prod.phase - (1j * -1j)) < 1e-12
        sq = xy * xy
        assert sq.letters == "II"
        assert abs(sq.phase - 1) < 1e-12

    def test_associativity_sample(self):
        a, b, c = PauliString("XZ"), PauliString("YY"), PauliString("ZX")
        left = (a * b) * c
        right = a * (b * c)
        assert left.letters == right.letters
        assert abs(left.phase - right.phase) < 1e-12

    def test_matrix_matches_kron(self):
        np.testing.assert_allclose(PauliString("XZ").matrix(),
                                   np.kron(PAULI_X, PAULI_Z), atol=1e-12)
        np.testing.assert_allclose(PauliString("Y", phase=-1j).matrix(),
                                   -1j * PAULI_Y, atol=1e-12)


class TestChannels:
    def test_noiseless_limit(self):
        rng = np.random.default_rng(9)
        rho = random_state(rng, 3).density()
        out = apply_channel(rho, NoiseSpec(), interfering_pairs=[(0, 1)])
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-12)

    def test_full_depolarization(self):
        rng = np.random.default_rng(10)
        rho = random_state(rng, 4).density()
        out = apply_channel(rho, NoiseSpec(white_noise_v=0.0))
        np.testing.assert_allclose(out.matrix, np.eye(16) / 16, atol=1e-12)

    def test_visibility_on_bell_pair(self):
        spec = NoiseSpec(epr_visibility=0.92)
        out = apply_channel(bell_phi_plus().density(), spec, interfering_pairs=[(0, 1)])
        assert abs(expectation(out, PauliString("XX")) - 0.92) < 1e-12
        expected = (0.92 * bell_phi_plus().density().matrix
                    + 0.08 * np.diag([0.5, 0, 0, 0.5]))
        np.testing.assert_allclose(out.matrix, expected, atol=1e-12)

    def test_pair_dephasing_map(self):
        rng = np.random.default_rng(12)
        psi = random_state(rng, 2)
        d = 0.3
        out = apply_channel(psi.density(), NoiseSpec(pair_dephasing_d=d),
                            interfering_pairs=[(0, 1)])
        zz = np.kron(PAULI_Z, PAULI_Z)
        expected = (1 - d) * psi.density().matrix + d * zz @ psi.density().matrix @ zz
        np.testing.assert_allclose(out.matrix, expected, atol=1e-12)

    def test_channel_output_is_valid_state(self):
        rng = np.random.default_rng(13)
        rho = random_state(rng, 3).density()
        spec = NoiseSpec(white_noise_v=0.6, pair_dephasing_d=0.2, epr_visibility=0.9)
        out = apply_channel(rho, spec, interfering_pairs=[(0, 1), (1, 2)])
        assert abs(np.trace(out.matrix) - 1) < 1e-10
        assert out.min_eigenvalue() > -1e-9

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            NoiseSpec(white_noise_v=1.2)
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(ValueError):
            apply_channel(rho, NoiseSpec(), interfering_pairs=[(0, 3)])


class TestSeed:
    def test_streams_are_reproducible_and_order_independent(self):
        seed = Seed(123456789)
        a1 = seed.stream(0, 5).random(4)
        b1 = seed.stream(1, 7).random(4)
        b2 = Seed(123456789).stream(1, 7).random(4)
        a2 = Seed(123456789).stream(0, 5).random(4)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(b1, b2)
        assert not np.array_equal(a1, b1)

    def test_seed_range_validation(self):
        with pytest.raises(ValueError):
            Seed(-1)
        with pytest.raises(ValueError):
            Seed(2 ** 64)
