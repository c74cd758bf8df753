"""Statevector gates, the entangler layer, and parameter-shift gradients."""

import numpy as np
import pytest

from qauction import quantum as qc

from oracles import central_diff, circuit_state, oracle_layer_outputs


def basis_state(q, index=0):
    state = np.zeros(2 ** q, dtype=complex)
    state[index] = 1.0
    return state


def random_state(q, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2 ** q) + 1j * rng.normal(size=2 ** q)
    return amps / np.linalg.norm(amps)


class TestGates:
    def test_rx_zero_is_identity(self):
        out = qc.apply_rx(basis_state(1), 0, 0.0)
        assert np.allclose(out, basis_state(1))

    def test_rx_pi_flips_with_phase(self):
        out = qc.apply_rx(basis_state(1), 0, np.pi)
        assert np.allclose(out, [0.0, -1j], atol=1e-15)
        assert np.isclose(qc.z_expectations(out)[0], -1.0)

    def test_rx_half_pi_zeroes_expectation(self):
        out = qc.apply_rx(basis_state(1), 0, np.pi / 2.0)
        assert abs(qc.z_expectations(out)[0]) < 1e-12

    def test_rx_qubit_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            qc.apply_rx(basis_state(2), 2, 0.3)

    def test_cnot_on_ground_state(self):
        assert np.allclose(qc.apply_cnot(basis_state(2), 0, 1), basis_state(2))

    def test_cnot_control_first(self):
        # |10> (qubit 0 set) -> |11>
        out = qc.apply_cnot(basis_state(2, 0b10), 0, 1)
        assert np.allclose(out, basis_state(2, 0b11))

    def test_cnot_is_involution(self):
        state = random_state(3, seed=12)
        twice = qc.apply_cnot(qc.apply_cnot(state, 1, 2), 1, 2)
        assert np.abs(twice - state).max() < 1e-14

    def test_cnot_equal_indices_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            qc.apply_cnot(basis_state(2), 1, 1)


class TestAngleEmbed:
    def test_zeros_give_ground_state(self):
        state = qc.angle_embed(np.zeros(3))
        assert np.allclose(state, basis_state(3))
        assert np.allclose(qc.z_expectations(state), 1.0)

    def test_pi_on_first_qubit(self):
        z = qc.z_expectations(qc.angle_embed(np.array([np.pi, 0.0, 0.0])))
        assert np.allclose(z, [-1.0, 1.0, 1.0])

    def test_product_state_cosines(self):
        rng = np.random.default_rng(13)
        angles = rng.uniform(-np.pi, np.pi, 4)
        z = qc.z_expectations(qc.angle_embed(angles))
        assert np.abs(z - np.cos(angles)).max() < 1e-12

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError, match="flat"):
            qc.angle_embed(np.zeros((2, 2)))


class TestEntangler:
    def test_zero_weights_fix_ground_state(self):
        state = qc.entangler_layers(basis_state(4), np.zeros((3, 4)))
        assert np.allclose(state, basis_state(4))

    def test_single_qubit_skips_ring(self):
        state = qc.entangler_layers(basis_state(1), np.array([[np.pi]]))
        assert np.isclose(qc.z_expectations(state)[0], -1.0)

    def test_weight_shape_rejected(self):
        with pytest.raises(ValueError, match="weights"):
            qc.entangler_layers(basis_state(2), np.zeros((2, 3)))

    @pytest.mark.parametrize("q,layers,seed", [(2, 1, 0), (3, 2, 1), (4, 6, 2)])
    def test_matches_dense_unitary_oracle(self, q, layers, seed):
        rng = np.random.default_rng(seed)
        embed = rng.uniform(-np.pi, np.pi, q)
        weights = rng.uniform(0, 2 * np.pi, (layers, q))
        ours = qc.entangler_layers(qc.angle_embed(embed), weights)
        reference = circuit_state(embed, weights)
        assert np.abs(ours - reference).max() < 1e-10


class TestExpectations:
    def test_ground_state(self):
        assert np.allclose(qc.z_expectations(basis_state(3)), 1.0)

    def test_uniform_superposition(self):
        q = 3
        state = np.full(2 ** q, 1.0 / np.sqrt(2 ** q), dtype=complex)
        assert np.abs(qc.z_expectations(state)).max() < 1e-12

    def test_all_ones_state(self):
        assert np.allclose(qc.z_expectations(basis_state(2, 0b11)), [-1.0, -1.0])


class TestLayerForward:
    def test_zero_everything(self):
        out = qc.qlayer_forward(np.zeros(4), np.zeros((6, 4)))
        assert np.allclose(out, 1.0)

    def test_outputs_bounded(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            acts = rng.uniform(-3, 3, 4)
            weights = rng.uniform(0, 2 * np.pi, (6, 4))
            out = qc.qlayer_forward(acts, weights)
            assert np.all(out >= -1.0) and np.all(out <= 1.0)

    def test_matches_oracle(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            acts = rng.uniform(-2, 2, 4)
            weights = rng.uniform(0, 2 * np.pi, (6, 4))
            assert np.abs(qc.qlayer_forward(acts, weights)
                          - oracle_layer_outputs(acts, weights)).max() < 1e-10

    def test_deterministic(self):
        rng = np.random.default_rng(16)
        acts = rng.uniform(-2, 2, 4)
        weights = rng.uniform(0, 2 * np.pi, (6, 4))
        first = qc.qlayer_forward(acts, weights)
        second = qc.qlayer_forward(acts.copy(), weights.copy())
        assert np.array_equal(first, second)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="match"):
            qc.qlayer_forward(np.zeros(3), np.zeros((2, 4)))


class TestParameterShift:
    def test_single_qubit_analytic(self):
        # No entangling possible at q=1, L=1 with zero weight:
        # <Z> = cos(pi*tanh(a)), d/da = -sin(pi*tanh a) * pi * (1 - tanh^2 a)
        a = 0.37
        jac_act, _ = qc.qlayer_grad(np.array([a]), np.zeros((1, 1)))
        expected = -np.sin(np.pi * np.tanh(a)) * np.pi * (1 - np.tanh(a) ** 2)
        assert abs(jac_act[0, 0] - expected) < 1e-10

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(17)
        for trial in range(3):
            acts = rng.uniform(-2, 2, 4)
            weights = rng.uniform(0, 2 * np.pi, (6, 4))
            jac_act, jac_w = qc.qlayer_grad(acts, weights)
            for j in range(4):
                fd_act = central_diff(
                    lambda a, j=j: qc.qlayer_forward(a, weights)[j], acts, h=1e-5)
                assert np.abs(fd_act - jac_act[j]).max() < 1e-7
                fd_w = central_diff(
                    lambda w, j=j: qc.qlayer_forward(acts, w.reshape(6, 4))[j],
                    weights.reshape(-1), h=1e-5)
                assert np.abs(fd_w - jac_w[j]).max() < 1e-7

    def test_zero_point_weight_gradient_vanishes(self):
        # At zero activations/weights, shifting qubit i's final-layer angle
        # by +-pi/2 gives <Z_i> = 0 on both sides.
        q, layers = 4, 6
        _, jac_w = qc.qlayer_grad(np.zeros(q), np.zeros((layers, q)))
        for i in range(q):
            assert abs(jac_w[i, (layers - 1) * q + i]) < 1e-12

    def test_shift_vjp_contracts_jacobians(self):
        rng = np.random.default_rng(18)
        acts = rng.uniform(-1, 1, (3, 4))
        weights = rng.uniform(0, 2 * np.pi, (6, 4))
        g = rng.uniform(-1, 1, (3, 4))
        angles = qc.input_angles(acts)
        grad_act, grad_w = qc.shift_vjp(g, acts, angles, weights, True, True)
        ref_act = np.empty_like(acts)
        ref_w = np.zeros_like(weights)
        for s in range(3):
            jac_act, jac_w = qc.qlayer_grad(acts[s], weights)
            ref_act[s] = g[s] @ jac_act
            ref_w += (g[s] @ jac_w).reshape(6, 4)
        assert np.abs(grad_act - ref_act).max() < 1e-12
        assert np.abs(grad_w - ref_w).max() < 1e-12

    def test_vjp_skips_unneeded_outputs(self):
        rng = np.random.default_rng(19)
        acts = rng.uniform(-1, 1, (2, 4))
        weights = rng.uniform(0, 2 * np.pi, (6, 4))
        g = rng.uniform(-1, 1, (2, 4))
        grad_act, grad_w = qc.shift_vjp(g, acts, qc.input_angles(acts), weights,
                                        True, False)
        assert grad_act is not None and grad_w is None


class TestNormPreservation:
    def test_long_gate_sequence(self):
        rng = np.random.default_rng(20)
        q = 4
        state = qc.angle_embed(rng.uniform(-np.pi, np.pi, q))
        for _ in range(10_000):
            if rng.random() < 0.7:
                state = qc.apply_rx(state, int(rng.integers(q)), rng.uniform(0, 2 * np.pi))
            else:
                a, b = rng.choice(q, size=2, replace=False)
                state = qc.apply_cnot(state, int(a), int(b))
        assert abs(np.sum(np.abs(state) ** 2) - 1.0) < 1e-12

    def test_full_circuits_keep_norm(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            angles = rng.uniform(-np.pi, np.pi, (5, 4))
            weights = rng.uniform(0, 2 * np.pi, (6, 4))
            states = qc._entangle_batch(qc._embed_batch(angles), weights)
            norms = np.sum(np.abs(states) ** 2, axis=1)
            assert np.abs(norms - 1.0).max() < 1e-12
