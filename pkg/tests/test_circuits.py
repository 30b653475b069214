import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqclab.circuits import (
    CircuitLayout,
    EncodingSpec,
    Gate,
    apply_circuit,
    build_hea,
    circuit_unitary,
    encode_input,
    expectation,
    z_observable,
)
from vqclab.numeric import InvariantViolation, Observable, StateVector

from helpers import dense_layout_unitary, embed, random_hermitian, random_state, rotation

Z = np.diag([1.0, -1.0])


def random_layout(rng, n, gates=20):
    """Mixed rotations, CZs and fixed two-qubit unitaries; one slot per rotation."""
    out, slot = [], 0
    for _ in range(gates):
        kind = rng.integers(3)
        if kind == 0:
            out.append(Gate.rot("XYZ"[rng.integers(3)], int(rng.integers(n)), slot))
            slot += 1
        elif kind == 1:
            a, b = rng.choice(n, 2, replace=False)
            out.append(Gate.cz(int(a), int(b)))
        else:
            a, b = rng.choice(n, 2, replace=False)
            q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
            out.append(Gate.fixed(q, (int(a), int(b))))
    return CircuitLayout(n, tuple(out), slot)


class TestBuildHea:
    def test_two_qubit_counts(self):
        layout = build_hea(2, 1)
        kinds = [g.kind for g in layout.gates]
        assert layout.param_count == 4 and kinds.count("rot") == 4 and kinds.count("cz") == 2

    def test_fig4_size(self):
        assert build_hea(12, 6).param_count == 144

    def test_every_slot_once(self):
        slots = sorted(g.slot for g in build_hea(3, 2).gates if g.kind == "rot")
        assert slots == list(range(12))

    def test_layer_structure(self):
        layout = build_hea(3, 1)
        assert [(g.kind, g.axis, g.targets) for g in layout.gates] == [
            ("rot", "Y", (0,)), ("rot", "Y", (1,)), ("rot", "Y", (2,)),
            ("rot", "Z", (0,)), ("rot", "Z", (1,)), ("rot", "Z", (2,)),
            ("cz", None, (0, 1)), ("cz", None, (1, 2)), ("cz", None, (2, 0))]

    def test_chain_drops_wraparound(self):
        cz = [g.targets for g in build_hea(4, 1, "chain").gates if g.kind == "cz"]
        assert cz == [(0, 1), (1, 2), (2, 3)]

    @given(st.integers(2, 8), st.integers(1, 5))
    def test_slot_completeness(self, n, depth):
        layout = build_hea(n, depth)
        assert layout.param_count == 2 * n * depth
        assert all(len(layout.slot_gates(k)) == 1 for k in range(layout.param_count))


class TestLayoutValidation:
    def test_unused_slot(self):
        with pytest.raises(ValueError):
            CircuitLayout(2, (Gate.rot("X", 0, 0),), 2)

    def test_qubit_out_of_range(self):
        with pytest.raises(ValueError):
            CircuitLayout(2, (Gate.cz(0, 2),), 0)

    def test_non_unitary_fixed_gate(self):
        with pytest.raises(ValueError):
            Gate.fixed(np.ones((2, 2)), (0,))

    def test_json_round_trip(self, rng):
        layout = random_layout(rng, 3, 15)
        again = CircuitLayout.from_json(layout.to_json())
        assert again.to_json() == layout.to_json()
        params = rng.uniform(-np.pi, np.pi, layout.param_count)
        np.testing.assert_allclose(circuit_unitary(again, params), circuit_unitary(layout, params), atol=1e-12)


class TestEncoding:
    def test_zero_input(self):
        np.testing.assert_allclose(encode_input(EncodingSpec.angle(3), np.zeros(3)), np.eye(8)[0])

    def test_pi_flips_qubit_zero(self):
        psi = encode_input(EncodingSpec.angle(3), [np.pi, 0, 0])
        assert abs(abs(psi[4]) - 1) < 1e-12  # |100> with qubit 0 most significant

    def test_two_qubit_expansion(self):
        psi = encode_input(EncodingSpec.angle(2), [np.pi / 2, 0])
        np.testing.assert_allclose(psi, [np.cos(np.pi / 4), 0, np.sin(np.pi / 4), 0], atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            encode_input(EncodingSpec.angle(3), [0.0, 0.0])

    def test_batched(self, rng):
        xs = rng.uniform(-1, 1, (5, 2))
        batch = encode_input(EncodingSpec.angle(2), xs)
        for x, psi in zip(xs, batch):
            np.testing.assert_allclose(psi, encode_input(EncodingSpec.angle(2), x), atol=1e-14)


class TestApplyCircuit:
    def test_empty(self, rng):
        psi = random_state(rng, 3)
        np.testing.assert_allclose(apply_circuit(CircuitLayout.empty(3), None, psi), psi)

    def test_zero_rotation(self, rng):
        psi = random_state(rng, 2)
        layout = CircuitLayout(2, (Gate.rot("Y", 1, 0),), 1)
        np.testing.assert_allclose(apply_circuit(layout, [0.0], psi), psi, atol=1e-15)

    def test_matches_dense_product_oracle(self, rng):
        layout = random_layout(rng, 4, 30)
        params = rng.uniform(-np.pi, np.pi, layout.param_count)
        psi = random_state(rng, 4)
        out = apply_circuit(layout, params, psi)
        assert np.max(np.abs(out - dense_layout_unitary(layout, params) @ psi)) <= 1e-10

    def test_hea_matches_dense_oracle(self, rng):
        layout = build_hea(3, 2)
        params = rng.uniform(-np.pi, np.pi, layout.param_count)
        np.testing.assert_allclose(circuit_unitary(layout, params), dense_layout_unitary(layout, params), atol=1e-10)

    def test_batched_params(self, rng):
        layout = build_hea(3, 1)
        params = rng.uniform(-np.pi, np.pi, (4, layout.param_count))
        psi = random_state(rng, 3)
        batch = apply_circuit(layout, params, psi)
        for p, out in zip(params, batch):
            np.testing.assert_allclose(out, apply_circuit(layout, p, psi), atol=1e-13)

    def test_wrong_param_count(self):
        with pytest.raises(ValueError):
            apply_circuit(build_hea(2, 1), np.zeros(3), StateVector.zero(2))

    def test_norm_check_passes(self, rng):
        layout = build_hea(4, 3)
        apply_circuit(layout, rng.uniform(-3, 3, layout.param_count), StateVector.zero(4), check_norm=True)

    def test_norm_check_detects_drift(self):
        with pytest.raises(InvariantViolation):
            apply_circuit(CircuitLayout.empty(1), None, np.array([1.0, 1.0]), check_norm=True)

    @given(st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_norm_preserved(self, n, seed):
        rng = np.random.default_rng(seed)
        layout = random_layout(rng, n, 12)
        out = apply_circuit(layout, rng.uniform(-np.pi, np.pi, layout.param_count), random_state(rng, n))
        assert abs(np.linalg.norm(out) - 1) <= 1e-9

    @given(st.integers(0, 2**32 - 1))
    def test_composition(self, seed):
        rng = np.random.default_rng(seed)
        l1, l2 = random_layout(rng, 3, 8), random_layout(rng, 3, 8)
        p1 = rng.uniform(-np.pi, np.pi, l1.param_count)
        p2 = rng.uniform(-np.pi, np.pi, l2.param_count)
        psi = random_state(rng, 3)
        both = apply_circuit(l1.then(l2), np.concatenate([p1, p2]), psi)
        np.testing.assert_allclose(both, apply_circuit(l2, p2, apply_circuit(l1, p1, psi)), atol=1e-10)

    def test_unitarity_over_draws(self, rng):
        layout = build_hea(6, 2)
        for _ in range(50):
            u = circuit_unitary(layout, rng.uniform(-np.pi, np.pi, layout.param_count))
            assert np.max(np.abs(u.conj().T @ u - np.eye(64))) <= 1e-9


class TestExpectation:
    def test_identity_observable(self, rng):
        layout = build_hea(3, 2)
        f = expectation(layout, rng.uniform(-3, 3, 12), EncodingSpec.angle(3), rng.uniform(-1, 1, 3), Observable.identity(3))
        assert abs(f - 1) <= 1e-12

    def test_empty_circuit_z(self):
        f = expectation(CircuitLayout.empty(2), None, EncodingSpec.angle(2), np.zeros(2), z_observable(2))
        assert f == pytest.approx(1.0)

    def test_two_qubit_conjugation_oracle(self, rng):
        layout = build_hea(2, 2)
        theta = rng.uniform(-np.pi, np.pi, layout.param_count)
        x = rng.uniform(-np.pi, np.pi, 2)
        w = dense_layout_unitary(layout, theta)
        u = np.kron(rotation("Y", x[0]), rotation("Y", x[1]))
        o = embed(Z, 0, 2)
        zero = np.eye(4)[:, 0]
        expected = (zero @ u.conj().T @ w.conj().T @ o @ w @ u @ zero).real
        assert abs(expectation(layout, theta, EncodingSpec.angle(2), x, z_observable(2)) - expected) <= 1e-10

    @given(st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_bounded(self, n, seed):
        rng = np.random.default_rng(seed)
        layout = build_hea(n, 2)
        obs = Observable.from_matrix(random_hermitian(rng, 2**n), n)
        f = expectation(layout, rng.uniform(-3, 3, layout.param_count), EncodingSpec.angle(n), rng.uniform(-3, 3, n), obs)
        assert abs(f) <= 1 + 1e-9

    def test_qubit_mismatch(self):
        with pytest.raises(ValueError):
            expectation(build_hea(2, 1), np.zeros(4), EncodingSpec.angle(2), np.zeros(2), z_observable(3))
