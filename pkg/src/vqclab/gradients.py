"""Circuit gradients: two-point parameter shift, central differences, and
the explicit generator operator whose expectation is the derivative."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import CircuitLayout, EncodingSpec, apply_circuit, circuit_unitary, encode_input, expectation
from .ensembles import CircuitEnsemble, as_rng
from .numeric import PAULI, UNITARY_QUBIT_CAP, DenseCapError, Observable, StateVector, kron_all
from .stats import Estimate, mean_estimate, variance_estimate


def _rotation_gate_index(layout: CircuitLayout, k: int) -> int:
    idx = layout.slot_gates(k)
    if len(idx) != 1:
        raise ValueError(f"slot {k} drives {len(idx)} gates; the two-point shift rule needs exactly one")
    return idx[0]


def _shifted(params, k: int, delta: float) -> np.ndarray:
    out = np.array(params, dtype=float, copy=True)
    out[..., k] += delta
    return out


def parameter_shift_gradient(layout, params, encoding, x, obs, k: int):
    """Exact derivative of f w.r.t. slot ``k``: [f(t_k + pi/2) - f(t_k - pi/2)] / 2.

    Batched like :func:`~vqclab.circuits.expectation`.
    """
    _rotation_gate_index(layout, k)
    plus = expectation(layout, _shifted(params, k, np.pi / 2), encoding, x, obs)
    minus = expectation(layout, _shifted(params, k, -np.pi / 2), encoding, x, obs)
    return 0.5 * (np.asarray(plus) - np.asarray(minus)) if np.ndim(plus) else 0.5 * (plus - minus)


def finite_difference_gradient(layout, params, encoding, x, obs, k: int, h: float = 1e-4):
    if not 1e-6 <= h <= 1e-2:
        raise ValueError("h must lie in [1e-6, 1e-2]")
    plus = expectation(layout, _shifted(params, k, h), encoding, x, obs)
    minus = expectation(layout, _shifted(params, k, -h), encoding, x, obs)
    return (np.asarray(plus) - np.asarray(minus)) / (2 * h) if np.ndim(plus) else (plus - minus) / (2 * h)


@dataclass(frozen=True)
class GeneratorFrame:
    """Hermitian generator framed right after slot k's rotation, with the
    circuit state ``state`` at that point."""

    matrix: np.ndarray
    state: np.ndarray

    def gradient(self) -> float:
        return float(np.real(np.vdot(self.state, self.matrix @ self.state)))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


def generator_observable(layout: CircuitLayout, params, obs: Observable, k: int,
                         encoding: EncodingSpec | None = None, x=None) -> GeneratorFrame:
    """G = (i/2) [P_k, B^dag O B], B the sub-circuit after slot k's gate.

    ``<chi|G|chi>`` reproduces the derivative, chi being the state just
    after the gate.  Without an encoding the circuit starts from |0...0>.
    """
    n = layout.n_qubits
    if n > UNITARY_QUBIT_CAP:
        raise DenseCapError(f"generator construction limited to {UNITARY_QUBIT_CAP} qubits")
    gi = _rotation_gate_index(layout, k)
    params = np.asarray(params, dtype=float)
    gate = layout.gates[gi]
    head, head_slots = layout.segment(0, gi + 1)
    tail, tail_slots = layout.segment(gi + 1, len(layout.gates))

    start = encode_input(encoding, x) if encoding is not None else StateVector.zero(n).amplitudes
    chi = apply_circuit(head, params[head_slots], start)
    b = circuit_unitary(tail, params[tail_slots])
    heis = b.conj().T @ obs.matrix @ b
    p_k = kron_all([PAULI[gate.axis] if q == gate.targets[0] else np.eye(2) for q in range(n)])
    g = 0.5j * (p_k @ heis - heis @ p_k)
    return GeneratorFrame((g + g.conj().T) / 2, chi)


@dataclass(frozen=True)
class GradientStats:
    mean: Estimate
    variance: Estimate
    samples: np.ndarray


MIN_TRIALS = 30


def gradient_statistics(ensemble: CircuitEnsemble, x, obs: Observable, k: int, trials: int,
                        seed, encoding: EncodingSpec | None = None) -> GradientStats:
    """Mean and variance of the slot-``k`` derivative over fresh parameter draws.

    Every trial resamples the whole parameter vector.  A layout with no
    parameters is constant in theta, so its derivative is identically 0.
    The variance carries a bootstrap standard error.
    """
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials")
    rng = as_rng(seed)
    layout = ensemble.layout
    encoding = EncodingSpec.angle(layout.n_qubits) if encoding is None else encoding
    if layout.param_count == 0:
        grads = np.zeros(trials)
    else:
        params = ensemble.sample(rng, batch=trials)
        grads = np.asarray(parameter_shift_gradient(layout, params, encoding, x, obs, k), dtype=float)
    return GradientStats(mean_estimate(grads), variance_estimate(grads, rng), grads)
