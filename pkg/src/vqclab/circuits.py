"""Gate set, ansatz layouts and a batched gate-by-gate statevector simulator.

Rotations follow ``R_P(t) = exp(-i t P / 2)``.  The simulator works on
arrays of shape ``(batch, 2**n)`` so that many parameter draws or many
inputs are pushed through one layout at once; single vectors are
accepted everywhere and come back unbatched.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numeric import (
    CONSTRUCT_TOL,
    EQUAL_TOL,
    UNITARY_QUBIT_CAP,
    DenseCapError,
    InvariantViolation,
    Observable,
    StateVector,
    is_unitary,
)

ROTATION_AXES = ("X", "Y", "Z")


@dataclass(frozen=True)
class Gate:
    """One circuit element.

    ``kind`` is ``"rot"`` (parameterized Pauli rotation on one qubit),
    ``"cz"`` or ``"unitary"`` (fixed matrix on ``targets``).
    """

    kind: str
    targets: tuple[int, ...]
    axis: str | None = None
    slot: int | None = None
    matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def rot(cls, axis: str, target: int, slot: int) -> "Gate":
        if axis not in ROTATION_AXES:
            raise ValueError(f"unknown rotation axis {axis!r}")
        return cls("rot", (target,), axis=axis, slot=slot)

    @classmethod
    def cz(cls, control: int, target: int) -> "Gate":
        if control == target:
            raise ValueError("cz needs two distinct qubits")
        return cls("cz", (control, target))

    @classmethod
    def fixed(cls, matrix: np.ndarray, targets: Sequence[int]) -> "Gate":
        m = np.array(matrix, dtype=complex)
        if m.shape != (2 ** len(targets),) * 2 or not is_unitary(m, CONSTRUCT_TOL):
            raise ValueError("fixed gate must be a unitary matching its targets")
        if len(set(targets)) != len(targets):
            raise ValueError("repeated target qubit")
        m.setflags(write=False)
        return cls("unitary", tuple(targets), matrix=m)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "targets": list(self.targets)}
        if self.kind == "rot":
            d.update(axis=self.axis, slot=self.slot)
        if self.kind == "unitary":
            d["matrix"] = [[[z.real, z.imag] for z in row] for row in self.matrix]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        kind = d["kind"]
        if kind == "rot":
            return cls.rot(d["axis"], d["targets"][0], d["slot"])
        if kind == "cz":
            return cls.cz(*d["targets"])
        if kind == "unitary":
            m = np.array([[complex(re, im) for re, im in row] for row in d["matrix"]])
            return cls.fixed(m, d["targets"])
        raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class CircuitLayout:
    n_qubits: int
    gates: tuple[Gate, ...]
    param_count: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        used = set()
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.targets):
                raise ValueError(f"gate {g} acts outside {self.n_qubits} qubits")
            if g.kind == "rot":
                if not 0 <= g.slot < self.param_count:
                    raise ValueError(f"slot {g.slot} outside [0, {self.param_count})")
                used.add(g.slot)
        if len(used) != self.param_count:
            raise ValueError("every parameter slot must drive at least one gate")

    @classmethod
    def empty(cls, n_qubits: int) -> "CircuitLayout":
        return cls(n_qubits, (), 0)

    def then(self, other: "CircuitLayout") -> "CircuitLayout":
        """Concatenate: ``self`` runs first; ``other``'s slots are shifted."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        shifted = [
            Gate.rot(g.axis, g.targets[0], g.slot + self.param_count) if g.kind == "rot" else g
            for g in other.gates
        ]
        return CircuitLayout(self.n_qubits, self.gates + tuple(shifted), self.param_count + other.param_count)

    def segment(self, start: int, stop: int) -> tuple["CircuitLayout", np.ndarray]:
        """Gates ``start:stop`` as their own layout plus the parent slots they use.

        Run it with ``params[..., slots]``.
        """
        gates = self.gates[start:stop]
        slots = sorted({g.slot for g in gates if g.kind == "rot"})
        remap = {s: i for i, s in enumerate(slots)}
        sub = tuple(Gate.rot(g.axis, g.targets[0], remap[g.slot]) if g.kind == "rot" else g for g in gates)
        return CircuitLayout(self.n_qubits, sub, len(slots)), np.array(slots, dtype=int)

    def slot_gates(self, slot: int) -> list[int]:
        return [i for i, g in enumerate(self.gates) if g.kind == "rot" and g.slot == slot]

    def to_json(self) -> str:
        return json.dumps(
            {"n_qubits": self.n_qubits, "param_count": self.param_count,
             "gates": [g.to_dict() for g in self.gates]},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "CircuitLayout":
        d = json.loads(text)
        return cls(d["n_qubits"], tuple(Gate.from_dict(g) for g in d["gates"]), d["param_count"])


def build_hea(n: int, depth: int, entangler: str = "ring") -> CircuitLayout:
    """Hardware-efficient ansatz: per layer R_Y on every qubit, R_Z on every
    qubit, then a CZ entangler.

    ``entangler="ring"`` couples (i, i+1 mod n); ``"chain"`` drops the
    wrap-around gate so a contiguous cut is crossed once per layer.
    Slots are numbered layer by layer, R_Y block first.
    """
    if n < 2 or depth < 0:
        raise ValueError("need n >= 2 and depth >= 0")
    if entangler not in ("ring", "chain"):
        raise ValueError(f"unknown entangler {entangler!r}")
    pairs = [(i, (i + 1) % n) for i in range(n)] if entangler == "ring" else [(i, i + 1) for i in range(n - 1)]
    gates = []
    for layer in range(depth):
        base = 2 * n * layer
        gates += [Gate.rot("Y", q, base + q) for q in range(n)]
        gates += [Gate.rot("Z", q, base + n + q) for q in range(n)]
        gates += [Gate.cz(a, b) for a, b in pairs]
    return CircuitLayout(n, tuple(gates), 2 * n * depth)


@dataclass(frozen=True)
class EncodingSpec:
    """Angle encoding: R_Y(x_i) on qubit i."""

    kind: str
    input_dim: int

    def __post_init__(self):
        if self.kind != "angle":
            raise ValueError(f"unsupported encoding kind {self.kind!r}")

    @classmethod
    def angle(cls, n_qubits: int) -> "EncodingSpec":
        return cls("angle", n_qubits)

    def layout(self) -> CircuitLayout:
        n = self.input_dim
        return CircuitLayout(n, tuple(Gate.rot("Y", q, q) for q in range(n)), n)


# ---------------------------------------------------------------------------
# simulation kernels


def _rotate(psi: np.ndarray, n: int, q: int, axis: str, theta: np.ndarray) -> np.ndarray:
    """Apply R_axis(theta) on qubit q; psi has shape (B, 2**n), theta (B,)."""
    b = psi.shape[0]
    view = psi.reshape(b, 2**q, 2, 2 ** (n - q - 1))
    half = 0.5 * theta[:, None, None]
    if axis == "Z":
        phase = np.exp(-1j * half)
        out = np.empty_like(view)
        out[:, :, 0, :] = view[:, :, 0, :] * phase
        out[:, :, 1, :] = view[:, :, 1, :] * phase.conj()
        return out.reshape(b, -1)
    c, s = np.cos(half), np.sin(half)
    a0, a1 = view[:, :, 0, :], view[:, :, 1, :]
    out = np.empty_like(view)
    if axis == "Y":
        out[:, :, 0, :] = c * a0 - s * a1
        out[:, :, 1, :] = s * a0 + c * a1
    else:
        out[:, :, 0, :] = c * a0 - 1j * s * a1
        out[:, :, 1, :] = c * a1 - 1j * s * a0
    return out.reshape(b, -1)


def _cz_diagonal(n: int, pairs: Sequence[tuple[int, ...]]) -> np.ndarray:
    idx = np.arange(2**n)
    bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
    parity = np.zeros(2**n, dtype=np.int64)
    for a, c in pairs:
        parity ^= bits[a] & bits[c]
    return 1.0 - 2.0 * parity


def _apply_fixed(psi: np.ndarray, n: int, targets: tuple[int, ...], m: np.ndarray) -> np.ndarray:
    b, k = psi.shape[0], len(targets)
    t = psi.reshape((b,) + (2,) * n)
    axes = [1 + q for q in targets]
    t = np.moveaxis(t, axes, range(1, k + 1))
    shape = t.shape
    t = (m @ t.reshape(b, 2**k, -1)).reshape(shape)
    return np.moveaxis(t, range(1, k + 1), axes).reshape(b, -1)


def _as_batch(state, n: int) -> tuple[np.ndarray, bool]:
    if isinstance(state, StateVector):
        state = state.amplitudes
    arr = np.asarray(state, dtype=complex)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != 2**n:
        raise ValueError(f"state dimension {arr.shape[1]} does not match {n} qubits")
    return arr, single


def _as_param_batch(params, count: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(params, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != count:
        raise ValueError(f"expected {count} parameters, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("parameters must be finite")
    return arr, single


def apply_circuit(layout: CircuitLayout, params, state, check_norm: bool = False) -> np.ndarray:
    """Push ``state`` through ``layout``.

    ``params`` may be ``(p,)`` or ``(B, p)``; ``state`` may be ``(2**n,)``
    or ``(B, 2**n)``.  Batches of size one broadcast against the other.
    The result is unbatched only when both inputs were.
    """
    n = layout.n_qubits
    psi, single_state = _as_batch(state, n)
    if params is None:
        params = np.zeros(layout.param_count)
    theta, single_params = _as_param_batch(params, layout.param_count)
    batch = max(psi.shape[0], theta.shape[0])
    if psi.shape[0] not in (1, batch) or theta.shape[0] not in (1, batch):
        raise ValueError("state and parameter batch sizes disagree")
    psi = np.broadcast_to(psi, (batch, 2**n)).copy()
    theta = np.broadcast_to(theta, (batch, theta.shape[1]))

    gates = layout.gates
    i = 0
    while i < len(gates):
        g = gates[i]
        if g.kind == "rot":
            psi = _rotate(psi, n, g.targets[0], g.axis, theta[:, g.slot])
            i += 1
        elif g.kind == "cz":
            run = []
            while i < len(gates) and gates[i].kind == "cz":
                run.append(gates[i].targets)
                i += 1
            psi *= _cz_diagonal(n, run)
        else:
            psi = _apply_fixed(psi, n, g.targets, g.matrix)
            i += 1

    if check_norm:
        drift = np.max(np.abs(np.linalg.norm(psi, axis=1) - 1.0))
        if drift > EQUAL_TOL:
            raise InvariantViolation(f"norm drift {drift:.3e} after circuit")
    return psi[0] if (single_state and single_params) else psi


def circuit_unitary(layout: CircuitLayout, params) -> np.ndarray:
    """Dense unitary of the layout (small n only)."""
    n = layout.n_qubits
    if n > UNITARY_QUBIT_CAP:
        raise DenseCapError(f"dense unitaries limited to {UNITARY_QUBIT_CAP} qubits")
    theta = np.asarray(params, dtype=float)
    if theta.ndim != 1:
        raise ValueError("circuit_unitary takes a single parameter vector")
    cols = apply_circuit(layout, theta, np.eye(2**n, dtype=complex))
    return cols.T


def encode_input(spec: EncodingSpec, x, state=None) -> np.ndarray:
    """Apply U(x) to ``state`` (default ``|0...0>``); ``x`` may be batched."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.input_dim:
        raise ValueError(f"input has length {x.shape[-1]}, encoding expects {spec.input_dim}")
    n = spec.input_dim
    if state is None:
        state = StateVector.zero(n).amplitudes
    return apply_circuit(spec.layout(), x, state)


def expectation(layout: CircuitLayout, params, encoding: EncodingSpec, x, obs: Observable):
    """f_theta(x) = <0|U(x)^dag W(theta)^dag O W(theta) U(x)|0>.

    Batched over whichever of ``params`` / ``x`` carries a leading batch axis.
    """
    if obs.n_qubits != layout.n_qubits or encoding.input_dim != layout.n_qubits:
        raise ValueError("layout, encoding and observable disagree on qubit count")
    psi = apply_circuit(layout, params, encode_input(encoding, x))
    return obs.values(psi)


def z_observable(n: int, qubit: int = 0) -> Observable:
    return Observable.pauli(n, {qubit: "Z"})
