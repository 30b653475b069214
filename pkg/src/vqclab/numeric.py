"""Dense complex linear algebra used throughout the package.

Qubit 0 is the most significant bit of an amplitude index, so the basis
state ``|q0 q1 ... q_{n-1}>`` sits at index ``sum(q_i * 2**(n-1-i))``.
Every routine here (kron, partial traces, reshapes for Schmidt
decompositions) relies on that single convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# dense mode gives up beyond this many rows/columns
DENSE_CAP = 2**14
# full circuit unitaries are only materialized up to this many qubits
UNITARY_QUBIT_CAP = 7

CONSTRUCT_TOL = 1e-10
EQUAL_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"X": X, "Y": Y, "Z": Z}


class DenseCapError(ValueError):
    """Raised when a dense object would exceed the configured dimension cap."""


class InvariantViolation(RuntimeError):
    """A numerical invariant (norm, hermiticity, unitarity) failed during a run."""


def _check_dim(dim: int, cap: int | None = None) -> None:
    cap = DENSE_CAP if cap is None else cap
    if dim > cap:
        raise DenseCapError(f"dimension {dim} exceeds dense cap {cap}")


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitude vector on ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > CONSTRUCT_TOL:
            raise InvariantViolation(f"state norm {norm!r} differs from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amps, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise ValueError("amplitude count must be a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


@dataclass(frozen=True)
class Bipartition:
    """Split of qubits ``0..n-1`` into two nonempty complementary blocks."""

    block_a: tuple[int, ...]
    block_b: tuple[int, ...]

    def __post_init__(self):
        a, b = tuple(sorted(self.block_a)), tuple(sorted(self.block_b))
        if not a or not b:
            raise ValueError("both blocks must be nonempty")
        if set(a) & set(b):
            raise ValueError("blocks overlap")
        if set(a) | set(b) != set(range(len(a) + len(b))):
            raise ValueError("blocks must cover 0..n-1")
        object.__setattr__(self, "block_a", a)
        object.__setattr__(self, "block_b", b)

    @classmethod
    def from_block(cls, n: int, block_a: Iterable[int]) -> "Bipartition":
        a = sorted(set(block_a))
        return cls(tuple(a), tuple(q for q in range(n) if q not in a))

    @classmethod
    def balanced(cls, n: int) -> "Bipartition":
        """Contiguous cut ``{0..floor(n/2)-1} | rest``."""
        return cls.from_block(n, range(max(n // 2, 1)))

    @property
    def n_qubits(self) -> int:
        return len(self.block_a) + len(self.block_b)


@dataclass(frozen=True)
class Observable:
    """Hermitian operator with spectral norm at most one.

    Stored as the operator ``local`` acting on the qubits in ``support``
    (ascending order) tensored with identity elsewhere, so local
    observables stay cheap at any qubit count.
    """

    local: np.ndarray = field(repr=False)
    n_qubits: int
    support: tuple[int, ...] = ()

    def __post_init__(self):
        support = tuple(self.support)
        if list(support) != sorted(set(support)) or any(q < 0 or q >= self.n_qubits for q in support):
            raise ValueError("support must be ascending distinct qubit indices")
        m = np.array(self.local, dtype=complex)
        k = 2 ** len(support)
        if m.shape != (k, k):
            raise ValueError(f"local operator must be {k}x{k}, got {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > CONSTRUCT_TOL:
            raise ValueError("observable is not Hermitian")
        if np.linalg.norm(m, 2) > 1 + EQUAL_TOL:
            raise ValueError("observable spectral norm exceeds 1")
        m.setflags(write=False)
        object.__setattr__(self, "local", m)
        object.__setattr__(self, "support", support)

    @classmethod
    def pauli(cls, n_qubits: int, paulis: dict[int, str]) -> "Observable":
        """Tensor product of Paulis, e.g. ``{0: "Z"}`` for Z on qubit 0."""
        support = sorted(paulis)
        return cls(kron_all([PAULI[paulis[q]] for q in support]), n_qubits, tuple(support))

    @classmethod
    def identity(cls, n_qubits: int) -> "Observable":
        return cls(np.eye(1, dtype=complex), n_qubits, ())

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, n_qubits: int) -> "Observable":
        return cls(matrix, n_qubits, tuple(range(n_qubits)))

    @property
    def matrix(self) -> np.ndarray:
        """Full 2^n x 2^n matrix."""
        n, k = self.n_qubits, len(self.support)
        _check_dim(2**n, 2**UNITARY_QUBIT_CAP * 8)
        rest = [q for q in range(n) if q not in self.support]
        full = np.kron(self.local, np.eye(2 ** (n - k)))
        # full acts on qubit order support + rest; permute back to 0..n-1
        order = list(self.support) + rest
        inv = np.argsort(order)
        t = full.reshape((2,) * (2 * n))
        t = t.transpose(list(inv) + [n + i for i in inv])
        return t.reshape(2**n, 2**n)

    def is_diagonal(self) -> bool:
        return np.count_nonzero(self.local - np.diag(np.diag(self.local))) == 0

    def values(self, psi: np.ndarray) -> np.ndarray | float:
        """<psi|O|psi> for one state ``(2**n,)`` or a batch ``(B, 2**n)``."""
        psi = np.asarray(psi)
        single = psi.ndim == 1
        psi = np.atleast_2d(psi)
        n, b = self.n_qubits, psi.shape[0]
        if psi.shape[1] != 2**n:
            raise ValueError("state dimension does not match observable")
        k = len(self.support)
        if k == 0:
            # c*I on a unit vector is exactly c; skip the roundoff of summing |psi|^2
            out = np.full(b, float(self.local[0, 0].real))
            return float(out[0]) if single else out
        t = psi.reshape((b,) + (2,) * n)
        t = np.moveaxis(t, [1 + q for q in self.support], range(1, k + 1)).reshape(b, 2**k, -1)
        if self.is_diagonal():
            probs = np.sum(np.abs(t) ** 2, axis=2)
            out = probs @ np.diag(self.local).real
        else:
            out = np.real(np.einsum("bir,ij,bjr->b", t.conj(), self.local, t))
        return float(out[0]) if single else out


def kron(a: np.ndarray, b: np.ndarray, cap: int | None = None) -> np.ndarray:
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("kron inputs must be finite")
    _check_dim(max(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]), cap)
    return np.kron(a, b)


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = kron(out, f)
    return out


def swap_operator(d: int) -> np.ndarray:
    """Permutation F on C^d (x) C^d with F(u (x) v) = v (x) u."""
    if d < 1:
        raise ValueError("d must be >= 1")
    _check_dim(d * d)
    f = np.zeros((d * d, d * d), dtype=complex)
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    f[(j * d + i).ravel(), (i * d + j).ravel()] = 1.0
    return f


def _as_tensor(amps: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(amps, dtype=complex).reshape((2,) * n)


def partial_trace(state, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix of a pure state on the qubits in ``keep``.

    The returned matrix is ordered by ascending qubit index.
    """
    if isinstance(state, StateVector):
        n, amps = state.n_qubits, state.amplitudes
    else:
        amps = np.asarray(state, dtype=complex)
        n = int(round(np.log2(amps.size)))
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError("keep indices out of range")
    traced = [q for q in range(n) if q not in keep]
    psi = _as_tensor(amps, n).transpose(keep + traced).reshape(2 ** len(keep), -1)
    rho = psi @ psi.conj().T
    return (rho + rho.conj().T) / 2


def svd_values(m: np.ndarray) -> np.ndarray:
    """Singular values in descending order."""
    m = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite")
    try:
        s = np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("SVD did not converge") from exc
    return np.sort(s)[::-1]


def schmidt_coefficients(state, cut: Bipartition) -> np.ndarray:
    """Schmidt coefficients of a pure state across ``cut`` (descending)."""
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    n = cut.n_qubits
    psi = _as_tensor(amps, n).transpose(list(cut.block_a) + list(cut.block_b))
    return svd_values(psi.reshape(2 ** len(cut.block_a), -1))


def qr_unitary(g: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Q factor of ``g`` with the diagonal of R rotated to positive reals.

    Applied to a complex Ginibre matrix this yields a Haar-distributed
    unitary (Mezzadri's phase correction).
    """
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("qr_unitary needs a square matrix")
    q, r = np.linalg.qr(g)
    diag = np.diag(r)
    scale = np.max(np.abs(diag), initial=0.0)
    if scale == 0.0 or np.min(np.abs(diag)) <= tol * scale:
        raise np.linalg.LinAlgError("matrix is rank deficient")
    return q * (diag / np.abs(diag))


def is_unitary(u: np.ndarray, tol: float = CONSTRUCT_TOL) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))
