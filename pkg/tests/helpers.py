"""Independent reference implementations used as test oracles."""
import numpy as np

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
PAULIS = {"X": X, "Y": Y, "Z": Z}


def random_state(rng, n):
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def random_hermitian(rng, d, norm=1.0):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (a + a.conj().T) / 2
    return norm * h / np.linalg.norm(h, 2)


def embed(op, qubit, n):
    """Single-qubit operator on ``qubit`` (0 = most significant) via explicit kron chain."""
    out = np.eye(1)
    for q in range(n):
        out = np.kron(out, op if q == qubit else I2)
    return out


def rotation(axis, theta):
    """exp(-i theta P / 2) from the closed form cos(t/2) I - i sin(t/2) P."""
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * PAULIS[axis]


def cz_matrix(a, b, n):
    d = 2**n
    diag = np.ones(d, dtype=complex)
    for idx in range(d):
        if (idx >> (n - 1 - a)) & 1 and (idx >> (n - 1 - b)) & 1:
            diag[idx] = -1
    return np.diag(diag)


def dense_layout_unitary(layout, params):
    """Product of full 2^n x 2^n gate matrices, gate by gate."""
    n = layout.n_qubits
    u = np.eye(2**n, dtype=complex)
    for g in layout.gates:
        if g.kind == "rot":
            m = embed(rotation(g.axis, params[g.slot]), g.targets[0], n)
        elif g.kind == "cz":
            m = cz_matrix(*g.targets, n)
        else:
            m = embed_multi(g.matrix, g.targets, n)
        u = m @ u
    return u


def embed_multi(op, targets, n):
    """Operator on ``targets`` by explicit matrix elements over all basis states."""
    d = 2**n
    k = len(targets)
    out = np.zeros((d, d), dtype=complex)
    for col in range(d):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = sum(bits[t] << (k - 1 - i) for i, t in enumerate(targets))
        for sub_out in range(2**k):
            nb = list(bits)
            for i, t in enumerate(targets):
                nb[t] = (sub_out >> (k - 1 - i)) & 1
            row = sum(b << (n - 1 - q) for q, b in enumerate(nb))
            out[row, col] += op[sub_out, sub_in]
    return out


def brute_partial_trace(psi, keep, n):
    """rho_keep[i, j] = sum over traced bits of psi[i, t] conj(psi[j, t]) by explicit loops."""
    keep = sorted(keep)
    traced = [q for q in range(n) if q not in keep]
    dk = 2 ** len(keep)
    rho = np.zeros((dk, dk), dtype=complex)

    def index(kbits, tbits):
        bits = [0] * n
        for q, b in zip(keep, kbits):
            bits[q] = b
        for q, b in zip(traced, tbits):
            bits[q] = b
        return sum(b << (n - 1 - q) for q, b in enumerate(bits))

    def to_bits(v, width):
        return [(v >> (width - 1 - i)) & 1 for i in range(width)]

    for i in range(dk):
        for j in range(dk):
            for t in range(2 ** len(traced)):
                tb = to_bits(t, len(traced))
                rho[i, j] += psi[index(to_bits(i, len(keep)), tb)] * np.conj(psi[index(to_bits(j, len(keep)), tb)])
    return rho
