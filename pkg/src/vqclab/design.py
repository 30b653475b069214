"""Diagnostics for Haar-like typicality of unitary and state ensembles.

Choi-state purity across a doubled cut, operator Schmidt rank, the
order-t frame potential and the distance of an empirical state second
moment from the Haar value ``(I + F) / (d (d + 1))``.

Choi-state layout: qubits ``0..n-1`` carry the row index of U and
qubits ``n..2n-1`` (the primed copies) carry the column index, so
``|U> = 2**(-n/2) * sum_{i,j} U[i, j] |i>|j>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .circuits import CircuitLayout, Gate, apply_circuit, build_hea, circuit_unitary
from .ensembles import ParamDist, haar_unitary_dim
from .numeric import (
    UNITARY_QUBIT_CAP,
    Bipartition,
    DenseCapError,
    StateVector,
    schmidt_coefficients,
    svd_values,
    swap_operator,
)
from .stats import Estimate, mean_estimate

OSR_TOL = 1e-10

UnitarySampler = Callable[[np.random.Generator], np.ndarray]


def _n_of(u: np.ndarray) -> int:
    u = np.asarray(u)
    n = int(round(math.log2(u.shape[0])))
    if u.shape != (2**n, 2**n):
        raise ValueError("expected a 2^n x 2^n matrix")
    if n > UNITARY_QUBIT_CAP:
        raise DenseCapError(f"unitary diagnostics limited to {UNITARY_QUBIT_CAP} qubits")
    return n


def choi_state(u: np.ndarray) -> StateVector:
    n = _n_of(u)
    return StateVector(2 * n, np.asarray(u, dtype=complex).reshape(-1) / 2 ** (n / 2))


def doubled_cut(cut: Bipartition) -> Bipartition:
    """AA'|BB' on the 2n-qubit Choi register."""
    n = cut.n_qubits
    return Bipartition.from_block(2 * n, list(cut.block_a) + [n + q for q in cut.block_a])


def realign(u: np.ndarray, cut: Bipartition) -> np.ndarray:
    """Reshuffle U so rows index (A out, A in) and columns (B out, B in).

    Its singular values are the operator Schmidt coefficients of U across
    the cut.
    """
    n = cut.n_qubits
    a, b = list(cut.block_a), list(cut.block_b)
    t = np.asarray(u, dtype=complex).reshape((2,) * (2 * n))
    t = t.transpose(a + [n + q for q in a] + b + [n + q for q in b])
    return t.reshape(4 ** len(a), 4 ** len(b))


def operator_schmidt_coefficients(u: np.ndarray, cut: Bipartition) -> np.ndarray:
    _n_of(u)
    return svd_values(realign(u, cut))


def operator_schmidt_rank(u: np.ndarray, cut: Bipartition, tol: float = OSR_TOL) -> int:
    s = operator_schmidt_coefficients(u, cut)
    return int(np.sum(s > tol * s[0]))


def choi_schmidt_rank(u: np.ndarray, cut: Bipartition, tol: float = OSR_TOL) -> int:
    """Schmidt rank of the Choi state across AA'|BB', from the 2n-qubit state."""
    s = schmidt_coefficients(choi_state(u), doubled_cut(cut))
    return int(np.sum(s > tol * s[0]))


def choi_purity(u: np.ndarray, cut: Bipartition) -> float:
    """Tr(rho_{AA'}^2) for the Choi state of U."""
    n = _n_of(u)
    lam = operator_schmidt_coefficients(u, cut) / 2 ** (n / 2)
    return float(np.sum(lam**4))


def haar_choi_purity(cut: Bipartition) -> float:
    """Exact Haar average of the Choi purity, (d_A^2 + d_B^2 - 2) / (d^2 - 1).

    Second-order Weingarten calculus over U.  The Choi state of a Haar
    unitary is not a Haar state on 2n qubits (its primed marginal is
    always maximally mixed), so the random-state value
    (d_A^2 + d_B^2) / (d^2 + 1) does not apply.
    """
    da, db = 2 ** len(cut.block_a), 2 ** len(cut.block_b)
    d = da * db
    return (da**2 + db**2 - 2) / (d**2 - 1)


def haar_state_purity(dim_a: int, dim_b: int) -> float:
    """Average purity of a Haar-random pure state's marginal, (d_A + d_B) / (d_A d_B + 1)."""
    return (dim_a + dim_b) / (dim_a * dim_b + 1)


# ---------------------------------------------------------------------------
# ensembles of unitaries


def haar_sampler(n: int) -> UnitarySampler:
    return lambda rng: haar_unitary_dim(2**n, rng)


def hea_sampler(n: int, depth: int, dist: ParamDist = ParamDist(), entangler: str = "ring") -> UnitarySampler:
    layout = build_hea(n, depth, entangler)
    return lambda rng: circuit_unitary(layout, dist.sample(rng, layout.param_count))


def brickwork_layout_pairs(n: int, layers: int) -> list[list[tuple[int, int]]]:
    """Nearest-neighbour pairs per brickwork layer on an open chain."""
    return [[(i, i + 1) for i in range(layer % 2, n - 1, 2)] for layer in range(layers)]


def brickwork_unitary(n: int, layers: int, rng: np.random.Generator) -> np.ndarray:
    """Open-chain brickwork of Haar two-qubit gates.

    A contiguous cut between qubits c-1 and c is crossed by one gate in
    every layer whose parity matches c-1, so at most ``ceil(layers/2)``
    gates cross it regardless of n; the operator Schmidt rank across it
    is then at most ``4**ceil(layers/2)``.
    """
    if n > UNITARY_QUBIT_CAP:
        raise DenseCapError(f"dense unitaries limited to {UNITARY_QUBIT_CAP} qubits")
    gates = [Gate.fixed(haar_unitary_dim(4, rng), pair)
             for layer in brickwork_layout_pairs(n, layers) for pair in layer]
    layout = CircuitLayout(n, tuple(gates), 0)
    return apply_circuit(layout, None, np.eye(2**n, dtype=complex)).T


def brickwork_sampler(n: int, layers: int = 2) -> UnitarySampler:
    return lambda rng: brickwork_unitary(n, layers, rng)


def brickwork_cut_crossings(n: int, layers: int, cut: Bipartition) -> int:
    a = set(cut.block_a)
    return sum((i in a) != (j in a) for layer in brickwork_layout_pairs(n, layers) for i, j in layer)


# ---------------------------------------------------------------------------
# moment diagnostics


def frame_potential(sampler: UnitarySampler, pairs: int, rng: np.random.Generator, t: int = 2) -> Estimate:
    """Monte-Carlo E|Tr(U^dag V)|^{2t} over independent pairs."""
    if pairs < 1:
        raise ValueError("pairs must be positive")
    vals = np.empty(pairs)
    for i in range(pairs):
        u, v = sampler(rng), sampler(rng)
        vals[i] = abs(np.vdot(u, v)) ** (2 * t)  # vdot conjugates: sum conj(u_ij) v_ij = Tr(U^dag V)
    return mean_estimate(vals)


def frame_potential_all_pairs(sampler: UnitarySampler, count: int, rng: np.random.Generator, t: int = 2) -> float:
    """U-statistic over all ``count * (count - 1)`` ordered pairs of ``count`` draws.

    Far lower variance than independent pairs at equal sampling cost, which
    matters because |Tr(U^dag V)|^{2t} is heavy-tailed.  No standard error.
    """
    if count < 2:
        raise ValueError("need at least two samples")
    flat = np.stack([sampler(rng).reshape(-1) for _ in range(count)])
    overlaps = np.abs(flat.conj() @ flat.T) ** (2 * t)
    return float((overlaps.sum() - np.trace(overlaps)) / (count * (count - 1)))


def haar_frame_potential(t: int = 2) -> float:
    """t!, valid for d >= t."""
    return float(math.factorial(t))


@dataclass(frozen=True)
class SecondMomentResult:
    distance: float
    max_stderr: float


def haar_second_moment(d: int) -> np.ndarray:
    return (np.eye(d * d) + swap_operator(d)) / (d * (d + 1))


def second_moment_distance(states: np.ndarray, chunk: int = 4096) -> SecondMomentResult:
    """Max-entry distance between mean(|psi><psi|^{(x)2}) and (I + F)/(d(d+1)).

    ``states`` is ``(N, d)``.  Also returns the largest per-entry
    standard error of the Monte-Carlo mean.
    """
    states = np.asarray(states, dtype=complex)
    count, d = states.shape
    if d > 2**5:
        raise DenseCapError("second-moment comparison limited to 5 qubits")
    first = np.zeros((d * d, d * d), dtype=complex)
    second = np.zeros((d * d, d * d))
    for lo in range(0, count, chunk):
        psi = states[lo : lo + chunk]
        v = (psi[:, :, None] * psi[:, None, :]).reshape(psi.shape[0], d * d)
        first += v.T @ v.conj()
        mag = np.abs(v) ** 2
        second += mag.T @ mag
    first /= count
    second /= count
    var = np.maximum(second - np.abs(first) ** 2, 0.0)
    se = np.sqrt(var / max(count - 1, 1))
    return SecondMomentResult(float(np.max(np.abs(first - haar_second_moment(d)))), float(np.max(se)))


@dataclass(frozen=True)
class DesignReport:
    ensemble: str
    n: int
    frame_potential_2: Estimate
    second_moment_distance: float
    avg_choi_purity: Estimate
    max_osr: int
    haar_frame_potential_2: float = 2.0
    haar_choi_purity: float = float("nan")

    def rows(self) -> list[tuple[str, float, float]]:
        return [
            ("frame_potential_2", self.frame_potential_2.value, self.frame_potential_2.stderr),
            ("frame_potential_2_haar", self.haar_frame_potential_2, 0.0),
            ("second_moment_distance", self.second_moment_distance, 0.0),
            ("choi_purity", self.avg_choi_purity.value, self.avg_choi_purity.stderr),
            ("choi_purity_haar", self.haar_choi_purity, 0.0),
            ("max_osr", float(self.max_osr), 0.0),
        ]


def choi_purity_stats(sampler: UnitarySampler, cut: Bipartition, samples: int,
                      rng: np.random.Generator) -> tuple[Estimate, int, float]:
    """Mean Choi purity, max operator Schmidt rank, and min purity * max OSR."""
    pur, osr = np.empty(samples), np.empty(samples, dtype=int)
    for i in range(samples):
        u = sampler(rng)
        s = operator_schmidt_coefficients(u, cut)
        lam = s / math.sqrt(u.shape[0])
        pur[i] = np.sum(lam**4)
        osr[i] = int(np.sum(s > OSR_TOL * s[0]))
    k = int(osr.max())
    return mean_estimate(pur), k, float(pur.min() * k)
