"""Random sources: Haar states and unitaries, parameter initializations.

All randomness flows from a :class:`SeedSpec`.  Each trial of an
experiment gets its own stream derived from ``(master_seed, stream_id)``
so trials can run in any order, on any worker, and reproduce exactly.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .numeric import UNITARY_QUBIT_CAP, DenseCapError, StateVector, qr_unitary

_MASK64 = (1 << 64) - 1


def stream_id(*parts) -> int:
    """Stable 64-bit id from arbitrary printable parts (name, trial index, ...)."""
    digest = hashlib.blake2b("\x1f".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for v in (self.master_seed, self.stream_id):
            if not 0 <= v <= _MASK64:
                raise ValueError("seeds must be unsigned 64-bit integers")

    def child(self, *parts) -> "SeedSpec":
        """Stream for a sub-task, keyed by ``parts`` on top of this stream."""
        return SeedSpec(self.master_seed, stream_id(self.stream_id, *parts))

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.master_seed, self.stream_id])))


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.rng()
    return SeedSpec(int(seed)).rng()


@dataclass(frozen=True)
class ParamDist:
    """``uniform`` on (-pi, pi) or ``gaussian`` with mean 0 and stddev ``scale``."""

    kind: str = "uniform"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown parameter distribution {self.kind!r}")
        if self.kind == "gaussian" and not self.scale > 0:
            raise ValueError("gaussian stddev must be positive")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(-np.pi, np.pi, size=size)
        return rng.normal(0.0, self.scale, size=size)


def haar_states(n: int, count: int, seed) -> np.ndarray:
    """``count`` Haar-random states as rows of a ``(count, 2**n)`` array.

    Normalized complex Gaussian vectors; distributionally identical to
    columns of Haar unitaries at O(d) cost.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_rng(seed)
    d = 2**n
    g = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_haar_state(n: int, seed) -> StateVector:
    return StateVector(n, haar_states(n, 1, seed)[0])


def sample_haar_unitary(n: int, seed) -> np.ndarray:
    """Haar unitary on n qubits from the phase-corrected QR of a Ginibre matrix."""
    if n > UNITARY_QUBIT_CAP:
        raise DenseCapError(f"dense unitaries limited to {UNITARY_QUBIT_CAP} qubits")
    rng = as_rng(seed)
    d = 2**n
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    return qr_unitary(g)


def haar_unitary_dim(d: int, rng: np.random.Generator) -> np.ndarray:
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    return qr_unitary(g)


def sample_params(dist: ParamDist, p: int, seed, batch: int | None = None) -> np.ndarray:
    """i.i.d. parameter vector(s): shape ``(p,)`` or ``(batch, p)``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    size = p if batch is None else (batch, p)
    return dist.sample(as_rng(seed), size)


def unit_norm_inputs(m: int, dim: int, seed) -> np.ndarray:
    """``m`` standard-normal inputs in R^dim, each scaled to unit norm."""
    x = as_rng(seed).standard_normal((m, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@dataclass(frozen=True)
class CircuitEnsemble:
    """Fixed layout with i.i.d. parameters drawn from ``dist``.

    ``layout`` is any object with a ``param_count`` (a
    :class:`~vqclab.circuits.CircuitLayout`).
    """

    layout: object
    dist: ParamDist = ParamDist()

    def sample(self, seed, batch: int | None = None) -> np.ndarray:
        return sample_params(self.dist, self.layout.param_count, seed, batch)
