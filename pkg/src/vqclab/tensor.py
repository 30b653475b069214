"""Bounded-rank tensor-train maps and the two tensor-structured model families.

A :class:`TTMatrixMap` is a linear map R^in -> R^out stored as a train of
4-index cores ``(r_left, in_mode, out_mode, r_right)`` followed by the
squashing ``pi * tanh``.  Dimensions are zero-padded up to products of 2s
and 3s so that every map factorizes into small modes.

TN-VQC feeds the map's output into the angle encoding; TensorHyper-VQC
uses the map as a hypernetwork from a Gaussian seed vector to the full
circuit parameter vector.  Both run their circuit on a chain-entangled
ansatz whose depth is fixed independently of the qubit count, so the
number of gates crossing any contiguous cut stays bounded as n grows.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import CircuitLayout, EncodingSpec, build_hea, expectation, z_observable
from .ensembles import SeedSpec
from .numeric import Observable
from .stats import Estimate, mean_estimate, variance_estimate

ACTIVATIONS = ("tanh", "identity")


def smooth_ceiling(dim: int) -> int:
    """Smallest number >= dim of the form 2**a * 3**b."""
    best = None
    a_pow = 1
    while a_pow < 2 * dim:
        v = a_pow
        while v < dim:
            v *= 3
        best = v if best is None else min(best, v)
        a_pow *= 2
    return max(best, 1)


def prime_modes(dim: int) -> list[int]:
    """Factor ``smooth_ceiling(dim)`` into 2s and 3s (3s last)."""
    v = smooth_ceiling(dim)
    modes = []
    for p in (2, 3):
        while v % p == 0:
            modes.append(p)
            v //= p
    return modes or [1]


def match_modes(in_dim: int, out_dim: int) -> tuple[list[int], list[int]]:
    """Mode lists of equal length for a TT-matrix from in_dim to out_dim.

    The shorter factorization is padded with trailing 1s.
    """
    a, b = prime_modes(in_dim), prime_modes(out_dim)
    d = max(len(a), len(b))
    return a + [1] * (d - len(a)), b + [1] * (d - len(b))


@dataclass(frozen=True)
class TTMatrixMap:
    """Tensor-train matrix ``in_dim -> out_dim`` plus activation.

    ``cores[k]`` has shape ``(ranks[k], in_modes[k], out_modes[k], ranks[k+1])``.
    """

    in_dim: int
    out_dim: int
    cores: tuple[np.ndarray, ...] = field(repr=False)
    activation: str = "tanh"

    def __post_init__(self):
        cores = tuple(np.asarray(c, dtype=float) for c in self.cores)
        if not cores or any(c.ndim != 4 for c in cores):
            raise ValueError("cores must be a nonempty list of 4-index arrays")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise ValueError("boundary ranks must be 1")
        for left, right in zip(cores, cores[1:]):
            if left.shape[3] != right.shape[0]:
                raise ValueError("adjacent ranks do not match")
        if math.prod(c.shape[1] for c in cores) < self.in_dim:
            raise ValueError("input modes do not cover in_dim")
        if math.prod(c.shape[2] for c in cores) < self.out_dim:
            raise ValueError("output modes do not cover out_dim")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "cores", cores)

    @classmethod
    def random(cls, in_dim: int, out_dim: int, rank: int, rng: np.random.Generator,
               input_norm: str = "entry", activation: str = "tanh") -> "TTMatrixMap":
        """Gaussian cores with the rank capped at ``rank``.

        ``input_norm="entry"`` targets inputs with unit-variance entries,
        ``"unit"`` targets unit-norm inputs; either way the pre-activation
        outputs have variance about ``1/rank``.
        """
        ins, outs = match_modes(in_dim, out_dim)
        ranks = tt_ranks(ins, outs, rank)
        cores = []
        for k, (i, o) in enumerate(zip(ins, outs)):
            var = 1.0 / (rank * i) if input_norm == "entry" else 1.0 / rank
            if input_norm not in ("entry", "unit"):
                raise ValueError(f"unknown input_norm {input_norm!r}")
            cores.append(rng.normal(0.0, math.sqrt(var), size=(ranks[k], i, o, ranks[k + 1])))
        return cls(in_dim, out_dim, tuple(cores), activation)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, rank: int | None = None, activation: str = "identity") -> "TTMatrixMap":
        """TT-SVD of a dense ``(out, in)`` matrix; exact when ``rank`` is None."""
        out_dim, in_dim = matrix.shape
        ins, outs = match_modes(in_dim, out_dim)
        full = np.zeros((math.prod(outs), math.prod(ins)))
        full[:out_dim, :in_dim] = matrix
        d = len(ins)
        # index order (i1, o1, i2, o2, ...) so sequential SVDs peel one core at a time
        t = full.reshape(outs + ins).transpose([x for k in range(d) for x in (d + k, k)])
        cores, r_left = [], 1
        rest = t.reshape(1, -1)
        for k in range(d - 1):
            rest = rest.reshape(r_left * ins[k] * outs[k], -1)
            u, s, vt = np.linalg.svd(rest, full_matrices=False)
            keep = int(np.sum(s > 1e-12 * max(s[0], 1e-300))) or 1
            if rank is not None:
                keep = min(keep, rank)
            cores.append(u[:, :keep].reshape(r_left, ins[k], outs[k], keep))
            rest = s[:keep, None] * vt[:keep]
            r_left = keep
        cores.append(rest.reshape(r_left, ins[-1], outs[-1], 1))
        return cls(in_dim, out_dim, tuple(cores), activation)

    @property
    def ranks(self) -> list[int]:
        return [c.shape[0] for c in self.cores] + [1]

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def in_modes(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def out_modes(self) -> list[int]:
        return [c.shape[2] for c in self.cores]

    @property
    def n_params(self) -> int:
        return sum(c.size for c in self.cores)

    def with_core_entry(self, core: int, index: tuple[int, ...], delta: float) -> "TTMatrixMap":
        cores = [c.copy() for c in self.cores]
        cores[core][index] += delta
        return TTMatrixMap(self.in_dim, self.out_dim, tuple(cores), self.activation)

    def densify(self) -> np.ndarray:
        """Dense ``(out_dim, in_dim)`` matrix of the linear part."""
        return np.stack([self.linear(e) for e in np.eye(self.in_dim)], axis=1)

    def linear(self, v: np.ndarray) -> np.ndarray:
        """TT-matrix times vector(s), without activation."""
        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        v = np.atleast_2d(v)
        if v.shape[1] != self.in_dim:
            raise ValueError(f"input length {v.shape[1]} != {self.in_dim}")
        b = v.shape[0]
        n_in = math.prod(self.in_modes)
        padded = np.zeros((b, n_in))
        padded[:, : self.in_dim] = v
        # carry: (batch, produced outputs, bond, remaining inputs)
        t = padded.reshape(b, 1, 1, n_in)
        for core in self.cores:
            r, i, o, r2 = core.shape
            t = t.reshape(b, t.shape[1], r, i, -1)
            t = np.einsum("bpaiq,aior->bporq", t, core)
            t = t.reshape(b, t.shape[1] * o, r2, -1)
        out = t.reshape(b, -1)[:, : self.out_dim]
        return out[0] if single else out

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return tt_contract(self, v)

    def to_dict(self) -> dict:
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "activation": self.activation,
                "in_modes": self.in_modes, "out_modes": self.out_modes, "ranks": self.ranks}


def tt_ranks(ins: list[int], outs: list[int], rank: int) -> list[int]:
    """Bond ranks capped by ``rank`` and by the dimensions on either side."""
    sizes = [i * o for i, o in zip(ins, outs)]
    d = len(sizes)
    ranks = [1]
    for k in range(1, d):
        left, right = math.prod(sizes[:k]), math.prod(sizes[k:])
        ranks.append(min(rank, left, right))
    return ranks + [1]


def activate(y: np.ndarray, kind: str) -> np.ndarray:
    return np.pi * np.tanh(y) if kind == "tanh" else y


def tt_contract(tt: TTMatrixMap, v: np.ndarray) -> np.ndarray:
    """Activation of the TT-matrix product; batched over leading axis."""
    return activate(tt.linear(v), tt.activation)


# ---------------------------------------------------------------------------
# model families


@dataclass(frozen=True)
class TensorStructuredModel:
    """One drawn instance of a tensor-structured VQC.

    ``variant`` is ``"tn-vqc"`` (``tt`` encodes inputs to n angles) or
    ``"tensor-hyper"`` (``tt`` maps a seed of length ``sigma_dim`` to the
    circuit's ``param_count`` angles).
    """

    variant: str
    tt: TTMatrixMap
    circuit: CircuitLayout
    sigma_dim: int = 0

    def __post_init__(self):
        n = self.circuit.n_qubits
        if self.variant == "tn-vqc":
            if self.tt.out_dim != n:
                raise ValueError("TN-VQC encoder must output one angle per qubit")
        elif self.variant == "tensor-hyper":
            if self.tt.out_dim != self.circuit.param_count or self.tt.in_dim != self.sigma_dim:
                raise ValueError("hypernetwork must map sigma_dim -> param_count")
        else:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def n_qubits(self) -> int:
        return self.circuit.n_qubits

    def with_tt(self, tt: TTMatrixMap) -> "TensorStructuredModel":
        return TensorStructuredModel(self.variant, tt, self.circuit, self.sigma_dim)

    def to_json(self) -> str:
        return json.dumps({"variant": self.variant, "sigma_dim": self.sigma_dim, "tt": self.tt.to_dict(),
                           "circuit": json.loads(self.circuit.to_json())}, sort_keys=True)


def structured_circuit(n: int, depth: int) -> CircuitLayout:
    """Chain-entangled HEA: each layer crosses a contiguous cut with one CZ."""
    return build_hea(n, depth, entangler="chain")


def make_tn_vqc(n: int, depth: int, rank: int, rng: np.random.Generator, input_dim: int | None = None) -> TensorStructuredModel:
    """TN-VQC with a fresh encoder; inputs are expected at unit norm."""
    input_dim = 4 * n if input_dim is None else input_dim
    tt = TTMatrixMap.random(input_dim, n, rank, rng, input_norm="unit")
    return TensorStructuredModel("tn-vqc", tt, structured_circuit(n, depth))


def hyper_sigma_dim(p: int) -> int:
    return smooth_ceiling(p)


def make_tensor_hyper(n: int, depth: int, rank: int, rng: np.random.Generator) -> TensorStructuredModel:
    """TensorHyper-VQC with a fresh hypernetwork; seeds are standard normal."""
    circuit = structured_circuit(n, depth)
    p = circuit.param_count
    sigma_dim = hyper_sigma_dim(p)
    tt = TTMatrixMap.random(sigma_dim, p, rank, rng, input_norm="entry")
    return TensorStructuredModel("tensor-hyper", tt, circuit, sigma_dim)


def tn_vqc_forward(model: TensorStructuredModel, x, theta, obs: Observable):
    """Expectation of ``obs`` on W(theta) U(T(x; phi)) |0>; batched over x or theta."""
    if model.variant != "tn-vqc":
        raise ValueError("tn_vqc_forward needs a tn-vqc model")
    angles = tt_contract(model.tt, x)
    n = model.n_qubits
    return expectation(model.circuit, theta, EncodingSpec.angle(n), angles, obs)


def hyper_parameters(model: TensorStructuredModel, sigma) -> np.ndarray:
    if model.variant != "tensor-hyper":
        raise ValueError("needs a tensor-hyper model")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[-1] != model.sigma_dim:
        raise ValueError(f"sigma must have length {model.sigma_dim}")
    return tt_contract(model.tt, sigma)


def tensor_hyper_forward(model: TensorStructuredModel, x, sigma, obs: Observable):
    """Expectation of ``obs`` on W(T(sigma; phi)) U(x) |0>; batched over x or sigma."""
    theta = hyper_parameters(model, sigma)
    n = model.n_qubits
    return expectation(model.circuit, theta, EncodingSpec.angle(n), x, obs)


def hyper_core_gradient(model: TensorStructuredModel, x, sigma, obs: Observable,
                        core: int, index: tuple[int, ...], h: float = 1e-4) -> float:
    """Central-difference derivative of the TensorHyper output w.r.t. one core entry."""
    up = tensor_hyper_forward(model.with_tt(model.tt.with_core_entry(core, index, h)), x, sigma, obs)
    down = tensor_hyper_forward(model.with_tt(model.tt.with_core_entry(core, index, -h)), x, sigma, obs)
    return (up - down) / (2 * h)


# ---------------------------------------------------------------------------
# ensemble scans over random model draws

FAMILIES = ("naive", "tn-vqc", "tensor-hyper")


def family_input(family: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """One unit-norm standard-normal input of the family's input dimension."""
    dim = 4 * n if family == "tn-vqc" else n
    x = rng.standard_normal(dim)
    return x / np.linalg.norm(x)


def default_depth(family: str, n: int) -> int:
    """Deep (4n) for the unstructured ansatz, fixed (2) for tensor families."""
    return 4 * n if family == "naive" else 2


def family_outputs(family: str, n: int, x, trials: int, rng: np.random.Generator,
                   obs: Observable, depth: int | None = None, rank: int = 2) -> np.ndarray:
    """Model outputs at input ``x`` for ``trials`` independent model draws.

    naive: theta ~ U(-pi, pi) on a ring HEA.  tn-vqc: fresh encoder cores and
    theta per draw.  tensor-hyper: fresh hypernetwork cores and seed sigma.
    """
    depth = default_depth(family, n) if depth is None else depth
    if family == "naive":
        layout = build_hea(n, depth)
        theta = rng.uniform(-np.pi, np.pi, size=(trials, layout.param_count))
        return np.asarray(expectation(layout, theta, EncodingSpec.angle(n), x, obs))
    if family == "tn-vqc":
        models = [make_tn_vqc(n, depth, rank, rng, input_dim=len(x)) for _ in range(trials)]
        angles = np.stack([tt_contract(m.tt, x) for m in models])
        circuit = models[0].circuit
        theta = rng.uniform(-np.pi, np.pi, size=(trials, circuit.param_count))
        return np.asarray(expectation(circuit, theta, EncodingSpec.angle(n), angles, obs))
    if family == "tensor-hyper":
        models = [make_tensor_hyper(n, depth, rank, rng) for _ in range(trials)]
        theta = np.stack([hyper_parameters(m, rng.standard_normal(m.sigma_dim)) for m in models])
        return np.asarray(expectation(models[0].circuit, theta, EncodingSpec.angle(n), x, obs))
    raise ValueError(f"unknown family {family!r}")


def hyper_core_gradient_samples(n: int, x, trials: int, rng: np.random.Generator, obs: Observable,
                                core: int = 0, depth: int = 2, rank: int = 2, h: float = 1e-4) -> np.ndarray:
    """Central-difference derivatives w.r.t. every entry of one hypernetwork core.

    Returns ``(trials, core.size)``; each row is a fresh (phi, sigma) draw.
    """
    models = [make_tensor_hyper(n, depth, rank, rng) for _ in range(trials)]
    sigmas = [rng.standard_normal(m.sigma_dim) for m in models]
    shape = models[0].tt.cores[core].shape
    circuit, enc = models[0].circuit, EncodingSpec.angle(n)
    out = np.empty((trials, math.prod(shape)))
    for j, index in enumerate(np.ndindex(*shape)):
        plus = np.stack([hyper_parameters(m.with_tt(m.tt.with_core_entry(core, index, h)), s)
                         for m, s in zip(models, sigmas)])
        minus = np.stack([hyper_parameters(m.with_tt(m.tt.with_core_entry(core, index, -h)), s)
                          for m, s in zip(models, sigmas)])
        both = np.asarray(expectation(circuit, np.concatenate([plus, minus]), enc, x, obs))
        out[:, j] = (both[:trials] - both[trials:]) / (2 * h)
    return out


@dataclass(frozen=True)
class ScanPoint:
    n: int
    variance: Estimate
    mean: Estimate


MIN_SCAN_TRIALS = 100


def anti_concentration_scan(family: str, n_range, trials: int, seed, obs_for=None,
                            depth: int | None = None, rank: int = 2) -> list[ScanPoint]:
    """Output variance over random model draws at one fixed input, per n.

    ``obs_for(n)`` builds the observable (default Z on qubit 0).  Each n
    gets its own stream so points are independent of the range scanned.
    """
    if trials < MIN_SCAN_TRIALS:
        raise ValueError(f"need at least {MIN_SCAN_TRIALS} trials")
    obs_for = z_observable if obs_for is None else obs_for
    base = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    points = []
    for n in n_range:
        rng = base.child("anti-concentration", family, n).rng()
        x = family_input(family, n, rng)
        vals = family_outputs(family, n, x, trials, rng, obs_for(n), depth, rank)
        points.append(ScanPoint(n, variance_estimate(vals, rng), mean_estimate(vals)))
    return points
