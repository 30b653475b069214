"""Experiment drivers.

Each driver splits its work into independent tasks keyed by (model, n,
seed, ...), draws every random number from a stream derived from the
master seed and the task key, and merges rows in sorted order.  Results
are therefore identical whatever the worker count or completion order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..circuits import EncodingSpec, build_hea, expectation
from ..design import (
    brickwork_sampler,
    choi_purity_stats,
    frame_potential,
    frame_potential_all_pairs,
    haar_choi_purity,
    haar_frame_potential,
    haar_sampler,
    hea_sampler,
    second_moment_distance,
)
from ..ensembles import CircuitEnsemble, ParamDist, SeedSpec, haar_states, stream_id, unit_norm_inputs
from ..gradients import generator_observable, gradient_statistics, parameter_shift_gradient
from ..numeric import EQUAL_TOL, UNITARY_QUBIT_CAP, Bipartition, InvariantViolation, Observable
from ..stats import fit_slope, mean_estimate, variance_estimate
from ..tensor import (
    family_input,
    family_outputs,
    hyper_core_gradient_samples,
    hyper_parameters,
    make_tensor_hyper,
    make_tn_vqc,
    tt_contract,
)
from .config import ExperimentConfig, parse_observable
from .table import ResultTable, Row

SECOND_MOMENT_MAX_QUBITS = 5


def run_tasks(fn, tasks: list, jobs: int = 1) -> list:
    """``[fn(t) for t in tasks]``, optionally across processes; order preserved."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _stream(cfg: ExperimentConfig, *parts) -> np.random.Generator:
    return SeedSpec(cfg.master_seed, stream_id(cfg.experiment, *parts)).rng()


def _checked(values) -> np.ndarray:
    """Model outputs must be finite and lie in [-1, 1] for a norm-1 observable."""
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvariantViolation("non-finite model output")
    if v.size and np.max(np.abs(v)) > 1 + EQUAL_TOL:
        raise InvariantViolation(f"model output {np.max(np.abs(v)):.12g} outside [-1, 1]")
    return v


def haar_output_variance(obs: Observable) -> float:
    """Tr(O^2)/(d(d+1)) - Tr(O)^2/(d^2(d+1)) for f = <psi|O|psi> over Haar psi."""
    d = 2**obs.n_qubits
    rest = 2 ** (obs.n_qubits - len(obs.support))
    tr = float(np.real(np.trace(obs.local))) * rest
    tr2 = float(np.real(np.trace(obs.local @ obs.local))) * rest
    return tr2 / (d * (d + 1)) - tr**2 / (d**2 * (d + 1))


def haar_output_mean(obs: Observable) -> float:
    rest = 2 ** (obs.n_qubits - len(obs.support))
    return float(np.real(np.trace(obs.local))) * rest / 2**obs.n_qubits


def _slope_rows(exp: str, model: str, points: list[tuple[int, float]], stat: str) -> list[Row]:
    """log2-linear fit of a positive statistic against n; empty when not fittable."""
    pts = [(n, v) for n, v in points if v > 0]
    if len(pts) < 2 or len(pts) != len(points):
        return []
    fit = fit_slope([n for n, _ in pts], [math.log2(v) for _, v in pts])
    factor = fit.factor_per_step
    return [Row(exp, None, None, model, None, f"log2_{stat}_slope", fit.slope, fit.stderr),
            Row(exp, None, None, model, None, f"{stat}_factor_per_qubit", factor, factor * math.log(2) * fit.stderr)]


def _seed_aggregates(rows: list[Row], stat: str) -> list[Row]:
    """Mean (with standard error) and standard deviation over the per-seed rows."""
    groups: dict[tuple, list[Row]] = {}
    for r in rows:
        if r.statistic == stat and r.seed is not None:
            groups.setdefault((r.experiment, r.n, r.m, r.model), []).append(r)
    out = []
    for (exp, n, m, model), grp in sorted(groups.items(), key=lambda kv: tuple(-1 if v is None else v for v in kv[0])):
        vals = np.array([r.value for r in sorted(grp, key=lambda r: r.seed)])
        est = mean_estimate(vals)
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out.append(Row(exp, n, m, model, None, f"{stat}_mean", est.value, est.stderr))
        out.append(Row(exp, n, m, model, None, f"{stat}_sd", sd, 0.0))
    return out


def _finish(cfg: ExperimentConfig, rows: list[Row]) -> ResultTable:
    return ResultTable(rows, cfg).sorted()


# ---------------------------------------------------------------------------
# dataset-variance experiment (fig4 subcommand)


def _fig4_inputs(cfg: ExperimentConfig, model: str, seed: int, m: int) -> np.ndarray:
    dim = 4 * cfg.n if model == "tn-vqc" else cfg.n
    return unit_norm_inputs(m, dim, _stream(cfg, "data", dim, seed, m))


def _fig4_task(args) -> list[Row]:
    cfg, model, seed = args
    n, obs = cfg.n, parse_observable(cfg.observable, cfg.n)
    rng = _stream(cfg, "model", model, seed)
    enc = EncodingSpec.angle(n)
    dist = ParamDist(cfg.param_dist, cfg.param_scale)
    if model == "naive":
        layout = build_hea(n, cfg.depth)
        theta = dist.sample(rng, layout.param_count)
        forward = lambda x: expectation(layout, theta, enc, x, obs)  # noqa: E731
    elif model == "tn-vqc":
        tn = make_tn_vqc(n, cfg.depth, cfg.rank, rng)
        theta = dist.sample(rng, tn.circuit.param_count)
        forward = lambda x: expectation(tn.circuit, theta, enc, tt_contract(tn.tt, x), obs)  # noqa: E731
    else:
        hyper = make_tensor_hyper(n, cfg.depth, cfg.rank, rng)
        theta = hyper_parameters(hyper, rng.standard_normal(hyper.sigma_dim))
        forward = lambda x: expectation(hyper.circuit, theta, enc, x, obs)  # noqa: E731
    rows = []
    for m in cfg.m_list:
        vals = _checked(np.atleast_1d(forward(_fig4_inputs(cfg, model, seed, m))))
        var = variance_estimate(vals, _stream(cfg, "bootstrap", model, seed, m))
        rows.append(Row(cfg.experiment, n, m, model, seed, "var_x", var.value, var.stderr))
    return rows


def run_fig4(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Variance of outputs over datasets of size m, per model and seed."""
    tasks = [(cfg, model, seed) for model in cfg.models for seed in range(cfg.seeds)]
    rows = [r for chunk in run_tasks(_fig4_task, tasks, jobs) for r in chunk]
    rows += _seed_aggregates(rows, "var_x")
    obs = parse_observable(cfg.observable, cfg.n)
    rows.append(Row(cfg.experiment, cfg.n, None, "haar", None, "var_haar", haar_output_variance(obs), 0.0))
    return _finish(cfg, rows)


# ---------------------------------------------------------------------------
# output concentration over parameter draws


def _ensemble_outputs(cfg: ExperimentConfig, n: int, count: int, rng: np.random.Generator) -> tuple[str, np.ndarray]:
    """Outputs of the deep HEA at one fixed input, or of exact Haar states."""
    obs = parse_observable(cfg.observable, n)
    if cfg.ensemble == "haar" or (cfg.experiment == "tail" and n >= 10):
        return "haar", _checked(obs.values(haar_states(n, count, rng)))
    layout = build_hea(n, cfg.depth_per_qubit * n)
    x = family_input("naive", n, rng)
    theta = ParamDist(cfg.param_dist, cfg.param_scale).sample(rng, (count, layout.param_count))
    return "naive", _checked(expectation(layout, theta, EncodingSpec.angle(n), x, obs))


def _concentration_task(args) -> list[Row]:
    cfg, n = args
    rng = _stream(cfg, n)
    obs = parse_observable(cfg.observable, n)
    model, vals = _ensemble_outputs(cfg, n, cfg.trials, rng)
    mean, var = mean_estimate(vals), variance_estimate(vals, rng)
    e = cfg.experiment
    return [Row(e, n, None, model, None, "output_mean", mean.value, mean.stderr),
            Row(e, n, None, model, None, "output_mean_target", haar_output_mean(obs), 0.0),
            Row(e, n, None, model, None, "output_var", var.value, var.stderr),
            Row(e, n, None, model, None, "output_var_haar", haar_output_variance(obs), 0.0)]


def run_output_concentration(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Mean and variance of f over parameter draws at fixed input, per n."""
    rows = [r for chunk in run_tasks(_concentration_task, [(cfg, n) for n in cfg.n_range], jobs) for r in chunk]
    var = [r for r in rows if r.statistic == "output_var"]
    if var:
        rows += _slope_rows(cfg.experiment, var[0].model, [(r.n, r.value) for r in var], "output_var")
    return _finish(cfg, rows)


# ---------------------------------------------------------------------------
# tail probability


def _eps_label(eps: float) -> str:
    return repr(float(eps))


def _tail_task(args) -> list[Row]:
    cfg, n = args
    rng = _stream(cfg, n)
    obs = parse_observable(cfg.observable, n)
    model, vals = _ensemble_outputs(cfg, n, cfg.trials, rng)
    dev = np.abs(vals - haar_output_mean(obs))
    rows = []
    for eps in cfg.eps_list:
        p = float(np.mean(dev > eps))
        rows.append(Row(cfg.experiment, n, None, model, None, f"exceed_freq_{_eps_label(eps)}",
                        p, math.sqrt(p * (1 - p) / vals.size)))
    return rows


def run_tail_probability(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Exceedance frequencies Pr(|f - Tr(O)/d| > eps) per (n, eps)."""
    rows = [r for chunk in run_tasks(_tail_task, [(cfg, n) for n in cfg.n_range], jobs) for r in chunk]
    for eps in cfg.eps_list:
        stat = f"exceed_freq_{_eps_label(eps)}"
        freqs = [r.value for r in sorted((r for r in rows if r.statistic == stat), key=lambda r: r.n)]
        monotone = all(b <= a for a, b in zip(freqs, freqs[1:]))
        rows.append(Row(cfg.experiment, None, None, "all", None, f"monotone_{_eps_label(eps)}", float(monotone), 0.0))
    return _finish(cfg, rows)


# ---------------------------------------------------------------------------
# spread of outputs over a finite dataset


def _spread_task(args) -> list[Row]:
    cfg, model, n, seed = args
    rng = _stream(cfg, model, n, seed)
    obs = parse_observable(cfg.observable, n)
    enc = EncodingSpec.angle(n)
    dist = ParamDist(cfg.param_dist, cfg.param_scale)
    if model == "naive":
        layout = build_hea(n, cfg.depth_per_qubit * n)
        if cfg.input_kind == "uniform-angle":
            x = rng.uniform(-np.pi, np.pi, size=(cfg.m, n))
        else:
            x = unit_norm_inputs(cfg.m, n, rng)
        vals = expectation(layout, dist.sample(rng, layout.param_count), enc, x, obs)
    elif model == "tn-vqc":
        tn = make_tn_vqc(n, cfg.ts_depth, cfg.rank, rng)
        x = unit_norm_inputs(cfg.m, 4 * n, rng)
        vals = expectation(tn.circuit, dist.sample(rng, tn.circuit.param_count), enc, tt_contract(tn.tt, x), obs)
    else:
        hyper = make_tensor_hyper(n, cfg.ts_depth, cfg.rank, rng)
        theta = hyper_parameters(hyper, rng.standard_normal(hyper.sigma_dim))
        x = rng.uniform(-np.pi, np.pi, size=(cfg.m, n)) if cfg.input_kind == "uniform-angle" else unit_norm_inputs(cfg.m, n, rng)
        vals = expectation(hyper.circuit, theta, enc, x, obs)
    vals = _checked(np.atleast_1d(vals))
    rows = [Row(cfg.experiment, n, cfg.m, model, seed, "spread", dataset_spread(vals), 0.0)]
    if vals.size >= 2:
        gap = float(abs(vals[0] - vals[1]) >= cfg.gap_delta)
        rows.append(Row(cfg.experiment, n, cfg.m, model, seed, "gap_ge_delta", gap, 0.0))
    return rows


def dataset_spread(values) -> float:
    """max_{i,j} |f(x_i) - f(x_j)| = max - min."""
    v = np.asarray(values, dtype=float)
    return float(v.max() - v.min()) if v.size else 0.0


def run_spread_scan(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Max pairwise output spread over an m-point dataset, per (model, n, seed)."""
    tasks = [(cfg, model, n, seed) for model in cfg.models for n in cfg.n_range for seed in range(cfg.seeds)]
    rows = [r for chunk in run_tasks(_spread_task, tasks, jobs) for r in chunk]
    rows += _seed_aggregates(rows, "spread") + _seed_aggregates(rows, "gap_ge_delta")
    for model in cfg.models:
        means = sorted((r.n, r.value) for r in rows if r.model == model and r.statistic == "spread_mean")
        rows += _slope_rows(cfg.experiment, model, means, "spread")
        decreasing = all(b < a for (_, a), (_, b) in zip(means, means[1:]))
        rows.append(Row(cfg.experiment, None, cfg.m, model, None, "spread_strictly_decreasing", float(decreasing), 0.0))
    return _finish(cfg, rows)


# ---------------------------------------------------------------------------
# gradients and output variance over model draws


def _generator_checks(cfg: ExperimentConfig, n: int, layout, rng: np.random.Generator) -> list[Row]:
    """Trace and norm of the explicit generator at sampled (theta, k)."""
    obs = parse_observable(cfg.observable, n)
    dist = ParamDist(cfg.param_dist, cfg.param_scale)
    x = family_input("naive", n, rng)
    enc = EncodingSpec.angle(n)
    max_trace = max_norm = max_mismatch = 0.0
    for i in range(cfg.trace_checks):
        theta = dist.sample(rng, layout.param_count)
        k = cfg.grad_slot if i == 0 else int(rng.integers(layout.param_count))
        frame = generator_observable(layout, theta, obs, k, enc, x)
        max_trace = max(max_trace, abs(frame.trace()))
        if k == cfg.grad_slot:
            max_norm = max(max_norm, float(np.max(np.abs(np.linalg.eigvalsh(frame.matrix)))))
        ps = parameter_shift_gradient(layout, theta, enc, x, obs, k)
        max_mismatch = max(max_mismatch, abs(frame.gradient() - ps))
    if max_trace > EQUAL_TOL or max_mismatch > EQUAL_TOL or max_norm > 1 + EQUAL_TOL:
        raise InvariantViolation(f"generator check failed at n={n}: trace {max_trace:.3e}, "
                                 f"norm {max_norm:.6f}, mismatch {max_mismatch:.3e}")
    e, d = cfg.experiment, 2**n
    return [Row(e, n, None, "naive", None, "max_abs_generator_trace", max_trace, 0.0),
            Row(e, n, None, "naive", None, "max_generator_norm", max_norm, 0.0),
            Row(e, n, None, "naive", None, "grad_var_bound", 3 * max_norm**2 / (d + 1), 0.0)]


def _gradient_task(args) -> list[Row]:
    cfg, family, n = args
    rng = _stream(cfg, family, n)
    obs = parse_observable(cfg.observable, n)
    enc = EncodingSpec.angle(n)
    e, t = cfg.experiment, cfg.trials
    dist = ParamDist(cfg.param_dist, cfg.param_scale)
    x = family_input(family, n, rng)
    rows = []
    if family == "naive":
        layout = build_hea(n, cfg.depth_per_qubit * n)
        stats = gradient_statistics(CircuitEnsemble(layout, dist), x, obs, cfg.grad_slot, t, rng)
        grads = stats.samples
        outputs = expectation(layout, dist.sample(rng, (t, layout.param_count)), enc, x, obs)
        if n <= UNITARY_QUBIT_CAP:
            rows += _generator_checks(cfg, n, layout, rng)
    elif family == "tn-vqc":
        models = [make_tn_vqc(n, cfg.ts_depth, cfg.rank, rng, input_dim=x.size) for _ in range(t)]
        circuit = models[0].circuit
        angles = np.stack([tt_contract(mdl.tt, x) for mdl in models])
        theta = dist.sample(rng, (t, circuit.param_count))
        outputs = expectation(circuit, theta, enc, angles, obs)
        grads = np.asarray(parameter_shift_gradient(circuit, theta, enc, angles, obs, cfg.grad_slot))
    else:
        outputs = family_outputs(family, n, x, t, rng, obs, cfg.ts_depth, cfg.rank)
        core = hyper_core_gradient_samples(n, x, t, rng, obs, core=0, depth=cfg.ts_depth, rank=cfg.rank)
        grads = core[:, 0]
        for j in range(core.shape[1]):
            v = variance_estimate(core[:, j], rng)
            rows.append(Row(e, n, None, family, None, f"core_grad_var_{j}", v.value, v.stderr))
        rows.append(Row(e, n, None, family, None, "core_grad_var_max", float(core.var(axis=0, ddof=1).max()), 0.0))
    _checked(outputs)
    mean, var = mean_estimate(grads), variance_estimate(grads, rng)
    out_var = variance_estimate(np.asarray(outputs), rng)
    rows += [Row(e, n, None, family, None, "grad_mean", mean.value, mean.stderr),
             Row(e, n, None, family, None, "grad_var", var.value, var.stderr),
             Row(e, n, None, family, None, "output_var", out_var.value, out_var.stderr)]
    return rows


def run_gradient_scan(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Derivative and output statistics over model draws, per family and n.

    naive: parameter-shift derivative w.r.t. slot ``grad_slot`` of the deep
    HEA.  tn-vqc: same for the structured circuit behind a fresh encoder.
    tensor-hyper: central differences w.r.t. the first hypernetwork core.
    """
    tasks = [(cfg, family, n) for family in cfg.models for n in cfg.n_range]
    rows = [r for chunk in run_tasks(_gradient_task, tasks, jobs) for r in chunk]
    for family in cfg.models:
        for stat in ("grad_var", "output_var"):
            pts = sorted((r.n, r.value) for r in rows if r.model == family and r.statistic == stat)
            rows += _slope_rows(cfg.experiment, family, pts, stat)
    return _finish(cfg, rows)


# ---------------------------------------------------------------------------
# design diagnostics

# hea-deep-chain drops the ring's wrap-around CZ.  The ring HEA built from
# R_Y, R_Z and a CZ ring commutes with Y^{(x)n} complex conjugation (up to
# sign), so it is confined to a symplectic/orthogonal subgroup whose
# frame potential is 3; the chain variant has no such symmetry.
DESIGN_ENSEMBLES = ("haar", "hea-deep", "hea-deep-chain", "hea-shallow", "brickwork")


def _design_sampler(cfg: ExperimentConfig, ensemble: str, n: int):
    dist = ParamDist(cfg.param_dist, cfg.param_scale)
    if ensemble == "haar":
        return haar_sampler(n)
    if ensemble == "hea-deep":
        return hea_sampler(n, cfg.depth_per_qubit * n, dist)
    if ensemble == "hea-deep-chain":
        return hea_sampler(n, cfg.depth_per_qubit * n, dist, entangler="chain")
    if ensemble == "hea-shallow":
        return hea_sampler(n, 1, dist)
    return brickwork_sampler(n, cfg.brickwork_layers)


def _design_task(args) -> list[Row]:
    cfg, ensemble, n = args
    rng = _stream(cfg, ensemble, n)
    sampler = _design_sampler(cfg, ensemble, n)
    cut = Bipartition.balanced(n)
    e = cfg.experiment
    fp = frame_potential(sampler, cfg.pairs, rng)
    purity, k, min_times_k = choi_purity_stats(sampler, cut, cfg.samples, rng)
    if min_times_k < 1 - EQUAL_TOL:
        raise InvariantViolation(f"Choi purity below 1/OSR for {ensemble} at n={n}")
    rows = [Row(e, n, None, ensemble, None, "frame_potential_2", fp.value, fp.stderr),
            Row(e, n, None, ensemble, None, "frame_potential_2_all_pairs",
                frame_potential_all_pairs(sampler, cfg.samples, rng), 0.0),
            Row(e, n, None, ensemble, None, "frame_potential_2_haar", haar_frame_potential(2), 0.0),
            Row(e, n, None, ensemble, None, "choi_purity", purity.value, purity.stderr),
            Row(e, n, None, ensemble, None, "choi_purity_haar", haar_choi_purity(cut), 0.0),
            Row(e, n, None, ensemble, None, "max_osr", float(k), 0.0),
            Row(e, n, None, ensemble, None, "min_purity_times_osr", min_times_k, 0.0)]
    if n <= SECOND_MOMENT_MAX_QUBITS:
        states = np.stack([sampler(rng)[:, 0] for _ in range(cfg.samples)])
        sm = second_moment_distance(states)
        rows.append(Row(e, n, None, ensemble, None, "second_moment_distance", sm.distance, sm.max_stderr))
    return rows


def run_design_diagnostics(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Frame potential, Choi purity, OSR and second-moment distance per ensemble and n."""
    tasks = [(cfg, ens, n) for ens in DESIGN_ENSEMBLES for n in cfg.n_range]
    rows = [r for chunk in run_tasks(_design_task, tasks, jobs) for r in chunk]
    for ens in DESIGN_ENSEMBLES:
        pts = sorted((r.n, r.value) for r in rows if r.model == ens and r.statistic == "choi_purity")
        fit_rows = _slope_rows(cfg.experiment, ens, pts, "choi_purity")
        rows += fit_rows
        for r in fit_rows:
            if r.statistic == "choi_purity_factor_per_qubit":
                # decay factor: how many times smaller the purity gets per added qubit
                decay = 1.0 / r.value
                rows.append(Row(cfg.experiment, None, None, ens, None, "choi_purity_decay_per_qubit",
                                decay, decay * r.stderr / r.value))
    return _finish(cfg, rows)


RUNNERS = {
    "fig4": run_fig4,
    "concentration": run_output_concentration,
    "tail": run_tail_probability,
    "spread": run_spread_scan,
    "gradients": run_gradient_scan,
    "design": run_design_diagnostics,
}


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg.validate(), jobs)
