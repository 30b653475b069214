import numpy as np
import pytest
from scipy import stats

from vqclab.design import frame_potential, haar_sampler
from vqclab.ensembles import (
    CircuitEnsemble,
    ParamDist,
    SeedSpec,
    haar_states,
    sample_haar_state,
    sample_haar_unitary,
    sample_params,
    stream_id,
    unit_norm_inputs,
)
from vqclab.circuits import build_hea, z_observable


class TestHaarStates:
    def test_single_qubit_mean_z(self):
        psi = haar_states(1, 20000, 1)
        z = np.abs(psi[:, 0]) ** 2 - np.abs(psi[:, 1]) ** 2
        assert abs(z.mean()) <= 3 / np.sqrt(20000)

    def test_unit_norm(self):
        psi = haar_states(4, 500, 2)
        assert np.max(np.abs(np.linalg.norm(psi, axis=1) - 1)) <= 1e-12
        assert abs(np.linalg.norm(sample_haar_state(3, 5).amplitudes) - 1) <= 1e-12

    def test_first_moment_is_maximally_mixed(self):
        psi = haar_states(3, 20000, 3)
        outer = psi[:, :, None] * psi[:, None, :].conj()
        mean = outer.mean(axis=0)
        se = outer.std(axis=0) / np.sqrt(len(psi))
        dev = np.abs(mean - np.eye(8) / 8)
        assert np.all(dev <= 5 * np.maximum(se, 1e-12))

    def test_unitary_invariance(self):
        v = sample_haar_unitary(3, 9)
        a = haar_states(3, 4000, 10)
        b = haar_states(3, 4000, 11) @ v.T
        obs = z_observable(3)
        assert stats.ks_2samp(obs.values(a), obs.values(b)).pvalue > 0.01

    def test_z_expectation_matches_beta_law(self):
        # <Z0> = 2B - 1 with B ~ Beta(d/2, d/2) for a Haar state in dimension d
        n = 4
        vals = z_observable(n).values(haar_states(n, 4000, 12))
        law = stats.beta(2 ** (n - 1), 2 ** (n - 1), loc=-1, scale=2)
        assert stats.kstest(vals, law.cdf).pvalue > 0.01


class TestHaarUnitaries:
    def test_unitary(self):
        for s in range(10):
            u = sample_haar_unitary(3, s)
            assert np.max(np.abs(u.conj().T @ u - np.eye(8))) <= 1e-10

    def test_first_moment(self):
        rng = np.random.default_rng(4)
        cols = np.stack([sample_haar_unitary(2, rng)[:, 0] for _ in range(20000)])
        mean = (cols[:, :, None] * cols[:, None, :].conj()).mean(axis=0)
        assert np.max(np.abs(mean - np.eye(4) / 4)) <= 0.02

    def test_frame_potential_two_qubits(self):
        fp = frame_potential(haar_sampler(2), 2000, np.random.default_rng(5))
        assert abs(fp.value - 2) <= 0.2


class TestParams:
    def test_uniform_mean(self):
        assert abs(sample_params(ParamDist("uniform"), 100_000, 1).mean()) <= 0.02

    def test_gaussian_variance(self):
        assert abs(sample_params(ParamDist("gaussian", 1.0), 100_000, 2).var() - 1) <= 0.02

    def test_uniform_range(self):
        p = sample_params(ParamDist(), 1000, 3)
        assert p.min() >= -np.pi and p.max() <= np.pi

    def test_determinism(self):
        spec = SeedSpec(7, stream_id("exp", 3))
        np.testing.assert_array_equal(sample_params(ParamDist(), 10, spec), sample_params(ParamDist(), 10, spec))

    def test_bad_distribution(self):
        with pytest.raises(ValueError):
            ParamDist("cauchy")
        with pytest.raises(ValueError):
            ParamDist("gaussian", 0.0)

    def test_circuit_ensemble_shapes(self):
        ens = CircuitEnsemble(build_hea(3, 2))
        assert ens.sample(1, batch=5).shape == (5, 12)


class TestSeeds:
    def test_stream_independence(self):
        a = SeedSpec(0, 0).rng().standard_normal(10_000)
        b = SeedSpec(0, 1).rng().standard_normal(10_000)
        assert abs(np.corrcoef(a, b)[0, 1]) <= 0.05

    def test_stream_id_stable(self):
        assert stream_id("fig4", 1) == stream_id("fig4", 1) != stream_id("fig4", 2)
        assert 0 <= stream_id("x") < 2**64

    def test_child_streams_differ(self):
        base = SeedSpec(3)
        assert base.child("a").stream_id != base.child("b").stream_id

    def test_seed_range(self):
        with pytest.raises(ValueError):
            SeedSpec(-1)
        with pytest.raises(ValueError):
            SeedSpec(2**64)

    def test_unit_norm_inputs(self):
        x = unit_norm_inputs(6, 5, 1)
        np.testing.assert_allclose(np.linalg.norm(x, axis=1), 1)
