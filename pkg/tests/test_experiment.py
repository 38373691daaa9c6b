import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsevss import channel as ch
from sparsevss import experiment as ex
from sparsevss.estimators import AlgoConfig


def quick(**kw):
    base = dict(N_t=2, N_r=2, L=8, T=1, snr_db=20.0, algo=AlgoConfig("VSS"),
                max_iter=300, num_runs=4, seed=7)
    base.update(kw)
    return ex.RunConfig(**base)


class TestMse:
    def test_identity(self, rng):
        H = ch.assemble(2, 2, 8, 2, rng)
        assert ex.mse(H, H.matrix) == 0

    def test_hand_value(self):
        H_hat = np.zeros((1, 4))
        H_hat[0, 2] = 0.3
        assert ex.mse(np.zeros((1, 4)), H_hat) == pytest.approx(0.09)

    def test_against_zero_is_rows(self, rng):
        H = ch.assemble(3, 2, 16, 4, rng)
        assert ex.mse(H, np.zeros_like(H.matrix)) == pytest.approx(3.0, abs=1e-12)

    def test_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            ex.mse(np.zeros((2, 4)), np.zeros((2, 5)))


class TestRunConfig:
    @pytest.mark.parametrize("field,value", [("max_iter", 0), ("tol", 0.0), ("num_runs", 0),
                                             ("mode", "quaternion"), ("T", 9)])
    def test_invalid(self, field, value):
        with pytest.raises(ValueError, match="invalid value"):
            quick(**{field: value})

    @pytest.mark.parametrize("snr,C", [(5.0, 1e-4), (10.0, 1e-5), (20.0, 1e-5), (0.0, 1e-4),
                                       (float("inf"), 1e-5)])
    def test_C_from_snr(self, snr, C):
        assert quick(snr_db=snr).effective_algo.C == C

    def test_C_override(self):
        assert quick(algo=AlgoConfig("VSS", C=3e-3)).effective_algo.C == 3e-3

    def test_default_window(self):
        assert quick().window == 2 * 2 * 8
        assert quick(stop_window=1).window == 1


class TestRunAdaptation:
    def test_noiseless_dense_siso(self, rng):
        cfg = ex.RunConfig(N_t=1, N_r=1, L=4, T=4, snr_db=float("inf"),
                           algo=AlgoConfig("ISS", mu=1.0), tol=1e-14, seed=3)
        H = ch.assemble(1, 1, 4, 4, rng)
        H_hat, trace, _ = ex.run_adaptation(cfg, H)
        assert trace.values[-1] < 1e-8
        assert trace.stop_reason == "tolerance"
        assert ex.mse(H, H_hat) == trace.values[-1]

    def test_single_iteration(self, rng):
        cfg = quick(max_iter=1)
        _, trace, steps = ex.run_adaptation(cfg, ch.assemble(2, 2, 8, 1, rng))
        assert len(trace.values) == 1 and trace.final_iter == 1
        assert trace.stop_reason == "max_iter"
        assert len(steps.mu) == 1

    def test_za_without_penalty_matches_vss(self, rng):
        H = ch.assemble(2, 2, 8, 1, rng)
        a = ex.run_adaptation(quick(algo=AlgoConfig("ZA_VSS", gamma_za=0.0)), H)[1]
        b = ex.run_adaptation(quick(), H)[1]
        np.testing.assert_array_equal(a.values, b.values)

    def test_dimension_check(self, rng):
        with pytest.raises(ValueError, match="config expects"):
            ex.run_adaptation(quick(), ch.assemble(1, 2, 8, 1, rng))

    def test_trace_invariants(self, rng):
        cfg = quick(algo=AlgoConfig("RZA_VSS"), snr_db=5.0, max_iter=500)
        _, trace, steps = ex.run_adaptation(cfg, ch.assemble(2, 2, 8, 1, rng))
        assert np.all(np.isfinite(trace.values)) and np.all(trace.values >= 0)
        assert np.all((steps.mu >= 0) & (steps.mu <= cfg.algo.mu_max))

    def test_iss_steps_constant(self, rng):
        cfg = quick(algo=AlgoConfig("ISS", mu=0.3))
        _, _, steps = ex.run_adaptation(cfg, ch.assemble(2, 2, 8, 1, rng))
        np.testing.assert_array_equal(steps.mu, 0.3)

    @given(N_r=st.integers(1, 4), n=st.integers(1, 60))
    @settings(max_examples=20, deadline=None)
    def test_round_robin_fairness(self, N_r, n):
        cfg = ex.RunConfig(N_t=1, N_r=N_r, L=2, T=1, algo=AlgoConfig("ISS"), max_iter=n,
                           tol=1e-300, seed=1)
        H = ch.assemble(N_r, 1, 2, 1, np.random.default_rng(0))
        _, trace, steps = ex.run_adaptation(cfg, H)
        counts = np.bincount(steps.antenna, minlength=N_r)
        assert counts.sum() == trace.final_iter
        assert set(counts) <= {trace.final_iter // N_r, -(-trace.final_iter // N_r)}

    def test_held_step_table(self):
        steps = ex.StepTrace(np.array([0.1, 0.2, 0.3, 0.4]), np.array([0, 1, 0, 1]), 2)
        held = steps.held()
        assert np.isnan(held[0, 1])
        np.testing.assert_array_equal(held[1:], [[0.1, 0.2], [0.3, 0.2], [0.3, 0.4]])
        np.testing.assert_array_equal(steps.per_antenna()[0], [0.1, 0.3])

    def test_nonfinite_aborts_with_iteration(self, monkeypatch, rng):
        orig = ex.step

        def poisoned(state, x, d, cfg, *a, **k):
            new, e, mu = orig(state, x, d, cfg, *a, **k)
            if np.all(new.n == 5):
                new.h_hat[...] = np.nan
            return new, e, mu

        monkeypatch.setattr(ex, "step", poisoned)
        with pytest.raises(FloatingPointError, match="iteration"):
            ex.run_adaptation(quick(N_r=1), ch.assemble(1, 2, 8, 1, rng))

    def test_stopping_rule_literal_window(self, rng):
        cfg = quick(snr_db=float("inf"), algo=AlgoConfig("ISS", mu=1.0), stop_window=1,
                    tol=1e-3, max_iter=2000)
        _, trace, _ = ex.run_adaptation(cfg, ch.assemble(2, 2, 8, 1, rng))
        assert trace.stop_reason == "tolerance"
        assert trace.final_iter >= cfg.N_r


class TestMonteCarlo:
    def test_single_run_matches_adaptation(self):
        cfg = quick(num_runs=1)
        mc = ex.monte_carlo(cfg)
        H, _, _ = ex.realize_run(cfg, 0)
        rng = np.random.default_rng(ex.run_seed(cfg.seed, 0))
        ch.assemble(cfg.N_r, cfg.N_t, cfg.L, cfg.T, rng, cfg.complex_mode, cfg.normalize)
        _, trace, _ = ex.run_adaptation(cfg, H, rng)
        np.testing.assert_array_equal(mc.mse, trace.padded(cfg.max_iter))

    def test_determinism(self):
        a, b = ex.monte_carlo(quick()), ex.monte_carlo(quick())
        np.testing.assert_array_equal(a.mse, b.mse)
        np.testing.assert_array_equal(a.mu, b.mu)

    def test_batching_invariant(self):
        cfg = quick(num_runs=5)
        np.testing.assert_array_equal(ex.monte_carlo(cfg, batch_size=2).mse,
                                      ex.monte_carlo(cfg, batch_size=64).mse)

    def test_seed_changes_result(self):
        assert not np.array_equal(ex.monte_carlo(quick()).mse, ex.monte_carlo(quick(seed=8)).mse)

    def test_padding_holds_last_value(self):
        cfg = quick(snr_db=float("inf"), algo=AlgoConfig("ISS", mu=1.0), tol=1e-6, max_iter=3000)
        mc = ex.monte_carlo(cfg)
        assert all(r == "tolerance" for r in mc.stop_reasons)
        for run, k in zip(mc.per_run, mc.final_iter):
            assert np.all(run[k - 1:] == run[k - 1])
        np.testing.assert_allclose(mc.mse, mc.per_run.mean(axis=0))

    def test_summary(self):
        s = ex.monte_carlo(quick()).summary(window=50)
        assert s["stop_reasons"]["tolerance"] + s["stop_reasons"]["max_iter"] == 4
        assert s["steady_state_mse"] > 0 and s["steady_state_stderr"] >= 0

    def test_mean_steps_shape(self):
        mc = ex.monte_carlo(quick())
        steps = mc.mean_steps()
        assert steps.shape == (300, 2)
        assert np.isnan(steps[0, 1]) and np.all(np.isfinite(steps[1:]))

    def test_noise_reduces_accuracy(self):
        lo = ex.monte_carlo(quick(snr_db=5.0, max_iter=600)).steady_state(100).mean()
        hi = ex.monte_carlo(quick(snr_db=25.0, max_iter=600)).steady_state(100).mean()
        assert hi < lo
