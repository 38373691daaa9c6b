import numpy as np
import pytest

from sparsevss import estimators, experiment

#: Running count of VSS steps whose step-size was bound-checked.
STEP_LEDGER = {"steps": 0}


@pytest.fixture(autouse=True)
def _vss_step_bound(monkeypatch):
    """Every VSS step taken anywhere in the suite must satisfy 0 <= mu < mu_max (up to rounding)."""
    original = estimators.step

    def checked(state, x, d, cfg, *args, **kwargs):
        out = original(state, x, d, cfg, *args, **kwargs)
        if cfg.variant.variable_step:
            mu = np.asarray(out[2])
            assert np.all(mu >= 0.0), f"negative step-size {mu.min()}"
            assert np.all(mu <= cfg.mu_max), f"step-size {mu.max()} exceeds mu_max={cfg.mu_max}"
            # strictly below mu_max unless |p|^2 / C is beyond double precision
            ratio = np.sum(np.abs(out[0].p) ** 2, axis=-1) / cfg.C
            assert np.all((mu < cfg.mu_max) | (ratio > 1e15)), f"step-size reached mu_max={cfg.mu_max}"
            STEP_LEDGER["steps"] += mu.size
        return out

    monkeypatch.setattr(estimators, "step", checked)
    monkeypatch.setattr(experiment, "step", checked)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
