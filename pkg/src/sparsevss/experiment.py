"""
Adaptation driver and Monte-Carlo harness.

Each iteration draws one training sample per transmit antenna, observes all
receive antennas, and updates a single receive antenna's estimator, cycling
through the antennas in order. A run stops once the estimate has settled,
``|H_hat(n) - H_hat(n - window)|^2 <= tol``, or after ``max_iter``
iterations. The rule is checked only after ``window`` iterations and never
before every antenna has been updated once. The default window is one filter
length of updates per antenna, ``N_r * N_t * L``; ``stop_window=1`` tests the
change made by each single update.

Runs are independent: each owns a generator seeded from
``SeedSequence([seed, run_index])``. The Monte-Carlo harness pre-draws every
run's channel, training and noise from that generator and then advances all
runs together as one batch, so ``monte_carlo`` with one run reproduces
``run_adaptation`` exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as ch
from .estimators import AlgoConfig, FilterState, step

log = logging.getLogger(__name__)

#: SNR (dB) -> VSS threshold C used when none is given explicitly.
C_BY_SNR = ((5.0, 1e-4), (10.0, 1e-5), (20.0, 1e-5))


def default_C(snr_db: float) -> float:
    """VSS threshold for an SNR: 1e-4 up to 5 dB, 1e-5 above.

    Between the tabulated points the threshold of the nearest lower point is
    used; below 5 dB it stays at 1e-4.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return C_BY_SNR[-1][1]
    value = C_BY_SNR[0][1]
    for snr, C in C_BY_SNR:
        if snr_db >= snr:
            value = C
    return value


@dataclass(frozen=True)
class RunConfig:
    N_t: int = 2
    N_r: int = 2
    L: int = 16
    T: int = 1
    snr_db: float = 20.0
    algo: AlgoConfig = field(default_factory=AlgoConfig)
    max_iter: int = 5000
    tol: float = 1e-5
    num_runs: int = 200
    seed: int = 0
    mode: str = "complex"
    normalize: str = "exact"
    training: str = "qpsk"
    stop_window: int | None = None

    def __post_init__(self):
        for name in ("N_t", "N_r", "L", "T"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"invalid value {getattr(self, name)!r}: requires {name} ≥ 1")
        if self.T > self.L:
            raise ValueError(f"invalid value {self.T!r}: requires T ≤ L")
        if self.max_iter < 1:
            raise ValueError(f"invalid value {self.max_iter!r}: requires max_iter ≥ 1")
        if not self.tol > 0:
            raise ValueError(f"invalid value {self.tol!r}: requires tol > 0")
        if self.num_runs < 1:
            raise ValueError(f"invalid value {self.num_runs!r}: requires num_runs ≥ 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"invalid value {self.seed!r}: requires 0 ≤ seed < 2^64")
        if self.stop_window is not None and self.stop_window < 1:
            raise ValueError(f"invalid value {self.stop_window!r}: requires stop_window ≥ 1")
        if self.mode not in ("real", "complex"):
            raise ValueError(f"invalid value {self.mode!r}: requires mode ∈ {{real, complex}}")

    @property
    def complex_mode(self) -> bool:
        return self.mode == "complex"

    @property
    def effective_algo(self) -> AlgoConfig:
        """Algorithm config with ``C`` resolved from the SNR when unset."""
        return self.algo.resolved(default_C(self.snr_db))

    @property
    def window(self) -> int:
        """Number of updates averaged by the stopping rule."""
        return self.stop_window if self.stop_window is not None else self.N_r * self.N_t * self.L

    @property
    def noise(self) -> ch.NoiseSpec:
        return ch.NoiseSpec(self.snr_db)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "algo"}
        d["algo"] = self.effective_algo.as_dict()
        return d


@dataclass
class MseTrace:
    """Average MSE after each executed iteration."""

    values: np.ndarray
    final_iter: int
    stop_reason: str

    def padded(self, length: int) -> np.ndarray:
        """Hold the last value out to ``length`` iterations."""
        out = np.empty(length)
        k = min(len(self.values), length)
        out[:k] = self.values[:k]
        out[k:] = self.values[k - 1]
        return out


@dataclass
class StepTrace:
    """Step-size applied at each iteration and the antenna it was applied to."""

    mu: np.ndarray
    antenna: np.ndarray
    N_r: int

    def per_antenna(self) -> list[np.ndarray]:
        return [self.mu[self.antenna == r] for r in range(self.N_r)]

    def held(self) -> np.ndarray:
        """``(iterations, N_r)`` table of each antenna's latest step-size (NaN before its first update)."""
        out = np.full((len(self.mu), self.N_r), np.nan)
        for r in range(self.N_r):
            idx = np.flatnonzero(self.antenna == r)
            if idx.size == 0:
                continue
            pos = np.searchsorted(idx, np.arange(len(self.mu)), side="right") - 1
            valid = pos >= 0
            out[valid, r] = self.mu[idx[pos[valid]]]
        return out


def mse(H, H_hat) -> float:
    """Sum of squared coefficient errors over the whole channel matrix."""
    H = H.matrix if isinstance(H, ch.MimoChannel) else np.asarray(H)
    H_hat = H_hat.matrix if isinstance(H_hat, ch.MimoChannel) else np.asarray(H_hat)
    if H.shape != H_hat.shape:
        raise ValueError(f"shape mismatch: {H.shape} vs {H_hat.shape}")
    d = H - H_hat
    return float(np.sum(d.real**2 + d.imag**2))


def run_seed(seed: int, run_index: int) -> np.random.SeedSequence:
    """Seed of one Monte-Carlo run, mixed from the base seed and run index."""
    return np.random.SeedSequence([int(seed), int(run_index)])


def draw_streams(cfg: RunConfig, rng: np.random.Generator):
    """Training ``(max_iter, N_t)`` and noise ``(max_iter, N_r)`` for one run."""
    x = ch.training_stream(rng, cfg.max_iter, cfg.N_t, cfg.complex_mode, cfg.training)
    z = ch.draw_noise(rng, (cfg.max_iter, cfg.N_r), cfg.noise.variance, cfg.complex_mode)
    return x, z


@dataclass
class _BatchResult:
    H_hat: np.ndarray
    mse: np.ndarray
    mu: np.ndarray
    antenna: np.ndarray
    final_iter: np.ndarray
    reached_tol: np.ndarray


def _adapt_batch(cfg: RunConfig, H: np.ndarray, x_stream: np.ndarray, z_stream: np.ndarray,
                 seeds=None) -> _BatchResult:
    """Advance ``B`` independent runs in lock-step.

    ``H`` is ``(B, N_r, N_t*L)``; ``x_stream`` ``(B, max_iter, N_t)``;
    ``z_stream`` ``(B, max_iter, N_r)``. Traces are recorded up to each run's
    own stopping iteration and NaN afterwards.
    """
    B, N_r, N = H.shape
    n_max = cfg.max_iter
    complex_mode = cfg.complex_mode
    states = [FilterState.zeros(N, (B,), complex_mode) for _ in range(N_r)]
    bank = ch.RegressorBank(cfg.N_t, cfg.L, (B,), complex_mode)
    H_hat = np.zeros_like(H, dtype=np.complex128 if complex_mode else np.float64)

    mse_tr = np.full((B, n_max), np.nan)
    mu_tr = np.full((B, n_max), np.nan)
    active = np.ones(B, bool)
    final_iter = np.full(B, n_max)
    reached = np.zeros(B, bool)
    antenna = np.arange(n_max) % N_r
    algo = cfg.effective_algo
    W = cfg.window
    history = np.zeros((W,) + H_hat.shape, H_hat.dtype)

    for i in range(n_max):
        n = i + 1
        r = antenna[i]
        x = ch.push_and_stack(bank, x_stream[:, i])
        y = ch.apply_channel(H, x) + z_stream[:, i]
        new, _, mu_used = step(states[r], x, y[:, r], algo)

        keep = active[:, None]
        states[r] = FilterState(
            np.where(keep, new.h_hat, states[r].h_hat),
            np.where(keep, new.p, states[r].p),
            np.where(active, new.n, states[r].n),
        )
        H_hat[:, r] = states[r].h_hat

        diff = H - H_hat
        err = np.sum(diff.real**2 + diff.imag**2, axis=(-2, -1))
        mse_tr[active, i] = err[active]
        mu_tr[active, i] = mu_used[active]

        if not np.all(np.isfinite(err[active])):
            bad = np.flatnonzero(active & ~np.isfinite(err))[0]
            where = f" (run seed {seeds[bad]})" if seeds is not None else ""
            raise FloatingPointError(f"non-finite MSE at iteration {n}{where}")

        # history[i % W] holds H_hat(n - W) until overwritten here
        delta = H_hat - history[i % W]
        history[i % W] = H_hat
        if n >= max(N_r, W):
            change = np.sum(delta.real**2 + delta.imag**2, axis=(-2, -1))
            stop = active & (change <= cfg.tol)
            reached |= stop
            final_iter[stop] = n
            active &= ~stop
        if not active.any():
            break

    return _BatchResult(H_hat, mse_tr, mu_tr, antenna, final_iter, reached)


def run_adaptation(cfg: RunConfig, H: ch.MimoChannel, rng: np.random.Generator | None = None):
    """Estimate ``H`` from one stream of training data.

    Returns
    -------
    H_hat : ndarray, shape (N_r, N_t*L)
    trace : MseTrace
    steps : StepTrace
    """
    if (H.N_r, H.N_t, H.L) != (cfg.N_r, cfg.N_t, cfg.L):
        raise ValueError(
            f"channel is {H.N_r}x{H.N_t} with L={H.L}, config expects "
            f"{cfg.N_r}x{cfg.N_t} with L={cfg.L}"
        )
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    x, z = draw_streams(cfg, rng)
    res = _adapt_batch(cfg, H.matrix[None], x[None], z[None])
    k = int(res.final_iter[0])
    trace = MseTrace(res.mse[0, :k].copy(), k, "tolerance" if res.reached_tol[0] else "max_iter")
    steps = StepTrace(res.mu[0, :k].copy(), res.antenna[:k].copy(), cfg.N_r)
    return res.H_hat[0], trace, steps


@dataclass
class MonteCarloResult:
    """Averaged trace plus per-run records.

    ``per_run`` holds each run's MSE trace padded to ``max_iter``;
    ``mu`` holds each run's step-size trace (NaN past its stop). ``H`` and
    ``H_hat`` are the true and final estimated channel matrices per run.
    """

    config: RunConfig
    mse: np.ndarray
    per_run: np.ndarray
    mu: np.ndarray
    antenna: np.ndarray
    final_iter: np.ndarray
    stop_reasons: list[str]
    seeds: list
    H: np.ndarray
    H_hat: np.ndarray

    def steady_state(self, window: int = 200) -> np.ndarray:
        """Per-run mean of the last ``window`` iterations."""
        return self.per_run[:, -window:].mean(axis=1)

    def mean_steps(self) -> np.ndarray:
        """``(max_iter, N_r)`` mean over runs of each antenna's latest step-size.

        Stopped runs hold their last value, as the MSE traces do.
        """
        n = self.mu.shape[1]
        total = np.zeros((n, self.config.N_r))
        count = np.zeros((n, self.config.N_r))
        for run in range(self.mu.shape[0]):
            k = int(self.final_iter[run])
            held = StepTrace(self.mu[run, :k], self.antenna[:k], self.config.N_r).held()
            full = np.vstack([held, np.repeat(held[-1:], n - k, axis=0)])
            ok = np.isfinite(full)
            total[ok] += full[ok]
            count += ok
        with np.errstate(invalid="ignore"):
            return np.where(count > 0, total / np.maximum(count, 1), np.nan)

    def summary(self, window: int = 200) -> dict:
        ss = self.steady_state(window)
        hist = {reason: self.stop_reasons.count(reason) for reason in ("tolerance", "max_iter")}
        return {
            "config": self.config.as_dict(),
            "final_mse": float(self.mse[-1]),
            "steady_state_mse": float(ss.mean()),
            "steady_state_stderr": float(ss.std(ddof=1) / np.sqrt(len(ss))) if len(ss) > 1 else 0.0,
            "steady_state_window": window,
            "mean_final_iter": float(np.mean(self.final_iter)),
            "stop_reasons": hist,
        }


def realize_run(cfg: RunConfig, run_index: int):
    """Channel and streams of one Monte-Carlo run, from its own generator."""
    rng = np.random.default_rng(run_seed(cfg.seed, run_index))
    H = ch.assemble(cfg.N_r, cfg.N_t, cfg.L, cfg.T, rng, cfg.complex_mode, cfg.normalize)
    x, z = draw_streams(cfg, rng)
    return H, x, z


def monte_carlo(cfg: RunConfig, batch_size: int = 256) -> MonteCarloResult:
    """Average the MSE trace over ``cfg.num_runs`` independent realizations.

    Each run's trace is padded with its final value to ``max_iter`` before
    averaging.
    """
    per_run, mu, final_iter, reached, Hs, H_hats = [], [], [], [], [], []
    antenna = None
    for start in range(0, cfg.num_runs, batch_size):
        idx = range(start, min(start + batch_size, cfg.num_runs))
        realized = [realize_run(cfg, i) for i in idx]
        H = np.stack([r[0].matrix for r in realized])
        x = np.stack([r[1] for r in realized])
        z = np.stack([r[2] for r in realized])
        res = _adapt_batch(cfg, H, x, z, seeds=[f"{cfg.seed}/{i}" for i in idx])
        for b in range(len(idx)):
            k = int(res.final_iter[b])
            per_run.append(MseTrace(res.mse[b, :k], k, "").padded(cfg.max_iter))
        mu.append(res.mu)
        final_iter.append(res.final_iter)
        reached.append(res.reached_tol)
        Hs.append(H)
        H_hats.append(res.H_hat)
        antenna = res.antenna
        log.debug("runs %d-%d done", idx.start, idx.stop - 1)

    per_run = np.stack(per_run)
    reached = np.concatenate(reached)
    return MonteCarloResult(
        config=cfg,
        mse=per_run.mean(axis=0),
        per_run=per_run,
        mu=np.concatenate(mu),
        antenna=antenna,
        final_iter=np.concatenate(final_iter),
        stop_reasons=["tolerance" if r else "max_iter" for r in reached],
        seeds=[[int(cfg.seed), i] for i in range(cfg.num_runs)],
        H=np.concatenate(Hs),
        H_hat=np.concatenate(H_hats),
    )


def with_algo(cfg: RunConfig, **changes) -> RunConfig:
    """Copy of ``cfg`` with algorithm parameters replaced."""
    return replace(cfg, algo=replace(cfg.algo, **changes))
