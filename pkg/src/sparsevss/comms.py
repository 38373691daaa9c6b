"""
OFDM/QAM link for bit-error-rate evaluation.

Supported constellations: BPSK, QPSK (``PSK`` 2 and 4) and square Gray QAM
4/16/64 plus the 128-point cross constellation. All tables have unit
average energy.

Square QAM labels each axis independently with a reflected Gray code: the
first ``m`` bits of a symbol select the in-phase level, the last ``m`` the
quadrature level, and on each axis the first bit is the sign (0 = positive)::

    amplitude = (1 - 2 b0) * (2^(m-1) - (1 - 2 b1) * (2^(m-2) - ... (1 - 2 b_{m-1})))

so QPSK ``00`` maps to ``(1 + 1j) / sqrt(2)``.

128-QAM starts from an 8 x 16 rectangular Gray grid (3 in-phase bits, 4
quadrature bits, odd integer levels) and folds the 32 points with
``|Q| in {13, 15}`` into the empty side columns of the 12 x 12 cross::

    (I, Q) -> (sgn(I) * (|Q| - 4), sgn(Q) * (8 - |I|))

The folded points keep Gray adjacency inside each fold but not across its
border, so the labelling is quasi-Gray.

The link uses a unitary DFT (``1/sqrt(K)`` on both transforms) so time and
frequency domains carry the same energy. ``dft_scale="literal"`` uses a
DFT matrix with ``1/K`` entries on both sides instead: the transmitter then
emits ``1/K`` of the block energy, so the effective Es/N0 is ``K`` times
below the nominal one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import channel as ch
from .experiment import RunConfig, monte_carlo

log = logging.getLogger(__name__)

SUPPORTED = {"PSK": (2, 4), "QAM": (4, 16, 64, 128)}
#: Ridge added to the ZF normal equations of ill-conditioned subcarriers.
ZF_RIDGE = 1e-9


def _gray_pam(bits: np.ndarray) -> np.ndarray:
    """Odd-integer PAM amplitudes from Gray bit groups (last axis = bits)."""
    m = bits.shape[-1]
    s = 1 - 2 * bits.astype(np.int64)
    mag = np.ones(bits.shape[:-1], np.int64)
    for j in range(m - 1, 0, -1):
        mag = 2 ** (m - j) - s[..., j] * mag
    return s[..., 0] * mag


def _all_labels(k: int) -> np.ndarray:
    """Bit patterns of 0..2^k-1, MSB first, shape (2^k, k)."""
    idx = np.arange(2**k)
    return (idx[:, None] >> np.arange(k - 1, -1, -1)) & 1


def _cross128(labels: np.ndarray) -> np.ndarray:
    i = _gray_pam(labels[:, :3])
    q = _gray_pam(labels[:, 3:])
    fold = np.abs(q) > 11
    i2 = np.where(fold, np.sign(i) * (np.abs(q) - 4), i)
    q2 = np.where(fold, np.sign(q) * (8 - np.abs(i)), q)
    return i2 + 1j * q2


@dataclass(frozen=True)
class Constellation:
    scheme: str = "QAM"
    order: int = 16

    def __post_init__(self):
        scheme = self.scheme.upper()
        object.__setattr__(self, "scheme", scheme)
        if scheme not in SUPPORTED or self.order not in SUPPORTED[scheme]:
            raise ValueError(f"unsupported constellation {scheme}{self.order}; supported: {SUPPORTED}")

    @classmethod
    def parse(cls, name: str) -> "Constellation":
        """``"16QAM"``, ``"qam64"``, ``"QPSK"``, ``"BPSK"``."""
        key = name.upper().replace("-", "")
        if key == "BPSK":
            return cls("PSK", 2)
        if key == "QPSK":
            return cls("PSK", 4)
        for scheme in SUPPORTED:
            if scheme in key:
                return cls(scheme, int(key.replace(scheme, "")))
        raise ValueError(f"cannot parse constellation {name!r}")

    @property
    def name(self) -> str:
        return {("PSK", 2): "BPSK", ("PSK", 4): "QPSK"}.get((self.scheme, self.order), f"{self.order}QAM")

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @cached_property
    def labels(self) -> np.ndarray:
        return _all_labels(self.bits_per_symbol)

    @cached_property
    def points(self) -> np.ndarray:
        """Unit-energy point of every label index (row of :attr:`labels`)."""
        k = self.bits_per_symbol
        lab = self.labels
        if self.order == 2:
            pts = (1 - 2 * lab[:, 0]).astype(complex)
        elif self.order == 128:
            pts = _cross128(lab)
        else:
            m = k // 2
            pts = _gray_pam(lab[:, :m]) + 1j * _gray_pam(lab[:, m:])
        pts = pts.astype(np.complex128)
        return pts / np.sqrt(np.mean(np.abs(pts) ** 2))

    @property
    def min_distance(self) -> float:
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(d[d > 0].min())


def modulate(bits, constellation: Constellation) -> np.ndarray:
    bits = np.asarray(bits).astype(np.int64).ravel()
    k = constellation.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"{bits.size} bits cannot be split into {k}-bit symbols")
    idx = bits.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1))
    return constellation.points[idx]


def demodulate(symbols, constellation: Constellation, chunk: int = 1 << 16) -> np.ndarray:
    """Minimum-distance hard decisions.

    Ties go to the lowest label index (``argmin`` returns the first minimum).
    """
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    pts = constellation.points
    idx = np.empty(symbols.size, np.int64)
    for s in range(0, symbols.size, chunk):
        blk = symbols[s:s + chunk, None] - pts[None, :]
        idx[s:s + chunk] = np.argmin(blk.real**2 + blk.imag**2, axis=1)
    return constellation.labels[idx].ravel()


@dataclass(frozen=True)
class OfdmParams:
    """``K`` subcarriers, cyclic prefix ``cp_len`` samples.

    ``cp_energy=True`` counts the prefix in the symbol energy, raising the
    noise variance by ``(K + cp_len) / K``.
    """

    K: int = 16
    cp_len: int = 16
    dft_scale: str = "unitary"
    cp_energy: bool = False

    def __post_init__(self):
        if self.K < 1 or not 0 <= self.cp_len <= self.K:
            raise ValueError("need K >= 1 and 0 <= cp_len <= K")
        if self.dft_scale not in ("unitary", "literal"):
            raise ValueError(f"dft_scale must be 'unitary' or 'literal', got {self.dft_scale!r}")

    def check_channel(self, L: int) -> None:
        if self.cp_len < L - 1:
            raise ValueError(f"cp_len={self.cp_len} cannot absorb a channel of length {L}")

    def noise_variance(self, snr_db: float, signal_power: float = 1.0) -> float:
        """Time-domain noise variance for a per-subcarrier ``Es/N0`` of ``snr_db``."""
        var = signal_power / 10.0 ** (snr_db / 10.0)
        if self.cp_energy:
            var *= (self.K + self.cp_len) / self.K
        return var


def ofdm_modulate(X: np.ndarray, params: OfdmParams) -> np.ndarray:
    """Frequency blocks ``(..., n_blocks, K)`` -> time stream ``(..., n_blocks * (K + cp))``."""
    x = np.fft.ifft(X, axis=-1, norm=None if params.dft_scale == "literal" else "ortho")
    x = np.concatenate([x[..., params.K - params.cp_len:], x], axis=-1) if params.cp_len else x
    return x.reshape(x.shape[:-2] + (-1,))


def ofdm_demodulate(y: np.ndarray, params: OfdmParams) -> np.ndarray:
    """Inverse of :func:`ofdm_modulate` (CP removal + DFT)."""
    n = params.K + params.cp_len
    blocks = y.reshape(y.shape[:-1] + (-1, n))[..., params.cp_len:]
    if params.dft_scale == "literal":
        return np.fft.fft(blocks, axis=-1) / params.K
    return np.fft.fft(blocks, axis=-1, norm="ortho")


def frequency_response(H: np.ndarray, N_t: int, K: int) -> np.ndarray:
    """Per-subcarrier ``(K, N_r, N_t)`` responses of an ``N_r x (N_t*L)`` tap matrix."""
    H = np.asarray(H)
    N_r = H.shape[0]
    taps = H.reshape(N_r, N_t, -1)
    if taps.shape[-1] > K:
        raise ValueError(f"channel length {taps.shape[-1]} exceeds {K} subcarriers")
    return np.moveaxis(np.fft.fft(taps, n=K, axis=-1), -1, 0)


def convolve_streams(H: np.ndarray, s: np.ndarray, N_t: int) -> np.ndarray:
    """Pass ``(N_t, n)`` transmit streams through the FIR channel -> ``(N_r, n)``."""
    taps = np.asarray(H).reshape(H.shape[0], N_t, -1)
    n = s.shape[-1]
    out = np.zeros((taps.shape[0], n), np.complex128)
    for r in range(taps.shape[0]):
        for t in range(N_t):
            out[r] += np.convolve(s[t], taps[r, t])[:n]
    return out


def zero_forcing(Hk: np.ndarray, Y: np.ndarray, ridge: float = ZF_RIDGE, cond_limit: float = 1e12):
    """Per-subcarrier ZF estimates of the transmit symbols.

    ``Hk`` is ``(K, N_r, N_t)`` and ``Y`` is ``(K, N_r, n_blocks)``. Returns
    the ``(K, N_t, n_blocks)`` estimates and the number of subcarriers that
    were too ill-conditioned for a plain pseudo-inverse and used a ridge.
    """
    Hh = np.conj(np.swapaxes(Hk, -1, -2))
    G = Hh @ Hk
    cond = np.linalg.cond(G)
    singular = ~np.isfinite(cond) | (cond > cond_limit)
    if singular.any():
        G = G + singular[:, None, None] * ridge * np.eye(G.shape[-1])
    return np.linalg.solve(G, Hh @ Y), int(singular.sum())


@dataclass
class LinkResult:
    bit_errors: int
    bits_total: int
    ridge_subcarriers: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else float("nan")

    def __iter__(self):
        # unpacks as (bit_errors, bits_total)
        return iter((self.bit_errors, self.bits_total))


def ofdm_link(
    bits,
    H_true,
    H_hat,
    snr_db: float,
    constellation: Constellation,
    params: OfdmParams | None = None,
    rng: np.random.Generator | None = None,
    N_t: int | None = None,
) -> LinkResult:
    """Send ``bits`` over the true channel; detect with ZF using ``H_hat``.

    Bits fill ``n_blocks`` OFDM blocks of ``N_t * K`` symbols, antenna-major
    within a block. Pass ``H_hat = H_true`` for perfect CSI.
    """
    if isinstance(H_true, ch.MimoChannel):
        N_t = H_true.N_t
        H_true = H_true.matrix
    if isinstance(H_hat, ch.MimoChannel):
        H_hat = H_hat.matrix
    if N_t is None:
        raise ValueError("N_t is required when channels are given as matrices")
    H_true = np.asarray(H_true)
    H_hat = np.asarray(H_hat)
    if H_true.shape != H_hat.shape:
        raise ValueError(f"estimate shape {H_hat.shape} does not match channel {H_true.shape}")
    N_r = H_true.shape[0]
    if N_r < N_t:
        raise ValueError(f"zero-forcing needs N_r >= N_t, got {N_r} < {N_t}")
    params = OfdmParams() if params is None else params
    L = H_true.shape[1] // N_t
    params.check_channel(L)
    rng = np.random.default_rng() if rng is None else rng

    bits = np.asarray(bits).astype(np.int64).ravel()
    per_block = N_t * params.K * constellation.bits_per_symbol
    if bits.size % per_block:
        raise ValueError(f"bit count {bits.size} is not a multiple of {per_block} bits per OFDM block")
    n_blocks = bits.size // per_block

    X = modulate(bits, constellation).reshape(n_blocks, N_t, params.K)
    s = ofdm_modulate(np.swapaxes(X, 0, 1), params)          # (N_t, n)
    y = convolve_streams(H_true, s, N_t)
    y = y + ch.draw_noise(rng, y.shape, params.noise_variance(snr_db), True)
    Y = ofdm_demodulate(y, params)                              # (N_r, n_blocks, K)

    Hk = frequency_response(H_hat, N_t, params.K)
    if params.dft_scale == "literal":
        Hk = Hk / params.K
    X_hat, n_ridge = zero_forcing(Hk, np.transpose(Y, (2, 0, 1)))  # (K, N_t, n_blocks)
    if n_ridge:
        log.warning("%d ill-conditioned subcarriers detected with ridge %g", n_ridge, ZF_RIDGE)
    X_hat = np.transpose(X_hat, (2, 1, 0))                       # (n_blocks, N_t, K)
    bits_hat = demodulate(X_hat.ravel(), constellation)
    return LinkResult(int(np.count_nonzero(bits_hat != bits)), int(bits.size), n_ridge)


@dataclass
class BerPoint:
    snr_db: float
    scheme: str
    order: int
    algorithm: str
    ber: float
    errors: int
    bits: int
    low_confidence: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def link_seed(seed: int, run_index: int, snr_index: int, order: int) -> np.random.SeedSequence:
    """Data/noise seed of one link evaluation; independent of the estimator."""
    return np.random.SeedSequence([int(seed), int(run_index), 0x6C696E6B, int(snr_index), int(order)])


def ber_curve(
    cfg: RunConfig,
    constellations,
    snr_grid,
    bits_per_point: int,
    params: OfdmParams | None = None,
    perfect_csi: bool = False,
    min_errors: int = 100,
) -> list[BerPoint]:
    """BER versus Es/N0 for one estimator.

    At each SNR every Monte-Carlo run estimates its channel with
    ``cfg.algo`` (stopping per the run's rule) and then carries an equal
    share of ``bits_per_point`` fresh data bits. Channels, training, data and
    noise depend only on ``cfg.seed`` and the run index, so different
    estimators are compared on identical realizations.
    """
    params = OfdmParams(K=cfg.L, cp_len=cfg.L) if params is None else params
    constellations = [c if isinstance(c, Constellation) else Constellation.parse(c) for c in constellations]
    label = "PERFECT_CSI" if perfect_csi else cfg.algo.variant.value
    out = []
    for si, snr in enumerate(snr_grid):
        run_cfg = replace(cfg, snr_db=float(snr))
        mc = monte_carlo(run_cfg)
        for const in constellations:
            per_block = cfg.N_t * params.K * const.bits_per_symbol
            blocks = max(1, int(np.ceil(bits_per_point / per_block / cfg.num_runs)))
            errors = total = 0
            for run in range(cfg.num_runs):
                rng = np.random.default_rng(link_seed(cfg.seed, run, si, const.order))
                bits = rng.integers(0, 2, blocks * per_block)
                est = mc.H[run] if perfect_csi else mc.H_hat[run]
                res = ofdm_link(bits, mc.H[run], est, snr, const, params, rng, N_t=cfg.N_t)
                errors += res.bit_errors
                total += res.bits_total
            out.append(BerPoint(float(snr), const.scheme, const.order, label, errors / total,
                                errors, total, errors < min_errors))
    return out
