"""Sparse multipath MIMO channels, tap-delay regressors and AWGN."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class SparseLink:
    """Impulse response of one transmit/receive antenna pair."""

    taps: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        self.taps = np.asarray(self.taps)
        self.support = tuple(sorted(int(i) for i in self.support))
        nz = tuple(int(i) for i in np.flatnonzero(self.taps))
        if nz != self.support:
            raise ValueError(f"nonzero taps {nz} do not match support {self.support}")

    @property
    def L(self) -> int:
        return self.taps.shape[0]

    @property
    def T(self) -> int:
        return len(self.support)


@dataclass
class MimoChannel:
    """Ground-truth channel: an ``N_r x N_t`` grid of :class:`SparseLink`.

    ``matrix`` stacks the links row-wise into the ``N_r x (N_t * L)``
    coefficient matrix, receive antenna ``r`` holding
    ``[h_r1, h_r2, ..., h_rNt]``.
    """

    links: list[list[SparseLink]]

    def __post_init__(self):
        if not self.links or not self.links[0]:
            raise ValueError("channel needs at least one link")
        Ls = {link.L for row in self.links for link in row}
        if len(Ls) != 1 or any(len(row) != len(self.links[0]) for row in self.links):
            raise ValueError("links must form a rectangular grid of equal-length responses")

    @property
    def N_r(self) -> int:
        return len(self.links)

    @property
    def N_t(self) -> int:
        return len(self.links[0])

    @property
    def L(self) -> int:
        return self.links[0][0].L

    @property
    def matrix(self) -> np.ndarray:
        return np.stack([np.concatenate([lk.taps for lk in row]) for row in self.links])

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.links[0][0].taps)

    @classmethod
    def from_matrix(cls, H, N_t: int) -> "MimoChannel":
        """Split an ``N_r x (N_t * L)`` matrix back into links."""
        H = np.atleast_2d(np.asarray(H))
        if H.shape[1] % N_t:
            raise ValueError(f"{H.shape[1]} columns cannot be split across {N_t} antennas")
        L = H.shape[1] // N_t
        links = [
            [SparseLink(t, np.flatnonzero(t)) for t in row.reshape(N_t, L)] for row in H
        ]
        return cls(links)

    def to_dict(self) -> dict:
        return {
            "N_r": self.N_r,
            "N_t": self.N_t,
            "L": self.L,
            "complex": bool(self.is_complex),
            "links": [
                [
                    {
                        "support": list(lk.support),
                        "taps": [[float(np.real(v)), float(np.imag(v))] for v in lk.taps[list(lk.support)]],
                    }
                    for lk in row
                ]
                for row in self.links
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "MimoChannel":
        L = int(doc["L"])
        dtype = np.complex128 if doc.get("complex", True) else np.float64
        links = []
        for row in doc["links"]:
            out = []
            for item in row:
                taps = np.zeros(L, dtype)
                vals = [complex(re, im) for re, im in item["taps"]]
                taps[item["support"]] = vals if dtype == np.complex128 else np.real(vals)
                out.append(SparseLink(taps, item["support"]))
            links.append(out)
        ch = cls(links)
        if ch.N_r != doc["N_r"] or ch.N_t != doc["N_t"]:
            raise ValueError("declared dimensions do not match link grid")
        return ch

    @classmethod
    def from_json(cls, text: str) -> "MimoChannel":
        return cls.from_dict(json.loads(text))


def _gaussian(rng: np.random.Generator, size, complex_mode: bool) -> np.ndarray:
    """Unit-variance Gaussian draws; circular symmetric in complex mode."""
    if complex_mode:
        return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
    return rng.standard_normal(size)


def generate_link(
    L: int,
    T: int,
    tap_variance: float = 1.0,
    rng: np.random.Generator | None = None,
    complex_mode: bool = True,
) -> SparseLink:
    """Draw a length-``L`` response with ``T`` Gaussian taps at random positions."""
    if not 1 <= T <= L:
        raise ValueError(f"need 1 <= T <= L, got T={T}, L={L}")
    rng = np.random.default_rng() if rng is None else rng
    support = rng.choice(L, size=T, replace=False)
    vals = np.sqrt(tap_variance) * _gaussian(rng, T, complex_mode)
    # a Gaussian draw is zero with probability 0, but the support contract is exact
    vals = np.where(vals == 0, np.finfo(float).tiny, vals)
    taps = np.zeros(L, np.complex128 if complex_mode else np.float64)
    taps[support] = vals
    return SparseLink(taps, support)


def assemble(
    N_r: int,
    N_t: int,
    L: int,
    T: int,
    rng: np.random.Generator | None = None,
    complex_mode: bool = True,
    normalize: str = "exact",
    tap_variance: float = 1.0,
) -> MimoChannel:
    """Build a random sparse MIMO channel.

    With ``normalize="exact"`` every receive row is rescaled to unit squared
    norm. With ``"expectation"`` the tap variance is set to ``1 / (N_t * T)``
    so that rows have unit norm on average.
    """
    for name, v in (("N_r", N_r), ("N_t", N_t), ("L", L), ("T", T)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    if normalize not in ("exact", "expectation"):
        raise ValueError(f"normalize must be 'exact' or 'expectation', got {normalize!r}")
    rng = np.random.default_rng() if rng is None else rng
    if normalize == "expectation":
        tap_variance = 1.0 / (N_t * T)
    links = [
        [generate_link(L, T, tap_variance, rng, complex_mode) for _ in range(N_t)]
        for _ in range(N_r)
    ]
    if normalize == "exact":
        for row in links:
            scale = 1.0 / np.sqrt(sum(np.sum(np.abs(lk.taps) ** 2) for lk in row))
            for lk in row:
                lk.taps = lk.taps * scale
    return MimoChannel(links)


class RegressorBank:
    """Per-antenna tap-delay lines, newest sample at delay 0.

    ``lines`` has shape ``(..., N_t, L)``; leading axes index independent banks.
    """

    def __init__(self, N_t: int, L: int, batch: tuple = (), complex_mode: bool = True):
        dtype = np.complex128 if complex_mode else np.float64
        self.lines = np.zeros(tuple(batch) + (N_t, L), dtype)

    @property
    def N_t(self) -> int:
        return self.lines.shape[-2]

    @property
    def L(self) -> int:
        return self.lines.shape[-1]

    def push(self, samples) -> None:
        samples = np.asarray(samples)
        if samples.shape != self.lines.shape[:-1]:
            raise ValueError(
                f"expected samples of shape {self.lines.shape[:-1]}, got {samples.shape}"
            )
        self.lines[..., 1:] = self.lines[..., :-1]
        self.lines[..., 0] = samples

    def stacked(self) -> np.ndarray:
        return self.lines.reshape(self.lines.shape[:-2] + (-1,)).copy()


def push_and_stack(bank: RegressorBank, samples) -> np.ndarray:
    """Shift one new sample per antenna into ``bank``; return the stacked regressor."""
    bank.push(samples)
    return bank.stacked()


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    signal_power: float = 1.0

    @property
    def variance(self) -> float:
        return self.signal_power / 10.0 ** (self.snr_db / 10.0)


def draw_noise(rng: np.random.Generator, size, variance: float, complex_mode: bool) -> np.ndarray:
    """AWGN with total per-sample variance ``variance``."""
    if variance == 0:
        return np.zeros(size, np.complex128 if complex_mode else np.float64)
    return np.sqrt(variance) * _gaussian(rng, size, complex_mode)


def apply_channel(H: np.ndarray, x) -> np.ndarray:
    """Noiseless outputs ``H x`` for a stacked regressor of shape ``(..., N_t*L)``."""
    x = np.asarray(x)
    if x.shape[-1] != H.shape[-1]:
        raise ValueError(f"regressor length {x.shape[-1]} does not match channel width {H.shape[-1]}")
    return np.einsum("...rk,...k->...r", H, x)


def observe(
    H: MimoChannel,
    x,
    noise: NoiseSpec | None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Received samples ``H x + z`` at all receive antennas."""
    y = apply_channel(H.matrix, x)
    if noise is None or np.isinf(noise.snr_db):
        return y
    rng = np.random.default_rng() if rng is None else rng
    return y + draw_noise(rng, y.shape, noise.variance, np.iscomplexobj(y) or H.is_complex)


def training_stream(
    rng: np.random.Generator,
    n: int,
    N_t: int,
    complex_mode: bool = True,
    kind: str = "qpsk",
) -> np.ndarray:
    """Unit-power training samples, shape ``(n, N_t)``.

    ``kind="qpsk"`` gives unit-modulus symbols (``±1`` in real mode);
    ``kind="gaussian"`` gives unit-variance Gaussian samples.
    """
    if kind == "qpsk":
        if complex_mode:
            b = rng.integers(0, 2, size=(n, N_t, 2)) * 2 - 1
            return (b[..., 0] + 1j * b[..., 1]) / np.sqrt(2.0)
        return (rng.integers(0, 2, size=(n, N_t)) * 2 - 1).astype(np.float64)
    if kind == "gaussian":
        return _gaussian(rng, (n, N_t), complex_mode)
    raise ValueError(f"unknown training kind {kind!r}")
