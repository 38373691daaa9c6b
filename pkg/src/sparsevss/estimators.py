"""
Sparse NLMS update rules
========================

Per-sample adaptive updates for one receive antenna's MISO coefficient
vector. Six variants are covered by a single parameterized step:

=============  ===========  ===========================================
variant        step-size    sparse penalty
=============  ===========  ===========================================
ISS_NLMS       fixed ``mu`` none
VSS_NLMS       variable     none
ZA_ISS_NLMS    fixed ``mu`` ``gamma_za * sgn(h)``
RZA_ISS_NLMS   fixed ``mu`` ``gamma_rza * sgn(h) / (1 + eps |h|)``
ZA_VSS_NLMS    variable     ``gamma_za * sgn(h)``
RZA_VSS_NLMS   variable     ``gamma_rza * sgn(h) / (1 + eps |h|)``
=============  ===========  ===========================================

The variable step-size is ``mu_max * |p|^2 / (|p|^2 + C)`` where ``p`` is an
exponentially smoothed normalized gradient.

All functions broadcast over leading axes: a coefficient array of shape
``(..., N)`` holds a batch of independent filters, which is how the
Monte-Carlo driver advances many runs at once. Element-wise results are
identical to running each filter on its own.

Complex signals follow the model ``y = h^T x``: the prediction is a plain
(non-conjugated) inner product, and the gradient direction is ``e * conj(x)``.
In real mode this is exactly the textbook update.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np

#: Regressor energies at or below this value are treated as degenerate.
DEFAULT_ENERGY_FLOOR = 1e-12


class DegenerateRegressorWarning(RuntimeWarning):
    """Raised (as a warning) when a regressor carries no energy."""


class Variant(str, enum.Enum):
    ISS_NLMS = "ISS_NLMS"
    VSS_NLMS = "VSS_NLMS"
    ZA_ISS_NLMS = "ZA_ISS_NLMS"
    RZA_ISS_NLMS = "RZA_ISS_NLMS"
    ZA_VSS_NLMS = "ZA_VSS_NLMS"
    RZA_VSS_NLMS = "RZA_VSS_NLMS"

    @property
    def variable_step(self) -> bool:
        return self.name.endswith("VSS_NLMS")

    @property
    def penalty(self) -> str | None:
        if self.name.startswith("RZA_"):
            return "rza"
        if self.name.startswith("ZA_"):
            return "za"
        return None

    @classmethod
    def parse(cls, name: "str | Variant") -> "Variant":
        """Accept ``"ZA-VSS"``, ``"za_vss_nlms"``, ``Variant.ZA_VSS_NLMS`` ..."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        if not key.endswith("_NLMS"):
            key += "_NLMS"
        try:
            return cls[key]
        except KeyError:
            valid = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown algorithm {name!r}; expected one of {valid}") from None


@dataclass(frozen=True)
class AlgoConfig:
    """Algorithm variant plus every tuning parameter.

    Parameters
    ----------
    variant : Variant
        Which update rule to run.
    mu : float
        Fixed step-size of the ISS variants, in (0, 2).
    mu_max : float
        Largest step-size the VSS variants may take, in (0, 2].
    C : float or None
        Positive VSS threshold; larger values give smaller step-sizes. ``None``
        leaves it to be resolved from the SNR (see :meth:`resolved`).
    beta : float
        Smoothing factor of the gradient accumulator, in [0, 1).
    gamma_za, gamma_rza : float
        Zero-attractor strengths (already multiplied by the step-size).
    epsilon_rza : float
        Reweighting factor of the RZA attractor.
    """

    variant: Variant = Variant.VSS_NLMS
    mu: float = 0.5
    mu_max: float = 1.0
    C: float | None = None
    beta: float = 0.99
    gamma_za: float = 1e-5
    gamma_rza: float = 5e-5
    epsilon_rza: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        self.validate()

    def validate(self) -> None:
        checks = [
            (0.0 < self.mu < 2.0, "mu ∈ (0,2)", self.mu),
            (0.0 < self.mu_max <= 2.0, "mu_max ∈ (0,2]", self.mu_max),
            (self.C is None or self.C > 0.0, "C > 0", 1.0 if self.C is None else self.C),
            (0.0 <= self.beta < 1.0, "beta ∈ [0,1)", self.beta),
            (self.gamma_za >= 0.0, "gamma_za ≥ 0", self.gamma_za),
            (self.gamma_rza >= 0.0, "gamma_rza ≥ 0", self.gamma_rza),
            (self.epsilon_rza >= 0.0, "epsilon_rza ≥ 0", self.epsilon_rza),
        ]
        for ok, rule, value in checks:
            if not (ok and np.isfinite(value)):
                raise ValueError(f"invalid value {value!r}: requires {rule}")

    def resolved(self, C: float) -> "AlgoConfig":
        """Copy with ``C`` filled in if it was left unset."""
        return self if self.C is not None else replace(self, C=C)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["variant"] = self.variant.value
        return d


@dataclass
class FilterState:
    """Estimator state of one receive antenna (or a batch of them).

    ``h_hat`` and ``p`` have shape ``(..., N)``; ``n`` counts steps taken and
    broadcasts against the batch shape.
    """

    h_hat: np.ndarray
    p: np.ndarray
    n: np.ndarray | int = 0

    @classmethod
    def zeros(cls, length: int, batch: tuple = (), complex_mode: bool = True) -> "FilterState":
        dtype = np.complex128 if complex_mode else np.float64
        shape = tuple(batch) + (int(length),)
        n = np.zeros(batch, dtype=np.int64) if batch else 0
        return cls(np.zeros(shape, dtype), np.zeros(shape, dtype), n)

    def __post_init__(self):
        self.h_hat = np.asarray(self.h_hat)
        self.p = np.asarray(self.p)
        if self.h_hat.shape != self.p.shape:
            raise ValueError(
                f"h_hat shape {self.h_hat.shape} does not match p shape {self.p.shape}"
            )


def _check_dims(h: np.ndarray, x: np.ndarray) -> None:
    if h.shape[-1:] != x.shape[-1:]:
        raise ValueError(
            f"dimension mismatch: coefficients have length {h.shape[-1:]}, "
            f"regressor has length {x.shape[-1:]}"
        )


def energy(v) -> np.ndarray:
    """Squared norm along the last axis (conjugate inner product)."""
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return np.sum(v.real**2 + v.imag**2, axis=-1)
    return np.sum(v * v, axis=-1)


def predict(state: FilterState, x) -> np.ndarray:
    """Filter output ``h_hat^T x``."""
    x = np.asarray(x)
    _check_dims(state.h_hat, x)
    return np.sum(state.h_hat * x, axis=-1)


def error(state: FilterState, x, d) -> np.ndarray:
    """A-priori estimation error ``d - h_hat^T x``."""
    return np.asarray(d) - predict(state, x)


def _normalized_gradient(x, e, xx) -> np.ndarray:
    e = np.asarray(e)[..., None]
    xx = np.asarray(xx)[..., None]
    return e * np.conj(x) / xx


def nlms_correction(x, e, step, floor: float = DEFAULT_ENERGY_FLOOR) -> np.ndarray:
    """Normalized gradient term ``step * e * conj(x) / |x|^2``.

    Raises
    ------
    ValueError
        If any regressor has energy at or below ``floor``.
    """
    x = np.asarray(x)
    xx = energy(x)
    if np.any(xx <= floor):
        raise ValueError(f"degenerate regressor: |x|^2 = {np.min(xx):.3g} <= {floor:g}")
    step = np.asarray(step)
    if np.any(step <= 0):
        raise ValueError("step must be positive")
    return step[..., None] * _normalized_gradient(x, e, xx)


def _sgn(h: np.ndarray) -> np.ndarray:
    # sign of real and imaginary parts taken separately, sgn(0) = 0
    if np.iscomplexobj(h):
        return np.sign(h.real) + 1j * np.sign(h.imag)
    return np.sign(h)


def za_penalty(h_hat, gamma_za: float) -> np.ndarray:
    """Zero-attractor ``gamma_za * sgn(h_hat)``."""
    return gamma_za * _sgn(np.asarray(h_hat))


def rza_penalty(h_hat, gamma_rza: float, epsilon_rza: float) -> np.ndarray:
    """Reweighted zero-attractor ``gamma * sgn(h) / (1 + eps * |h|)``."""
    h_hat = np.asarray(h_hat)
    return gamma_rza * _sgn(h_hat) / (1.0 + epsilon_rza * np.abs(h_hat))


def update_p(p_prev, x, e, beta: float, floor: float = DEFAULT_ENERGY_FLOOR) -> np.ndarray:
    """Smoothed gradient ``beta * p + (1 - beta) * e * conj(x) / |x|^2``.

    Filters whose regressor is degenerate keep ``p_prev`` and a
    :class:`DegenerateRegressorWarning` is emitted.
    """
    p_prev = np.asarray(p_prev)
    x = np.asarray(x)
    _check_dims(p_prev, x)
    xx = energy(x)
    bad = xx <= floor
    if np.any(bad):
        warnings.warn("degenerate regressor: accumulator held", DegenerateRegressorWarning, stacklevel=2)
        xx = np.where(bad, 1.0, xx)
    p_new = beta * p_prev + (1.0 - beta) * _normalized_gradient(x, e, xx)
    return np.where(np.asarray(bad)[..., None], p_prev, p_new)


def variable_step(p, mu_max: float, C: float) -> np.ndarray:
    """Step-size ``mu_max * |p|^2 / (|p|^2 + C)``; lies in ``[0, mu_max)``."""
    pp = energy(p)
    return mu_max * pp / (pp + C)


def step(state: FilterState, x, d, cfg: AlgoConfig, floor: float = DEFAULT_ENERGY_FLOOR):
    """Advance the filter by one sample.

    Parameters
    ----------
    state : FilterState
        Current estimate. Not modified.
    x : array_like, shape (..., N)
        Regressor.
    d : scalar or array_like, shape (...)
        Desired (observed) sample.
    cfg : AlgoConfig

    Returns
    -------
    new_state : FilterState
    e : ndarray
        Error before the update.
    mu_used : ndarray
        Step-size applied this step. Zero for skipped (degenerate) samples.
    """
    x = np.asarray(x)
    _check_dims(state.h_hat, x)
    h = state.h_hat
    e = error(state, x, d)

    xx = energy(x)
    ok = xx > floor
    safe_xx = np.where(ok, xx, 1.0)
    grad = _normalized_gradient(x, e, safe_xx)
    okv = np.asarray(ok)[..., None]

    if cfg.variant.variable_step:
        if cfg.C is None:
            raise ValueError("VSS threshold C is unset; resolve it with AlgoConfig.resolved()")
        p = np.where(okv, cfg.beta * state.p + (1.0 - cfg.beta) * grad, state.p)
        mu = variable_step(p, cfg.mu_max, cfg.C)
    else:
        p = state.p
        mu = np.full(np.shape(xx), cfg.mu)

    if cfg.variant.penalty == "za":
        pen = za_penalty(h, cfg.gamma_za)
    elif cfg.variant.penalty == "rza":
        pen = rza_penalty(h, cfg.gamma_rza, cfg.epsilon_rza)
    else:
        pen = 0.0

    h_new = h + np.asarray(mu)[..., None] * grad - pen
    h_new = np.where(okv, h_new, h)
    mu_used = np.where(ok, mu, 0.0)
    if np.ndim(mu_used) == 0:
        mu_used = float(mu_used)
    return FilterState(h_new, p, state.n + 1), e, mu_used
