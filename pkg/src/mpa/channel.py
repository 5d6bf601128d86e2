"""Spatial-mismatch channel for a predictor-antenna setup.

A predictor antenna (PA) on the vehicle roof sounds the channel; a receive
antenna (RA) mounted ``d_a`` behind it receives data ``delta`` seconds later.
The two positions are ``d = |d_a - v delta|`` apart, the pair is correlated by
the Jakes model, and the data channel is

    h = kappa sqrt(1 - sigma^2) h_hat + kappa sigma q + sqrt(1 - kappa^2) z

with ``h_hat, q, z ~ CN(0, 1)``.  Given ``g_hat = |h_hat|^2`` the gain
``g = |h|^2`` is non-central chi-squared (2 complex dof).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _rng
from .errors import DomainError
from .special_fn import bessel_i0e, bessel_j0, marcum_q1

SPEED_OF_LIGHT = 299_792_458.0
SIGMA_MIN = 1e-6

# stream ids for the counter-based generator
STREAM_PAIRS = 1
STREAM_CONDITIONAL = 2


def wavelength(f_c: float) -> float:
    if not f_c > 0:
        raise DomainError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / f_c


def effective_distance(d_a: float, v: float, delta: float) -> float:
    if d_a < 0 or v < 0 or delta < 0:
        raise DomainError("d_a, v and delta must be nonnegative")
    return abs(d_a - v * delta)


def jakes_correlation(d: float, lam: float) -> np.ndarray:
    if d < 0 or not lam > 0:
        raise DomainError("need d >= 0 and lambda > 0")
    r = bessel_j0(2.0 * math.pi * d / lam)
    return np.array([[1.0, r], [r, 1.0]])


def _principal_sqrt(phi: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(phi)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sigma_from_correlation(rho: float) -> float:
    """Mismatch coefficient from the off-diagonal of the 2x2 Jakes matrix.

    With ``phi1, phi2`` the diagonal and off-diagonal entries of the principal
    square root, the ratio ``((phi2^2 - phi1^2)/phi1) / hypot(phi2/phi1,
    (phi2^2 - phi1^2)/phi1)`` is never positive; its magnitude is returned.
    """
    root = _principal_sqrt(np.array([[1.0, rho], [rho, 1.0]]))
    phi1, phi2 = root[0, 0], root[0, 1]
    num = (phi2 * phi2 - phi1 * phi1) / phi1
    den = math.hypot(phi2 / phi1, num)
    if den == 0.0:
        return 0.0
    return min(1.0, abs(num) / den)


def sigma_from_distance(d: float, lam: float) -> float:
    return sigma_from_correlation(float(jakes_correlation(d, lam)[0, 1]))


def fold_estimation_error(sigma: float, kappa: float) -> tuple[float, float]:
    """(sigma_eff, noncentrality coefficient) after adding the estimation error."""
    if not (0.0 <= sigma <= 1.0 and 0.0 <= kappa <= 1.0):
        raise DomainError("sigma and kappa must lie in [0, 1]")
    nc = kappa * kappa * (1.0 - sigma * sigma)
    var = (kappa * sigma) ** 2 + 1.0 - kappa * kappa
    return math.sqrt(var), nc


@dataclass(frozen=True)
class MismatchModel:
    d_a: float
    v: float
    delta: float
    f_c: float = 2.68e9
    kappa: float = 1.0
    lam: float = field(init=False)
    d: float = field(init=False)
    sigma: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise DomainError("kappa must lie in [0, 1]")
        lam = wavelength(self.f_c)
        d = effective_distance(self.d_a, self.v, self.delta)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "sigma", 0.0 if d == 0.0 else sigma_from_distance(d, lam))

    @classmethod
    def from_wavelengths(cls, d_a_lambdas: float, v: float, delta: float,
                         f_c: float = 2.68e9, kappa: float = 1.0) -> "MismatchModel":
        return cls(d_a_lambdas * wavelength(f_c), v, delta, f_c, kappa)

    @property
    def folded(self) -> tuple[float, float]:
        return fold_estimation_error(self.sigma, self.kappa)

    def conditional(self, g_hat: float) -> "ConditionalGainDist":
        sigma_eff, nc = self.folded
        return ConditionalGainDist(g_hat, sigma_eff, nc)


@dataclass(frozen=True)
class ConditionalGainDist:
    """Law of ``g`` given ``g_hat``: ``|sqrt(nc g_hat) + w|^2`` with ``w ~ CN(0, sigma_eff^2)``."""

    g_hat: float
    sigma_eff: float
    noncentrality_coeff: float

    def __post_init__(self):
        if self.g_hat < 0 or self.noncentrality_coeff < 0:
            raise DomainError("g_hat and noncentrality must be nonnegative")
        if not 0.0 <= self.sigma_eff <= 1.0:
            raise DomainError("sigma_eff must lie in [0, 1]")

    @classmethod
    def from_sigma(cls, g_hat: float, sigma: float, kappa: float = 1.0) -> "ConditionalGainDist":
        sigma_eff, nc = fold_estimation_error(sigma, kappa)
        return cls(g_hat, sigma_eff, nc)

    @property
    def degenerate(self) -> bool:
        return self.sigma_eff <= SIGMA_MIN

    @property
    def mean_known(self) -> float:
        return self.noncentrality_coeff * self.g_hat

    @property
    def alpha(self) -> float:
        """Marcum first argument ``sqrt(2 nc g_hat) / sigma_eff``."""
        return math.sqrt(2.0 * self.mean_known) / self.sigma_eff

    def beta(self, x):
        return np.sqrt(2.0 * np.asarray(x, dtype=float)) / self.sigma_eff

    def mean(self) -> float:
        return self.mean_known + self.sigma_eff**2

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("x must be nonnegative")
        if self.degenerate:
            out = (x >= self.mean_known).astype(float)
        else:
            out = 1.0 - np.asarray(marcum_q1(self.alpha, self.beta(x)))
        return float(out) if out.ndim == 0 else out

    def sf(self, x):
        """``Q1(alpha, beta(x))`` without the cancellation of ``1 - cdf``."""
        x = np.asarray(x, dtype=float)
        if self.degenerate:
            out = (x < self.mean_known).astype(float)
        else:
            out = np.asarray(marcum_q1(self.alpha, self.beta(x)))
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("x must be nonnegative")
        if self.degenerate:
            raise DomainError("the degenerate law has no density")
        s2 = self.sigma_eff**2
        mu = self.mean_known
        arg = 2.0 * np.sqrt(x * mu) / s2
        # e^{-(x + mu)/s2} I0(arg) = e^{-(sqrt x - sqrt mu)^2 / s2} i0e(arg)
        out = np.exp(-((np.sqrt(x) - math.sqrt(mu)) ** 2) / s2) * np.asarray(bessel_i0e(arg)) / s2
        return float(out) if out.ndim == 0 else out

    def ppf(self, p: float) -> float:
        """Inverse CDF by bracketed root finding."""
        if not 0.0 <= p < 1.0:
            raise DomainError("p must lie in [0, 1)")
        if self.degenerate:
            return self.mean_known
        if p == 0.0:
            return 0.0
        hi = max(1.0, 2.0 * self.mean())
        while self.cdf(hi) < p:
            hi *= 2.0
        return optimize.brentq(lambda x: self.cdf(x) - p, 0.0, hi, xtol=1e-14, rtol=1e-12)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        w = _rng.complex_normal(rng, size) * self.sigma_eff
        return np.abs(math.sqrt(self.mean_known) + w) ** 2


def _pair_block(model: MismatchModel):
    a = model.kappa * math.sqrt(1.0 - model.sigma**2)
    b = model.kappa * model.sigma
    c = math.sqrt(1.0 - model.kappa**2)

    def draw(rng, n):
        h_hat = _rng.complex_normal(rng, n)
        q = _rng.complex_normal(rng, n)
        z = _rng.complex_normal(rng, n)
        return h_hat, a * h_hat + b * q + c * z

    return draw


def sample_channels(model: MismatchModel, count: int, seed: int):
    """Complex ``(h_hat, h)`` arrays; deterministic in ``seed``."""
    if count < 1:
        raise DomainError("count must be >= 1")
    parts = _rng.map_blocks(_pair_block(model), count, seed, STREAM_PAIRS)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_pair(model: MismatchModel, count: int, seed: int) -> np.ndarray:
    """``(count, 2)`` array of ``(g_hat, g)`` gain pairs."""
    h_hat, h = sample_channels(model, count, seed)
    return np.column_stack([np.abs(h_hat) ** 2, np.abs(h) ** 2])


def pairs_to_csv(pairs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("g_hat", "g"))
    for gh, g in np.asarray(pairs):
        w.writerow((repr(float(gh)), repr(float(g))))
    return buf.getvalue()
