"""Outage-constrained power allocation for two-round HARQ with a predictor antenna.

Round 1 is sent with fixed power ``P1`` and succeeds when ``g_hat P1 >= theta``
(``theta = e^R - 1``).  Otherwise round 2 uses the predicted ``g_hat`` to pick
``P2`` so that the round-2 failure probability is about ``epsilon``:

* RTD (repetition, maximum-ratio combining): ``g_hat P1 + g P2 >= theta``.
* INR (incremental redundancy): ``(1 + g_hat P1)(1 + g P2) >= e^R``.

The inverse conditional CDF comes from the log-linear fit
``Q1(s, rho) ~ exp(-e^{I(s)} rho^{J(s)})``.  The Monte Carlo verifier uses
the exact success conditions above, so it does not share that approximation.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import _rng
from .channel import SIGMA_MIN
from .errors import AccuracyError, DomainError, RegimeWarning

I_COEFFS = (-0.840, 0.327, -0.740, 0.083, -0.004)
J_COEFFS = (2.174, -0.592, 0.593, -0.092, 0.005)
S_FIT_MAX = 10.0

STREAM_HARQ = 3


class Protocol(str, enum.Enum):
    RTD = "rtd"
    INR = "inr"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown protocol {value!r}") from None


@dataclass(frozen=True)
class HarqPolicy:
    protocol: Protocol
    rate_R: float
    epsilon: float
    P1: float
    sigma: float
    theta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")
        if not self.rate_R > 0:
            raise DomainError("R must be positive")
        if not self.P1 > 0:
            raise DomainError("P1 must be positive")
        if not 0.0 <= self.sigma <= 1.0:
            raise DomainError("sigma must lie in [0, 1]")
        object.__setattr__(self, "theta", math.expm1(self.rate_R))

    def with_p1(self, P1: float) -> "HarqPolicy":
        return HarqPolicy(self.protocol, self.rate_R, self.epsilon, P1, self.sigma)


@dataclass(frozen=True)
class PowerResult:
    P1: float
    expected_total: float
    achieved_outage: float
    conditional_outage: float = float("nan")


def round1_outage(R: float, P1: float) -> float:
    if not P1 > 0:
        raise DomainError("P1 must be positive")
    return -math.expm1(-math.expm1(R) / P1)


def _horner(coeffs, s):
    out = np.zeros_like(s) + coeffs[-1]
    for c in reversed(coeffs[:-1]):
        out = out * s + c
    return out


def q1_loglinear_coeffs(s):
    """Quartic fits ``(I(s), J(s))`` of the log-linear Q1 form."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise DomainError("s must be nonnegative")
    if np.any(arr > S_FIT_MAX):
        warnings.warn(f"s > {S_FIT_MAX:g} lies outside the fitted range", RegimeWarning, stacklevel=2)
    i, j = _horner(I_COEFFS, arr), _horner(J_COEFFS, arr)
    if arr.ndim == 0:
        return float(i), float(j)
    return i, j


def loglinear_q1(s, rho):
    i, j = q1_loglinear_coeffs(s)
    return np.exp(-np.exp(i) * np.asarray(rho, dtype=float) ** j)


def _s_of(g_hat, sigma):
    return np.sqrt(2.0 * np.asarray(g_hat, dtype=float) * (1.0 - sigma * sigma)) / sigma


def inverse_cdf_approx(epsilon: float, g_hat, sigma: float):
    """Gain threshold ``x`` with ``F(x | g_hat) = epsilon`` under the log-linear form."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    g = np.asarray(g_hat, dtype=float)
    if np.any(g < 0):
        raise DomainError("g_hat must be nonnegative")
    if sigma < SIGMA_MIN:
        out = (1.0 - sigma * sigma) * g
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            i, j = q1_loglinear_coeffs(_s_of(g, sigma))
        # (sigma^2/2) (-log(1-eps) e^{-I})^{2/J}, kept in the log domain since
        # the quartics reach |I| ~ 1e3 well before s = 30
        log_base = math.log(-math.log1p(-epsilon)) - np.asarray(i)
        out = 0.5 * sigma * sigma * np.exp(2.0 * log_base / np.asarray(j))
    return float(out) if np.ndim(out) == 0 else out


def omega(epsilon: float, g_hat, sigma: float):
    return 1.0 / np.asarray(inverse_cdf_approx(epsilon, g_hat, sigma))


def _deficit(g_hat, policy: HarqPolicy):
    g = np.asarray(g_hat, dtype=float)
    if policy.protocol is Protocol.RTD:
        need = policy.theta - g * policy.P1
    else:
        need = np.exp(policy.rate_R - np.log1p(g * policy.P1)) - 1.0
    return np.maximum(need, 0.0)


def p2(g_hat, policy: HarqPolicy):
    """Round-2 power; zero where round 1 already succeeded."""
    out = _deficit(g_hat, policy) * omega(policy.epsilon, g_hat, policy.sigma)
    return float(out) if np.ndim(out) == 0 else out


def p2_rtd(g_hat, policy: HarqPolicy):
    if policy.protocol is not Protocol.RTD:
        policy = HarqPolicy(Protocol.RTD, policy.rate_R, policy.epsilon, policy.P1, policy.sigma)
    return p2(g_hat, policy)


def p2_inr(g_hat, policy: HarqPolicy):
    if policy.protocol is not Protocol.INR:
        policy = HarqPolicy(Protocol.INR, policy.rate_R, policy.epsilon, policy.P1, policy.sigma)
    return p2(g_hat, policy)


def expected_total_power(policy: HarqPolicy) -> float:
    """``P1 + int_0^{theta/P1} e^{-x} P2(x) dx``."""
    top = policy.theta / policy.P1
    val, err = integrate.quad(lambda x: math.exp(-x) * p2(x, policy), 0.0, top,
                              epsabs=0.0, epsrel=1e-8, limit=200)
    if err > 1e-6 * max(abs(val), 1e-300) and err > 1e-12:
        raise AccuracyError(f"expected power quadrature error {err:.3g}")
    return policy.P1 + val


def optimize_p1(protocol, R: float, epsilon: float, sigma: float,
                samples: int = 0, seed: int = 0) -> PowerResult:
    """Minimise the expected total power over ``P1 in [theta/50, 1000 theta]``.

    A log-spaced scan (8 points per decade) brackets the minimum and a
    bounded Brent search in ``log P1`` refines it.  If the scan shows more
    than one local minimum, the best scan point of a 4x denser scan seeds the
    refinement instead.  With ``samples > 0`` the achieved outage is measured
    by Monte Carlo.
    """
    base = HarqPolicy(protocol, R, epsilon, 1.0, sigma)
    lo, hi = math.log(base.theta / 50.0), math.log(1000.0 * base.theta)

    def cost(logp):
        return expected_total_power(base.with_p1(math.exp(logp)))

    n = int(round((hi - lo) / math.log(10.0) * 8)) + 1
    grid = np.linspace(lo, hi, n)
    vals = np.array([cost(x) for x in grid])
    interior = vals[1:-1]
    minima = np.count_nonzero((interior < vals[:-2]) & (interior <= vals[2:]))
    if minima > 1:
        grid = np.linspace(lo, hi, 4 * n)
        vals = np.array([cost(x) for x in grid])
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(cost, bounds=(a, b), method="bounded", options={"xatol": 1e-9})
    logp, pbar = (float(res.x), float(res.fun)) if res.fun <= vals[k] else (float(grid[k]), float(vals[k]))
    P1 = math.exp(logp)
    if samples > 0:
        e2e, cond = monte_carlo_outage(base.with_p1(P1), samples, seed)
    else:
        e2e = cond = float("nan")
    return PowerResult(P1, pbar, e2e, cond)


def _outage_block(policy: HarqPolicy):
    a = math.sqrt(1.0 - policy.sigma**2)
    b = policy.sigma

    def run(rng, n):
        h_hat = _rng.complex_normal(rng, n)
        h = a * h_hat + b * _rng.complex_normal(rng, n)
        g_hat = np.abs(h_hat) ** 2
        g = np.abs(h) ** 2
        first = g_hat * policy.P1 >= policy.theta
        P2 = np.where(first, 0.0, p2(np.where(first, 0.0, g_hat), policy))
        if policy.protocol is Protocol.RTD:
            ok = g_hat * policy.P1 + g * P2 >= policy.theta
        else:
            ok = np.log1p(g_hat * policy.P1) + np.log1p(g * P2) >= policy.rate_R
        ok |= first
        return int(np.count_nonzero(~ok)), int(np.count_nonzero(~first))

    return run


def monte_carlo_outage(policy: HarqPolicy, samples: int, seed: int) -> tuple[float, float]:
    """(end-to-end outage, outage given that round 1 failed)."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    parts = _rng.map_blocks(_outage_block(policy), samples, seed, STREAM_HARQ)
    fails = sum(p[0] for p in parts)
    retx = sum(p[1] for p in parts)
    return fails / samples, (fails / retx if retx else 0.0)


def monte_carlo_power(policy: HarqPolicy, samples: int, seed: int) -> float:
    """Sample mean of ``P1 + P2(g_hat) 1{g_hat < theta / P1}``."""
    def run(rng, n):
        g_hat = rng.standard_exponential(n)
        return math.fsum(p2(g_hat, policy))

    parts = _rng.map_blocks(run, samples, seed, STREAM_HARQ + 1)
    return policy.P1 + math.fsum(parts) / samples


def jensen_check(gains) -> tuple[float, float]:
    """(mean of ``log(1 + x)``, ``log(1 + mean x)``); the first never exceeds the second."""
    x = np.asarray(gains, dtype=float)
    if x.size == 0 or np.any(x < 0):
        raise DomainError("gains must be a nonempty nonnegative list")
    return float(np.mean(np.log1p(x))), float(math.log1p(float(np.mean(x))))


HARQ_COLUMNS = ("protocol", "R_npcu", "epsilon", "sigma", "P1", "P_bar", "achieved_outage")


def harq_sweep(protocols, rates, epsilons, sigmas, samples: int, seed: int):
    rows = []
    for proto in protocols:
        proto = Protocol.parse(proto)
        for R in rates:
            for eps in epsilons:
                for sigma in sigmas:
                    r = optimize_p1(proto, float(R), float(eps), float(sigma), samples, seed)
                    rows.append(dict(protocol=proto.value, R_npcu=float(R), epsilon=float(eps),
                                     sigma=float(sigma), P1=r.P1, P_bar=r.expected_total,
                                     achieved_outage=r.achieved_outage,
                                     conditional_outage=r.conditional_outage))
    return rows


def rows_to_csv(rows, columns=HARQ_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(r[c])) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()
