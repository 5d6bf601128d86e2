"""Closed forms for two families of Marcum-Q integrals, with quadrature oracles.

``G(alpha, rho) = int_rho^inf e^{-n x} x^m (1 - Q1(alpha, x)) dx`` is evaluated
through the Corollary-3 surrogate of the CDF, giving incomplete-gamma terms.

``T(alpha, m, a, t1, t2) = int_t1^t2 e^{-m x} log(1 + a x) Q1(alpha, x) dx`` is
evaluated through the Lemma-1 surrogate of Q1: 1 below c1, the line
``n2 x + n1`` on [c1, c2] and 0 above.  The antiderivatives involve
``e^{m/a} E1(m x + m/a)``, which is always formed as ``e^{-m x}`` times the
scaled ``e^t E1(t)`` so nothing overflows for large ``m / a``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, DomainError, RegimeWarning
from .marcum_approx import SQRT_2PI, Variant, build_params
from .special_fn import (
    DEFAULT_TOL,
    Tolerance,
    exp_integral_e1_scaled,
    marcum_q1_scalar,
    upper_incomplete_gamma,
)


@dataclass(frozen=True)
class GIntegralSpec:
    alpha: float
    rho: float
    m: float
    n: float

    def __post_init__(self):
        if not (self.alpha >= 0 and self.rho >= 0 and self.m >= 0 and self.n > 0):
            raise DomainError("need alpha >= 0, rho >= 0, m >= 0, n > 0")


@dataclass(frozen=True)
class TIntegralSpec:
    alpha: float
    m: float
    a: float
    theta1: float
    theta2: float = math.inf

    def __post_init__(self):
        if not (self.alpha >= 0 and self.m >= 0 and self.a > 0):
            raise DomainError("need alpha >= 0, m >= 0, a > 0")
        if not (0 <= self.theta1 < self.theta2):
            raise DomainError("need 0 <= theta1 < theta2")


# --------------------------------------------------------------------------
# G family
# --------------------------------------------------------------------------

def coro3_breakpoints(alpha: float) -> tuple[float, float]:
    """Unclamped Corollary-3 breakpoints used by the G closed form."""
    base = 0.5 * SQRT_2PI * (1.0 - 1.0 / (SQRT_2PI * alpha))
    return alpha - base, SQRT_2PI - base + alpha


def g_closed_form(spec: GIntegralSpec) -> float:
    alpha, rho, m, n = spec.alpha, spec.rho, spec.m, spec.n
    if alpha == 0.0:
        raise DomainError("the Corollary-3 breakpoints are undefined at alpha = 0")
    if alpha < 0.05:
        warnings.warn(f"alpha={alpha:g} is below the useful range of the closed form",
                      RegimeWarning, stacklevel=2)
    c1, c2 = coro3_breakpoints(alpha)
    s1, s2 = m + 1.0, m + 2.0
    if rho >= c2:
        return upper_incomplete_gamma(s1, n * rho) * n ** (-s1)
    lo = max(c1, rho)
    intercept = -alpha / SQRT_2PI + 0.5 * (1.0 - 1.0 / (SQRT_2PI * alpha))
    return (
        upper_incomplete_gamma(s1, n * c2) * n ** (-s1)
        + intercept * n ** (-s1) * (upper_incomplete_gamma(s1, n * lo) - upper_incomplete_gamma(s1, n * c2))
        + (upper_incomplete_gamma(s2, n * lo) - upper_incomplete_gamma(s2, n * c2)) * n ** (-s2) / SQRT_2PI
    )


def _quad(f, lo, hi, points, tol: Tolerance, epsrel=1e-10):
    pts = sorted({p for p in points if lo < p < hi})
    val, err = integrate.quad(f, lo, hi, points=pts or None, epsabs=tol.abs_tol,
                              epsrel=epsrel, limit=500)
    if err > max(10 * tol.abs_tol, 1e-8 * abs(val)):
        raise AccuracyError(f"quadrature error estimate {err:.3g} too large")
    return val


def g_quadrature_oracle(spec: GIntegralSpec, tol: Tolerance = DEFAULT_TOL) -> float:
    """Adaptive quadrature of the G integrand on [rho, X] plus the Gamma tail.

    ``X`` grows until ``Gamma(m+1, n X) n^{-m-1}`` (which bounds the dropped
    piece because 1 - Q1 <= 1) is below ``tol.abs_tol``; that tail is added
    back with 1 - Q1 taken as 1.
    """
    alpha, rho, m, n = spec.alpha, spec.rho, spec.m, spec.n
    p = build_params(alpha, Variant.LEMMA1)

    def tail(x):
        return upper_incomplete_gamma(m + 1.0, n * x) * n ** (-m - 1.0)

    cut = max(rho, p.c2 + 40.0 / n)
    while tail(cut) > tol.abs_tol:
        cut *= 1.5
    if rho >= cut:
        return tail(rho)

    def f(x):
        return math.exp(-n * x) * x**m * (1.0 - marcum_q1_scalar(alpha, x, tol))

    return _quad(f, rho, cut, (p.c1, p.x0, p.c2), tol) + tail(cut)


# --------------------------------------------------------------------------
# T family
# --------------------------------------------------------------------------

def line_coeffs(alpha: float) -> tuple[float, float, float, float]:
    """(c1, c2, n1, n2): Lemma-1 breakpoints and the Q1 line ``n2 x + n1``."""
    p = build_params(alpha, Variant.LEMMA1)
    n2 = -p.o1
    n1 = 1.0 + p.o1 * p.o2 - p.o3
    return p.c1, p.c2, n1, n2


def _log1p_ax(a, x):
    return math.log1p(a * x)


def f1_antiderivative(x: float, m: float, a: float) -> float:
    """Antiderivative of ``e^{-m x} log(1 + a x)`` (m > 0)."""
    if math.isinf(x):
        return 0.0
    t = m * x + m / a
    return -math.exp(-m * x) * (exp_integral_e1_scaled(t) + _log1p_ax(a, x)) / m


def f2_antiderivative(x: float, m: float, a: float, n1: float, n2: float) -> float:
    """Antiderivative of ``(n2 x + n1) e^{-m x} log(1 + a x)`` (m > 0)."""
    if math.isinf(x):
        return 0.0
    t = m * x + m / a
    lin = m * n2 * x + n2 + m * n1
    return -math.exp(-m * x) * (
        lin * _log1p_ax(a, x) + n2 + (n2 + m * n1 - m * n2 / a) * exp_integral_e1_scaled(t)
    ) / (m * m)


def f3_antiderivative(x: float, a: float) -> float:
    """Antiderivative of ``log(1 + a x)``."""
    return (a * x + 1.0) * (_log1p_ax(a, x) - 1.0) / a


def f4_antiderivative(x: float, a: float, n1: float, n2: float) -> float:
    """Antiderivative of ``(n2 x + n1) log(1 + a x)``."""
    lg = _log1p_ax(a, x)
    ax = a * x
    return (n2 * ((2.0 * ax * ax - 2.0) * lg - ax * ax + 2.0 * ax) / (4.0 * a * a)
            + n1 * f3_antiderivative(x, a))


def _piecewise(theta1, theta2, c1, c2, outer, inner):
    """Integrate ``outer`` on [t1, t2] ∩ [0, c1) and ``inner`` on [t1, t2] ∩ [c1, c2]."""
    total = 0.0
    if theta1 < c1:
        total += outer(min(theta2, c1)) - outer(theta1)
    lo = max(theta1, c1)
    hi = min(theta2, c2)
    if hi > lo:
        total += inner(hi) - inner(lo)
    return total


def t_closed_form(spec: TIntegralSpec) -> float:
    """Closed-form T through the Lemma-1 surrogate; m = 0 is delegated."""
    if spec.m == 0.0:
        return t_zero_m_closed_form(spec)
    m, a = spec.m, spec.a
    c1, c2, n1, n2 = line_coeffs(spec.alpha)
    return _piecewise(
        spec.theta1, spec.theta2, c1, c2,
        lambda x: f1_antiderivative(x, m, a),
        lambda x: f2_antiderivative(x, m, a, n1, n2),
    )


def t_zero_m_closed_form(spec: TIntegralSpec) -> float:
    """Closed-form T for m = 0; requires a finite upper limit."""
    if spec.m != 0.0:
        raise DomainError("t_zero_m_closed_form requires m = 0")
    if math.isinf(spec.theta2):
        raise DomainError("with m = 0 the integral needs a finite theta2")
    a = spec.a
    c1, c2, n1, n2 = line_coeffs(spec.alpha)
    return _piecewise(
        spec.theta1, spec.theta2, c1, c2,
        lambda x: f3_antiderivative(x, a),
        lambda x: f4_antiderivative(x, a, n1, n2),
    )


def q1_tail_cutoff(alpha: float, a: float, abs_tol: float) -> float:
    """Smallest ``X = alpha + k/4`` with ``int_X^inf log(1+ax) Q1(alpha,x) dx < abs_tol``.

    Uses ``Q1(alpha, x) <= exp(-(x - alpha)^2 / 2)`` for x >= alpha and
    ``log(1 + a x) <= a x``.
    """
    u = 0.0
    while True:
        bound = a * (math.exp(-0.5 * u * u) + alpha * math.sqrt(0.5 * math.pi) * special.erfc(u / math.sqrt(2.0)))
        if bound < abs_tol:
            return alpha + u
        u += 0.25


def t_quadrature_oracle(spec: TIntegralSpec, tol: Tolerance = DEFAULT_TOL) -> float:
    alpha, m, a = spec.alpha, spec.m, spec.a
    cut = q1_tail_cutoff(alpha, a, tol.abs_tol)
    hi = min(spec.theta2, cut)
    if spec.theta1 >= hi:
        return 0.0
    p = build_params(alpha, Variant.LEMMA1)

    def f(x):
        return math.exp(-m * x) * math.log1p(a * x) * marcum_q1_scalar(alpha, x, tol)

    return _quad(f, spec.theta1, hi, (p.c1, p.x0, p.c2), tol)


# --------------------------------------------------------------------------
# comparison tables
# --------------------------------------------------------------------------

TABLE_COLUMNS = ("family", "alpha", "m", "n_or_a", "rho_or_theta1", "theta2",
                 "closed_form", "oracle", "rel_err")


def rel_err(closed: float, oracle: float, floor: float = 1e-3) -> float:
    return abs(closed - oracle) / max(abs(oracle), floor)


def comparison_row(spec) -> dict:
    if isinstance(spec, GIntegralSpec):
        cf, ref = g_closed_form(spec), g_quadrature_oracle(spec)
        row = dict(family="G", alpha=spec.alpha, m=spec.m, n_or_a=spec.n,
                   rho_or_theta1=spec.rho, theta2=math.inf)
    else:
        cf, ref = t_closed_form(spec), t_quadrature_oracle(spec)
        row = dict(family="T", alpha=spec.alpha, m=spec.m, n_or_a=spec.a,
                   rho_or_theta1=spec.theta1, theta2=spec.theta2)
    row.update(closed_form=cf, oracle=ref, rel_err=rel_err(cf, ref))
    return row


def table_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow([repr(float(r[c])) if isinstance(r[c], float) else r[c] for c in TABLE_COLUMNS])
    return buf.getvalue()


def g_reference_grid(alpha: float = 2.0):
    """(m, n) pairs and rho values of the G comparison figure."""
    pairs = [(4, 4), (3, 3), (2, 2), (0, 1), (1, 1)]
    rhos = np.round(np.arange(0.0, 3.0 + 1e-9, 0.25), 10)
    return [GIntegralSpec(alpha, float(r), float(m), float(n)) for m, n in pairs for r in rhos]


def t_reference_grid(abs_tol: float = DEFAULT_TOL.abs_tol):
    """T comparison grid with theta1 = 0.

    m > 0 rows use theta2 = inf.  The m = 0 rows replace inf by the tail-bound
    cutoff of :func:`q1_tail_cutoff`, since the closed form needs a finite limit.
    """
    specs = []
    for alpha in (0.5, 1.0, 2.0, 3.0):
        for m in (0.5, 1.0, 2.0):
            for a in (1.0, 5.0):
                specs.append(TIntegralSpec(alpha, m, a, 0.0, math.inf))
        for a in (1.0, 2.0, 5.0):
            specs.append(TIntegralSpec(alpha, 0.0, a, 0.0, q1_tail_cutoff(alpha, a, abs_tol)))
    return specs


def comparison_table(specs):
    return [comparison_row(s) for s in specs]
