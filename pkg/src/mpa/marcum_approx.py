"""Semi-linear approximation of the Rician CDF ``y(alpha, beta) = 1 - Q1(alpha, beta)``.

The CDF is replaced by three pieces: 0 below ``c1``, the tangent line through
the point ``(x0, y0)`` in between, and 1 above ``c2``.  Four variants differ in
how the tangent point and slope are chosen:

* ``LEMMA1``  -- inflection point of the CDF under the large-argument I0 form,
  ``x0 = (alpha + sqrt(alpha^2 + 2)) / 2``; exact value and slope there.
* ``COROLLARY1`` -- ``x0 = alpha`` (moderate/large alpha), using
  ``Q1(a, a) = (1 + exp(-a^2) I0(a^2)) / 2``.
* ``COROLLARY2`` -- ``x0 = (alpha + sqrt 2) / 2`` (small alpha).
* ``COROLLARY3`` -- Corollary 1 with ``I0(x) ~ e^x / sqrt(2 pi x)``: slope
  ``1/sqrt(2 pi)``.

Every variant is stored in the generic form ``o1 * (beta - o2) + o3``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RegimeWarning
from .special_fn import bessel_i0e, marcum_q1

SQRT_2PI = math.sqrt(2.0 * math.pi)


class Variant(str, enum.Enum):
    LEMMA1 = "lemma1"
    COROLLARY1 = "coro1"
    COROLLARY2 = "coro2"
    COROLLARY3 = "coro3"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown variant {value!r}") from None


@dataclass(frozen=True)
class SemiLinearParams:
    alpha: float
    variant: Variant
    x0: float
    y0: float
    slope_m: float
    c1: float
    c2: float

    @property
    def o1(self) -> float:
        return self.slope_m

    @property
    def o2(self) -> float:
        return self.x0

    @property
    def o3(self) -> float:
        return self.y0

    def line(self, beta):
        """Unclipped middle piece ``o1 * (beta - o2) + o3``."""
        return self.o1 * (np.asarray(beta, dtype=float) - self.o2) + self.o3


def tangent_point(alpha: float) -> float:
    """Root of ``2 x^2 - 2 alpha x - 1 = 0`` with x >= 0."""
    return 0.5 * (alpha + math.sqrt(alpha * alpha + 2.0))


def _exact_slope(alpha: float, x: float) -> float:
    # x exp(-(a^2 + x^2)/2) I0(a x), written with the scaled Bessel function
    return x * math.exp(-0.5 * (alpha - x) ** 2) * bessel_i0e(alpha * x)


def build_params(alpha: float, variant=Variant.LEMMA1) -> SemiLinearParams:
    """Tangent point, slope and breakpoints for one ``alpha`` and variant.

    Breakpoints are where the tangent line crosses 0 and 1, with the lower one
    clamped at zero.
    """
    variant = Variant.parse(variant)
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0:
        raise DomainError("alpha must be nonnegative and finite")

    if variant in (Variant.COROLLARY1, Variant.COROLLARY3):
        if alpha == 0.0:
            raise DomainError(f"{variant.value} is undefined at alpha = 0")
        if alpha < 1.0:
            warnings.warn(
                f"{variant.value} is meant for moderate/large alpha (got {alpha:g})",
                RegimeWarning,
                stacklevel=2,
            )

    if variant is Variant.LEMMA1:
        x0 = tangent_point(alpha)
        y0 = 1.0 - marcum_q1(alpha, x0)
        slope = _exact_slope(alpha, x0)
    elif variant is Variant.COROLLARY1:
        x0 = alpha
        s = bessel_i0e(alpha * alpha)
        y0 = 0.5 * (1.0 - s)
        slope = alpha * s
    elif variant is Variant.COROLLARY2:
        x0 = 0.5 * (alpha + math.sqrt(2.0))
        y0 = 1.0 - marcum_q1(alpha, x0)
        slope = _exact_slope(alpha, x0)
    else:
        x0 = alpha
        y0 = 0.5 * (1.0 - 1.0 / (SQRT_2PI * alpha))
        slope = 1.0 / SQRT_2PI

    c1 = max(0.0, x0 - y0 / slope)
    c2 = x0 + (1.0 - y0) / slope
    return SemiLinearParams(alpha, variant, x0, y0, slope, c1, c2)


def coro2_alternate_breakpoints(alpha: float) -> tuple[float, float]:
    """Corollary-2 breakpoints with a squared tangent abscissa and a ``+alpha`` offset.

    Kept for comparison only: this pair does not sit where the Corollary-2 line
    reaches 0 and 1, so :func:`build_params` uses the line crossings instead.
    """
    x0 = 0.5 * (alpha + math.sqrt(2.0))
    q = marcum_q1(alpha, x0)
    den = x0 * _exact_slope(alpha, x0)
    return (q - 1.0) / den + alpha, q / den + alpha


def approx_cdf(params: SemiLinearParams, beta):
    """Semi-linear surrogate of ``1 - Q1(alpha, beta)``; broadcasts over beta."""
    b = np.asarray(beta, dtype=float)
    if np.any(b < 0) or np.any(np.isnan(b)):
        raise DomainError("beta must be nonnegative")
    mid = np.clip(params.line(b), 0.0, 1.0)
    out = np.where(b < params.c1, 0.0, np.where(b > params.c2, 1.0, mid))
    return float(out) if out.ndim == 0 else out


def approx_q1(params: SemiLinearParams, beta):
    """Semi-linear surrogate of ``Q1(alpha, beta)``."""
    return 1.0 - approx_cdf(params, beta)


# --------------------------------------------------------------------------
# error surface
# --------------------------------------------------------------------------

@dataclass
class ErrorSurface:
    rows: list = field(default_factory=list)

    COLUMNS = ("alpha", "variant", "region", "max_abs_err", "mean_abs_err")

    def get(self, alpha, variant, region):
        variant = Variant.parse(variant)
        for r in self.rows:
            if r["alpha"] == alpha and r["variant"] == variant.value and r["region"] == region:
                return r
        raise KeyError((alpha, variant, region))

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in self.COLUMNS])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def error_report(alpha_grid, beta_resolution: float = 1e-3, variants=tuple(Variant)) -> ErrorSurface:
    """Max/mean absolute CDF error per (alpha, variant), midrange vs tails.

    The beta grid spans ``[0, max(c2, alpha) + 8]``.  Variants that are
    undefined for a given alpha (corollaries 1 and 3 at alpha = 0) are skipped.
    """
    alphas = [float(a) for a in alpha_grid]
    if not alphas:
        raise DomainError("alpha grid must be non-empty")
    if not beta_resolution > 0:
        raise DomainError("beta_resolution must be positive")
    surface = ErrorSurface()
    for alpha in alphas:
        for variant in variants:
            variant = Variant.parse(variant)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RegimeWarning)
                    p = build_params(alpha, variant)
            except DomainError:
                continue
            top = max(p.c2, alpha) + 8.0
            beta = np.arange(0.0, top + beta_resolution, beta_resolution)
            err = np.abs(approx_cdf(p, beta) - (1.0 - marcum_q1(alpha, beta)))
            mid = (beta >= p.c1) & (beta <= p.c2)
            for region, mask in (("midrange", mid), ("tails", ~mid)):
                e = err[mask]
                surface.rows.append(
                    {
                        "alpha": alpha,
                        "variant": variant.value,
                        "region": region,
                        "max_abs_err": float(e.max()) if e.size else 0.0,
                        "mean_abs_err": float(e.mean()) if e.size else 0.0,
                    }
                )
    return surface


def build_params_array(alpha, variant=Variant.LEMMA1):
    """Vectorised :func:`build_params`: ``(x0, y0, slope, c1, c2)`` arrays.

    No regime warnings are raised here; callers validate alpha themselves.
    """
    variant = Variant.parse(variant)
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise DomainError("alpha must be nonnegative and finite")
    if variant in (Variant.COROLLARY1, Variant.COROLLARY3) and np.any(a == 0):
        raise DomainError(f"{variant.value} is undefined at alpha = 0")
    if variant is Variant.LEMMA1:
        x0 = 0.5 * (a + np.sqrt(a * a + 2.0))
    elif variant is Variant.COROLLARY2:
        x0 = 0.5 * (a + math.sqrt(2.0))
    else:
        x0 = a.copy()
    if variant in (Variant.LEMMA1, Variant.COROLLARY2):
        y0 = 1.0 - np.asarray(marcum_q1(a, x0))
        slope = x0 * np.exp(-0.5 * (a - x0) ** 2) * np.asarray(bessel_i0e(a * x0))
    elif variant is Variant.COROLLARY1:
        s = np.asarray(bessel_i0e(a * a))
        y0 = 0.5 * (1.0 - s)
        slope = a * s
    else:
        y0 = 0.5 * (1.0 - 1.0 / (SQRT_2PI * a))
        slope = np.full_like(a, 1.0 / SQRT_2PI)
    c1 = np.maximum(0.0, x0 - y0 / slope)
    c2 = x0 + (1.0 - y0) / slope
    return x0, y0, slope, c1, c2
