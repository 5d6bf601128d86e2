"""Scalar and array kernels for the special functions.

Each hot routine exists twice: a loop kernel written in the numba subset
(compiled when numba is enabled) and a vectorised numpy twin used when the
``MPA_DISABLE_NUMBA`` flag is set.  The public wrappers in
:mod:`mpa.special_fn` pick one through :data:`mpa._accel.NUMBA_ENABLED`.

Kernels never raise; invalid or non-converged results come back as NaN and
the wrappers translate that into exceptions.
"""

import math

import numpy as np

from ._accel import njit

SQRT_2PI = math.sqrt(2.0 * math.pi)
EULER_GAMMA = 0.5772156649015329
_I0_SERIES_MAX = 30.0
_J0_MILLER_MAX = 25.0
_TINY = 1e-300


# --------------------------------------------------------------------------
# modified Bessel I0
# --------------------------------------------------------------------------

@njit
def i0e_scalar(x):
    """exp(-x) * I0(x) for x >= 0."""
    if x <= _I0_SERIES_MAX:
        q = 0.25 * x * x
        t = 1.0
        s = 1.0
        k = 1
        while True:
            t *= q / (k * k)
            s += t
            if t < 1e-17 * s:
                break
            k += 1
        return s * math.exp(-x)
    # scaled asymptotic expansion; all terms positive, min term ~ exp(-2x)
    t = 1.0
    s = 1.0
    for k in range(1, 200):
        nxt = t * (2.0 * k - 1.0) ** 2 / (8.0 * k * x)
        if nxt > t:
            break
        t = nxt
        s += t
        if t < 1e-17 * s:
            break
    return s / math.sqrt(2.0 * math.pi * x)


@njit
def i0e_array(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = i0e_scalar(x[i])
    return out


def i0e_numpy(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    lo = x <= _I0_SERIES_MAX
    if lo.any():
        xl = x[lo]
        q = 0.25 * xl * xl
        t = np.ones_like(xl)
        s = np.ones_like(xl)
        k = 1
        while True:
            t = t * q / (k * k)
            s = s + t
            if np.all(t < 1e-17 * s):
                break
            k += 1
        out[lo] = s * np.exp(-xl)
    hi = ~lo
    if hi.any():
        xh = x[hi]
        t = np.ones_like(xh)
        s = np.ones_like(xh)
        for k in range(1, 200):
            t = t * (2.0 * k - 1.0) ** 2 / (8.0 * k * xh)
            s = s + t
            if np.all(t < 1e-17 * s):
                break
        out[hi] = s / np.sqrt(2.0 * np.pi * xh)
    return out


# --------------------------------------------------------------------------
# Bessel J0
# --------------------------------------------------------------------------

@njit
def j0_scalar(x):
    """J0 by Miller backward recurrence (|x| <= 25) or Hankel expansion."""
    ax = abs(x)
    if ax < 1e-8:
        return 1.0 - 0.25 * ax * ax
    if ax <= _J0_MILLER_MAX:
        n = 2 * ((int(ax) + 20 + int(math.sqrt(40.0 * ax))) // 2)
        jp = 0.0  # J_{k+1}
        jk = 1e-30  # J_k
        norm = 0.0
        for k in range(n, 0, -1):
            jm = (2.0 * k / ax) * jk - jp
            jp = jk
            jk = jm
            if (k - 1) % 2 == 0 and k - 1 > 0:
                norm += 2.0 * jk
            if abs(jk) > 1e200:
                jk *= 1e-200
                jp *= 1e-200
                norm *= 1e-200
        norm += jk
        return jk / norm
    chi = ax - 0.25 * math.pi
    p = 1.0
    q = 0.0
    t = 1.0
    for k in range(1, 100):
        nxt = t * (2.0 * k - 1.0) ** 2 / (k * 8.0 * ax)
        if nxt > t:
            break
        t = nxt
        if k % 2 == 1:
            q += t if ((k + 1) // 2) % 2 == 0 else -t
        else:
            p += t if (k // 2) % 2 == 0 else -t
        if t < 1e-17:
            break
    return math.sqrt(2.0 / (math.pi * ax)) * (p * math.cos(chi) - q * math.sin(chi))


# --------------------------------------------------------------------------
# exponential integral, scaled: exp(x) * E1(x)
# --------------------------------------------------------------------------

@njit
def e1_scaled_scalar(x):
    """exp(x) * E1(x) for x > 0 (NaN otherwise)."""
    if not x > 0.0:
        return math.nan
    if x <= 1.0:
        s = 0.0
        t = 1.0
        for k in range(1, 100):
            t *= -x / k
            term = -t / k
            s += term
            if abs(term) < 1e-17 * abs(s):
                break
        return (-EULER_GAMMA - math.log(x) + s) * math.exp(x)
    # modified Lentz continued fraction
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        de = c * d
        h *= de
        if abs(de - 1.0) < 1e-16:
            break
    return h


# --------------------------------------------------------------------------
# Lambert W, principal branch
# --------------------------------------------------------------------------

_INV_E = math.exp(-1.0)


@njit
def lambert_w0_scalar(x):
    if x != x:
        return math.nan
    if x == 0.0:
        return 0.0
    if x < -_INV_E:
        if x > -_INV_E - 1e-15:
            return -1.0
        return math.nan
    if x > math.e:
        l1 = math.log(x)
        w = l1 - math.log(l1)
    elif x < -0.25:
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    else:
        w = math.log1p(x)
    for _ in range(30):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


@njit
def lambert_w0_array(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = lambert_w0_scalar(x[i])
    return out


def lambert_w0_numpy(x):
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        big = x > np.e
        l1 = np.log(np.where(big, x, np.e))
        w = np.where(big, l1 - np.log(l1), w)
        near = (x < -0.25) & ~big
        p = np.sqrt(np.maximum(2.0 * (np.e * x + 1.0), 0.0))
        w = np.where(near, -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3, w)
        mid = ~big & ~near
        w = np.where(mid, np.log1p(np.maximum(x, -0.25)), w)
        active = np.isfinite(x) & (x != 0.0) & (x >= -_INV_E)
        for _ in range(30):
            if not active.any():
                break
            ew = np.exp(w)
            f = w * ew - x
            wp1 = w + 1.0
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            ok = active & (wp1 != 0.0) & (denom != 0.0)
            dw = np.where(ok, f / np.where(ok, denom, 1.0), 0.0)
            w = w - dw
            active = ok & (np.abs(dw) > 1e-15 * (1.0 + np.abs(w)))
    w = np.where(x == 0.0, 0.0, w)
    edge = (x < -_INV_E) & (x > -_INV_E - 1e-15)
    w = np.where(edge, -1.0, w)
    w = np.where((x < -_INV_E) & ~edge, np.nan, w)
    return np.where(np.isnan(x), np.nan, w)


# --------------------------------------------------------------------------
# Poisson CDF (integer-order regularised incomplete gamma) and Marcum Q1
# --------------------------------------------------------------------------

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@njit
def stirlerr(n):
    """log(n!) - log(sqrt(2 pi n) (n/e)^n), accurate for large n."""
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI
    nn = n * n
    return (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - (1.0 / 1680 - 1.0 / 1188 / nn) / nn) / nn) / nn) / n


@njit
def bd0(x, m):
    """Deviance term x log(x/m) + m - x without cancellation."""
    if abs(x - m) < 0.1 * (x + m):
        v = (x - m) / (x + m)
        s = (x - m) * v
        ej = 2.0 * x * v
        v2 = v * v
        for j in range(1, 1000):
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
        return s
    return x * math.log(x / m) + m - x


@njit
def pois_pmf(k, lam):
    """Poisson(lam) probability of integer k >= 0 (lam > 0), Loader's form."""
    if k == 0:
        return math.exp(-lam)
    fk = float(k)
    return math.exp(-stirlerr(fk) - bd0(fk, lam)) / math.sqrt(2.0 * math.pi * fk)

@njit
def poisson_cdf_pair(k, x):
    """(P[N <= k], P[N > k]) for N ~ Poisson(x), x > 0, integer k >= 0."""
    pk = pois_pmf(k, x)
    if k < x:
        t = pk
        f = pk
        for j in range(k, 0, -1):
            t *= j / x
            f += t
            if t < 1e-17 * f or t == 0.0:
                break
        if f > 1.0:
            f = 1.0
        return f, 1.0 - f
    g = 0.0
    t = pk
    j = k + 1
    while True:
        t *= x / j
        g += t
        if t < 1e-17 * g or t == 0.0:
            break
        j += 1
    if g > 1.0:
        g = 1.0
    return 1.0 - g, g


@njit
def marcum_q1_scalar(a, b, abs_tol, max_terms):
    """Q1(a, b) as a Poisson(a^2/2) mixture of Poisson(b^2/2) CDFs.

    Q1(a, b) = sum_k Pois(k; a^2/2) * P[Pois(b^2/2) <= k].  Summation starts
    at the modal index and walks outward until the geometric bound on the
    untouched Poisson mass falls below ``abs_tol``.  NaN on non-convergence.
    """
    lam = 0.5 * a * a
    x = 0.5 * b * b
    # b^2/2 can underflow for tiny nonzero b; Q1 = 1 - O(b^2) there
    if x == 0.0:
        return 1.0
    if lam == 0.0:
        return math.exp(-x)
    k0 = int(lam)
    p0 = pois_pmf(k0, lam)
    f0 = pois_pmf(k0, x)
    cdf0, _ = poisson_cdf_pair(k0, x)
    total = p0 * cdf0
    terms = 1

    k = k0
    p = p0
    f = f0
    cdf = cdf0
    while True:
        k += 1
        p *= lam / k
        f *= x / k
        cdf += f
        if cdf > 1.0:
            cdf = 1.0
        total += p * cdf
        terms += 1
        r = lam / (k + 1.0)
        if r < 1.0 and p * r / (1.0 - r) < abs_tol:
            break
        if terms > max_terms:
            return math.nan

    k = k0
    p = p0
    f = f0
    cdf = cdf0
    while k > 0:
        cdf -= f
        if cdf < 0.0:
            cdf = 0.0
        f *= k / x
        p *= k / lam
        k -= 1
        total += p * cdf
        terms += 1
        r = k / lam
        if r < 1.0 and p * r / (1.0 - r) < abs_tol:
            break
        if terms > max_terms:
            return math.nan

    if total < 0.0:
        return 0.0
    if total > 1.0:
        return 1.0
    return total


@njit
def marcum_q1_array(a, b, abs_tol, max_terms):
    out = np.empty(a.shape[0])
    for i in range(a.shape[0]):
        out[i] = marcum_q1_scalar(a[i], b[i], abs_tol, max_terms)
    return out


def _poisson_cdf_pair_numpy(k, x):
    pk = _pois_pmf_numpy(k, x)
    below = k < x
    f = pk.copy()
    t = pk.copy()
    act = below & (t > 0.0)
    j = k.astype(float)
    while act.any():
        t = np.where(act, t * j / x, t)
        f = np.where(act, f + t, f)
        j = j - 1.0
        act = act & (j >= 1.0) & (t >= 1e-17 * f) & (t > 0.0)
    g = np.zeros_like(x)
    t = pk.copy()
    act = ~below & (t > 0.0)
    j = k.astype(float) + 1.0
    while act.any():
        t = np.where(act, t * x / j, t)
        g = np.where(act, g + t, g)
        j = j + 1.0
        act = act & (t >= 1e-17 * g) & (t > 0.0)
    f = np.minimum(f, 1.0)
    g = np.minimum(g, 1.0)
    cdf = np.where(below, f, 1.0 - g)
    return cdf


_pmf_vec = np.vectorize(lambda k, lam: pois_pmf(int(k), lam), otypes=[float])


def _pois_pmf_numpy(k, lam):
    # one scalar call per element; only used once per Marcum evaluation
    return _pmf_vec(k, lam) if np.size(k) else np.zeros_like(lam)


def marcum_q1_numpy(a, b, abs_tol, max_terms):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty_like(a)
    lam = 0.5 * a * a
    x = 0.5 * b * b
    zero_b = x == 0.0
    zero_a = (lam == 0.0) & ~zero_b
    out[zero_b] = 1.0
    out[zero_a] = np.exp(-x[zero_a])
    gen = ~zero_b & ~zero_a
    if not gen.any():
        return out
    lam = lam[gen]
    x = x[gen]
    k0 = np.floor(lam)
    p0 = _pois_pmf_numpy(k0, lam)
    f0 = _pois_pmf_numpy(k0, x)
    cdf0 = _poisson_cdf_pair_numpy(k0, x)
    total = p0 * cdf0
    terms = np.ones_like(lam)
    failed = np.zeros(lam.shape, dtype=bool)

    k, p, f, cdf = k0.copy(), p0.copy(), f0.copy(), cdf0.copy()
    act = np.ones(lam.shape, dtype=bool)
    while act.any():
        k = np.where(act, k + 1.0, k)
        p = np.where(act, p * lam / k, p)
        f = np.where(act, f * x / k, f)
        cdf = np.where(act, np.minimum(cdf + f, 1.0), cdf)
        total = np.where(act, total + p * cdf, total)
        terms = terms + act
        r = lam / (k + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            done = (r < 1.0) & (p * r / (1.0 - r) < abs_tol)
        failed |= act & ~done & (terms > max_terms)
        act = act & ~done & ~failed

    k, p, f, cdf = k0.copy(), p0.copy(), f0.copy(), cdf0.copy()
    act = (k > 0) & ~failed
    while act.any():
        cdf = np.where(act, np.maximum(cdf - f, 0.0), cdf)
        f = np.where(act, f * k / x, f)
        p = np.where(act, p * k / lam, p)
        k = np.where(act, k - 1.0, k)
        total = np.where(act, total + p * cdf, total)
        terms = terms + act
        r = k / lam
        with np.errstate(divide="ignore", invalid="ignore"):
            done = (r < 1.0) & (p * r / (1.0 - r) < abs_tol)
        failed |= act & ~done & (terms > max_terms)
        act = act & ~done & ~failed & (k > 0)

    total = np.clip(total, 0.0, 1.0)
    total[failed] = np.nan
    out[gen] = total
    return out
