"""Acceptance suite shared by the CLI and the test-suite.

Each criterion returns a :class:`CriterionResult` carrying a pass flag, a
one-line detail, its wall time and a CSV artifact.  Thresholds are multiplied
by ``scale`` (``scale < 1`` tightens them), which is how the negative control
forces failures.
"""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import channel, harq_power, integrals, rate_adapt, special_fn
from .errors import RegimeWarning
from .marcum_approx import Variant, approx_cdf, build_params, error_report
from .special_fn import (
    bessel_i0e,
    lambert_w0,
    marcum_q1,
    marcum_q1_dbeta,
    upper_incomplete_gamma,
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float
    csv_name: str = ""
    csv_text: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.elapsed:.1f}s / {self.budget:g}s)"


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _timed(number, name, budget, csv_name, fn):
    t0 = time.perf_counter()
    ok, detail, text = fn()
    elapsed = time.perf_counter() - t0
    within = elapsed < budget
    if not within:
        detail += "; over time budget"
    return CriterionResult(number, name, bool(ok and within), detail, elapsed, budget, csv_name, text)


# --------------------------------------------------------------------------
# 1-4: special functions, semi-linear approximation, integrals
# --------------------------------------------------------------------------

def criterion_1(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    def body():
        rows = []
        q_err = 0.0
        for a in (0.25, 0.5, 1.0, 2.0, 4.0):
            ref = 0.5 * (1.0 + bessel_i0e(a * a))
            e = abs(marcum_q1(a, a) - ref)
            q_err = max(q_err, e)
            rows.append(("q1_diagonal", a, e))
        w_err = 0.0
        for x in (-0.3, -0.05, 0.1, 1.0, math.e, 10.0, 1e3, 1e8):
            w = lambert_w0(x)
            e = abs(w * math.exp(w) - x) / abs(x)
            w_err = max(w_err, e)
            rows.append(("lambert_fixed_point", x, e))
        g_err = 0.0
        for s, x in ((0.5, 0.3), (1.5, 2.0), (3.0, 1.0), (4.5, 7.0), (10.0, 12.0)):
            lhs = upper_incomplete_gamma(s + 1.0, x)
            rhs = s * upper_incomplete_gamma(s, x) + x**s * math.exp(-x)
            e = abs(lhs - rhs) / abs(lhs)
            g_err = max(g_err, e)
            rows.append(("gamma_recurrence", s, e))
        ok = q_err < 1e-10 * scale and w_err < 1e-12 * scale and g_err < 1e-10 * scale
        detail = f"Q1 diag {q_err:.1e}, W {w_err:.1e}, Gamma {g_err:.1e}"
        return ok, detail, _table(("check", "argument", "error"), rows)

    return _timed(1, "special-function identities", 1.0, "c01_identities.csv", body)


def criterion_2(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    alphas = (0.1, 0.5, 1.0, 2.0)

    def body():
        surface = error_report(alphas, 1e-3, variants=(Variant.LEMMA1,))
        tangency = 0.0
        for a in alphas:
            p = build_params(a, Variant.LEMMA1)
            value = abs(approx_cdf(p, p.x0) - (1.0 - marcum_q1(a, p.x0)))
            slope = abs(p.slope_m + marcum_q1_dbeta(a, p.x0))
            tangency = max(tangency, value, slope)
        mid = max(surface.get(a, Variant.LEMMA1, "midrange")["max_abs_err"] for a in alphas)
        ok = tangency < 1e-10 * scale and mid < 0.06 * scale
        detail = f"tangency {tangency:.1e} (< 1e-10), midrange max |err| {mid:.4f} (< 0.06)"
        return ok, detail, surface.to_csv()

    return _timed(2, "semi-linear approximation", 5.0, "c02_error_surface.csv", body)


def criterion_3(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    def body():
        rows = integrals.comparison_table(integrals.g_reference_grid())
        checked = [r for r in rows if abs(r["oracle"]) > 1e-3]
        worst = max(r["rel_err"] for r in checked)
        bad = sum(r["rel_err"] > 0.05 * scale for r in checked)
        detail = f"worst rel err {worst:.3f} (<= 0.05), {bad}/{len(checked)} points over"
        return bad == 0, detail, integrals.table_to_csv(rows)

    return _timed(3, "G integral closed form", 30.0, "c03_g_integral.csv", body)


def criterion_4(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    def body():
        rows = integrals.comparison_table(integrals.t_reference_grid())
        worst = max(r["rel_err"] for r in rows)
        bad = sum(r["rel_err"] > 0.05 * scale for r in rows)
        detail = f"worst rel err {worst:.3f} (<= 0.05), {bad}/{len(rows)} points over"
        return bad == 0, detail, integrals.table_to_csv(rows)

    return _timed(4, "T integral closed form", 30.0, "c04_t_integral.csv", body)


# --------------------------------------------------------------------------
# 5-8: channel and rate adaptation
# --------------------------------------------------------------------------

OPERATING_POINT = dict(d_a_lambdas=1.5, v=114.0 / 3.6, delta=5e-3)


def operating_model(kappa: float = 1.0) -> channel.MismatchModel:
    return channel.MismatchModel.from_wavelengths(kappa=kappa, **OPERATING_POINT)


def criterion_5(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    per_bin = 100_000
    centers = (0.5, 1.0, 2.0)
    total = 20_000_000

    def body():
        model = operating_model()
        h_hat, h = channel.sample_channels(model, total, seed)
        g_hat = np.abs(h_hat) ** 2
        g = np.abs(h) ** 2
        mean_g = float(np.mean(g[:1_000_000]))
        rows = []
        ok = abs(mean_g - 1.0) < 0.01 * scale
        worst = 0.0
        for c in centers:
            sel = g[np.abs(g_hat - c) <= 0.01 * c]
            if sel.size < per_bin:
                return False, f"bin {c} has only {sel.size} samples", ""
            dist = model.conditional(c)
            ks = float(stats.kstest(sel[:per_bin], dist.cdf).statistic)
            worst = max(worst, ks)
            ok = ok and ks < 0.01 * scale
            rows.append(("ks", c, ks))
        rows.append(("mean_g", 1.0, mean_g))
        detail = f"max KS {worst:.4f} (< 0.01), mean g {mean_g:.4f} (within 1%)"
        return ok, detail, _table(("check", "g_hat", "value"), rows)

    return _timed(5, "conditional gain law", 60.0, "c05_channel.csv", body)


def criterion_6(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    def body():
        rows = []
        worst = math.inf
        for snr in range(0, 31, 3):
            P = float(rate_adapt.snr_to_power(snr))
            for g_hat in (0.25, 1.0, 4.0):
                for sigma in (0.1, 0.5, 0.9):
                    dist = channel.ConditionalGainDist.from_sigma(g_hat, sigma)
                    r_or = rate_adapt.optimal_rate_oracle(g_hat, dist, P)
                    r_cf = rate_adapt.optimal_rate_closed_form(g_hat, dist, P)
                    e_or = rate_adapt.instantaneous_throughput(g_hat, dist, rate_adapt.RatePolicy(P, r_or)).eta
                    e_cf = rate_adapt.instantaneous_throughput(g_hat, dist, rate_adapt.RatePolicy(P, r_cf)).eta
                    ratio = e_cf / e_or
                    worst = min(worst, ratio)
                    rows.append((float(snr), g_hat, sigma, r_or, r_cf, e_or, e_cf, ratio))
        target = 1.0 - 0.02 * scale
        bad = sum(r[-1] < target for r in rows)
        detail = f"worst throughput ratio {worst:.3f} (>= 0.98), {bad}/{len(rows)} points under"
        header = ("snr_db", "g_hat", "sigma", "rate_oracle", "rate_closed_form",
                  "eta_oracle", "eta_closed_form", "ratio")
        return bad == 0, detail, _table(header, rows)

    return _timed(6, "closed-form rate vs oracle", 60.0, "c06_rate_closed_form.csv", body)


def criterion_7(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    def body():
        model = operating_model()
        snrs = list(range(0, 31, 3))
        kinds = ("NoCSIT", "Adaptive", "Genie")
        rows = rate_adapt.sweep([(114.0, 5.0, model)], snrs, kinds, 100_000, seed)
        eta = {(r["snr_db"], r["kind"]): r["eta_npcu"] for r in rows}
        slack = 1e-12 * scale
        broken = []
        for s in snrs:
            n, a, g = eta[(s, "NoCSIT")], eta[(s, "Adaptive")], eta[(s, "Genie")]
            if not (n <= a + slack and a <= g + slack):
                broken.append(s)
            if s > 10 and not a - n > 0:
                broken.append(s)
        detail = "ordering holds at every SNR" if not broken else f"ordering broken at SNR {sorted(set(broken))} dB"
        return not broken, detail, rate_adapt.rows_to_csv(rows)

    return _timed(7, "baseline ordering", 120.0, "c07_rate_sweep.csv", body)


def speed_sweep(kappas, v_kmh_grid, delta_ms: float, snr_db: float, samples: int, seed: int):
    models = []
    for kappa in kappas:
        for v in v_kmh_grid:
            m = channel.MismatchModel.from_wavelengths(
                OPERATING_POINT["d_a_lambdas"], v / 3.6, delta_ms * 1e-3, kappa=kappa)
            models.append((v, delta_ms, m))
    return rate_adapt.sweep(models, [snr_db], ["Adaptive"], samples, seed)


def criterion_8(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    delta_ms = 5.0
    v_grid = np.round(np.arange(60.0, 180.0 + 1e-9, 4.0), 10)
    step = 4.0

    def body():
        kappas = (1.0, 0.9, 0.66)
        rows = speed_sweep(kappas, v_grid, delta_ms, 20.0, 100_000, seed)
        d_a = OPERATING_POINT["d_a_lambdas"] * channel.wavelength(2.68e9)
        v_star = d_a / (delta_ms * 1e-3) * 3.6
        best = {}
        for kappa in kappas:
            pts = [(r["eta_npcu"], r["v_kmh"]) for r in rows if r["kappa"] == kappa]
            best[kappa] = max(pts)[1]
        tol = step * scale
        ok = abs(best[1.0] - v_star) <= tol and all(abs(best[k] - best[1.0]) <= tol for k in kappas)
        detail = (f"argmax v {best[1.0]:.0f} km/h vs d_a/delta {v_star:.1f}; "
                  f"kappa 0.9 -> {best[0.9]:.0f}, 0.66 -> {best[0.66]:.0f} (step {step:g})")
        return ok, detail, rate_adapt.rows_to_csv(rows)

    return _timed(8, "optimal speed", 180.0, "c08_speed_sweep.csv", body)


# --------------------------------------------------------------------------
# 9: HARQ
# --------------------------------------------------------------------------

def criterion_9(seed: int = 0, scale: float = 1.0) -> CriterionResult:
    def body():
        rates, epsilons, sigmas = (0.5, 1.0, 2.0), (1e-1, 1e-2), (0.3, 0.6)
        rows = harq_power.harq_sweep(("rtd", "inr"), rates, epsilons, sigmas, 1_000_000, seed)
        key = {(r["protocol"], r["R_npcu"], r["epsilon"], r["sigma"]): r for r in rows}
        lo, hi = 1.0 - 0.5 * scale, 1.0 + scale
        calib = [r for r in rows if not lo * r["epsilon"] <= r["achieved_outage"] <= hi * r["epsilon"]]
        cond_ratio = [r["conditional_outage"] / r["epsilon"] for r in rows]
        inr_ok = all(key[("inr", R, e, s)]["P_bar"] <= key[("rtd", R, e, s)]["P_bar"]
                     for R in rates for e in epsilons for s in sigmas)
        mono = True
        for p in ("rtd", "inr"):
            for s in sigmas:
                for R in rates:
                    mono &= key[(p, R, 1e-2, s)]["P_bar"] >= key[(p, R, 1e-1, s)]["P_bar"]
                for e in epsilons:
                    pb = [key[(p, R, e, s)]["P_bar"] for R in rates]
                    mono &= all(b > a for a, b in zip(pb, pb[1:]))
        ratios = [r["achieved_outage"] / r["epsilon"] for r in rows]
        detail = (f"end-to-end outage/eps in [{min(ratios):.2f}, {max(ratios):.2f}] "
                  f"({len(calib)}/{len(rows)} outside [0.5, 2]); round-2 outage/eps in "
                  f"[{min(cond_ratio):.2f}, {max(cond_ratio):.2f}]; INR<=RTD {inr_ok}; monotone {mono}")
        cols = harq_power.HARQ_COLUMNS + ("conditional_outage",)
        return not calib and inr_ok and mono, detail, harq_power.rows_to_csv(rows, cols)

    return _timed(9, "HARQ outage calibration", 300.0, "c09_harq.csv", body)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9)


def run_criteria(seed: int = 0, scale: float = 1.0, only=None):
    results = []
    special_fn.warm_up()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for i, fn in enumerate(CRITERIA, start=1):
            if only is None or i in only:
                results.append(fn(seed, scale))
    return results


def criterion_10(first, seed: int = 0, scale: float = 1.0) -> CriterionResult:
    """Re-run every criterion in ``first`` and compare the CSV bytes."""
    def body():
        again = run_criteria(seed, scale, only={r.number for r in first})
        diff = [a.csv_name for a, b in zip(first, again) if a.csv_text.encode() != b.csv_text.encode()]
        detail = "all CSVs byte-identical" if not diff else f"differs: {', '.join(diff)}"
        text = _table(("csv", "identical"), [(a.csv_name, a.csv_name not in diff) for a in first])
        return not diff, detail, text

    budget = 2.0 * sum(r.budget for r in first)
    return _timed(10, "determinism", budget, "c10_determinism.csv", body)


def run_all(seed: int = 0, scale: float = 1.0, out_dir=None, only=None):
    """Run criteria 1-9 (or the subset ``only``) and, if selected, the determinism re-run."""
    only = None if only is None else {int(i) for i in only}
    results = run_criteria(seed, scale, only=None if only is None else only - {10})
    if only is None or 10 in only:
        results.append(criterion_10(results, seed, scale))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in results:
            if r.csv_name:
                (out / r.csv_name).write_text(r.csv_text, newline="")
    return results
