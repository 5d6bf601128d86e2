import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpa.errors import DomainError, RegimeWarning
from mpa.marcum_approx import (
    Variant,
    approx_cdf,
    approx_q1,
    build_params,
    build_params_array,
    coro2_alternate_breakpoints,
    error_report,
    tangent_point,
)
from mpa.special_fn import marcum_q1

VARIANTS = list(Variant)


def params(alpha, variant=Variant.LEMMA1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        return build_params(alpha, variant)


def test_lemma1_tangent_point_at_zero():
    p = params(0.0)
    assert p.x0 == pytest.approx(math.sqrt(2.0) / 2.0, rel=1e-15)


@given(st.floats(0.0, 50.0))
def test_lemma1_tangent_point_solves_inflection_condition(alpha):
    x = tangent_point(alpha)
    assert 2 * x * x - 2 * alpha * x - 1 == pytest.approx(0.0, abs=1e-9 * (1 + x * x))


def test_alpha_two_anchor_value():
    p = params(2.0)
    assert p.y0 == pytest.approx(1.0 - marcum_q1(2.0, p.x0), abs=1e-10)
    assert 0.0 < p.c1 < p.x0 < p.c2


def test_corollary1_shift_at_alpha_one():
    shift = params(1.0).x0 - params(1.0, Variant.COROLLARY1).x0
    assert shift == pytest.approx((math.sqrt(3.0) - 1.0) / 2.0, rel=1e-14)
    assert shift == pytest.approx(0.366, abs=1e-3)


def test_regime_warning_and_domain_errors():
    with pytest.warns(RegimeWarning):
        build_params(0.5, Variant.COROLLARY1)
    with pytest.warns(RegimeWarning):
        build_params(0.5, Variant.COROLLARY3)
    with pytest.raises(DomainError):
        build_params(-0.1)
    with pytest.raises(DomainError):
        build_params(0.0, Variant.COROLLARY3)
    with pytest.raises(DomainError):
        Variant.parse("lemma7")


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0, 2.0, 3.0, 7.0])
def test_structural_invariants(alpha, variant):
    if variant in (Variant.COROLLARY1, Variant.COROLLARY3) and alpha < 1.0:
        pytest.skip("outside the large-alpha regime of this variant")
    p = params(alpha, variant)
    assert p.slope_m > 0
    assert 0.0 <= p.y0 <= 1.0
    assert 0.0 <= p.c1 <= p.x0 <= p.c2
    assert float(p.line(p.c2)) == pytest.approx(1.0, abs=1e-9)
    assert approx_cdf(p, p.c2) == pytest.approx(1.0, abs=1e-9)
    assert approx_cdf(p, p.c1) == pytest.approx(0.0, abs=1e-9)
    assert (p.o1, p.o2, p.o3) == (p.slope_m, p.x0, p.y0)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0, 2.0, 5.0])
def test_tangency_and_slope(alpha):
    p = params(alpha)
    assert abs(approx_cdf(p, p.x0) - (1.0 - marcum_q1(alpha, p.x0))) < 1e-10
    assert approx_q1(p, p.x0) == pytest.approx(marcum_q1(alpha, p.x0), abs=1e-10)
    h = 1e-5
    fd = (marcum_q1(alpha, p.x0 - h) - marcum_q1(alpha, p.x0 + h)) / (2 * h)
    assert fd == pytest.approx(p.slope_m, rel=1e-6)


def test_asymptotic_variant_breaks_down_below_regime():
    # the asymptotic anchor 1/2 - 1/(2 sqrt(2 pi) alpha) goes negative here
    with pytest.warns(RegimeWarning):
        p = build_params(0.1, Variant.COROLLARY3)
    assert p.y0 < 0.0
    assert p.c1 > p.x0


def test_piece_values():
    p = params(2.0)
    assert approx_cdf(p, 0.0) == 0.0
    assert approx_q1(p, p.c2 + 0.1) == 0.0
    assert approx_q1(p, p.c1 - 0.1) == 1.0
    with pytest.raises(DomainError):
        approx_cdf(p, -1.0)


@pytest.mark.parametrize("variant", VARIANTS)
@given(alpha=st.floats(0.05, 12.0))
def test_monotone_continuous_three_pieces(variant, alpha):
    p = params(alpha, variant)
    beta = np.linspace(0.0, p.c2 + 3.0, 4001)
    y = approx_cdf(p, beta)
    assert np.all(np.diff(y) >= -1e-15)
    step = beta[1] - beta[0]
    assert np.max(np.abs(np.diff(y))) <= p.slope_m * step * (1 + 1e-9) + 1e-15
    # second differences vanish except at the two kinks
    kinks = np.sum(np.abs(np.diff(y, 2)) > 1e-12)
    assert kinks <= 4


def test_o_form_reproduces_middle_piece():
    rng = np.random.default_rng(11)
    for alpha, beta in zip(rng.uniform(0, 8, 100), rng.uniform(0, 1, 100)):
        p = params(alpha)
        b = p.c1 + beta * (p.c2 - p.c1)
        assert approx_cdf(p, b) == pytest.approx(p.slope_m * (b - p.x0) + p.y0, abs=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_vectorised_params_match_scalar(variant):
    alphas = np.array([0.3, 1.0, 2.5, 9.0])
    arr = build_params_array(alphas, variant)
    for i, a in enumerate(alphas):
        p = params(a, variant)
        got = [x[i] for x in arr]
        assert got == pytest.approx([p.x0, p.y0, p.slope_m, p.c1, p.c2], rel=1e-13, abs=1e-15)


def test_coro2_alternate_breakpoints_disagree_with_line():
    # the alternate pair does not bracket the tangent point where the line hits 0 and 1
    p = params(0.5, Variant.COROLLARY2)
    lo, hi = coro2_alternate_breakpoints(0.5)
    assert abs(float(p.line(hi)) - 1.0) > 0.05 or abs(float(p.line(lo))) > 0.05


def test_error_report_rows():
    s = error_report([0.1, 0.5, 1.0])
    assert len(s.rows) == 3 * 4 * 2
    header = s.to_csv().splitlines()[0]
    assert header == "alpha,variant,region,max_abs_err,mean_abs_err"
    single = error_report([0.0])
    assert {r["variant"] for r in single.rows} == {"lemma1", "coro2"}
    with pytest.raises(DomainError):
        error_report([])


def test_small_alpha_variant_misused_at_alpha_three():
    s = error_report([3.0])
    assert (s.get(3.0, "coro2", "midrange")["max_abs_err"]
            > s.get(3.0, "lemma1", "midrange")["max_abs_err"])


def test_midrange_error_at_alpha_two_below_claimed_bound():
    # fails: the tangent line at the inflection point drifts about 0.11 from
    # the exact CDF near c2, and the gap tends to a constant for large alpha
    s = error_report([2.0])
    assert s.get(2.0, "lemma1", "midrange")["max_abs_err"] < 0.06
