import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_distance, brute_family_distance, rectangle
from xxzstrip.bounds import (
    area_law_cap,
    distance_histogram,
    f_truncated,
    hole_level_sums,
    lemma43_constants,
    lemma61_check,
    outer_level_sum_bound,
    prop41_constants,
    prop42_rhs,
    theorem31_bound,
    thm32_finite_cap,
    thm33_K,
    thm33_log_K,
)
from xxzstrip.lattice import RectangleSpec, boundary_distance


# --- constants -------------------------------------------------------------------

def test_clustering_constants_example():
    c = prop41_constants(1, 1.0, 4.0)
    assert c.C == pytest.approx(17.43, abs=5e-3)
    assert c.C == pytest.approx(math.sqrt(5) * 3 * math.sqrt(27) / 2, rel=1e-15)
    assert c.mu == pytest.approx(0.2554, abs=5e-5)
    assert c.mu == pytest.approx(math.log(5 / 3) / 2, rel=1e-15)


def test_mu_second_example():
    assert prop41_constants(2, 0.5, 2.0).mu == pytest.approx(0.5 * math.log(1.1), rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.floats(0.01, 20), st.floats(1.01, 50))
def test_constants_match_independent_arithmetic(M, delta, Delta):
    c = prop41_constants(M, delta, Delta)
    d32 = delta * math.sqrt(delta)
    C_ref = 3 * math.sqrt(5) * math.sqrt((2 * M + 1) ** 3) / (2 * min(1.0, d32))
    mu_ref = math.log((4 * M + 2 + delta * Delta) / (4 * M + 2)) / 2
    assert c.C == pytest.approx(C_ref, rel=1e-12)
    assert c.mu == pytest.approx(mu_ref, rel=1e-12)
    assert c.C >= 1


def test_C_saturates_for_large_delta():
    assert prop41_constants(2, 3.0, 4.0).C == prop41_constants(2, 7.5, 4.0).C


@pytest.mark.parametrize("args", [(0, 1.0, 4.0), (1, 0.0, 4.0), (1, 1.0, 1.0)])
def test_clustering_constants_validation(args):
    with pytest.raises(ValueError):
        prop41_constants(*args)


def test_decay_constants():
    c = prop41_constants(1, 1.0, 4.0)
    full = lemma43_constants(c, 1.0, 1)
    assert full.lam == pytest.approx(math.exp(-c.mu), rel=1e-15)
    assert full.C_tilde == c.C
    half = lemma43_constants(c, 0.5, 1)
    assert half.lam == pytest.approx(0.8873, abs=5e-5)
    assert lemma43_constants(c, 0.5, 3).C_tilde == pytest.approx(c.C * math.exp(2 * c.mu))
    with pytest.raises(ValueError):
        lemma43_constants(c, 0.0, 1)


@pytest.mark.parametrize("M,mu,value", [(1, 2.0, 2 * math.e**2), (1, 1.0, 3 * math.e**4)])
def test_uniform_bound_bound_examples(M, mu, value):
    assert theorem31_bound(M, mu) == pytest.approx(value, rel=1e-14)


def test_uniform_bound_bound_rounded_values():
    assert round(theorem31_bound(1, 2.0), 3) == 14.778
    assert round(theorem31_bound(1, 1.0), 2) == 163.79


# --- f(R, mu) ----------------------------------------------------------------------

def brute_f_lower(depth, width, pad, mu):
    R = rectangle(1, depth, width)
    sites = [(c, r) for c in range(1 - pad, depth + pad + 1) for r in range(1, width + 1)]
    return math.fsum(math.exp(-mu * brute_distance(X, R)) for X in itertools.combinations(sites, len(R)))


def test_f_lower_matches_brute_enumeration():
    for depth, width, pad in [(2, 1, 7), (1, 1, 5), (2, 2, 1), (3, 1, 3)]:
        ts = f_truncated(RectangleSpec(1, depth, width), 0.7, pad)
        assert ts.lower == pytest.approx(brute_f_lower(depth, width, pad, 0.7), rel=1e-12)


def test_f_growing_windows_example():
    # M=1, N=2, R={1,2}: width-16 window is pad 7
    R = RectangleSpec(1, 2, 1)
    lows = [f_truncated(R, 2.0, pad).lower for pad in range(0, 8)]
    assert lows == sorted(lows)
    assert all(v <= 14.778 for v in lows)
    assert f_truncated(R, 2.0, 7).n_terms == math.comb(16, 2)


def test_f_large_mu_tends_to_one():
    ts = f_truncated(RectangleSpec(1, 2, 2), 40.0, 2)
    assert ts.lower == pytest.approx(1.0, abs=1e-12)
    assert ts.certified_upper == pytest.approx(1.0, abs=1e-12)


def test_certified_upper_is_sound_and_gap_shrinks():
    for depth, width in [(1, 1), (2, 1), (3, 1), (2, 2)]:
        R = RectangleSpec(1, depth, width)
        for mu in (0.5, 1.0, 2.0):
            brackets = [f_truncated(R, mu, pad) for pad in range(0, 4 if width == 1 else 3)]
            gaps = [b.gap for b in brackets]
            assert all(b.lower <= b.certified_upper < math.inf for b in brackets)
            assert gaps == sorted(gaps, reverse=True)
            best_lower = brackets[-1].lower
            assert all(b.certified_upper >= best_lower for b in brackets)


def test_hole_sums_match_subset_enumeration():
    R = RectangleSpec(1, 3, 2)
    mu = 0.8
    H = hole_level_sums(R, mu)
    for j in range(len(R.sites) + 1):
        brute = math.fsum(
            math.exp(-mu * sum(boundary_distance(R, y) for y in Y))
            for Y in itertools.combinations(R.sites, j)
        )
        assert H[j] == pytest.approx(brute, rel=1e-12)


def test_outer_level_sum_bound_dominates_finite_sums():
    # j particles strictly outside R at positive levels, each level holding 2M sites
    M, mu, j = 1, 1.0, 2
    R = RectangleSpec(1, 2, M)
    outside = [(c, 1) for c in list(range(-10, 1)) + list(range(3, 14))]
    brute = math.fsum(
        math.exp(-mu * sum(boundary_distance(R, x) for x in X)) for X in itertools.combinations(outside, j)
    )
    assert brute <= outer_level_sum_bound(j, M, mu)


def test_closed_form_hole_estimate_is_not_a_bound():
    # (1/j!)(1 + j mu / 2M)(2M/mu)^j underestimates the exact j=1 hole sum here
    M, mu = 2, 2.0
    R = RectangleSpec(1, 2, M)
    exact = hole_level_sums(R, mu)[1]
    closed = (1 + mu / (2 * M)) * (2 * M / mu)
    assert exact == pytest.approx(4.0)
    assert closed == pytest.approx(3.0)
    assert exact > closed


def test_discounted_outer_form_is_not_a_bound():
    # (1/j!)(2M/mu)^j e^{-j mu N/(2M)} falls below the single-particle sum it should cap
    M, mu, N = 1, 1.0, 2
    R = RectangleSpec(1, 2, M)
    single = math.fsum(math.exp(-mu * boundary_distance(R, (c, 1))) for c in list(range(-30, 1)) + list(range(3, 34)))
    discounted = (2 * M / mu) * math.exp(-mu * N / (2 * M))
    assert single > discounted
    assert single <= outer_level_sum_bound(1, M, mu)


def test_f_truncated_validation():
    with pytest.raises(ValueError):
        f_truncated(RectangleSpec(1, 2, 1), -1.0, 1)
    with pytest.raises(ValueError):
        f_truncated(RectangleSpec(1, 2, 1), 1.0, -1)


def test_distance_histogram_counts():
    hist = distance_histogram(2, 1, 3)
    assert sum(hist.values()) == math.comb(8, 2)
    assert hist[0] == 1


# --- family sums --------------------------------------------------------------------

def test_family_sum_example_with_brute_force_lhs():
    R = RectangleSpec(1, 2, 1)
    ell, window, mu = 2, (-4, 7), 1.0
    lhs, rhs = lemma61_check(R, mu, 1, ell, window)
    outside = [(c, 1) for c in range(window[0], window[1] + 1) if not 1 <= c <= ell]
    brute = math.fsum(
        math.exp(-mu * min(brute_family_distance([x], 2, rectangle(s, 2, 1), ell, 1) for s in range(-12, 16)))
        for x in outside
    )
    assert lhs == pytest.approx(brute, rel=1e-12)
    assert lhs <= rhs


def test_family_sum_grid():
    for M, N in [(1, 1), (1, 2), (2, 4)]:
        R = RectangleSpec(1, N // M, M)
        for j in range(1, min(N, 2) + 1):
            for mu in (0.5, 1.0, 2.0):
                lhs, rhs = lemma61_check(R, mu, j, 2, (-4, 7))
                assert lhs <= rhs


# --- caps -----------------------------------------------------------------------------

def test_log_cap_cap_finite_and_monotone_in_ell():
    c = prop41_constants(1, 1.0, 4.0)
    caps = [thm32_finite_cap(0.5, ell, c) for ell in (1, 2, 4, 8, 16, 1000)]
    assert all(0 < x < math.inf for x in caps)
    assert caps == sorted(caps)


def test_log_cap_cap_matches_direct_formula_when_representable():
    c = prop41_constants(1, 1.0, 4.0)
    alpha, ell, M, mu = 0.9, 4, 1, c.mu
    ma = mu * alpha
    direct = 6 + 16 * c.C ** (2 * alpha) / (1 - math.exp(-ma)) * M * ell * (1 + 2 * M / ma) * math.exp(4 * M / ma)
    assert thm32_finite_cap(alpha, ell, c) == pytest.approx(math.log(direct) / (1 - alpha), rel=1e-12)


def test_log_cap_cap_grows_like_log_ell():
    c = prop41_constants(1, 1.0, 4.0)
    alpha = 0.5
    slope = (thm32_finite_cap(alpha, 10**8, c) - thm32_finite_cap(alpha, 10**4, c)) / math.log(10**4)
    assert slope == pytest.approx(1 / (1 - alpha), rel=1e-6)


def test_area_cap_K_example_and_direct_formula():
    c = lemma43_constants(prop41_constants(1, 1.0, 4.0), 0.5, 1)
    alpha = 0.9
    ma = c.mu * alpha
    la = c.lam**alpha
    direct = 6 + 2 * (c.C * c.C_tilde) ** alpha * 8 / (1 - math.exp(-ma / 2)) * (1 + 4 / ma) * math.exp(8 / ma) * la / (1 - la)
    assert thm33_K(alpha, c) == pytest.approx(direct, rel=1e-12)
    cap = area_law_cap(c)
    assert 0 < cap < math.inf
    assert cap == pytest.approx(2 * thm33_log_K(0.5, c))
    assert thm33_K(0.5, c) > 6


def test_area_cap_requires_lambda():
    with pytest.raises(ValueError):
        thm33_K(0.5, prop41_constants(1, 1.0, 4.0))
    with pytest.raises(ValueError):
        thm32_finite_cap(1.0, 2, prop41_constants(1, 1.0, 4.0))


def test_trace_estimate_rhs_examples():
    assert prop42_rhs({1: [0.0, 0.0]}, 0.5) == 6.0
    assert prop42_rhs({}, 0.5) == 6.0
    assert prop42_rhs({1: [1.0]}, 0.5) == 8.0
    assert prop42_rhs({1: [1.0 + 5e-10]}, 0.5) == 8.0
    with pytest.raises(ValueError):
        prop42_rhs({1: [1.1]}, 0.5)
    with pytest.raises(ValueError):
        prop42_rhs({1: [0.5]}, 1.5)
