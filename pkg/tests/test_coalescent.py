import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpatlift.coalescent import (
    RateError,
    arcsine,
    beta_measure,
    density,
    display_discrepancies,
    kingman,
    lifted_rate_rational,
    lifted_rate_table,
    merger_size_pmf,
    parse_lambda,
    point_mass,
    rate_arcsine_rational,
    rate_beta_closed,
    rate_beta_rational,
    rate_integral,
    rate_table,
    simulate_lambda_coalescent,
    time_change_factor,
    uniform,
)
from lpatlift.port_trees import port_count


def test_arcsine_examples():
    assert rate_arcsine_rational(2, 2) == 1
    assert rate_arcsine_rational(3, 2) == Fraction(1, 2)
    assert rate_arcsine_rational(4, 2) == Fraction(3, 8)
    assert rate_arcsine_rational(4, 3) == Fraction(1, 8)
    assert rate_arcsine_rational(4, 4) == Fraction(3, 8)


def test_uniform_rates():
    # Bolthausen-Sznitman: (k-2)! (b-k)! / (b-1)!
    for b in range(2, 9):
        for k in range(2, b + 1):
            expected = Fraction(math.factorial(k - 2) * math.factorial(b - k), math.factorial(b - 1))
            assert rate_beta_rational(b, k, 1, 1) == expected
            assert rate_beta_closed(b, k, 1, 1) == pytest.approx(float(expected), rel=1e-12)
    assert rate_beta_rational(4, 2, 1, 1) == Fraction(1, 3)


def test_kingman_and_point_masses():
    t = rate_table(kingman(), 5)
    assert t.rate(5, 2) == 1 and t.rate(5, 3) == 0
    assert rate_integral(4, 4, point_mass(1)) == 1.0
    assert rate_integral(4, 2, point_mass(1)) == 0.0


def test_density_measure_matches_beta():
    lam = density(-0.5, -0.5, mass=1)
    for b, k in ((5, 2), (6, 4), (9, 9)):
        assert rate_integral(b, k, lam) == pytest.approx(float(rate_arcsine_rational(b, k)), rel=1e-10)


def test_lifted_rates_examples():
    assert [lifted_rate_rational(4, k) for k in (2, 3, 4)] == [Fraction(1, 5), Fraction(1, 15), Fraction(1, 5)]
    assert merger_size_pmf(4, lifted_rate_table(4).row(4)) == {2: Fraction(18, 25), 3: Fraction(4, 25), 4: Fraction(3, 25)}


def test_time_change_links_the_two_rate_families():
    for b in range(2, 15):
        assert time_change_factor(b) == Fraction(2 ** (b - 2) * math.factorial(b - 2), port_count(b))
        for k in range(2, b + 1):
            assert lifted_rate_rational(b, k) == time_change_factor(b) * rate_arcsine_rational(b, k)
    assert time_change_factor(3) == Fraction(2, 3)


def test_parse_lambda():
    assert parse_lambda("arcsine").exact_beta == (Fraction(1, 2), Fraction(1, 2))
    assert parse_lambda("beta:0.5,0.5").exact_beta == parse_lambda("arcsine").exact_beta
    assert parse_lambda("uniform").exact_beta == (1, 1)
    assert parse_lambda("kingman").kind == "point_mass"
    for bad in ("beta:1", "beta:x,1", "cauchy"):
        with pytest.raises(RateError):
            parse_lambda(bad)
    with pytest.raises(RateError):
        rate_integral(3, 4, arcsine())


def test_display_witnesses():
    recs = display_discrepancies(4)
    arc = next(r for r in recs if r["check"] == "arcsine-rate-display" and r["b"] == 4 and r["k"] == 3)
    assert (arc["normative"], arc["display"]) == (Fraction(1, 8), Fraction(1, 4))
    tc = next(r for r in recs if r["check"] == "time-change-catalan-display" and r["b"] == 3)
    assert (tc["normative"], tc["display"]) == (Fraction(2, 3), Fraction(1, 24))
    assert all(r["ratio_matches"] for r in recs)


@given(st.integers(2, 24), st.data())
def test_consistency_identity_is_exact(b, data):
    k = data.draw(st.integers(2, b))
    a = data.draw(st.sampled_from([Fraction(1, 2), Fraction(3, 10), 1, Fraction(3, 2), 2]))
    c = data.draw(st.sampled_from([Fraction(1, 2), Fraction(3, 10), 1, Fraction(3, 2), 2]))
    assert rate_beta_rational(b, k, a, c) == rate_beta_rational(b + 1, k, a, c) + rate_beta_rational(b + 1, k + 1, a, c)


@given(st.integers(2, 12), st.floats(0.05, 5), st.floats(0.05, 5), st.data())
def test_quadrature_matches_closed_form(b, a, c, data):
    k = data.draw(st.integers(2, b))
    assert rate_integral(b, k, beta_measure(a, c)) == pytest.approx(rate_beta_closed(b, k, a, c), rel=1e-9)


@given(st.integers(2, 10), st.fractions(min_value=Fraction(1, 100), max_value=100))
def test_merger_pmf_is_scale_invariant(b, scale):
    row = lifted_rate_table(b).row(b)
    assert merger_size_pmf(b, row) == merger_size_pmf(b, {k: scale * r for k, r in row.items()})
    assert sum(merger_size_pmf(b, row).values()) == 1


def test_coalescent_simulation():
    traj = simulate_lambda_coalescent(2, arcsine(), 1)
    assert traj.merger_sizes == [2] and traj.absorbed
    traj = simulate_lambda_coalescent(30, uniform(), 2)
    assert traj.absorbed
    assert sum(k - 1 for k in traj.merger_sizes) == 29
    times = [t for t, _ in traj.states]
    assert times == sorted(times)
    short = simulate_lambda_coalescent(30, uniform(), 2, max_mergers=1)
    assert len(short.states) == 1 and short.states[0] == traj.states[0]
