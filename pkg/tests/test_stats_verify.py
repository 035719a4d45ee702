from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpatlift.stats_verify import (
    ExperimentConfig,
    UnknownExperiment,
    empirical_pmf,
    first_jump_law,
    header,
    multinomial_noise,
    reports_csv,
    tv_distance,
    verify_suite,
    z_scores,
)
from lpatlift.coalescent import lifted_rate_table


def test_empirical_pmf():
    assert empirical_pmf("aabb") == {"a": Fraction(1, 2), "b": Fraction(1, 2)}
    assert empirical_pmf(["a"]) == {"a": 1}
    with pytest.raises(ValueError):
        empirical_pmf([])


def test_tv_examples():
    p = {"a": 0.6, "b": 0.4}
    assert tv_distance(p, p) == 0
    assert tv_distance({"a": 1}, {"b": 1}) == 1
    assert tv_distance(p, {"a": 0.5, "b": 0.5}) == pytest.approx(0.1)


laws = st.dictionaries(st.sampled_from("abcde"), st.integers(1, 20), min_size=1).map(
    lambda d: {k: Fraction(v, sum(d.values())) for k, v in d.items()}
)


@given(laws, laws, laws)
def test_tv_symmetry_and_triangle(p, q, r):
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p))
    assert 0 <= tv_distance(p, q) <= 1 + 1e-12
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12


def test_z_scores_and_noise():
    z = z_scores(Counter({"a": 60, "b": 40}), {"a": 0.5, "b": 0.5}, 100)
    assert z["a"] == pytest.approx(2.0) and z["b"] == pytest.approx(-2.0)
    noise = multinomial_noise({"a": 0.5, "b": 0.5}, 100)
    assert noise["tv_cell_3sigma"] == pytest.approx(0.15)


def test_first_jump_law_sums_to_one():
    law = first_jump_law(4, lifted_rate_table(4).row(4))
    assert sum(law.values()) == 1 and len(law) == 11
    assert law["{1,2}|{3}|{4}"] == Fraction(18, 25) / 6


def test_unknown_experiment():
    with pytest.raises(UnknownExperiment):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("lemma1", replicates=0)


def test_exact_experiments_pass():
    for name, n in (("lemma1", 4), ("rates-exact", 5), ("paper-check", 5)):
        reports = verify_suite(ExperimentConfig(name, n=n))
        assert reports and all(r.passed for r in reports)


def test_reports_are_deterministic_and_serialisable():
    cfg = ExperimentConfig("lpat-uniformity", n=3, replicates=3000, seed=5)
    a = [r.to_json() for r in verify_suite(cfg)]
    b = [r.to_json() for r in verify_suite(cfg)]
    assert a == b
    r = verify_suite(cfg)[0]
    assert sum(r.empirical.values()) == 3000
    assert 0 <= r.tv <= 1
    assert '"fraction":"1/3"' in a[0]
    assert reports_csv(verify_suite(cfg)).startswith("experiment,check,passed")
    h = header(cfg)
    assert h["rng"]["seed"] == 5 and "threads" not in h["params"]


def test_small_monte_carlo_experiments_run():
    cases = (("gem-moments", None, 2000, None), ("block-one-poisson", 10, 500, None), ("crp-law", 4, 5000, 0.05))
    for name, n, reps, threshold in cases:
        reports = verify_suite(ExperimentConfig(name, n=n, replicates=reps, seed=3, threshold=threshold))
        assert reports
        assert all(r.passed for r in reports), [r.check for r in reports if not r.passed]


def test_single_lift_diagnostic_follows_rate_formula():
    reports = verify_suite(ExperimentConfig("first-merger-size", n=4, replicates=20000, seed=11, threshold=0.02))
    by = {r.check: r for r in reports}
    assert by["single-lift-diagnostic"].passed
    assert by["lifted-chain-vs-enumeration"].passed
    assert by["coalescent-arcsine"].passed


def test_block_one_report_serialises():
    r = verify_suite(ExperimentConfig("block-one-poisson", n=8, replicates=200))[0]
    assert type(r.passed) is bool
    assert '"passed":' in r.to_json()
