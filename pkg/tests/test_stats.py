import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hierlab.stats import (
    ScoreSet, aggregate, bootstrap_ci, bootstrap_distribution, iqm, optimality_gap, performance_profile,
    probability_of_improvement, probability_of_improvement_ci, stratified_bootstrap_ci,
    stratified_bootstrap_distribution, tail_probability,
)

scores = st.lists(st.floats(-10, 10, allow_nan=False, allow_infinity=False), min_size=1, max_size=30)
metric = st.sampled_from(["mean", "median", "iqm", "og"])


def brute_iqm(xs):
    s = sorted(Fraction(x) for x in xs)
    k = len(s) // 4
    core = s[k:len(s) - k]
    return sum(core) / len(core)


def brute_poi(x, y):
    total = Fraction(0)
    for task in x:
        pairs = list(itertools.product(x[task], y[task]))
        total += sum(Fraction(1) if a > b else Fraction(1, 2) if a == b else Fraction(0) for a, b in pairs) / len(pairs)
    return total / len(x)


def test_point_examples():
    assert iqm([1, 2, 3, 4, 5, 6, 7, 8]) == 4.5
    assert iqm([0.3] * 7) == 0.3
    assert optimality_gap([0.5, 1.0], 1.0) == 0.25
    assert optimality_gap([1.0, 1.5, 2.0], 1.0) == 0.0
    assert optimality_gap([1.5, 0.0], 1.0) == optimality_gap([1.0, 0.0], 1.0)
    assert aggregate([3, 1, 2], "median") == 2.0
    with pytest.raises(ValueError):
        aggregate([], "mean")
    with pytest.raises(ValueError):
        aggregate([1.0], "og")
    with pytest.raises(ValueError):
        aggregate([1.0], "max")


@settings(max_examples=300, deadline=None)
@given(scores)
def test_iqm_matches_brute_force(xs):
    assert iqm(xs) == pytest.approx(float(brute_iqm(xs)), rel=1e-12, abs=1e-12)
    assert min(xs) <= iqm(xs) <= max(xs)


@settings(max_examples=300, deadline=None)
@given(scores, metric, st.randoms(use_true_random=False))
def test_permutation_invariance(xs, m, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    assert aggregate(xs, m, target=1.0) == pytest.approx(aggregate(ys, m, target=1.0), rel=1e-12, abs=1e-12)


def test_profile_examples():
    s = {"A": [0.2, 0.8], "B": [0.6, 0.6]}
    pts = performance_profile(s, [-1.0, 0.5, 0.9])
    assert [p.fraction for p in pts] == [1.0, 0.75, 0.0]
    avg = performance_profile(s, [0.5, 0.55, 0.6], mode="average_score")
    assert [p.fraction for p in avg] == [0.5, 0.5, 0.0]
    with pytest.raises(ValueError):
        performance_profile(s, [0.5, 0.1])
    with pytest.raises(ValueError):
        performance_profile(s, [0.5], mode="other")


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.sampled_from("abc"), scores, min_size=1),
       st.lists(st.floats(-12, 12, allow_nan=False), min_size=1, max_size=20))
def test_profile_matches_enumeration_and_is_monotone(data, taus):
    taus = sorted(taus)
    pts = performance_profile(data, taus)
    flat = [x for t in sorted(data) for x in data[t]]
    for p in pts:
        assert p.fraction == float(Fraction(sum(x > p.tau for x in flat), len(flat)))
    fr = [p.fraction for p in pts]
    assert all(a >= b for a, b in zip(fr, fr[1:]))


def test_poi_examples():
    assert probability_of_improvement({"t": [1, 3]}, {"t": [2]}) == 0.5
    assert probability_of_improvement({"t": [5, 6]}, {"t": [1, 2, 3]}) == 1.0
    assert probability_of_improvement({"t": [1, 2]}, {"t": [1, 2]}) == 0.5
    with pytest.raises(ValueError, match="task sets differ"):
        probability_of_improvement({"t": [1]}, {"u": [1]})


small_ints = st.lists(st.integers(0, 4), min_size=1, max_size=7)


@settings(max_examples=300, deadline=None)
@given(st.dictionaries(st.sampled_from("abcd"), st.tuples(small_ints, small_ints), min_size=1))
def test_poi_brute_force_and_complement(data):
    x = {t: v[0] for t, v in data.items()}
    y = {t: v[1] for t, v in data.items()}
    p = probability_of_improvement(x, y)
    # exact up to the final rounding, which is chosen so the complement sums to 1
    assert abs(p - float(brute_poi(x, y))) <= 2.0 ** -53
    assert p + probability_of_improvement(y, x) == 1.0


def test_constant_data_gives_zero_width():
    rng = np.random.default_rng(0)
    for m in ("mean", "median", "iqm"):
        assert bootstrap_ci([0.1] * 10, m, rng=rng) == (0.1, 0.1)
    assert stratified_bootstrap_ci({"a": [0.7] * 3, "b": [0.7] * 5}, "iqm", rng=rng) == (0.7, 0.7)


def test_bootstrap_argument_errors():
    with pytest.raises(ValueError):
        bootstrap_ci([1.0, 2.0], "mean", n_resamples=50)
    with pytest.raises(ValueError):
        bootstrap_ci([1.0, 2.0], "mean", level=1.0)
    with pytest.raises(ValueError):
        bootstrap_ci([1.0, 2.0], "mean", method="bca")
    with pytest.raises(ValueError):
        ScoreSet({"a": []})
    with pytest.raises(ValueError):
        ScoreSet({"a": [np.nan]})


def test_tail_probability():
    assert tail_probability(0.95, 10, "percentile") == pytest.approx(0.025)
    a = tail_probability(0.95, 10)
    assert 0.0 < a < 0.025
    assert tail_probability(0.95, 10_000) == pytest.approx(0.025, abs=1e-4)


def test_point_inside_interval_in_almost_all_trials():
    rng = np.random.default_rng(1)
    inside = 0
    for _ in range(300):
        xs = rng.exponential(size=int(rng.integers(4, 15)))
        for m in ("mean", "iqm"):
            lo, hi = bootstrap_ci(xs, m, n_resamples=500, rng=rng)
            inside += lo <= aggregate(xs, m) <= hi
    assert inside / 600 >= 0.99


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from("abc"), scores, min_size=1), metric, st.integers(0, 2**32 - 1))
def test_stratified_interval_within_score_range(data, m, seed):
    lo, hi = stratified_bootstrap_ci(data, m, n_resamples=200, rng=np.random.default_rng(seed), target=1.0)
    pooled = np.concatenate([np.asarray(v, float) for v in data.values()])
    if m == "og":
        pooled = np.maximum(0.0, 1.0 - pooled)
    assert pooled.min() <= lo <= hi <= pooled.max()


def test_single_task_stratified_matches_plain_in_distribution():
    from scipy.stats import ks_2samp

    xs = np.random.default_rng(2).normal(size=10)
    plain = bootstrap_distribution(xs, "iqm", 2000, np.random.default_rng(3))
    strat = stratified_bootstrap_distribution({"t": xs}, "iqm", 2000, np.random.default_rng(4))
    crit = 1.358 * np.sqrt(2 / 2000)
    assert ks_2samp(plain, strat).statistic < crit
    # same generator state, same draws
    same = stratified_bootstrap_distribution({"t": xs}, "iqm", 2000, np.random.default_rng(3))
    assert np.array_equal(plain, same)


def test_stratified_resamples_within_tasks():
    # task a only ever contributes 0s and task b 1s, so every pooled mean is 1/3
    lo, hi = stratified_bootstrap_ci({"a": [0.0, 0.0], "b": [1.0]}, "mean", rng=np.random.default_rng(0))
    assert lo == hi == pytest.approx(1 / 3)


def test_poi_interval():
    rng = np.random.default_rng(5)
    x = {"t": rng.normal(1.0, 1.0, 10)}
    y = {"t": rng.normal(0.0, 1.0, 10)}
    lo, hi = probability_of_improvement_ci(x, y, rng=rng)
    assert 0.0 <= lo <= probability_of_improvement(x, y) <= hi <= 1.0
    assert probability_of_improvement_ci({"t": [1.0]}, {"t": [0.0]}, rng=rng) == (1.0, 1.0)
