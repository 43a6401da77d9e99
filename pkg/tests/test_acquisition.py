import numpy as np
import pytest
from hypothesis import given, strategies as st

from batchscreen.acquisition import (
    epsilon_greedy_batch,
    expected_improvement,
    fantasize,
    greedy_rank,
    random_batch,
    ranked_top_s,
    ts_argmax,
)
from batchscreen.errors import PoolExhaustedError
from batchscreen.pool import PoolView
from batchscreen.rfgp import GpPosterior, SqExpKernel

# adaptive-quadrature values of E[max(f - incumbent, 0)], f ~ N(mean, sigma^2)
EI_ORACLE = [
    (0.0, 1.0, 0.0, 0.39894228040143276),
    (1.0, 0.5, 0.3, 0.7183340713542327),
    (-2.0, 3.0, 1.5, 0.18014229065184226),
    (0.2, 0.01, 0.25, 5.346165533838751e-10),
    (5.0, 2.0, -1.0, 6.000764308634096),
]


def view_of(n: int, evaluated=()) -> PoolView:
    return PoolView(np.arange(n, dtype=float).reshape(n, 1), frozenset(evaluated))


def test_ei_matches_quadrature_oracle():
    for mean, sigma, inc, expected in EI_ORACLE:
        got = expected_improvement(np.array([mean]), np.array([sigma]), inc)[0]
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_ei_zero_sigma_degenerates_to_hinge():
    got = expected_improvement(np.array([1.0, -1.0]), np.zeros(2), 0.5)
    np.testing.assert_array_equal(got, [0.5, 0.0])


def test_ei_rejects_bad_inputs():
    with pytest.raises(ValueError):
        expected_improvement(np.array([np.nan]), np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        expected_improvement(np.array([0.0]), np.array([-1.0]), 0.0)
    with pytest.raises(ValueError):
        expected_improvement(np.array([0.0]), np.array([1.0]), np.inf)


@given(
    st.floats(-50, 50),
    st.one_of(st.just(0.0), st.floats(1e-6, 20)),
    st.floats(-50, 50),
    st.floats(0.01, 10),
)
def test_ei_nonnegative_and_monotone_in_mean(mean, sigma, inc, bump):
    lo, hi = expected_improvement(
        np.array([mean, mean + bump]), np.array([sigma, sigma]), inc
    )
    assert lo >= 0.0
    assert hi >= lo - 1e-12


def test_ranked_top_s_orders_by_value_then_index():
    values = np.array([5.0, 9.0, 9.0, 1.0, 7.0])
    assert ranked_top_s(values, view_of(5), 4) == [1, 2, 4, 0]


def test_ranked_top_s_skips_evaluated_and_excluded():
    values = np.array([5.0, 9.0, 9.0, 1.0, 7.0])
    assert ranked_top_s(values, view_of(5, evaluated={1}), 2, exclude=[4]) == [2, 0]


def test_ranked_top_s_short_when_pool_nearly_empty():
    values = np.array([3.0, 2.0, 1.0])
    assert ranked_top_s(values, view_of(3, evaluated={0, 1}), 5) == [2]
    with pytest.raises(PoolExhaustedError):
        ranked_top_s(values, view_of(3, evaluated={0, 1, 2}), 1)


def test_ts_argmax_is_first_ranked():
    values = np.array([0.0, 2.0, 2.0])
    assert ts_argmax(values, view_of(3)) == 1


def test_callable_values_are_evaluated_on_features():
    got = ranked_top_s(lambda feats: feats[:, 0], view_of(4), 2)
    assert got == [3, 2]


def test_values_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ranked_top_s(np.ones(3), view_of(4), 1)


def test_greedy_rank_is_top_s_means():
    means = np.array([0.1, 0.4, 0.3, 0.2])
    assert greedy_rank(means, view_of(4), 2) == [1, 2]


def test_random_batch_deterministic_and_distinct():
    a = random_batch(view_of(30), 10, seed=5)
    b = random_batch(view_of(30), 10, seed=5)
    assert a == b
    assert len(set(a)) == 10
    assert random_batch(view_of(30), 10, seed=6) != a


def test_random_batch_respects_exclusions():
    picks = random_batch(view_of(6, evaluated={0, 1}), 10, seed=0, exclude=[2])
    assert sorted(picks) == [3, 4, 5]


def test_epsilon_zero_is_pure_greedy():
    means = np.arange(10, dtype=float)
    assert epsilon_greedy_batch(means, view_of(10), 4, 0.0, seed=1) == [9, 8, 7, 6]


def test_epsilon_one_is_pure_random():
    means = np.arange(10, dtype=float)
    got = epsilon_greedy_batch(means, view_of(10), 4, 1.0, seed=1)
    # every slot random: the greedy ranking (9, 8, 7, 6) must not survive
    assert got != [9, 8, 7, 6]
    assert len(set(got)) == 4
    assert got == epsilon_greedy_batch(means, view_of(10), 4, 1.0, seed=1)


def test_epsilon_slot_count_rounds():
    means = np.arange(40, dtype=float)
    # round(0.075 * 40) = 3 random slots after 37 greedy ones
    got = epsilon_greedy_batch(means, view_of(40), 40, 0.075, seed=3)
    assert len(got) == 40 and len(set(got)) == 40
    assert got[:37] == list(range(39, 2, -1))


def test_epsilon_random_slots_avoid_greedy_picks():
    means = np.arange(12, dtype=float)
    got = epsilon_greedy_batch(means, view_of(12), 8, 0.5, seed=9)
    assert len(set(got)) == len(got) == 8


@given(st.integers(0, 2**31), st.integers(1, 12), st.integers(0, 11))
def test_batches_never_contain_evaluated(seed, s, n_eval):
    evaluated = set(range(n_eval))
    view = view_of(12, evaluated=evaluated)
    if n_eval == 12:
        return
    for picks in (
        random_batch(view, s, seed),
        epsilon_greedy_batch(np.arange(12, dtype=float), view, min(s, 12 - n_eval), 0.5, seed),
    ):
        assert not (set(picks) & evaluated)
        assert len(set(picks)) == len(picks)


# -- fantasies ---------------------------------------------------------------


def tiny_gp() -> GpPosterior:
    x = np.array([[0.1], [0.5], [0.9]])
    y = np.array([0.2, -0.1, 0.4])
    return GpPosterior(SqExpKernel(0.3, 1.0, 1e-4), x, y)


def test_constant_liar_fills_constant():
    got = fantasize(tiny_gp(), np.array([[0.2], [0.6]]), "constant-liar", constant=0.7)
    np.testing.assert_array_equal(got, [0.7, 0.7])
    with pytest.raises(ValueError):
        fantasize(tiny_gp(), np.array([[0.2]]), "constant-liar")


def test_kriging_believer_returns_means():
    gp = tiny_gp()
    pending = np.array([[0.3], [0.7]])
    np.testing.assert_array_equal(
        fantasize(gp, pending, "kriging-believer"), gp.predict(pending)[0]
    )


def test_posterior_sample_fantasy_reproducible_and_spread():
    gp = tiny_gp()
    pending = np.array([[0.3], [0.7]])
    a = fantasize(gp, pending, "posterior-sample", seed=4)
    b = fantasize(gp, pending, "posterior-sample", seed=4)
    c = fantasize(gp, pending, "posterior-sample", seed=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (2,)


def test_posterior_sample_fantasy_has_predictive_spread():
    # across many seeds the sample variance approaches predictive var + noise
    gp = tiny_gp()
    pending = np.array([[0.5]])
    draws = np.array([
        fantasize(gp, pending, "posterior-sample", seed=s)[0] for s in range(4000)
    ])
    mean, var = gp.predict(pending)
    want = var[0] + gp.kernel.noise_variance
    assert draws.mean() == pytest.approx(mean[0], abs=4 * np.sqrt(want / 4000) + 1e-6)
    assert draws.var() == pytest.approx(want, rel=0.15)


def test_unknown_strategy_rejected():
    with pytest.raises(ValueError):
        fantasize(tiny_gp(), np.array([[0.1]]), "wishful-thinking")
