import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiopt import _kernels
from hiopt.analysis import (
    dimension_fit,
    packing_number,
    packing_report,
    raw_regret,
    regret,
    xi_event_holds,
    xi_first_violation,
    xi_fraction,
)
from hiopt.objectives import Objective, get_objective
from hiopt.optimizers import Recommendation, StoSooParams, default_params, stosoo_run
from hiopt.partition import Box, SemiMetric

from oracles import greedy_pack_quadratic, xi_brute


def _at(x):
    return Recommendation(np.array([x]), (0, 0), math.nan, True)


def test_regret_examples():
    obj = get_objective("two-sine")
    assert regret(obj, _at(0.0)) == pytest.approx(0.475599, abs=1e-6)
    assert regret(obj, _at(obj.known_max[0][0])) == 0.0


def test_regret_clamps_grid_error():
    obj = dataclasses.replace(get_objective("two-sine"), known_max=(np.array([0.5]), 0.0))
    assert raw_regret(obj, _at(0.5)) < 0 and regret(obj, _at(0.5)) == 0.0


def test_regret_needs_known_max():
    obj = Objective.from_callable("c", lambda x: 1.0, Box.unit(1))
    with pytest.raises(ValueError):
        regret(obj, _at(0.5))


def _fvals_by_key(trace, obj):
    return {trace.key(j): obj.true_f(trace.rep[j]) for j in range(trace.depth.shape[0])}


def test_xi_holds_without_noise():
    obj = get_objective("garland")
    p = default_params(2000)
    _, tr = stosoo_run(obj, p)
    assert xi_event_holds(tr, obj, p)


def test_xi_fails_on_pushed_estimate():
    obj = get_objective("two-sine")
    p = StoSooParams(n=50, k=5, h_max=5, delta=0.1)
    _, tr = stosoo_run(obj, p)
    width = math.sqrt(p.log_term / 2.0)
    rewards = tr.eval_reward.copy()
    rewards[7] += 5 * width
    bad = dataclasses.replace(tr, eval_reward=rewards)
    assert not xi_event_holds(bad, obj, p)
    assert xi_first_violation(bad, obj, p) == 7


def test_xi_rejects_malformed_trace():
    obj = get_objective("two-sine")
    p = StoSooParams(n=30, k=3, h_max=4, delta=0.1)
    _, tr = stosoo_run(obj, p)
    with pytest.raises(ValueError):
        xi_event_holds(dataclasses.replace(tr, eval_reward=tr.eval_reward[:-1]), obj, p)
    nodes = tr.eval_node.copy()
    nodes[3] = tr.depth.shape[0] + 5
    with pytest.raises(ValueError):
        xi_event_holds(dataclasses.replace(tr, eval_node=nodes), obj, p)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["two-sine", "garland"]),
    st.sampled_from([0.3, 1.0, 3.0]),
    st.integers(5, 300),
    st.integers(1, 5),
    st.floats(0.01, 0.9),
    st.booleans(),
    st.integers(0, 2**31),
)
def test_xi_replay_matches_brute_force(name, sigma, n, k, delta, reuse, seed):
    obj = get_objective(name, sigma)
    p = StoSooParams(n=n, k=min(k, n), h_max=6, delta=delta, reuse_middle=reuse)
    _, tr = stosoo_run(obj, p, seed)
    evals = [(key, float(r)) for _, key, _, r in tr.evaluations()]
    brute = xi_brute(evals, list(tr.expansions()), _fvals_by_key(tr, obj), p.log_term, tr.K, reuse)
    assert xi_event_holds(tr, obj, p) == brute


@settings(max_examples=20, deadline=None)
@given(st.integers(20, 400), st.integers(0, 2**31))
def test_xi_is_monotone_in_the_prefix(n, seed):
    obj = get_objective("two-sine", 1.0)
    p = StoSooParams(n=n, k=3, h_max=6, delta=0.5)
    _, tr = stosoo_run(obj, p, seed)
    first = xi_first_violation(tr, obj, p)
    for m in (1, n // 3, n // 2, n):
        assert xi_event_holds(tr.head(m), obj, p) == (first < 0 or first >= m)


def test_xi_fraction():
    assert xi_fraction([True, False, True, True]) == 0.75
    assert math.isnan(xi_fraction([]))


# -- packing -----------------------------------------------------------------


def test_packing_identity_example():
    obj = Objective.from_callable("id", lambda x: float(x[0]), Box.unit(1), known_max=(np.array([1.0]), 1.0))
    obj = dataclasses.replace(obj, batch_fn=lambda xs, theta: xs[:, 0].copy())
    assert packing_number(obj, SemiMetric(1.0, 1.0), 0.1, 1 / 3, grid=10**5) == 2


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=0, max_size=60),
    st.floats(0.01, 200),
    st.sampled_from([0.5, 1.0, 2.0]),
    st.floats(1e-4, 3.0),
)
def test_greedy_pack_matches_quadratic_oracle(xs, L, alpha, sep):
    xs = np.sort(np.array(xs, dtype=np.float64))
    ref = greedy_pack_quadratic(xs, L, alpha, sep)
    assert _kernels.greedy_pack(xs, L, alpha, sep) == ref
    assert _kernels._greedy_pack_numpy(xs, L, alpha, sep) == ref
    assert _kernels._greedy_pack_loop(xs, L, alpha, sep) == ref


def test_numpy_pack_on_large_grid_matches_loop():
    rng = np.random.default_rng(4)
    xs = np.sort(rng.random(200_000))
    for sep in (1e-5, 1e-3, 0.1):
        assert _kernels._greedy_pack_numpy(xs, 3.0, 0.5, sep) == _kernels._greedy_pack_loop(xs, 3.0, 0.5, sep)


@pytest.mark.parametrize("name,alpha", [("two-sine", 2.0), ("garland", 0.5)])
def test_packing_counts_bounded_and_monotone(name, alpha):
    obj = get_objective(name)
    grid = 10**5
    m = SemiMetric(1.0, alpha)
    counts = [packing_number(obj, m, e, 1 / 3, grid) for e in (0.3, 0.1, 0.03, 0.01, 0.001)]
    # the garland peak is a kink, so a 1e5 grid can miss its 0.001-optimal set entirely
    assert counts[0] >= 1 and all(0 <= c <= grid for c in counts)
    # a smaller eps shrinks the set but also the ball radius, so only the ends are compared
    near = (obj.batch(np.linspace(0, 1, grid)[:, None]) >= obj.known_max[1] - 0.001).sum()
    assert counts[-1] <= near


def test_packing_report_csv():
    rep = packing_report(get_objective("two-sine"), SemiMetric(1.0, 2.0), [0.1, 0.01, 0.001], 1 / 3, grid=10**5)
    text = rep.to_csv()
    assert text.startswith("epsilon,count\n") and "fitted_exponent" in text
    assert len(rep.counts) == 3


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(nu=0.0), dict(grid=1000)])
def test_packing_argument_errors(kw):
    args = dict(epsilon=0.1, nu=1 / 3, grid=10**5)
    with pytest.raises(ValueError):
        packing_number(get_objective("two-sine"), SemiMetric(1.0, 1.0), **{**args, **kw})


def test_packing_rejects_2d(bowl2d):
    with pytest.raises(ValueError):
        packing_number(bowl2d, SemiMetric(1.0, 1.0), 0.1, 1 / 3, 10**5)


def test_dimension_fit_examples():
    eps = [0.1, 0.01, 0.001]
    assert abs(dimension_fit(eps, [5, 5, 5])) < 0.1
    assert dimension_fit(eps, [10, 100, 1000]) == pytest.approx(1.0, abs=1e-9)
    assert dimension_fit(eps, [1000, 100, 10]) == pytest.approx(-1.0, abs=1e-9)


@pytest.mark.parametrize(
    "eps,counts",
    [([0.1, 0.01], [1, 2]), ([0.1, 0.05, 0.02], [1, 2, 3]), ([0.1, 0.01, 0.001], [0, 0, 0]), ([0.1, 0.01, 0.001], [0, 0, 4])],
)
def test_dimension_fit_errors(eps, counts):
    with pytest.raises(ValueError):
        dimension_fit(eps, counts)
