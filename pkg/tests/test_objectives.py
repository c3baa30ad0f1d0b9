import math

import numpy as np
import pytest

from hiopt.objectives import (
    NoiseChannel,
    Objective,
    envelope_mismatch,
    evaluate_noisy,
    garland,
    get_objective,
    grid_optimum,
    load_tabulated,
    tabulated,
    two_sine_product,
)
from hiopt.partition import Box

from oracles import brute_max_1d, garland_ref, two_sine_ref


def test_two_sine_values():
    assert two_sine_product(0.0) == 0.5
    assert two_sine_product(0.867526) == pytest.approx(0.975599, abs=1e-6)


def test_garland_endpoints():
    assert garland(0.0) == 0.0
    assert garland(1.0) == 0.0


def test_envelope_values():
    assert envelope_mismatch(1.0) == 0.0
    assert envelope_mismatch(0.0) == 1.0
    assert envelope_mismatch(1e-9) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("fn,ref", [(two_sine_product, two_sine_ref), (garland, garland_ref)])
def test_point_kernels_match_closed_form(fn, ref):
    for x in np.linspace(0, 1, 1001):
        assert fn(x) == pytest.approx(ref(x), abs=1e-15)


@pytest.mark.parametrize("name", ["two-sine", "garland", "envelope-mismatch"])
def test_batch_matches_point(name):
    obj = get_objective(name)
    xs = np.linspace(0, 1, 4097)
    np.testing.assert_allclose(obj.batch(xs[:, None]), [obj.true_f([x]) for x in xs], rtol=0, atol=1e-15)


@pytest.mark.parametrize("name", ["two-sine", "garland"])
def test_range_in_unit_interval(name):
    v = get_objective(name).batch(np.linspace(0, 1, 10**6)[:, None])
    assert v.min() >= 0.0 and v.max() <= 1.0


def test_grid_optimum_two_sine():
    x, v = grid_optimum(get_objective("two-sine"), 10**7)
    assert abs(x[0] - 0.867526) < 1e-3
    assert abs(v - 0.975599) < 1e-4


def test_grid_optimum_simple_cases():
    const = Objective.from_callable("c", lambda x: 2.5, Box.unit(1))
    assert grid_optimum(const, 17)[1] == 2.5
    ident = Objective.from_callable("id", lambda x: float(x[0]), Box.unit(1))
    x, v = grid_optimum(ident, 1001)
    assert (x[0], v) == (1.0, 1.0)


def test_grid_optimum_guards():
    obj = Objective.from_callable("z", lambda x: 0.0, Box.unit(3))
    with pytest.raises(ValueError):
        grid_optimum(obj, 1)
    with pytest.raises(ValueError):
        grid_optimum(obj, 10**3)


def test_envelope_grid_max_at_zero():
    obj = get_objective("envelope-mismatch")
    assert obj.known_max[1] == 1.0 and obj.known_max[0][0] == 0.0


@pytest.mark.parametrize("name,ref", [("two-sine", two_sine_ref), ("garland", garland_ref)])
def test_known_max_matches_independent_oracle(name, ref):
    x_ref, v_ref = brute_max_1d(ref)
    obj = get_objective(name)
    assert obj.known_max[1] == pytest.approx(v_ref, abs=1e-9)
    assert obj.known_max[0][0] == pytest.approx(x_ref, abs=1e-4)


def test_garland_max_is_the_kink_near_pi_over_6():
    obj = get_objective("garland")
    assert obj.known_max[0][0] == pytest.approx(math.pi / 6, abs=1e-6)
    assert obj.known_max[1] == pytest.approx(4 * (math.pi / 6) * (1 - math.pi / 6), abs=1e-7)


def test_zero_channel_is_exact():
    obj = get_objective("two-sine")
    rng = np.random.default_rng(0)
    assert evaluate_noisy(obj, [0.3], rng) == obj.true_f([0.3])


def test_noise_unbiased_and_bounded():
    ch = NoiseChannel.gaussian(0.1, 1.0)
    z = ch.sample(np.random.default_rng(123), 10**6)
    assert abs(z.mean()) < 4 * 0.1 / 10**3
    assert np.abs(z).max() <= 1.0


def test_noise_truncation_bites_at_large_sigma():
    z = NoiseChannel.gaussian(1.0, 1.0).sample(np.random.default_rng(5), 10**6)
    assert np.abs(z).max() <= 1.0
    # N(0,1) truncated to [-1, 1]: var = 1 - 2 phi(1) / (2 Phi(1) - 1)
    phi1 = math.exp(-0.5) / math.sqrt(2 * math.pi)
    std = math.sqrt(1 - 2 * phi1 / math.erf(1 / math.sqrt(2)))
    assert z.std() == pytest.approx(std, abs=2e-3)
    assert abs(z.mean()) < 4 * 0.54 / 10**3


def test_evaluate_noisy_unbiased():
    obj = get_objective("two-sine", sigma=0.1)
    rng = np.random.default_rng(7)
    x = [0.25]
    r = np.array([evaluate_noisy(obj, x, rng) for _ in range(20000)])
    assert abs(r.mean() - obj.true_f(x)) < 4 * 0.1 / math.sqrt(r.size)
    assert np.all(np.abs(r - obj.true_f(x)) <= 1.0)


def test_noise_stream_is_prefix_stable():
    ch = NoiseChannel.gaussian(0.7, 1.0)
    a = ch.sample(np.random.default_rng(11), 100)
    b = ch.sample(np.random.default_rng(11), 5000)
    assert a.tobytes() == b[:100].tobytes()


@pytest.mark.parametrize("kwargs", [dict(kind="odd"), dict(sigma=-1.0), dict(bound=0.0), dict(sigma=math.inf)])
def test_noise_channel_validation(kwargs):
    with pytest.raises(ValueError):
        NoiseChannel(**{"kind": "truncated_gaussian", **kwargs})


def test_tabulated_objective(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("x,f\n0.0,0.0\n0.5,2.0\n1.0,1.0\n")
    obj = load_tabulated(p)
    assert obj.true_f([0.25]) == 1.0
    assert obj.true_f([0.75]) == 1.5
    g = get_objective("custom-grid", path=p)
    assert g.known_max[1] == 2.0 and g.known_max[0][0] == 0.5
    with pytest.raises(ValueError):
        tabulated([0.0, 0.0], [1.0, 2.0])


def test_tabulated_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0.0,1.0\n0.5,oops\n")
    with pytest.raises(ValueError):
        load_tabulated(p)
    p.write_text("x,f\nnot,numbers\n0.0,1.0\n1.0,2.0\n")
    with pytest.raises(ValueError):
        load_tabulated(p)


def test_unknown_objective():
    with pytest.raises(ValueError):
        get_objective("rosenbrock")
    with pytest.raises(ValueError):
        get_objective("custom-grid")


def test_true_f_accepts_read_only_points():
    obj = get_objective("garland")
    x = np.array([0.4])
    x.setflags(write=False)
    assert obj.true_f(x) == garland(0.4)
