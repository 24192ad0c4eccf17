import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bassnet.closedform import f_1d, f_complete_m2, f_complete_m3
from bassnet.master import (
    Backend,
    CapExceeded,
    DegenerateExponents,
    ExpSumFunction,
    SubsetProbabilities,
    convert_two_sided_to_one_sided,
    high_precision_curve,
    solve_block_and_alternating_circles,
    solve_general_master,
    solve_master,
    solve_onesided_circle,
    solve_twosided_circle,
)
from bassnet.network import (
    MildHetSpec,
    NetworkError,
    add_node,
    build_complete,
    build_custom,
    build_one_sided_circle,
    build_two_sided_circle,
)
from conftest import random_network

GRID = np.linspace(0.0, 30.0, 61)


# --------------------------------------------------------- ExpSumFunction
def test_exp_sum_function_basics():
    g = ExpSumFunction(np.array([0.25, 0.75]), np.array([-1.0, -0.5]))
    assert g.initial_value == 1.0
    t = np.array([0.0, 1.0, 2.0])
    expect = 0.25 * np.exp(-t) + 0.75 * np.exp(-0.5 * t)
    np.testing.assert_allclose(g(t), expect, rtol=1e-15)
    np.testing.assert_allclose(g.drop(t), 1 - expect, rtol=1e-14, atol=1e-17)
    np.testing.assert_allclose(g.derivative()(t), -0.25 * np.exp(-t) - 0.375 * np.exp(-0.5 * t))


# --------------------------------------------------------- general master
def test_two_node_matches_closed_form():
    net = build_custom([0.3, 0.1], [(0, 1, 0.5), (1, 0, 0.2)])
    cf = f_complete_m2(GRID, 0.3, 0.1, 0.5, 0.2)
    for backend in ("analytic", "numeric"):
        np.testing.assert_allclose(solve_general_master(net, GRID, backend)[0].f, cf, atol=1e-10)


def test_three_node_matches_closed_form(rng):
    net = random_network(rng, 3, density=1.0)
    cf = f_complete_m3(GRID, net.p, net.q_dense())
    np.testing.assert_allclose(solve_general_master(net, GRID, "analytic")[0].f, cf, atol=1e-8)


def test_full_set_is_pure_exponential(rng):
    net = random_network(rng, 4)
    curve, subsets = solve_general_master(net, GRID, "analytic")
    g = subsets.function(range(4))
    np.testing.assert_allclose(g.coefficients, [1.0], rtol=1e-14)
    np.testing.assert_allclose(g.exponents, [-net.p.sum()], rtol=1e-14)
    np.testing.assert_allclose(subsets[range(4)], np.exp(-net.p.sum() * GRID), atol=1e-15)
    assert isinstance(subsets, SubsetProbabilities)
    assert subsets.backend is Backend.ANALYTIC


@pytest.mark.parametrize("m", [2, 3, 4, 5, 6, 7])
def test_backends_agree(m, rng):
    net = random_network(rng, m)
    a = solve_general_master(net, GRID, "analytic")[0].f
    n = solve_general_master(net, GRID, "numeric")[0].f
    np.testing.assert_allclose(a, n, atol=1e-8)


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6))
@settings(max_examples=25, deadline=None)
def test_subset_probabilities_ordered(seed, m):
    # [S] cannot exceed [T] when T is a subset of S
    net = random_network(np.random.default_rng(seed), m)
    _, sub = solve_general_master(net, GRID, "numeric")
    values = sub.to_array()
    for mask in range(1, 1 << m):
        for k in range(m):
            if mask >> k & 1:
                assert np.all(values[:, mask] <= values[:, mask & ~(1 << k)] + 1e-9)
    assert np.all(values >= -1e-12) and np.all(values <= 1 + 1e-12)


def test_degenerate_exponents_raise_and_auto_falls_back():
    # resonant rates: a homogeneous complete network with rational rates
    net = build_complete(MildHetSpec.homogeneous(4, 0.1, 0.3))
    with pytest.raises(DegenerateExponents):
        solve_general_master(net, GRID, "analytic")
    curve, sub = solve_general_master(net, GRID, "auto")
    assert sub.backend is Backend.NUMERIC
    assert curve.f[-1] > 0.99


def test_cap_exceeded():
    net = build_one_sided_circle([0.1] * 20, [0.3] * 20)
    as_custom = build_custom(net.p, net.edges())
    with pytest.raises(CapExceeded):
        solve_general_master(as_custom, GRID, "numeric")


def test_add_node_with_silent_node_keeps_dynamics():
    # a node that never pushes leaves the others' survival unchanged
    base = build_complete(MildHetSpec([0.1, 0.2], [0.3, 0.4]))
    big = add_node(base, 0.25, 0.2, 0.0)
    _, s_big = solve_general_master(big, GRID, "numeric")
    _, s_base = solve_general_master(base, GRID, "numeric")
    for nodes in ([0], [1], [0, 1]):
        np.testing.assert_allclose(s_big[nodes], s_base[nodes], atol=1e-9)


def test_add_node_m2_to_m3_matches_closed_form():
    big = add_node(build_complete(MildHetSpec.homogeneous(2, 0.1, 0.3)), 0.17, 0.11, 0.23)
    cf = f_complete_m3(GRID, big.p, big.q_dense())
    np.testing.assert_allclose(solve_master(big, GRID).f, cf, atol=1e-8)


def test_add_fast_node_behaves_like_shift():
    from bassnet.network import shift_p

    a = build_complete(MildHetSpec.homogeneous(2, 0.05, 0.15))
    dp, p_new = 0.15, 2000.0
    grid = np.linspace(0, 40, 81)
    big = solve_master(add_node(a, p_new, 0.0 + 1e-9, dp), grid).f
    shifted = solve_master(shift_p(a, dp), grid).f
    # the new node adopts almost at once and then acts as extra external push
    approx = (2 * shifted + 1.0) / 3
    np.testing.assert_allclose(big[1:], approx[1:], atol=2e-3)


def test_high_precision_curve_matches_float():
    net = build_custom([0.13, 0.29], [(0, 1, 0.41), (1, 0, 0.17)])
    f = high_precision_curve(net)
    vals = [float(x) for x in f([0, 1, 5])]
    np.testing.assert_allclose(vals, f_complete_m2(np.array([0.0, 1, 5]), 0.13, 0.29, 0.41, 0.17),
                               atol=1e-14)


# ----------------------------------------------------------------- circles
@pytest.mark.parametrize("m", [2, 3, 5, 8])
def test_onesided_matches_general(m, rng):
    p = rng.uniform(0.05, 0.5, m)
    q = rng.uniform(0.1, 0.6, m)
    net = build_one_sided_circle(p, q)
    ref = solve_general_master(build_custom(p, net.edges()), GRID, "numeric")[0].f
    np.testing.assert_allclose(solve_onesided_circle(net, GRID).f, ref, atol=1e-8)


def test_onesided_m2_is_m2_closed_form():
    net = build_one_sided_circle([0.2, 0.35], [0.3, 0.6])
    cf = f_complete_m2(GRID, 0.2, 0.35, 0.6, 0.3)
    np.testing.assert_allclose(solve_onesided_circle(net, GRID).f, cf, atol=1e-10)


def test_onesided_large_homogeneous_approaches_f1d():
    grid = np.linspace(0, 15, 31)
    f = solve_onesided_circle(build_one_sided_circle([0.1] * 200, [0.4] * 200), grid).f
    assert np.max(np.abs(f - f_1d(grid, 0.1, 0.4))) <= 1e-3


@pytest.mark.parametrize("m", [3, 4, 6])
def test_twosided_matches_general(m, rng):
    p = rng.uniform(0.05, 0.5, m)
    net = build_two_sided_circle(p, rng.uniform(0.1, 0.6, m), rng.uniform(0.1, 0.6, m))
    ref = solve_general_master(build_custom(p, net.edges()), GRID, "numeric")[0].f
    np.testing.assert_allclose(solve_twosided_circle(net, GRID).f, ref, atol=1e-8)


def test_twosided_m3_matches_closed_form(rng):
    net = build_two_sided_circle(rng.uniform(0.05, 0.5, 3), rng.uniform(0.1, 0.6, 3),
                                 rng.uniform(0.1, 0.6, 3))
    cf = f_complete_m3(GRID, net.p, net.q_dense())
    np.testing.assert_allclose(solve_twosided_circle(net, GRID).f, cf, atol=1e-8)


@pytest.mark.parametrize("m", range(3, 11))
def test_homogeneous_circles_coincide(m):
    one = solve_master(build_one_sided_circle([0.1] * m, [0.4] * m), GRID)
    two = solve_master(build_two_sided_circle([0.1] * m, [0.25] * m, [0.15] * m), GRID)
    np.testing.assert_allclose(one.f, two.f, atol=1e-8)


def test_twosided_cap():
    net = build_two_sided_circle([0.1] * 101, [0.2] * 101, [0.2] * 101)
    with pytest.raises(CapExceeded):
        solve_twosided_circle(net, GRID)


def test_convert_two_sided():
    net = build_two_sided_circle([0.1] * 4, [0.2] * 4, [0.2] * 4)
    one = convert_two_sided_to_one_sided(net)
    np.testing.assert_allclose(one.in_influence, 0.4)
    with pytest.raises(NetworkError):
        convert_two_sided_to_one_sided(one)


def test_convert_lemma_network():
    net = build_two_sided_circle([0.1, 0, 0], [0.3, 0, 0], [0, 0, 0.3], allow_uninfluenced=True)
    one = convert_two_sided_to_one_sided(net)
    np.testing.assert_allclose(one.in_influence, [0.3, 0.0, 0.3])


def test_lemma_circle_orderings():
    from bassnet.presets import lemma_circles

    for key, net in lemma_circles(0.1, 0.4).items():
        two = solve_master(net, GRID).f[1:]
        one = solve_master(convert_two_sided_to_one_sided(net), GRID).f[1:]
        assert np.all(two > one) if key == "two_sided_above" else np.all(two < one)


# -------------------------------------------------- block and alternating
def test_block_alternating_collapse_when_equal():
    a, b = solve_block_and_alternating_circles(GRID, 0.2, 0.2, 0.3)
    np.testing.assert_allclose(a.f, f_1d(GRID, 0.2, 0.3), atol=1e-14)
    np.testing.assert_allclose(b.f, f_1d(GRID, 0.2, 0.3), atol=1e-9)


def test_block_below_alternating():
    a, b = solve_block_and_alternating_circles(GRID, 0.4, 0.1, 0.2)
    assert np.all(a.f[1:] < b.f[1:])


def test_alternating_limit_matches_finite_circle():
    grid = np.linspace(0, 20, 41)
    m = 200
    p = np.where(np.arange(m) % 2 == 0, 0.4, 0.1)
    finite = solve_onesided_circle(build_one_sided_circle(p, [0.2] * m), grid).f
    _, b = solve_block_and_alternating_circles(grid, 0.4, 0.1, 0.2)
    np.testing.assert_allclose(finite, b.f, atol=1e-8)
