import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bassnet.network import (
    MildHetSpec,
    Network,
    NetworkError,
    Structure,
    add_node,
    build_cartesian_torus,
    build_complete,
    build_custom,
    build_one_sided_circle,
    build_two_sided_circle,
    homogeneous_counterpart,
    load_network,
    network_from_json,
    network_to_json,
    save_network,
    shift_p,
)

rates = st.floats(min_value=0.01, max_value=2.0, allow_nan=False)


# ------------------------------------------------------------- complete
def test_complete_m2_homogeneous():
    net = build_complete(MildHetSpec.homogeneous(2, 0.1, 0.3))
    np.testing.assert_array_equal(net.q_dense(), [[0.0, 0.3], [0.3, 0.0]])
    assert net.structure is Structure.COMPLETE


def test_complete_m3_homogeneous_spreads_q():
    q = build_complete(MildHetSpec.homogeneous(3, 0.1, 0.4)).q_dense()
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(q[off], 0.2, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(np.diag(q), 0.0)


def test_complete_column_sums_equal_q_node():
    net = build_complete(MildHetSpec(np.full(4, 0.1), [1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(net.q_dense().sum(axis=0), [1, 2, 3, 4], rtol=1e-15)
    np.testing.assert_allclose(net.in_influence, [1, 2, 3, 4], rtol=1e-15)


@given(st.lists(rates, min_size=2, max_size=9), st.data())
def test_complete_in_influence_property(q_node, data):
    m = len(q_node)
    p = data.draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m))
    net = build_complete(MildHetSpec(p, q_node))
    np.testing.assert_allclose(net.in_influence, q_node, rtol=1e-12)
    np.testing.assert_allclose(net.out_influences.sum(), np.sum(q_node), rtol=1e-12)


def test_mild_het_spec_rejects_bad_input():
    with pytest.raises(NetworkError):
        MildHetSpec([0.1, 0.1], [0.2])
    with pytest.raises(NetworkError):
        MildHetSpec([0.1, 0.1], [0.2, 0.0])
    with pytest.raises(NetworkError):
        MildHetSpec([-0.1, 0.1], [0.2, 0.2])


# --------------------------------------------------------------- custom
def test_custom_special_m2_network():
    net = build_custom([0.2, 0.0], [(0, 1, 0.4)], allow_uninfluenced=True)
    np.testing.assert_array_equal(net.q_dense(), [[0.0, 0.4], [0.0, 0.0]])
    np.testing.assert_array_equal(net.in_influence, [0.0, 0.4])


def test_custom_two_sided_example_as_edge_list():
    net = build_custom([0.1, 0.0, 0.0], [(0, 2, 0.3), (2, 0, 0.3)], allow_uninfluenced=True)
    assert net.edges() == [(2, 0, 0.3), (0, 2, 0.3)]


@pytest.mark.parametrize("entries, msg", [
    ([(0, 1, 0.3)], "zero in-influence"),
    ([(0, 0, 0.3), (1, 0, 0.1), (0, 1, 0.1)], "self"),
    ([(0, 1, 0.3), (0, 1, 0.2), (1, 0, 0.1)], "duplicate"),
    ([(0, 5, 0.3), (1, 0, 0.1)], "range"),
    ([(0, 1, -0.3), (1, 0, 0.1)], ">= 0"),
    ([(0, 1, np.nan), (1, 0, 0.1)], "finite"),
])
def test_custom_rejects(entries, msg):
    with pytest.raises(NetworkError, match=msg):
        build_custom([0.1, 0.1], entries)


def test_negative_p_rejected():
    with pytest.raises(NetworkError):
        build_custom([-0.1, 0.1], [(0, 1, 0.3), (1, 0, 0.3)])


# --------------------------------------------------------------- circles
def test_one_sided_homogeneous():
    net = build_one_sided_circle([0.1] * 3, [0.4] * 3)
    assert net.edges() == [(2, 0, 0.4), (0, 1, 0.4), (1, 2, 0.4)]
    assert net.structure is Structure.ONE_SIDED_CIRCLE


def test_one_sided_block_and_alternating_patterns():
    from bassnet.presets import block_circle

    a = block_circle((0.4, 0.1), 6, 0.2, "block")
    b = block_circle((0.4, 0.1), 6, 0.2, [0, 1])
    np.testing.assert_array_equal(a.p, [0.4, 0.4, 0.4, 0.1, 0.1, 0.1])
    np.testing.assert_array_equal(b.p, [0.4, 0.1, 0.4, 0.1, 0.4, 0.1])


def test_one_sided_requires_positive_q_unless_waived():
    with pytest.raises(NetworkError):
        build_one_sided_circle([0.1] * 3, [0.4, 0.0, 0.4])
    net = build_one_sided_circle([0.1] * 3, [0.4, 0.0, 0.4], allow_uninfluenced=True)
    assert net.n_edges == 2


def test_two_sided_homogeneous_in_influence():
    net = build_two_sided_circle([0.1] * 5, [0.15] * 5, [0.25] * 5)
    np.testing.assert_allclose(net.in_influence, 0.4, rtol=1e-15)


def test_two_sided_lemma_network_valid():
    net = build_two_sided_circle([0.1, 0, 0], [0, 0, 0.3], [0, 0.3, 0], allow_uninfluenced=True)
    assert net.edges() == [(2, 1, 0.3), (1, 2, 0.3)]


def test_two_sided_zero_node_rejected():
    with pytest.raises(NetworkError, match="in-influence"):
        build_two_sided_circle([0.1] * 3, [0.2, 0.0, 0.2], [0.2, 0.0, 0.2])


def test_tagged_structure_checked():
    with pytest.raises(NetworkError):
        Network([0.1] * 3, [0, 1, 2], [2, 0, 1], [0.3] * 3, Structure.ONE_SIDED_CIRCLE)


# ----------------------------------------------------------------- torus
def test_torus_d1_is_two_sided_circle():
    m, q = 7, 0.4
    torus = build_cartesian_torus(1, m, 0.1, q)
    circle = build_two_sided_circle([0.1] * m, [q / 2] * m, [q / 2] * m)
    np.testing.assert_array_equal(torus.q_dense(), circle.q_dense())


def test_torus_d2_side4_four_neighbours():
    net = build_cartesian_torus(2, 4, 0.1, 0.4)
    q = net.q_dense()
    assert np.all((q > 0).sum(axis=0) == 4)
    np.testing.assert_allclose(q[q > 0], 0.1, rtol=1e-15)


def test_torus_d3_side3_column_sums():
    net = build_cartesian_torus(3, 3, 0.1, 0.6)
    np.testing.assert_allclose(net.q_dense().sum(axis=0), 0.6, rtol=1e-14)


@pytest.mark.parametrize("d, side", [(0, 3), (2, 2)])
def test_torus_rejects(d, side):
    with pytest.raises(NetworkError):
        build_cartesian_torus(d, side, 0.1, 0.4)


# ------------------------------------------------------------ transforms
def test_counterpart_of_special_m2():
    b = build_complete(MildHetSpec([0.4, 0.0], [0.0, 0.6], allow_uninfluenced=True))
    h = homogeneous_counterpart(b)
    np.testing.assert_allclose(h.p, 0.2)
    np.testing.assert_allclose(h.in_influence, 0.3)


def test_counterpart_means():
    net = build_complete(MildHetSpec([0.3, 0.0, 0.0], [0.1, 0.2, 0.3]))
    h = homogeneous_counterpart(net)
    np.testing.assert_allclose(h.p, 0.1, rtol=1e-15)
    np.testing.assert_allclose(h.in_influence, 0.2, rtol=1e-15)


def test_counterpart_idempotent():
    net = build_complete(MildHetSpec.homogeneous(4, 0.1, 0.3))
    assert homogeneous_counterpart(net).same_as(net)


def test_counterpart_needs_complete():
    with pytest.raises(NetworkError):
        homogeneous_counterpart(build_one_sided_circle([0.1] * 3, [0.3] * 3))


def test_shift_p():
    net = build_complete(MildHetSpec.homogeneous(2, 0.05, 0.15))
    assert shift_p(net, 0.0).same_as(net)
    s = shift_p(net, 0.15)
    np.testing.assert_allclose(s.p, 0.2)
    np.testing.assert_array_equal(s.q_dense(), net.q_dense())
    with pytest.raises(NetworkError):
        shift_p(net, -0.06)


def test_add_node_indices_and_rates():
    net = build_complete(MildHetSpec.homogeneous(2, 0.1, 0.2))
    big = add_node(net, 0.3, 0.05, 0.07)
    q = big.q_dense()
    assert big.m == 3 and big.structure is Structure.CUSTOM
    np.testing.assert_array_equal(q[:2, 2], 0.05)
    np.testing.assert_array_equal(q[2, :2], 0.07)
    np.testing.assert_array_equal(q[:2, :2], net.q_dense())


# ------------------------------------------------------------------- JSON
def _random_net(seed):
    from conftest import random_network

    return random_network(np.random.default_rng(seed), 5)


@pytest.mark.parametrize("net", [
    build_complete(MildHetSpec([0.1, 0.2, 0.3], [0.4, 0.5, 0.6])),
    build_one_sided_circle([0.1] * 4, [0.2, 0.3, 0.4, 0.5]),
    build_two_sided_circle([0.1, 0, 0], [0.3, 0, 0], [0, 0, 0.3], allow_uninfluenced=True),
    build_cartesian_torus(2, 3, 0.1, 0.4),
])
def test_json_round_trip(net, tmp_path):
    doc = json.loads(json.dumps(network_to_json(net)))
    back = network_from_json(doc)
    assert back.same_as(net)
    assert back.structure is net.structure
    save_network(net, tmp_path / "n.json")
    assert load_network(tmp_path / "n.json").same_as(net)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25)
def test_json_round_trip_random(seed):
    net = _random_net(seed)
    assert network_from_json(network_to_json(net)).same_as(net)


@pytest.mark.parametrize("doc", [
    {"p": [0.1]},
    {"m": 2, "p": [0.1]},
    {"m": 2, "p": [0.1, 0.1], "edges": [[0, 1, 0.2], [1, 0, 0.2]], "structure_tag": "Star"},
    {"m": 2, "p": [0.1, 0.1], "edges": [[0, 1, 0.2], [0, 1, 0.2], [1, 0, 0.1]]},
    {"m": 2, "p": [0.1, 0.1], "edges": [[0.5, 1, 0.2], [1, 0, 0.1]]},
])
def test_json_rejects(doc):
    with pytest.raises(NetworkError):
        network_from_json(doc)
