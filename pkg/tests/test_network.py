import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lvdroop.network import (NetworkError, build_network, drift, drive_vector, interaction_matrix_coupled,
                             interaction_matrix_decoupled, reactive_power, split_parts, vector_field)

from conftest import THETA0_5, five_bus, networks, two_node


def oracle_psi(net, theta, k):
    """Hand assembly from the raw line list, one entry at a time."""
    idx = {nd.id: i for i, nd in enumerate(net.nodes)}
    n = len(net.nodes)
    M = np.zeros((n, n))
    agg = np.array([nd.shunt_susceptance for nd in net.nodes], dtype=float)
    for ln in net.lines:
        i, j = idx[ln.from_node], idx[ln.to_node]
        agg[i] += abs(ln.susceptance)
        agg[j] += abs(ln.susceptance)
        th = theta[i] - theta[j]
        M[i, j] = ln.conductance * math.sin(th) + abs(ln.susceptance) * math.cos(th)
        M[j, i] = ln.conductance * math.sin(-th) + abs(ln.susceptance) * math.cos(-th)
    for i in range(n):
        M[i, i] = -(agg[i] + k[i])
    return M


# -- construction -----------------------------------------------------------

def test_five_bus_aggregates():
    net = five_bus()
    assert np.allclose(net.b_abs, [2.5, 2.2, 3.5, 3.0, 1.2], rtol=0, atol=1e-15)


def test_single_node_has_zero_aggregate():
    net = build_network({"nodes": [{"id": 1, "droop_gain": 1.0, "reference": 1.0}], "lines": []})
    assert net.b_abs.tolist() == [0.0]


@pytest.mark.parametrize("line, fragment", [
    ({"from": 1, "to": 2, "susceptance": 1.0}, "susceptance"),
    ({"from": 1, "to": 2, "susceptance": 0.0}, "susceptance"),
    ({"from": 1, "to": 2, "susceptance": -1.0, "conductance": -0.1}, "conductance"),
    ({"from": 1, "to": 9, "susceptance": -1.0}, "9"),
    ({"from": 1, "to": 1, "susceptance": -1.0}, "1"),
])
def test_bad_lines_are_named(line, fragment):
    nodes = [{"id": 1, "droop_gain": 1, "reference": 1}, {"id": 2, "droop_gain": 1, "reference": 1}]
    with pytest.raises(NetworkError, match=fragment):
        build_network({"nodes": nodes, "lines": [line]})


def test_duplicate_and_disconnected():
    nodes = [{"id": i, "droop_gain": 1, "reference": 1} for i in (1, 2, 3)]
    with pytest.raises(NetworkError, match="duplicate"):
        build_network({"nodes": nodes, "lines": [{"from": 1, "to": 2, "susceptance": -1},
                                                 {"from": 2, "to": 1, "susceptance": -1},
                                                 {"from": 2, "to": 3, "susceptance": -1}]})
    with pytest.raises(NetworkError, match="connected"):
        build_network({"nodes": nodes, "lines": [{"from": 1, "to": 2, "susceptance": -1}]})


def test_non_positive_gain_rejected():
    with pytest.raises(NetworkError, match="7"):
        build_network({"nodes": [{"id": 7, "droop_gain": -1.0, "reference": 1.0}], "lines": []})


# -- reactive power ---------------------------------------------------------

def test_reactive_power_examples():
    net = two_node()
    assert np.allclose(reactive_power(net, [1, 1], [0, 0]), [0, 0], atol=1e-15)
    assert np.allclose(reactive_power(net, [2, 1], [0, 0]), [2, -1], atol=1e-15)
    assert reactive_power(net, [0, 3.7], [0.4, -0.2])[0] == 0.0


def test_reactive_power_dimension_mismatch():
    with pytest.raises(ValueError):
        reactive_power(two_node(), [1, 1, 1], [0, 0])


@given(networks(), st.data())
def test_droop_law_matches_power_flow(net, data):
    # tau dV/dt = V(-k(V - V*)) - Q, evaluated straight from the power flow
    n = net.n
    V = np.array(data.draw(st.lists(st.floats(0, 3), min_size=n, max_size=n)))
    th = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=n, max_size=n)))
    k, vs = net.gains(0.0), net.references(0.0)
    expected = (V * (-k * (V - vs)) - reactive_power(net, V, th)) / net.tau
    got = vector_field(net, V, th, k, vs)
    assert np.allclose(got, expected, rtol=1e-12, atol=1e-12)


# -- interaction matrices ---------------------------------------------------

def test_coupled_two_node_example():
    net = two_node(G=0.5)
    M = interaction_matrix_coupled(net, [math.pi / 2, 0.0], [1.0, 1.0])
    assert np.allclose(M.entries, [[-2, 0.5], [-0.5, -2]], atol=1e-15)
    sym, skew = split_parts(M)
    assert np.allclose(sym.entries, [[-2, 0], [0, -2]], atol=1e-15)
    assert np.allclose(skew.entries, [[0, 0.5], [-0.5, 0]], atol=1e-15)


def test_coupled_five_bus_diagonal():
    net = five_bus()
    M = interaction_matrix_coupled(net, THETA0_5, np.full(5, 5.0))
    assert np.allclose(np.diag(M.entries), [-7.5, -7.2, -8.5, -8.0, -6.2], atol=1e-14)


def test_decoupled_five_bus_row():
    M = interaction_matrix_decoupled(five_bus(), np.full(5, 5.0))
    assert np.allclose(M.entries[0], [-7.5, 1.5, 1.0, 0.0, 0.0], atol=1e-15)
    assert np.array_equal(M.entries, M.entries.T)


def test_decoupled_single_node():
    net = build_network({"nodes": [{"id": 1, "droop_gain": 1.0, "reference": 1.0}], "lines": []})
    assert interaction_matrix_decoupled(net, [1.0]).entries.tolist() == [[-1.0]]


def test_split_parts_lossless_and_flat():
    net = five_bus(g_ratio=0.0)
    sym, skew = split_parts(interaction_matrix_coupled(net, THETA0_5, np.full(5, 5.0)))
    assert not skew.entries.any()
    net = five_bus()
    k = np.full(5, 5.0)
    sym, skew = split_parts(interaction_matrix_coupled(net, np.zeros(5), k))
    assert not skew.entries.any()
    assert np.array_equal(sym.entries, interaction_matrix_decoupled(net, k).entries)


def test_split_parts_wrong_kind():
    with pytest.raises(ValueError):
        split_parts(interaction_matrix_decoupled(five_bus(), np.full(5, 5.0)))


@pytest.mark.parametrize("k", [[1.0, 0.0], [1.0, -2.0]])
def test_non_positive_gain_in_matrix(k):
    with pytest.raises(ValueError):
        interaction_matrix_coupled(two_node(), [0, 0], k)
    with pytest.raises(ValueError):
        interaction_matrix_decoupled(two_node(), k)


def test_drive_vector():
    assert drive_vector(np.full(5, 5.0), np.full(5, 2.0)).tolist() == [10.0] * 5
    assert drive_vector([0, 0], [3, 4]).tolist() == [0.0, 0.0]
    assert drive_vector([1, 2], [3, 4]).tolist() == [3.0, 8.0]
    with pytest.raises(ValueError):
        drive_vector([1, 2], [3])


def test_vector_field_examples():
    net = five_bus(theta=False)
    assert np.allclose(vector_field(net, np.full(5, 2.0), np.zeros(5), np.full(5, 5.0), np.full(5, 2.0)), 0,
                       atol=1e-14)
    net = two_node(G=0.5)
    f = vector_field(net, [1.0, 1.0], [math.pi / 2, 0.0], [1.0, 1.0], [1.0, 1.0])
    assert np.allclose(f, [-0.5, -1.5], atol=1e-15)


# -- invariants -------------------------------------------------------------

def _draw_state(data, n, lo=0.0, hi=5.0):
    return np.array(data.draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n)))


@given(networks(), st.data())
def test_matrix_matches_hand_assembly(net, data):
    th = _draw_state(data, net.n, -3.0, 3.0)
    k = _draw_state(data, net.n, 0.1, 10.0)
    assert np.allclose(interaction_matrix_coupled(net, th, k).entries, oracle_psi(net, th, k),
                       rtol=1e-14, atol=1e-14)


@given(networks(), st.data())
def test_consistency(net, data):
    n = net.n
    V, th = _draw_state(data, n), _draw_state(data, n, -3, 3)
    k, vs = _draw_state(data, n, 0.1, 10), _draw_state(data, n, 0.1, 5)
    M = interaction_matrix_coupled(net, th, k).entries
    expected = V * (M @ V + drive_vector(k, vs)) / net.tau
    got = vector_field(net, V, th, k, vs)
    scale = np.abs(V) * (np.abs(M) @ np.abs(V) + k * vs) / net.tau
    assert np.all(np.abs(got - expected) <= 1e-12 * np.maximum(scale, 1e-300))


@given(networks(), st.data())
def test_reconstruction(net, data):
    th = _draw_state(data, net.n, -3, 3)
    M = interaction_matrix_coupled(net, th, _draw_state(data, net.n, 0.1, 10))
    sym, skew = split_parts(M)
    assert np.array_equal(sym.entries + skew.entries, M.entries)
    assert np.array_equal(skew.entries, -skew.entries.T)
    assert np.array_equal(sym.entries, sym.entries.T)
    assert not np.diag(skew.entries).any()


@given(networks(), st.data(), st.floats(-50, 50))
def test_angle_periodicity_and_shift(net, data, c):
    th = _draw_state(data, net.n, -3, 3)
    k = _draw_state(data, net.n, 0.1, 10)
    base = interaction_matrix_coupled(net, th, k).entries
    for shifted in (th + 2 * math.pi, th + c):
        assert np.allclose(interaction_matrix_coupled(net, shifted, k).entries, base, rtol=1e-9, atol=1e-9)


@given(networks(), st.data())
def test_decoupling_limit(net, data):
    k = _draw_state(data, net.n, 0.1, 10)
    c = data.draw(st.floats(-3, 3))
    assert np.array_equal(interaction_matrix_coupled(net, np.full(net.n, c), k).entries,
                          interaction_matrix_decoupled(net, k).entries)


@given(networks(), st.data())
def test_boundary_stationarity(net, data):
    n = net.n
    V = _draw_state(data, n)
    zero = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    V[np.array(zero)] = 0.0
    f = vector_field(net, V, _draw_state(data, n, -3, 3), _draw_state(data, n, 0.1, 10),
                     _draw_state(data, n, 0.1, 5))
    assert np.all(f[V == 0.0] == 0.0)


@given(networks(), st.data(), st.floats(0, 10))
def test_quadratic_homogeneity(net, data, s):
    n = net.n
    V, th, k = _draw_state(data, n), _draw_state(data, n, -3, 3), _draw_state(data, n, 0.1, 10)
    lhs = drift(net, s * V, th, k)
    rhs = s * s * drift(net, V, th, k)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-12 * max(1.0, s * s))


def test_convention_conflict_flag():
    # literal B_i = B_sh + sum B_ij > 0 while the magnitude convention stays valid
    with pytest.warns(UserWarning):
        net = two_node(shunts=(5.0, 0.0))
    assert tuple(net.convention_conflicts) == (1,)
