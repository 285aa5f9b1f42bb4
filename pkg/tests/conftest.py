import math

import hypothesis
import numpy as np
import pytest
from hypothesis import strategies as st

from lvdroop.network import build_network

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")

LINES_5 = [(1, 2, -1.5), (1, 3, -1.0), (2, 3, -0.7), (3, 4, -1.8), (4, 5, -1.2)]
THETA0_5 = np.array([math.pi / d for d in (20, 25, 30, 35, 40)])
V1_0 = np.array([1.8, 1.6, 1.4, 1.2, 1.0])
V2_0 = np.array([2.8, 2.6, 2.4, 2.2, 2.0])


def five_bus(g_ratio=0.5, k=5.0, ref=2.0, theta=True, shunt=0.0):
    nodes = [
        {"id": i + 1, "droop_gain": k, "reference": ref, "shunt_susceptance": shunt,
         "theta0": float(THETA0_5[i]) if theta else 0.0}
        for i in range(5)
    ]
    lines = [{"from": a, "to": b, "susceptance": s, "conductance": g_ratio * abs(s)} for a, b, s in LINES_5]
    return build_network({"nodes": nodes, "lines": lines})


def two_node(B=-1.0, G=0.0, shunts=(0.0, 0.0), k=(1.0, 1.0), ref=(1.0, 1.0), tau=(1.0, 1.0), theta=(0.0, 0.0)):
    nodes = [
        {"id": i + 1, "shunt_susceptance": shunts[i], "droop_gain": k[i], "reference": ref[i], "tau": tau[i],
         "theta0": theta[i]}
        for i in range(2)
    ]
    return build_network({"nodes": nodes, "lines": [{"from": 1, "to": 2, "susceptance": B, "conductance": G}]})


@pytest.fixture
def net5():
    return five_bus()


@pytest.fixture
def net5_lossless():
    return five_bus(g_ratio=0.0, theta=False)


@st.composite
def networks(draw, max_nodes=6, signals=False):
    """Connected networks: a random spanning tree plus optional extra lines."""
    n = draw(st.integers(1, max_nodes))
    pos = st.floats(0.1, 3.0)
    lines = {}
    for j in range(1, n):
        i = draw(st.integers(0, j - 1))
        lines[(i, j)] = None
    for _ in range(draw(st.integers(0, n))):
        i, j = sorted(draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))) if n > 1 else (0, 0)
        if i != j:
            lines[(i, j)] = None
    nodes = []
    for i in range(n):
        nd = {"id": i + 1, "tau": draw(st.floats(0.2, 3.0)), "shunt_susceptance": draw(st.floats(0.0, 1.0)),
              "droop_gain": draw(pos), "reference": draw(pos), "theta0": draw(st.floats(-1.0, 1.0))}
        if signals:
            off = draw(st.floats(0.5, 3.0))
            nd["droop_gain"] = {"sinusoid": {"offset": off, "amplitude": draw(st.floats(0.0, 0.9)) * off,
                                             "angular_frequency": draw(st.floats(0.0, 5.0))}}
            nd["theta_perturbation"] = {"sinusoid": {"offset": 0.0, "amplitude": draw(st.floats(0.0, 1.0)),
                                                     "angular_frequency": draw(st.floats(0.0, 10.0))}}
        nodes.append(nd)
    raw_lines = [
        {"from": i + 1, "to": j + 1, "susceptance": -draw(pos), "conductance": draw(st.floats(0.0, 2.0))}
        for (i, j) in lines
    ]
    return build_network({"nodes": nodes, "lines": raw_lines})


# acceptance summary lines, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
