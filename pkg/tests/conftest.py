from fractions import Fraction as F

import pytest
from hypothesis import strategies as st

from nwpc.instance import ForestInstance, Graph, TreeInstance, generate_planar_instance


def path_tree(weights, penalties, root=0):
    n = len(weights)
    g = Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    return TreeInstance(g, root, tuple(map(F, weights)), tuple(map(F, penalties)))


def umv(w_m):
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    return ForestInstance(g, (F(0), F(w_m), F(0)), ((0, 2, F(4)),))


@pytest.fixture
def path3():
    # r - a - t with w_a = 5, pi_t = 3
    return path_tree([0, 5, 0], [0, 0, 3])


@pytest.fixture
def path5():
    # r - a - t1 - b - t2
    return path_tree([0, 3, 0, 1, 0], [0, 0, 10, 0, F(3, 10)])


KIND = st.sampled_from(["grid", "triangulated-grid", "outerplanar-cycle"])


@st.composite
def tree_instances(draw, min_n=2, max_n=9, mixed=None):
    kind = draw(KIND)
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 10**6))
    mix = draw(st.booleans()) if mixed is None else mixed
    return generate_planar_instance(kind, n, seed, mixed=mix)


@st.composite
def forest_instances(draw, min_n=2, max_n=8, max_demands=3):
    kind = draw(KIND)
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 10**6))
    d = draw(st.integers(0, max_demands))
    return generate_planar_instance(kind, n, seed, problem="forest", demands=d)


@st.composite
def small_graphs(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return Graph.from_edges(n, edges)
