import itertools
import math

import numpy as np
import pytest

from mongehj.graph import (DisconnectedGraphError, GraphError, MetricGraph, Point, SpaceTimePoint, ball, distance,
                           geodesic_path, path_length, sample_mesh, spacetime_distance, within)


@pytest.fixture
def triangle():
    return MetricGraph(["a", "b", "c"], [("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 3.0)])


def brute_force_vertex_distance(g, a, b):
    """Shortest simple path by enumerating vertex orders."""
    best = math.inf
    others = [v for v in range(len(g.vertices)) if v not in (a, b)]
    lengths = {}
    for e in g.edges:
        key = frozenset((e.u, e.v))
        lengths[key] = min(lengths.get(key, math.inf), e.length)
    for r in range(len(others) + 1):
        for mid in itertools.permutations(others, r):
            route = (a, *mid, b)
            total = sum(lengths.get(frozenset(p), math.inf) for p in zip(route[:-1], route[1:]))
            best = min(best, total)
    return best


def test_distance_on_single_edge():
    g = MetricGraph.segment()
    assert distance(g, g.point(0, 0.2), g.point(0, 0.7)) == pytest.approx(0.5, abs=1e-15)


def test_distance_to_self_is_zero(triangle):
    p = triangle.point(2, 1.7)
    assert distance(triangle, p, p) == 0.0


def test_triangle_detour(triangle):
    a, c = triangle.vertex_point("a"), triangle.vertex_point("c")
    assert distance(triangle, a, c) == 2.0
    assert brute_force_vertex_distance(triangle, 0, 2) == 2.0


def test_endpoint_offsets_canonicalize(triangle):
    # vertex b is the end of edge 0 and the start of edge 1
    assert triangle.point(0, 1.0) == triangle.point(1, 0.0)
    assert distance(triangle, triangle.point(0, 1.0), triangle.point(1, 0.0)) == 0.0


def test_invalid_point_rejected(triangle):
    with pytest.raises(GraphError):
        triangle.point(0, 1.5)
    with pytest.raises(GraphError):
        triangle.point(7, 0.0)
    with pytest.raises(GraphError):
        distance(triangle, Point(0, 0.5), Point(0, -1.0))


def test_disconnected_distance_raises():
    g = MetricGraph(["a", "b", "c", "d"], [("a", "b", 1.0), ("c", "d", 1.0)])
    assert not g.connected
    with pytest.raises(DisconnectedGraphError, match="infinite distance"):
        distance(g, g.point(0, 0.5), g.point(1, 0.5))
    with pytest.raises(DisconnectedGraphError):
        geodesic_path(g, g.point(0, 0.5), g.point(1, 0.5), 0.1)


def test_bad_graphs_rejected():
    with pytest.raises(GraphError):
        MetricGraph(["a", "b"], [("a", "b", 0.0)])
    with pytest.raises(GraphError):
        MetricGraph(["a", "b"], [("a", "x", 1.0)])
    with pytest.raises(GraphError):
        MetricGraph(["a"], [("a", "a", 1.0)])


def test_metric_axioms_on_random_mesh_triples(triangle):
    m = sample_mesh(triangle, 0.1)
    D = m.distance_matrix()
    rng = np.random.default_rng(0)
    pts = m.points
    for _ in range(1000):
        i, j, k = rng.integers(m.size, size=3)
        assert D[i, j] == pytest.approx(D[j, i], abs=1e-12)
        assert D[i, k] <= D[i, j] + D[j, k] + 1e-12
        assert (D[i, j] == 0) == (pts[i] == pts[j])
        assert D[i, j] == pytest.approx(distance(triangle, pts[i], pts[j]), abs=1e-12)


def test_spacetime_distance_examples(triangle):
    g = MetricGraph.segment()
    z = SpaceTimePoint(g.point(0, 0.2), 0.3)
    assert spacetime_distance(g, z, z) == 0.0
    z1, z2 = SpaceTimePoint(g.point(0, 0.2), 0.1), SpaceTimePoint(g.point(0, 0.5), 0.6)
    assert spacetime_distance(g, z1, z2) == pytest.approx(0.5)
    # half of the triangle detour, against a small time gap
    a = SpaceTimePoint(triangle.point(0, 0.5), 0.2)
    b = SpaceTimePoint(triangle.vertex_point("b"), 0.3)
    assert spacetime_distance(triangle, a, b) == pytest.approx(0.5)


def test_spacetime_distance_is_a_metric(triangle):
    rng = np.random.default_rng(1)

    def rand():
        e = int(rng.integers(3))
        return SpaceTimePoint(triangle.point(e, rng.uniform(0, triangle.edges[e].length)), rng.uniform(0, 1))

    for _ in range(300):
        a, b, c = rand(), rand(), rand()
        ab = spacetime_distance(triangle, a, b)
        assert ab == pytest.approx(spacetime_distance(triangle, b, a), abs=1e-12)
        assert spacetime_distance(triangle, a, c) <= ab + spacetime_distance(triangle, b, c) + 1e-12


@pytest.mark.parametrize("h, offsets", [(0.5, [0, 0.5, 1]), (0.4, [0, 1 / 3, 2 / 3, 1])])
def test_sample_mesh_segment(h, offsets):
    m = sample_mesh(MetricGraph.segment(), h)
    assert sorted(m.offset) == pytest.approx(offsets)
    assert np.all(m.igap <= h + 1e-15)


def test_sample_mesh_star_and_errors():
    m = sample_mesh(MetricGraph.star([1, 1, 1]), 1.0)
    assert m.size == 4
    with pytest.raises(GraphError):
        sample_mesh(MetricGraph.segment(), 0.0)


def test_sample_mesh_is_deterministic(triangle):
    assert sample_mesh(triangle, 0.3).digest() == sample_mesh(triangle, 0.3).digest()
    assert sample_mesh(triangle, 0.3).digest() != sample_mesh(triangle, 0.2).digest()


def test_ball_examples(triangle):
    g = MetricGraph.segment()
    m = sample_mesh(g, 0.25)
    got = sorted(m.offset[i] for i, _ in ball(g, m, g.point(0, 0.5), 0.25))
    assert got == pytest.approx([0.25, 0.5, 0.75])
    assert ball(g, m, g.point(0, 0.5), 0.0) == [(m.index_of(g.point(0, 0.5)), 0.0)]
    assert ball(g, m, g.point(0, 0.3), 0.0) == []
    with pytest.raises(GraphError):
        ball(g, m, g.point(0, 0.3), -1.0)


def test_ball_matches_brute_force(triangle):
    m = sample_mesh(triangle, 0.5)
    p = triangle.vertex_point("a")
    expect = {i for i, q in enumerate(m.points) if within(distance(triangle, p, q), 1.2)}
    got = ball(triangle, m, p, 1.2)
    assert {i for i, _ in got} == expect
    for i, d in got:
        assert d == pytest.approx(distance(triangle, p, m.points[i]), abs=1e-12)


def test_geodesic_path_examples(triangle):
    g = MetricGraph.segment()
    p = g.point(0, 0.3)
    assert geodesic_path(g, p, p, 0.1) == [p]
    path = geodesic_path(g, g.point(0, 0), g.point(0, 1), 0.5)
    assert [q.offset for q in path] == pytest.approx([0, 0.5, 1])
    a, c = triangle.vertex_point("a"), triangle.vertex_point("c")
    path = geodesic_path(triangle, a, c, 0.25)
    assert triangle.vertex_point("b") in path
    assert path_length(triangle, path) == pytest.approx(2.0, abs=1e-12)


def test_geodesic_length_equals_distance(triangle):
    rng = np.random.default_rng(2)
    for _ in range(100):
        e1, e2 = rng.integers(3, size=2)
        p = triangle.point(int(e1), rng.uniform(0, triangle.edges[e1].length))
        q = triangle.point(int(e2), rng.uniform(0, triangle.edges[e2].length))
        path = geodesic_path(triangle, p, q, 0.2)
        gaps = [distance(triangle, a, b) for a, b in zip(path[:-1], path[1:])]
        assert max(gaps, default=0.0) <= 0.2 + 1e-12
        assert path_length(triangle, path) == pytest.approx(distance(triangle, p, q), abs=1e-12)


def test_graph_json_round_trip(tmp_path, triangle):
    path = tmp_path / "g.json"
    import json

    path.write_text(json.dumps(triangle.to_json()))
    g = MetricGraph.load(path)
    assert g.digest() == triangle.digest()
