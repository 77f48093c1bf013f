"""Metric graphs: intrinsic distances, meshes, balls and geodesics.

A point of the graph lives on an edge at an offset measured from the edge's
first endpoint. Endpoint offsets are canonicalized to a single representative
per vertex so that equal points compare equal.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

# relative slack for radius comparisons; mesh offsets are k*len/n in floating point
BALL_TOL = 1e-9


class GraphError(ValueError):
    pass


class DisconnectedGraphError(GraphError):
    pass


def within(d, r):
    """Radius test shared by every ball query (and by tests that brute-force it)."""
    return np.asarray(d) <= r + BALL_TOL * (1.0 + r)


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float


@dataclass(frozen=True, order=True)
class Point:
    edge: int
    offset: float


@dataclass(frozen=True)
class SpaceTimePoint:
    x: Point
    t: float


class MetricGraph:
    """Finite connected graph whose edges are intervals of positive length."""

    def __init__(self, vertices: Sequence[str], edges: Iterable[tuple[str, str, float]]):
        self.vertices = tuple(str(v) for v in vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex id")
        index = {v: i for i, v in enumerate(self.vertices)}
        built = []
        for u, v, length in edges:
            if u not in index or v not in index:
                raise GraphError(f"edge ({u}, {v}) references an unknown vertex")
            length = float(length)
            if not (length > 0 and math.isfinite(length)):
                raise GraphError(f"edge ({u}, {v}) has non-positive length {length}")
            if u == v:
                raise GraphError(f"self-loop at {u} is not supported")
            built.append(Edge(index[u], index[v], length))
        if not built:
            raise GraphError("graph has no edges")
        self.edges = tuple(built)
        self.index = index

        nv = len(self.vertices)
        self.incident: list[list[tuple[int, int]]] = [[] for _ in range(nv)]
        for e, edge in enumerate(self.edges):
            self.incident[edge.u].append((e, 0))
            self.incident[edge.v].append((e, 1))
        for v, inc in enumerate(self.incident):
            if not inc:
                raise DisconnectedGraphError(f"vertex {self.vertices[v]} is isolated")

        # shortest parallel edge between adjacent vertex pairs
        best: dict[tuple[int, int], int] = {}
        for e, edge in enumerate(self.edges):
            key = (min(edge.u, edge.v), max(edge.u, edge.v))
            if key not in best or edge.length < self.edges[best[key]].length:
                best[key] = e
        self._best_edge = best
        rows, cols, vals = [], [], []
        for (a, b), e in best.items():
            rows += [a, b]
            cols += [b, a]
            vals += [self.edges[e].length] * 2
        adj = csr_matrix((vals, (rows, cols)), shape=(nv, nv))
        self.vdist, self._pred = shortest_path(adj, directed=False, return_predecessors=True)
        self.connected = bool(np.all(np.isfinite(self.vdist)))

        self._lengths = np.array([e.length for e in self.edges])
        self._eu = np.array([e.u for e in self.edges])
        self._ev = np.array([e.v for e in self.edges])

    # construction helpers -------------------------------------------------

    @classmethod
    def from_json(cls, obj: dict) -> "MetricGraph":
        try:
            vertices = obj["vertices"]
            edges = [(e["u"], e["v"], e["len"]) for e in obj["edges"]]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph object: {exc}") from exc
        return cls(vertices, edges)

    @classmethod
    def load(cls, path: str | Path) -> "MetricGraph":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    @classmethod
    def segment(cls, length: float = 1.0) -> "MetricGraph":
        return cls(["a", "b"], [("a", "b", length)])

    @classmethod
    def star(cls, lengths: Sequence[float]) -> "MetricGraph":
        leaves = [f"l{i}" for i in range(len(lengths))]
        return cls(["c", *leaves], [("c", leaf, ln) for leaf, ln in zip(leaves, lengths)])

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"u": self.vertices[e.u], "v": self.vertices[e.v], "len": e.length}
                for e in self.edges
            ],
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def lengths(self) -> np.ndarray:
        return self._lengths

    def degree(self, v: int) -> int:
        return len(self.incident[v])

    # points ---------------------------------------------------------------

    def point(self, edge: int, offset: float) -> Point:
        if not 0 <= edge < len(self.edges):
            raise GraphError(f"no edge {edge}")
        length = self.edges[edge].length
        offset = float(offset)
        slack = 1e-12 * length
        if offset < -slack or offset > length + slack or not math.isfinite(offset):
            raise GraphError(f"offset {offset} outside [0, {length}] on edge {edge}")
        if offset <= 0.0:
            return self.vertex_point(self.edges[edge].u)
        if offset >= length:
            return self.vertex_point(self.edges[edge].v)
        return Point(edge, offset)

    def vertex_point(self, v: int | str) -> Point:
        if isinstance(v, str):
            v = self.index[v]
        e, end = self.incident[v][0]
        return Point(e, 0.0 if end == 0 else self.edges[e].length)

    def vertex_of(self, p: Point) -> int | None:
        edge = self.edges[p.edge]
        if p.offset == 0.0:
            return edge.u
        if p.offset == edge.length:
            return edge.v
        return None

    def _check(self, p: Point) -> None:
        if not 0 <= p.edge < len(self.edges):
            raise GraphError(f"no edge {p.edge}")
        if not 0.0 <= p.offset <= self.edges[p.edge].length:
            raise GraphError(f"offset {p.offset} outside edge {p.edge}")

    # distances ------------------------------------------------------------

    def vertex_distances_from(self, p: Point) -> np.ndarray:
        self._check(p)
        edge = self.edges[p.edge]
        return np.minimum(p.offset + self.vdist[edge.u], edge.length - p.offset + self.vdist[edge.v])

    def distances_from(self, p: Point, edges: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        """Distances from ``p`` to the points (edges[i], offsets[i]), vectorized."""
        dv = self.vertex_distances_from(p)
        edges = np.asarray(edges)
        offsets = np.asarray(offsets, dtype=float)
        d = np.minimum(dv[self._eu[edges]] + offsets, dv[self._ev[edges]] + self._lengths[edges] - offsets)
        same = edges == p.edge
        if np.any(same):
            d = np.where(same, np.minimum(d, np.abs(offsets - p.offset)), d)
        return d

    def distance(self, p: Point, q: Point) -> float:
        self._check(q)
        d = float(self.distances_from(p, np.array([q.edge]), np.array([q.offset]))[0])
        if not math.isfinite(d):
            raise DisconnectedGraphError("infinite distance: points lie in different components")
        return d

    def _vertex_route(self, a: int, b: int) -> list[int]:
        route = [b]
        while route[-1] != a:
            prev = self._pred[a, route[-1]]
            if prev < 0:
                raise DisconnectedGraphError("infinite distance: no path between vertices")
            route.append(int(prev))
        return route[::-1]

    def geodesic_pieces(self, p: Point, q: Point) -> list[tuple[int, float, float]]:
        """Shortest path from p to q as (edge, start offset, end offset) pieces."""
        self._check(p)
        self._check(q)
        ep, eq = self.edges[p.edge], self.edges[q.edge]
        best = math.inf
        plan = None
        if p.edge == q.edge:
            best = abs(q.offset - p.offset)
            plan = "direct"
        for a, da in ((ep.u, p.offset), (ep.v, ep.length - p.offset)):
            for b, db in ((eq.u, q.offset), (eq.v, eq.length - q.offset)):
                total = da + self.vdist[a, b] + db
                if total < best:
                    best = total
                    plan = (a, b)
        if plan is None or not math.isfinite(best):
            raise DisconnectedGraphError("infinite distance: points lie in different components")
        if plan == "direct":
            return [] if p.offset == q.offset else [(p.edge, p.offset, q.offset)]
        a, b = plan
        pieces = []
        start_end = 0.0 if a == ep.u else ep.length
        if p.offset != start_end:
            pieces.append((p.edge, p.offset, start_end))
        route = self._vertex_route(a, b)
        for x, y in zip(route[:-1], route[1:]):
            e = self._best_edge[(min(x, y), max(x, y))]
            edge = self.edges[e]
            pieces.append((e, 0.0, edge.length) if edge.u == x else (e, edge.length, 0.0))
        end_start = 0.0 if b == eq.u else eq.length
        if q.offset != end_start:
            pieces.append((q.edge, end_start, q.offset))
        return pieces


def distance(g: MetricGraph, p: Point, q: Point) -> float:
    return g.distance(p, q)


def spacetime_distance(g: MetricGraph, z1: SpaceTimePoint, z2: SpaceTimePoint) -> float:
    return max(g.distance(z1.x, z2.x), abs(z1.t - z2.t))


def geodesic_path(g: MetricGraph, p: Point, q: Point, step: float) -> list[Point]:
    """Points along a shortest path from p to q, consecutive arc-length gaps <= step."""
    if step <= 0:
        raise GraphError("step must be positive")
    pieces = g.geodesic_pieces(p, q)
    out = [g.point(p.edge, p.offset)]
    for e, s0, s1 in pieces:
        n = max(1, math.ceil(abs(s1 - s0) / step - 1e-9))
        for k in range(1, n + 1):
            s = s1 if k == n else s0 + (s1 - s0) * k / n
            out.append(g.point(e, s))
    return out


def path_length(g: MetricGraph, pts: Sequence[Point]) -> float:
    """Arc length of a polyline whose consecutive points share an edge."""
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if a.edge == b.edge:
            total += abs(b.offset - a.offset)
        else:
            total += g.distance(a, b)
    return total


@dataclass(frozen=True)
class Interval:
    a: int
    b: int
    gap: float
    edge: int


@dataclass
class Mesh:
    """Mesh points on a metric graph: all vertices plus equispaced edge interiors."""

    graph: MetricGraph
    h: float
    edge: np.ndarray
    offset: np.ndarray
    vertex: np.ndarray
    edge_nodes: list[np.ndarray]
    ia: np.ndarray
    ib: np.ndarray
    igap: np.ndarray
    iedge: np.ndarray
    n_per_edge: np.ndarray
    first_interval: np.ndarray
    _dist: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.edge)

    @property
    def points(self) -> list[Point]:
        return [Point(int(e), float(s)) for e, s in zip(self.edge, self.offset)]

    @property
    def n_intervals(self) -> int:
        return len(self.ia)

    def digest(self) -> str:
        h = hashlib.sha256(self.graph.digest().encode())
        h.update(repr(float(self.h)).encode())
        h.update(np.ascontiguousarray(self.offset).tobytes())
        return h.hexdigest()

    def index_of(self, p: Point) -> int | None:
        nodes = self.edge_nodes[p.edge]
        offs = self.node_offsets_on(p.edge)
        i = int(np.searchsorted(offs, p.offset))
        for j in (i - 1, i):
            if 0 <= j < len(offs) and offs[j] == p.offset:
                return int(nodes[j])
        return None

    def node_offsets_on(self, e: int) -> np.ndarray:
        length = self.graph.edges[e].length
        n = len(self.edge_nodes[e]) - 1
        return length * np.arange(n + 1) / n

    def locate(self, edges: np.ndarray, offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Enclosing interval index and fraction in [0, 1] for each point."""
        edges = np.atleast_1d(np.asarray(edges, dtype=int))
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        n_per = self.n_per_edge[edges]
        length = self.graph.lengths[edges]
        pos = np.clip(offsets / length * n_per, 0.0, n_per)
        k = np.minimum(np.floor(pos).astype(int), n_per - 1)
        lam = pos - k
        return self.first_interval[edges] + k, lam

    def interpolate(self, values: np.ndarray, edges, offsets) -> np.ndarray:
        """Piecewise-linear interpolation of nodal values at arbitrary graph points."""
        k, lam = self.locate(edges, offsets)
        return (1.0 - lam) * values[self.ia[k]] + lam * values[self.ib[k]]

    def distances_from(self, p: Point) -> np.ndarray:
        return self.graph.distances_from(p, self.edge, self.offset)

    def distance_rows(self, rows: np.ndarray) -> np.ndarray:
        """Exact distances from the given mesh nodes to every mesh node."""
        g = self.graph
        eu, ev, lens = g._eu[self.edge[rows]], g._ev[self.edge[rows]], g.lengths[self.edge[rows]]
        s = self.offset[rows]
        dv = np.minimum(s[:, None] + g.vdist[eu], (lens - s)[:, None] + g.vdist[ev])
        tu, tv = g._eu[self.edge], g._ev[self.edge]
        tl = g.lengths[self.edge]
        d = np.minimum(dv[:, tu] + self.offset[None, :], dv[:, tv] + (tl - self.offset)[None, :])
        same = self.edge[rows][:, None] == self.edge[None, :]
        direct = np.abs(self.offset[None, :] - s[:, None])
        return np.where(same, np.minimum(d, direct), d)

    def distance_matrix(self) -> np.ndarray:
        if self._dist is None:
            self._dist = self.distance_rows(np.arange(self.size))
        return self._dist

    def interval_lipschitz(self, values: np.ndarray) -> float:
        """Largest difference quotient of nodal values across mesh intervals."""
        if self.n_intervals == 0:
            return 0.0
        return float(np.max(np.abs(values[self.ib] - values[self.ia]) / self.igap))

    def interior_mask(self) -> np.ndarray:
        """Mesh nodes that are not leaf vertices of the graph."""
        mask = np.ones(self.size, dtype=bool)
        for i, v in enumerate(self.vertex):
            if v >= 0 and self.graph.degree(int(v)) == 1:
                mask[i] = False
        return mask


def sample_mesh(g: MetricGraph, h: float) -> Mesh:
    if not h > 0:
        raise GraphError("mesh spacing h must be positive")
    nv = len(g.vertices)
    edge_list: list[int] = []
    off_list: list[float] = []
    vert_list: list[int] = []
    for v in range(nv):
        p = g.vertex_point(v)
        edge_list.append(p.edge)
        off_list.append(p.offset)
        vert_list.append(v)
    edge_nodes = []
    ia, ib, igap, iedge = [], [], [], []
    n_per = np.zeros(len(g.edges), dtype=int)
    first = np.zeros(len(g.edges), dtype=int)
    for e, edge in enumerate(g.edges):
        n = max(1, math.ceil(edge.length / h - 1e-9))
        n_per[e] = n
        nodes = [edge.u]
        for k in range(1, n):
            nodes.append(len(edge_list))
            edge_list.append(e)
            off_list.append(edge.length * k / n)
            vert_list.append(-1)
        nodes.append(edge.v)
        edge_nodes.append(np.array(nodes, dtype=int))
        first[e] = len(ia)
        offs = edge.length * np.arange(n + 1) / n
        for k in range(n):
            ia.append(nodes[k])
            ib.append(nodes[k + 1])
            igap.append(offs[k + 1] - offs[k])
            iedge.append(e)
    mesh = Mesh(
        graph=g,
        h=float(h),
        edge=np.array(edge_list, dtype=int),
        offset=np.array(off_list, dtype=float),
        vertex=np.array(vert_list, dtype=int),
        edge_nodes=edge_nodes,
        ia=np.array(ia, dtype=int),
        ib=np.array(ib, dtype=int),
        igap=np.array(igap, dtype=float),
        iedge=np.array(iedge, dtype=int),
        n_per_edge=n_per,
        first_interval=first,
    )
    return mesh


def ball(g: MetricGraph, m: Mesh, p: Point, r: float) -> list[tuple[int, float]]:
    """All mesh nodes within distance r of p, with their exact distances."""
    if r < 0:
        raise GraphError("radius must be nonnegative")
    d = m.distances_from(p)
    idx = np.nonzero(within(d, r))[0]
    return [(int(i), float(d[i])) for i in idx]
