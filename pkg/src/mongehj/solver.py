"""Min-plus time stepping of the control formulas on a mesh.

Eikonal route: one step is

    u(x, t + dt) = min over mesh y, d(x, y) <= dt, of u(y, t) + int_0^dt f(gamma(s), t + dt - s) ds

along the constant-speed geodesic gamma from x to y, integrated by the
trapezoid rule with spatial gap <= h.

General route: one step is

    u(x, t + dt) = min over y, d(x, y) <= R dt, of u(y, t) + dt L(x, t + dt, d(x, y) / dt).

By default y ranges over whole mesh intervals rather than mesh nodes. Node-only
candidates quantize the hop speed to multiples of h / dt, which costs an O(1)
error when h = dt. On each interval u(y, t) is reconstructed by linear
interpolation lowered by a convex-side curvature term, then the convex
one-dimensional problem is solved by golden-section search.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .expressions import GraphFunction, parse_function
from .graph import Mesh, MetricGraph, Point, within
from .hamiltonian import (
    GOLDEN,
    HamiltonianSpec,
    LagrangianView,
    audit_assumptions,
    lagrangian_view,
    search_radius,
)


class ConfigError(ValueError):
    pass


class InputError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


class RadiusError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > 0 and self.n_steps >= 1):
            raise ConfigError("time grid needs T > 0 and at least one step")

    @classmethod
    def from_dt(cls, T: float, dt: float) -> "TimeGrid":
        n = round(T / dt)
        if n < 1 or abs(n * dt - T) > 1e-9 * T:
            raise ConfigError(f"dt = {dt} does not divide T = {T}")
        return cls(float(T), int(n))

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt

    def index(self, t: float) -> int:
        n = round(t / self.dt)
        if not 0 <= n < self.n_steps or abs(n * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(f"t = {t} is not a grid time")
        return n


@dataclass
class SolveConfig:
    h: float
    dt: float
    T: float = 1.0
    candidates: str = "interval"
    interpolation: str = "curvature"
    radius: float | None = None
    max_retries: int = 3
    golden_iters: int = 48
    threads: int = 1

    def __post_init__(self):
        if not (self.h > 0 and self.dt > 0):
            raise ConfigError("h and dt must be positive")
        if self.h > self.dt * (1 + 1e-12):
            raise ConfigError(f"mesh spacing h = {self.h} exceeds time step dt = {self.dt}")
        if self.candidates not in ("interval", "nodes"):
            raise ConfigError(f"unknown candidate set {self.candidates!r}")
        if self.interpolation not in ("curvature", "linear"):
            raise ConfigError(f"unknown interpolation {self.interpolation!r}")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_dt(self.T, self.dt)

    def to_json(self) -> dict:
        return {
            "h": self.h, "dt": self.dt, "T": self.T, "candidates": self.candidates,
            "interpolation": self.interpolation, "radius": self.radius,
            "max_retries": self.max_retries, "golden_iters": self.golden_iters,
        }


@dataclass
class SpaceTimeField:
    """Values per (time slice, mesh node); slice n lives at t = n dt."""

    mesh: Mesh
    grid: TimeGrid
    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)
    dep_edge: np.ndarray | None = field(default=None, repr=False)
    dep_offset: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_steps, self.mesh.size):
            raise InputError(f"field shape {self.values.shape} != ({self.grid.n_steps}, {self.mesh.size})")
        if not np.all(np.isfinite(self.values)):
            raise InputError("field has non-finite values")

    @property
    def k_shift(self) -> float:
        return float(self.meta.get("k_shift", 0.0))

    def with_values(self, values, **meta) -> "SpaceTimeField":
        return SpaceTimeField(self.mesh, self.grid, values, {**self.meta, **meta})

    def value_at(self, edges, offsets, t) -> np.ndarray:
        """Linear interpolation in space and time at arbitrary (x, t)."""
        t = np.asarray(t, dtype=float)
        pos = t / self.grid.dt
        last = self.grid.n_steps - 1
        if np.any(pos < -1e-9) or np.any(pos > last + 1e-9):
            raise InputError("time outside the stored slices")
        pos = np.clip(pos, 0.0, last)
        n0 = np.minimum(np.floor(pos + 1e-9).astype(int), max(last - 1, 0))
        w = np.clip(pos - n0, 0.0, 1.0) if last > 0 else np.zeros_like(pos)
        k, lam = self.mesh.locate(edges, offsets)
        k = np.broadcast_to(k, n0.shape) if n0.ndim else k
        lam = np.broadcast_to(lam, n0.shape) if n0.ndim else lam
        ia, ib = self.mesh.ia[k], self.mesh.ib[k]
        n1 = np.minimum(n0 + 1, last)
        v0 = (1 - lam) * self.values[n0, ia] + lam * self.values[n0, ib]
        v1 = (1 - lam) * self.values[n1, ia] + lam * self.values[n1, ib]
        return (1 - w) * v0 + w * v1


def nodal(fn, mesh: Mesh, t: float = 0.0) -> np.ndarray:
    """Nodal values of a function spec or GraphFunction, or pass an array through."""
    if isinstance(fn, np.ndarray):
        if fn.shape != (mesh.size,):
            raise InputError(f"nodal array has shape {fn.shape}, mesh has {mesh.size} nodes")
        return fn.astype(float)
    fn = parse_function(fn, mesh.graph, mesh)
    vals = fn(mesh.edge, mesh.offset, t)
    if not np.all(np.isfinite(vals)):
        raise InputError("function has non-finite values on the mesh")
    return np.array(vals, dtype=float)


def _group_min(vals: np.ndarray, rows: np.ndarray, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row minimum and the index of its first attaining entry; rows sorted."""
    starts = np.searchsorted(rows, np.arange(n_rows))
    if np.any(np.diff(np.append(starts, len(rows))) == 0):
        raise RadiusError("a mesh node has no candidate")
    mins = np.minimum.reduceat(vals, starts)
    hit = np.nonzero(vals == mins[rows])[0]
    first = np.full(n_rows, -1)
    first[rows[hit][::-1]] = hit[::-1]
    return mins, first


# eikonal step ------------------------------------------------------------------


class EikonalStep:
    """Node-to-node hops of speed <= 1 with trapezoid running cost."""

    def __init__(self, mesh: Mesh, f: GraphFunction, dt: float):
        self.mesh, self.f, self.dt = mesh, f, dt
        self.speed_radius = 1.0
        D = mesh.distance_matrix()
        rows, cols = np.nonzero(within(D, dt))
        # staying put first so ties keep the curve in place
        order = np.lexsort((cols != rows, rows))
        self.pi, self.pj = rows[order], cols[order]
        self.pd = D[self.pi, self.pj]
        self._build_quadrature()
        self._static = None if f.time_dependent else self._cost(0.0)

    def _build_quadrature(self):
        mesh, g, dt, h = self.mesh, self.mesh.graph, self.dt, self.mesh.h
        pts = mesh.points
        pid, se, so, sig, w = [], [], [], [], []
        for n, (i, j, d) in enumerate(zip(self.pi, self.pj, self.pd)):
            e, s, arc = _sample_path(g, pts[i], pts[j], d, h)
            sigma = dt * arc / d if d > 0 else np.array([0.0, dt])
            wt = np.zeros_like(sigma)
            ds = np.diff(sigma)
            wt[:-1] += ds / 2
            wt[1:] += ds / 2
            pid.append(np.full(len(sigma), n))
            se.append(e)
            so.append(s)
            sig.append(sigma)
            w.append(wt)
        self.q_pair = np.concatenate(pid)
        self.q_edge = np.concatenate(se)
        self.q_off = np.concatenate(so)
        self.q_sigma = np.concatenate(sig)
        self.q_w = np.concatenate(w)

    def _cost(self, t_prev: float) -> np.ndarray:
        if self.f.constant is not None:
            return np.full(len(self.pi), self.f.constant * self.dt)
        fv = self.f(self.q_edge, self.q_off, t_prev + self.dt - self.q_sigma)
        return np.bincount(self.q_pair, weights=self.q_w * fv, minlength=len(self.pi))

    def apply(self, prev: np.ndarray, t_prev: float, rows: np.ndarray | None = None):
        cost = self._static if self._static is not None else self._cost(t_prev)
        vals = prev[self.pj] + cost
        mins, first = _group_min(vals, self.pi, self.mesh.size)
        dep = self.pj[first]
        out = (mins, self.mesh.edge[dep], self.mesh.offset[dep])
        return out if rows is None else tuple(a[rows] for a in out)

    def apply_at(self, p: Point, prev: np.ndarray, t_prev: float):
        """One step at an arbitrary arrival point; returns (value, departure point)."""
        mesh, g = self.mesh, self.mesh.graph
        d = mesh.distances_from(p)
        best, arg = math.inf, None
        for j in np.nonzero(within(d, self.dt))[0]:
            e, s, arc = _sample_path(g, p, mesh.points[j], d[j], mesh.h)
            sigma = self.dt * arc / d[j] if d[j] > 0 else np.array([0.0, self.dt])
            fv = self.f(e, s, t_prev + self.dt - sigma)
            val = prev[j] + float(np.sum(np.diff(sigma) * (fv[1:] + fv[:-1]) / 2))
            if val < best:
                best, arg = val, mesh.points[j]
        if arg is None:
            raise RadiusError("no mesh node within one step of the point")
        return best, arg


def _sample_path(g: MetricGraph, p: Point, q: Point, d: float, h: float):
    """Points along the geodesic p -> q at equal arc gaps <= h, with arc positions."""
    n = max(1, math.ceil(d / h - 1e-9))
    arc = d * np.arange(n + 1) / n
    if d == 0:
        return np.array([p.edge, p.edge]), np.array([p.offset, p.offset]), np.array([0.0, 0.0])
    pieces = g.geodesic_pieces(p, q)
    bounds = np.cumsum([0.0] + [abs(s1 - s0) for _, s0, s1 in pieces])
    k = np.clip(np.searchsorted(bounds, arc, side="right") - 1, 0, len(pieces) - 1)
    edges = np.array([pieces[i][0] for i in k])
    s0 = np.array([pieces[i][1] for i in k])
    s1 = np.array([pieces[i][2] for i in k])
    offs = s0 + np.sign(s1 - s0) * np.minimum(arc - bounds[k], np.abs(s1 - s0))
    return edges, offs, arc


# general step ------------------------------------------------------------------


@dataclass
class _Pieces:
    row: np.ndarray    # arrival index (into the arrival arrays)
    k: np.ndarray      # mesh interval
    lo: np.ndarray     # lambda range on the interval
    hi: np.ndarray
    d0: np.ndarray     # distance = d0 + ds * lambda
    ds: np.ndarray


class GeneralStep:
    """Hops of speed <= R landing anywhere on mesh intervals (or on nodes only)."""

    def __init__(self, mesh: Mesh, spec: HamiltonianSpec, dt: float, speed_radius: float,
                 candidates: str = "interval", interpolation: str = "curvature",
                 golden_iters: int = 48, threads: int = 1):
        self.mesh, self.spec, self.dt = mesh, spec, dt
        self.speed_radius = float(speed_radius)
        self.r = self.speed_radius * dt
        self.candidates, self.interpolation = candidates, interpolation
        self.golden_iters, self.threads = golden_iters, max(1, int(threads))
        ie = mesh.iedge
        self._prev_same = np.r_[False, ie[1:] == ie[:-1]]
        self._next_same = np.r_[ie[:-1] == ie[1:], False]
        self._ioff = np.array([mesh.node_offsets_on(e)[k - mesh.first_interval[e]] for k, e in enumerate(ie)])
        D = mesh.distance_matrix()
        if candidates == "nodes":
            rows, cols = np.nonzero(within(D, self.r))
            order = np.lexsort((cols != rows, rows))
            self.pi, self.pj = rows[order], cols[order]
            self.pd = D[self.pi, self.pj]
        else:
            self.pieces = self._mesh_pieces(D)

    # candidate geometry ----------------------------------------------------

    def _pieces_from(self, Da: np.ndarray, Db: np.ndarray, inside: np.ndarray | None = None) -> _Pieces:
        mesh, r = self.mesh, self.r
        gap = mesh.igap[None, :]
        near = within(np.minimum(Da, Db), r)
        if inside is not None:
            kin = inside[:, 0].astype(int)
            hit = kin >= 0
            near[np.nonzero(hit)[0], kin[hit]] = False
        row, k = np.nonzero(near)
        da, db, g = Da[row, k], Db[row, k], np.broadcast_to(gap, Da.shape)[row, k]
        lc = np.clip((db - da + g) / (2 * g), 0.0, 1.0)
        slack = 1e-9 * (1 + r)
        a_hi = np.minimum(lc, (r + slack - da) / g)
        b_lo = np.maximum(lc, 1.0 - (r + slack - db) / g)
        parts = [
            (row, k, np.zeros_like(lc), a_hi, da, g, a_hi >= 0),
            (row, k, b_lo, np.ones_like(lc), db + g, -g, b_lo <= 1),
        ]
        if inside is not None:
            rr = np.nonzero(hit)[0]
            kk = kin[rr]
            lp = inside[rr, 1]
            gg = mesh.igap[kk]
            parts.append((rr, kk, np.maximum(0.0, lp - r / gg), lp, lp * gg, -gg, np.ones(len(rr), bool)))
            parts.append((rr, kk, lp, np.minimum(1.0, lp + r / gg), -lp * gg, gg, np.ones(len(rr), bool)))
        cat = [np.concatenate([p[i][p[6]] for p in parts]) for i in range(6)]
        order = np.argsort(cat[0], kind="stable")
        return _Pieces(*[c[order] for c in cat])

    def _mesh_pieces(self, D: np.ndarray) -> _Pieces:
        return self._pieces_from(D[:, self.mesh.ia], D[:, self.mesh.ib])

    # reconstruction and minimization ---------------------------------------

    def _curvature(self, u: np.ndarray) -> np.ndarray:
        if self.interpolation == "linear":
            return np.zeros(self.mesh.n_intervals)
        ia, ib = self.mesh.ia, self.mesh.ib
        sa = np.full(len(ia), np.nan)
        sb = np.full(len(ia), np.nan)
        k = np.nonzero(self._prev_same)[0]
        sa[k] = u[ia[k - 1]] - 2 * u[ia[k]] + u[ib[k]]
        k = np.nonzero(self._next_same)[0]
        sb[k] = u[ia[k]] - 2 * u[ib[k]] + u[ib[k + 1]]
        both = np.where(np.isnan(sa), sb, np.where(np.isnan(sb), sa, np.minimum(sa, sb)))
        return np.maximum(np.nan_to_num(both, nan=0.0), 0.0)

    def _minimize(self, pc: _Pieces, u: np.ndarray, curv: np.ndarray, Lq, rows_L: np.ndarray):
        ua, ub = u[self.mesh.ia[pc.k]], u[self.mesh.ib[pc.k]]
        c = curv[pc.k]
        floor = np.minimum(ua, ub)
        dt = self.dt

        def phi(lam):
            interp = np.maximum((1 - lam) * ua + lam * ub - 0.5 * c * lam * (1 - lam), floor)
            q = np.maximum(pc.d0 + pc.ds * lam, 0.0) / dt
            return interp + dt * Lq(q)

        a, b = pc.lo.copy(), pc.hi.copy()
        best_l, best = a.copy(), phi(a)
        fb = phi(b)
        take = fb < best
        best_l, best = np.where(take, b, best_l), np.where(take, fb, best)
        x1 = b - GOLDEN * (b - a)
        x2 = a + GOLDEN * (b - a)
        f1, f2 = phi(x1), phi(x2)
        for _ in range(self.golden_iters):
            left = f1 <= f2
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
            n1 = np.where(left, b - GOLDEN * (b - a), x2)
            n2 = np.where(left, x1, a + GOLDEN * (b - a))
            fp = phi(np.where(left, n1, n2))
            f1, f2 = np.where(left, fp, f2), np.where(left, f1, fp)
            x1, x2 = n1, n2
        for x, fx in ((x1, f1), (x2, f2)):
            take = fx < best
            best_l, best = np.where(take, x, best_l), np.where(take, fx, best)
        return best, best_l

    def _frozen(self, edges, offsets, t):
        return self.spec.frozen_L(edges, offsets, t)

    def _solve_pieces(self, pc: _Pieces, u, t_arrive, arr_edges, arr_offs, n_rows):
        curv = self._curvature(u)
        Lx = self._frozen(arr_edges[pc.row], arr_offs[pc.row], t_arrive)
        if self.threads > 1 and len(pc.row) > 4096:
            chunks = np.array_split(np.arange(len(pc.row)), self.threads)

            def job(idx):
                sub = _Pieces(*(getattr(pc, f)[idx] for f in ("row", "k", "lo", "hi", "d0", "ds")))
                Ls = self._frozen(arr_edges[sub.row], arr_offs[sub.row], t_arrive)
                return self._minimize(sub, u, curv, Ls, sub.row)

            with ThreadPoolExecutor(self.threads) as ex:
                res = list(ex.map(job, chunks))
            vals = np.concatenate([r[0] for r in res])
            lams = np.concatenate([r[1] for r in res])
        else:
            vals, lams = self._minimize(pc, u, curv, Lx, pc.row)
        mins, first = _group_min(vals, pc.row, n_rows)
        k = pc.k[first]
        return mins, self.mesh.iedge[k], self._ioff[k] + lams[first] * self.mesh.igap[k]

    def apply(self, prev: np.ndarray, t_prev: float, rows: np.ndarray | None = None):
        mesh, t = self.mesh, t_prev + self.dt
        if self.candidates == "nodes":
            Lq = self._frozen(mesh.edge[self.pi], mesh.offset[self.pi], t)
            vals = prev[self.pj] + self.dt * Lq(self.pd / self.dt)
            mins, first = _group_min(vals, self.pi, mesh.size)
            dep = self.pj[first]
            out = (mins, mesh.edge[dep], mesh.offset[dep])
            return out if rows is None else tuple(a[rows] for a in out)
        pc = self.pieces
        n_rows = mesh.size
        if rows is not None:
            rows = np.asarray(rows)
            keep = np.isin(pc.row, rows)
            remap = np.full(mesh.size, -1)
            remap[rows] = np.arange(len(rows))
            pc = _Pieces(remap[pc.row[keep]], pc.k[keep], pc.lo[keep], pc.hi[keep], pc.d0[keep], pc.ds[keep])
            order = np.argsort(pc.row, kind="stable")
            pc = _Pieces(*(getattr(pc, f)[order] for f in ("row", "k", "lo", "hi", "d0", "ds")))
            n_rows = len(rows)
            return self._solve_pieces(pc, prev, t, mesh.edge[rows], mesh.offset[rows], n_rows)
        return self._solve_pieces(pc, prev, t, mesh.edge, mesh.offset, n_rows)

    def apply_at(self, p: Point, prev: np.ndarray, t_prev: float):
        """One step at an arbitrary arrival point; returns (value, departure point)."""
        mesh, g = self.mesh, self.mesh.graph
        t = t_prev + self.dt
        edges, offs = np.array([p.edge]), np.array([p.offset])
        if self.candidates == "nodes":
            d = mesh.distances_from(p)
            j = np.nonzero(within(d, self.r))[0]
            vals = prev[j] + self.dt * self._frozen(edges, offs, t)(d[j] / self.dt)
            i = int(np.argmin(vals))
            return float(vals[i]), mesh.points[j[i]]
        d = mesh.distances_from(p)
        Da, Db = d[mesh.ia][None, :], d[mesh.ib][None, :]
        k, lam = mesh.locate(edges, offs)
        inside = np.array([[k[0], lam[0]]]) if 0.0 < lam[0] < 1.0 else np.array([[-1, 0.0]])
        pc = self._pieces_from(Da, Db, inside)
        val, e, s = self._solve_pieces(pc, prev, t, edges, offs, 1)
        return float(val[0]), g.point(int(e[0]), float(s[0]))


# drivers -----------------------------------------------------------------------


def _run(step, mesh: Mesh, u0: np.ndarray, grid: TimeGrid, record: bool = True):
    values = np.empty((grid.n_steps, mesh.size))
    values[0] = u0
    dep_e = np.zeros((grid.n_steps, mesh.size), dtype=int)
    dep_s = np.zeros((grid.n_steps, mesh.size))
    lips = [mesh.interval_lipschitz(u0)]
    for n in range(1, grid.n_steps):
        values[n], dep_e[n], dep_s[n] = step.apply(values[n - 1], (n - 1) * grid.dt)
        lips.append(mesh.interval_lipschitz(values[n]))
    return values, dep_e, dep_s, np.array(lips)


def solve_eikonal(g: MetricGraph, mesh: Mesh, f, u0, grid: TimeGrid, config: SolveConfig,
                  problem_hash: str = "") -> SpaceTimeField:
    if abs(grid.dt - config.dt) > 1e-12 * config.dt:
        raise ConfigError("time grid and config disagree on dt")
    f = parse_function(f, g, mesh)
    probe = f(mesh.edge[:, None], mesh.offset[:, None], grid.times[None, :])
    if not np.all(np.isfinite(probe)):
        raise InputError("f is unbounded on the mesh")
    u0v = nodal(u0, mesh)
    step = EikonalStep(mesh, f, grid.dt)
    values, de, ds, lips = _run(step, mesh, u0v, grid)
    meta = {"route": "eikonal", "problem_hash": problem_hash, "k_shift": 0.0, "R": 1.0,
            "config": config.to_json(), "lipschitz": float(lips.max())}
    return SpaceTimeField(mesh, grid, values, meta, de, ds)


def solve_general(g: MetricGraph, mesh: Mesh, spec: HamiltonianSpec, u0, grid: TimeGrid,
                  config: SolveConfig, audit=None, problem_hash: str = "") -> SpaceTimeField:
    if abs(grid.dt - config.dt) > 1e-12 * config.dt:
        raise ConfigError("time grid and config disagree on dt")
    if spec.form == "eikonal":
        raise HypothesisError("coercivity fails for the eikonal form: use solve_eikonal")
    audit = audit or audit_assumptions(spec, g)
    failed = audit.failures("general")
    if failed:
        raise HypothesisError(f"audit failed for the general route: {', '.join(failed)}")
    view = lagrangian_view(spec, g)
    u0v = nodal(u0, mesh)
    C = mesh.interval_lipschitz(u0v)
    for attempt in range(config.max_retries + 1):
        R = config.radius if config.radius is not None else search_radius(view, C)
        step = GeneralStep(mesh, spec, grid.dt, R, config.candidates, config.interpolation,
                           config.golden_iters, config.threads)
        values, de, ds, lips = _run(step, mesh, u0v, grid)
        grown = lips.max()
        if config.radius is not None or grown <= C * (1 + 1e-6) + 1e-12:
            break
        if attempt == config.max_retries:
            raise RadiusError(f"Lipschitz constant kept growing ({grown:g} > {C:g}) after {attempt} retries")
        C = 2.0 * grown
    meta = {"route": "general", "problem_hash": problem_hash, "k_shift": 0.0, "R": R,
            "lipschitz_bound_used": C, "config": config.to_json(), "lipschitz": float(lips.max()),
            "L0": view.L0, "L1": view.L1}
    return SpaceTimeField(mesh, grid, values, meta, de, ds)


def make_step(field: SpaceTimeField, spec: HamiltonianSpec):
    """Rebuild the step operator a field was produced with."""
    cfg = field.meta.get("config", {})
    if field.meta.get("route") == "eikonal" or spec.form == "eikonal":
        return EikonalStep(field.mesh, spec.f, field.grid.dt)
    return GeneralStep(field.mesh, spec, field.grid.dt, field.meta["R"], cfg.get("candidates", "interval"),
                       cfg.get("interpolation", "curvature"), cfg.get("golden_iters", 48))


def hopflax_direct(view: LagrangianView, mesh: Mesh, u0, points, t, chunk: int = 2_000_000) -> np.ndarray:
    """min over every mesh node y of u0(y) + t L(d(x, y) / t), for (x, t) pairs.

    ``points`` is (edges, offsets) or a single Point; ``t`` broadcasts against
    them. L must not depend on (x, t).
    """
    if not view.xt_independent:
        raise ValueError("direct Hopf-Lax needs L independent of (x, t)")
    u0v = nodal(u0, mesh)
    single = isinstance(points, Point)
    edges, offs = ((np.array([points.edge]), np.array([points.offset])) if single
                   else (np.atleast_1d(points[0]), np.atleast_1d(np.asarray(points[1], dtype=float))))
    t = np.broadcast_to(np.asarray(t, dtype=float), edges.shape)
    Lq = view.spec.frozen_L(0, 0.0, 0.0)
    g = mesh.graph
    out = np.empty(len(edges))
    # distances from each arrival point share the vertex table, group by location
    locs = {}
    for i, (e, s) in enumerate(zip(edges, offs)):
        locs.setdefault((int(e), float(s)), []).append(i)
    for (e, s), idx in locs.items():
        d = mesh.distances_from(g.point(e, s))
        idx = np.array(idx)
        tt = t[idx]
        res = np.empty(len(idx))
        step = max(1, chunk // max(1, len(d)))
        for c0 in range(0, len(idx), step):
            ts = tt[c0:c0 + step, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                cost = np.where(ts > 0, ts * Lq(np.where(ts > 0, d[None, :] / np.where(ts > 0, ts, 1.0), 0.0)), 0.0)
            cand = np.where((ts > 0) | (d[None, :] == 0), u0v[None, :] + cost, np.inf)
            res[c0:c0 + step] = np.min(cand, axis=1)
        zero = tt == 0
        if np.any(zero):
            res[zero] = mesh.interpolate(u0v, np.array([e]), np.array([s]))[0]
        out[idx] = res
    return float(out[0]) if single and np.ndim(t) <= 1 and len(out) == 1 else out


@dataclass
class ResidualReport:
    points: list[dict]
    max_abs: float
    median_abs: float

    def to_json(self) -> dict:
        return {"points": self.points, "aggregate": {"max_abs": self.max_abs, "median_abs": self.median_abs}}


def dpp_residual(field: SpaceTimeField, spec: HamiltonianSpec, n_samples: int = 1000, seed: int = 0,
                 step=None, samples: list[tuple[int, int]] | None = None) -> ResidualReport:
    """|u(x, t) - one-step minimization from the previous slice| at sampled (node, slice)."""
    step = step or make_step(field, spec)
    if samples is None:
        rng = np.random.default_rng(seed)
        ns = rng.integers(1, field.grid.n_steps, n_samples)
        xs = rng.integers(0, field.mesh.size, n_samples)
        samples = list(zip(xs.tolist(), ns.tolist()))
    by_slice: dict[int, list[int]] = {}
    for x, n in samples:
        by_slice.setdefault(n, []).append(x)
    points = []
    for n, xs in sorted(by_slice.items()):
        rows = np.unique(xs)
        vals = step.apply(field.values[n - 1], (n - 1) * field.grid.dt, rows)[0]
        res = dict(zip(rows.tolist(), (field.values[n, rows] - vals).tolist()))
        for x in xs:
            points.append({"id": int(x), "t": n * field.grid.dt, "residual": res[x]})
    mags = np.abs([p["residual"] for p in points])
    return ResidualReport(points, float(mags.max()), float(np.median(mags)))
