"""Finite-delta certification of the Monge property on a solved field.

A field u is shifted to v = u + k t with k large enough for v to be
nondecreasing in t. The backward space-time subslope of v is then estimated
on a short sweep of radii delta and compared with its target: f + k on the
eikonal route, k on the general route (where the Lagrangian is subtracted
inside the quotient).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import SpaceTimePoint, within
from .hamiltonian import HamiltonianSpec
from .solver import ConfigError, SpaceTimeField


class ShiftError(ValueError):
    pass


@dataclass
class SkEstimate:
    k: float
    decrease_rate: float
    margin: float | None = None
    witness: dict | None = None


@dataclass
class SlopeEstimate:
    point: SpaceTimePoint
    deltas: list[float]
    values: list[float]
    reported: float
    trend: float


@dataclass
class MongeResidualReport:
    route: str
    k: float
    node: np.ndarray
    t: np.ndarray
    estimate: np.ndarray
    target: np.ndarray
    plateau_ok: np.ndarray
    deltas: list[float] = field(default_factory=list)

    @property
    def residual(self) -> np.ndarray:
        return self.estimate - self.target

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residual))) if len(self.node) else 0.0

    @property
    def median_abs(self) -> float:
        return float(np.median(np.abs(self.residual))) if len(self.node) else 0.0

    def to_json(self) -> dict:
        pts = [
            {"id": int(i), "t": float(t), "estimate": float(e), "target": float(g),
             "residual": float(e - g), "plateau_ok": bool(p)}
            for i, t, e, g, p in zip(self.node, self.t, self.estimate, self.target, self.plateau_ok)
        ]
        return {"route": self.route, "k": self.k, "deltas": self.deltas, "points": pts,
                "aggregate": {"max_abs": self.max_abs, "median_abs": self.median_abs}}


def decrease_rate(field: SpaceTimeField) -> tuple[float, dict | None]:
    u = field.values
    if u.shape[0] < 2:
        return 0.0, None
    drop = (u[:-1] - u[1:]) / field.grid.dt
    n, x = np.unravel_index(int(np.argmax(drop)), drop.shape)
    return float(drop[n, x]), {"id": int(x), "t": float((n + 1) * field.grid.dt), "rate": float(drop[n, x])}


def estimate_k(field: SpaceTimeField, f=None) -> SkEstimate:
    """Class parameter k: 5% above the largest one-step decrease rate.

    With a running cost f, k is raised until k + inf f >= 0.
    """
    if field.grid.n_steps < 2:
        raise ConfigError("estimating k needs at least two time slices")
    rate, witness = decrease_rate(field)
    k = max(0.0, rate) * 1.05
    margin = None
    if f is not None:
        m = field.mesh
        inf_f = float(np.min(f(m.edge[None, :], m.offset[None, :], field.grid.times[:, None])))
        k = max(k, -inf_f)
        margin = k + inf_f
    return SkEstimate(k, rate, margin, witness)


def shift_v(field: SpaceTimeField, k: float) -> SpaceTimeField:
    rate, witness = decrease_rate(field)
    if k < rate - 1e-12 * (1 + abs(rate)):
        raise ShiftError(f"k = {k} is below the measured decrease rate {rate} at {witness}")
    v = field.values + k * field.grid.times[:, None]
    return field.with_values(v, k_shift=field.k_shift + k)


def default_deltas(field: SpaceTimeField) -> list[float]:
    dt = field.grid.dt
    return [j * dt for j in (8, 4, 2, 1) if j * dt >= field.mesh.h * (1 - 1e-12)]


def _lags(field: SpaceTimeField, deltas) -> list[int]:
    dt = field.grid.dt
    out = []
    for d in deltas:
        j = round(d / dt)
        if j < 1 or abs(j * dt - d) > 1e-9 * dt:
            raise ConfigError(f"delta = {d} is not a multiple of dt = {dt}")
        if d < field.mesh.h * (1 - 1e-12):
            raise ConfigError(f"delta = {d} is below the mesh spacing h = {field.mesh.h}")
        out.append(j)
    return out


def _pairs(field: SpaceTimeField, nodes: np.ndarray, radius: float):
    D = field.mesh.distance_rows(nodes)
    r, y = np.nonzero(within(D, radius))
    return r, y, D[r, y]


def slope_table(v: SpaceTimeField, nodes, slices, deltas, spec: HamiltonianSpec | None = None,
                positive_part: bool = False) -> np.ndarray:
    """Per-delta quotient sups, shape (len(deltas), len(slices), len(nodes)).

    Without ``spec`` this is the plain subslope with exact lag delta (or, with
    ``positive_part``, the positive part over every lag in [0, delta]). With
    ``spec`` it is the Lagrangian form over lags dt .. delta.
    """
    nodes, slices = np.asarray(nodes), np.asarray(slices)
    lags = _lags(v, deltas)
    dt = v.grid.dt
    if np.any(slices - max(lags) < 0):
        raise ConfigError("a sampled time is closer to 0 than the largest delta")
    r, y, d = _pairs(v, nodes, max(deltas))
    vals = v.values
    here = vals[slices][:, nodes]
    out = np.full((len(deltas), len(slices), len(nodes)), -np.inf)
    m = v.mesh
    for i, (delta, j) in enumerate(zip(deltas, lags)):
        ok = within(d, delta)
        rr, yy, dd = r[ok], y[ok], d[ok]
        if spec is None:
            lag_set = range(0, j + 1) if positive_part else (j,)
            for lag in lag_set:
                q = (here[:, rr] - vals[slices - lag][:, yy]) / delta
                if positive_part:
                    q = np.maximum(q, 0.0)
                np.maximum.at(out[i].T, rr, q.T)
            continue
        L = spec.frozen_L(m.edge[nodes[rr]][None, :], m.offset[nodes[rr]][None, :], (slices * dt)[:, None])
        for lag in range(1, j + 1):
            tau = lag * dt
            with np.errstate(invalid="ignore"):
                q = (here[:, rr] - vals[slices - lag][:, yy]) / tau - L(np.broadcast_to(dd / tau, (len(slices), len(dd))))
            q = np.where(np.isnan(q), -np.inf, q)
            np.maximum.at(out[i].T, rr, q.T)
    return out


def _report(table: np.ndarray, deltas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = np.argsort(deltas)
    small = table[order[:2]] if len(order) >= 2 else table[order[:1]]
    reported = small.max(axis=0)
    plateau_ok = np.abs(small[0] - small[-1]) <= 0.1 * (1 + np.abs(reported))
    ds = np.asarray(deltas)[:, None, None]
    fin = np.where(np.isfinite(table), table, 0.0)
    dm = ds - ds.mean()
    trend = (dm * (fin - fin.mean(axis=0))).sum(axis=0) / max((dm**2).sum(), 1e-300)
    return reported, plateau_ok, trend


def _locate(v: SpaceTimeField, z: SpaceTimePoint) -> tuple[int, int]:
    node = v.mesh.index_of(z.x)
    if node is None:
        raise ConfigError("subslopes are evaluated at mesh nodes only")
    return node, v.grid.index(z.t)


def _estimate(v, z, deltas, spec) -> SlopeEstimate:
    deltas = list(deltas) if deltas is not None else default_deltas(v)
    node, n = _locate(v, z)
    table = slope_table(v, [node], [n], deltas, spec)
    reported, _, trend = _report(table, deltas)
    return SlopeEstimate(z, deltas, table[:, 0, 0].tolist(), float(reported[0, 0]), float(trend[0, 0]))


def subslope(v: SpaceTimeField, z: SpaceTimePoint, deltas=None) -> SlopeEstimate:
    return _estimate(v, z, deltas, None)


def lagrangian_subslope(v: SpaceTimeField, spec: HamiltonianSpec, z: SpaceTimePoint, deltas=None) -> SlopeEstimate:
    return _estimate(v, z, deltas, spec)


def sample_points(field: SpaceTimeField, deltas, t_margin: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Interior nodes and slices with t in [t_margin, T - t_margin] and t >= max delta."""
    times = field.grid.times
    lo = max(t_margin, max(deltas))
    slices = np.nonzero((times >= lo - 1e-12) & (times <= field.grid.T - t_margin + 1e-12))[0]
    nodes = np.nonzero(field.mesh.interior_mask())[0]
    return nodes, slices


def monge_residual(field: SpaceTimeField, spec: HamiltonianSpec, route: str | None = None, k: float | None = None,
                   nodes=None, slices=None, deltas=None, t_margin: float = 0.1) -> MongeResidualReport:
    """Signed residual estimate - target; <= 0 is the subsolution side."""
    route = route or ("eikonal" if spec.form == "eikonal" else "general")
    if route == "eikonal" and spec.form != "eikonal":
        raise ConfigError("the eikonal route needs an eikonal Hamiltonian")
    if k is None:
        k = estimate_k(field, spec.f if route == "eikonal" else None).k
    v = shift_v(field, k)
    deltas = list(deltas) if deltas is not None else default_deltas(field)
    if nodes is None or slices is None:
        dn, ds = sample_points(field, deltas, t_margin)
        nodes = dn if nodes is None else np.asarray(nodes)
        slices = ds if slices is None else np.asarray(slices)
    table = slope_table(v, nodes, slices, deltas, None if route == "eikonal" else spec)
    reported, plateau_ok, _ = _report(table, deltas)
    t = field.grid.times[slices][:, None] * np.ones((1, len(nodes)))
    if route == "eikonal":
        m = field.mesh
        target = spec.f(m.edge[nodes][None, :], m.offset[nodes][None, :], t) + k
    else:
        target = np.full_like(reported, k)
    node_ids = np.broadcast_to(np.asarray(nodes)[None, :], reported.shape)
    return MongeResidualReport(route, float(k), node_ids.ravel(), t.ravel(), reported.ravel(),
                               np.asarray(target).ravel(), plateau_ok.ravel(), deltas)
