"""Hamiltonians H(x, t, p) of |grad u|, their Lagrangians, and an assumption audit.

Four forms are supported:

    eikonal    H = p - f(x, t)                 L = f on [0, 1], +inf beyond
    power      H = a(x) p**alpha - f(x)        L = c(a, alpha) q**(alpha/(alpha-1)) + f
    quadlin    H = a p**alpha + b p - f        L = c(a, alpha) (q - b)_+**(alpha/(alpha-1)) + f
    tabulated  H given on a p-grid             L by numerical conjugation

``f``, ``a`` and ``b`` may depend on t as well; the solver evaluates them at
whatever time it needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import brentq

from .expressions import Constant, GraphFunction, parse_function
from .graph import MetricGraph, Point

FORMS = ("eikonal", "power", "quadlin", "tabulated")
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DomainError(ValueError):
    pass


class CoercivityError(ValueError):
    pass


def _locus(x):
    if isinstance(x, Point):
        return np.array([x.edge]), np.array([x.offset]), True
    edges, offsets = x
    return np.asarray(edges), np.asarray(offsets, dtype=float), False


def power_coefficient(a, alpha: float):
    """c(a, alpha) with sup_p {pq - a p^alpha} = c q^(alpha/(alpha-1))."""
    return (alpha - 1.0) * alpha ** (-alpha / (alpha - 1.0)) * np.asarray(a, dtype=float) ** (-1.0 / (alpha - 1.0))


def _convex_repair(p: np.ndarray, H: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Greatest convex nondecreasing minorant of a table, evaluated on its nodes."""
    events = []
    hull = [0]
    for i in range(1, len(p)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (p[i1] - p[i0]) * (H[i] - H[i0]) - (H[i1] - H[i0]) * (p[i] - p[i0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    rep = np.interp(p, p[hull], H[hull])
    dropped = sorted(set(range(len(p))) - set(hull))
    if dropped:
        events.append(f"convex hull repair lowered nodes {dropped}")
    k = int(np.argmin(rep))
    if k > 0:
        events.append(f"monotone repair flattened nodes 0..{k - 1}")
        rep[:k] = rep[k]
    return rep, events


@dataclass(frozen=True)
class HamiltonianSpec:
    form: str
    T: float = 1.0
    f: GraphFunction = field(default_factory=lambda: Constant(0.0))
    a: GraphFunction = field(default_factory=lambda: Constant(1.0))
    b: GraphFunction = field(default_factory=lambda: Constant(0.0))
    alpha: float = 2.0
    table_p: tuple = ()
    table_H: tuple = ()

    def __post_init__(self):
        if self.form not in FORMS:
            raise DomainError(f"unknown Hamiltonian form {self.form!r}")
        if not self.T > 0:
            raise DomainError("horizon T must be positive")
        if self.form in ("power", "quadlin") and not self.alpha > 1:
            raise DomainError("alpha must exceed 1")
        if self.form == "tabulated":
            p = np.asarray(self.table_p, dtype=float)
            if p.ndim != 1 or len(p) < 2 or len(p) != len(self.table_H):
                raise DomainError("tabulated H needs matching p and H arrays of length >= 2")
            if p[0] != 0.0 or np.any(np.diff(p) <= 0):
                raise DomainError("tabulated p-grid must start at 0 and increase")

    # construction ---------------------------------------------------------

    @classmethod
    def eikonal(cls, f=0.0, T=1.0):
        return cls("eikonal", T, f=parse_function(f))

    @classmethod
    def power(cls, a=1.0, alpha=2.0, f=0.0, T=1.0):
        return cls("power", T, f=parse_function(f), a=parse_function(a), alpha=float(alpha))

    @classmethod
    def quadlin(cls, a=1.0, b=0.0, f=0.0, alpha=2.0, T=1.0):
        return cls("quadlin", T, f=parse_function(f), a=parse_function(a), b=parse_function(b), alpha=float(alpha))

    @classmethod
    def tabulated(cls, p, H, T=1.0):
        return cls("tabulated", T, table_p=tuple(float(v) for v in p), table_H=tuple(float(v) for v in H))

    @classmethod
    def from_json(cls, obj: dict, graph: MetricGraph | None = None, mesh=None) -> "HamiltonianSpec":
        form = obj.get("form")
        T = float(obj.get("T", 1.0))

        def fn(key, default):
            return parse_function(obj.get(key, default), graph, mesh)

        if form == "eikonal":
            return cls("eikonal", T, f=fn("f", 0.0))
        if form == "power":
            return cls("power", T, f=fn("f", 0.0), a=fn("a", 1.0), alpha=float(obj.get("alpha", 2.0)))
        if form == "quadlin":
            return cls("quadlin", T, f=fn("f", 0.0), a=fn("a", 1.0), b=fn("b", 0.0), alpha=float(obj.get("alpha", 2.0)))
        if form == "tabulated":
            return cls.tabulated(obj["p"], obj["H"], T)
        raise DomainError(f"unknown Hamiltonian form {form!r}")

    def to_json(self) -> dict:
        out: dict[str, Any] = {"form": self.form, "T": self.T}
        if self.form == "tabulated":
            out.update(p=list(self.table_p), H=list(self.table_H))
            return out
        out["f"] = self.f.to_spec()
        if self.form in ("power", "quadlin"):
            out.update(a=self.a.to_spec(), alpha=self.alpha)
        if self.form == "quadlin":
            out["b"] = self.b.to_spec()
        return out

    # properties -----------------------------------------------------------

    @property
    def xt_independent(self) -> bool:
        if self.form == "tabulated":
            return True
        fns = [self.f] + ([self.a] if self.form in ("power", "quadlin") else []) + ([self.b] if self.form == "quadlin" else [])
        return all(g.constant is not None for g in fns)

    @property
    def time_dependent(self) -> bool:
        return any(g.time_dependent for g in (self.f, self.a, self.b))

    def repaired_table(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        p = np.asarray(self.table_p, dtype=float)
        rep, events = _convex_repair(p, np.asarray(self.table_H, dtype=float))
        return p, rep, events

    # evaluation -----------------------------------------------------------

    def H(self, edges, offsets, t, p, raw: bool = False) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if np.any(p < 0):
            raise DomainError("H is defined for p >= 0 only")
        if self.form == "tabulated":
            tp = np.asarray(self.table_p, dtype=float)
            th = np.asarray(self.table_H, dtype=float) if raw else self.repaired_table()[1]
            slope = (th[-1] - th[-2]) / (tp[-1] - tp[-2])
            val = np.where(p <= tp[-1], np.interp(p, tp, th), th[-1] + slope * (p - tp[-1]))
            return np.broadcast_to(val, np.broadcast_shapes(np.shape(edges), np.shape(offsets), np.shape(t), p.shape))
        f = self.f(edges, offsets, t)
        if self.form == "eikonal":
            return p - f
        a = self.a(edges, offsets, t)
        val = a * p**self.alpha - f
        if self.form == "quadlin":
            val = val + self.b(edges, offsets, t) * p
        return val

    def L(self, edges, offsets, t, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if np.any(q < 0):
            raise DomainError("L is defined for q >= 0 only")
        if self.form == "tabulated":
            return _tabulated_L(self, q, np.broadcast_shapes(np.shape(edges), np.shape(offsets), np.shape(t), q.shape))
        f = self.f(edges, offsets, t)
        if self.form == "eikonal":
            return np.where(q <= 1.0, f, np.inf)
        c = power_coefficient(self.a(edges, offsets, t), self.alpha)
        expo = self.alpha / (self.alpha - 1.0)
        if self.form == "power":
            return c * q**expo + f
        b = self.b(edges, offsets, t)
        return c * np.maximum(q - b, 0.0) ** expo + f

    def frozen_L(self, edges, offsets, t) -> Callable[[np.ndarray], np.ndarray]:
        """q -> L(x, t, q) with the coefficient functions evaluated once."""
        if self.form == "tabulated":
            return lambda q: _tabulated_L(self, np.asarray(q, dtype=float), np.shape(q))
        f = self.f(edges, offsets, t)
        if self.form == "eikonal":
            return lambda q: np.where(q <= 1.0, f, np.inf)
        c = power_coefficient(self.a(edges, offsets, t), self.alpha)
        expo = self.alpha / (self.alpha - 1.0)
        if self.form == "power":
            return lambda q: c * q**expo + f
        b = self.b(edges, offsets, t)
        return lambda q: c * np.maximum(q - b, 0.0) ** expo + f


def _tabulated_L(spec: HamiltonianSpec, q, shape):
    tp, th, _ = spec.repaired_table()
    final_slope = (th[-1] - th[-2]) / (tp[-1] - tp[-2])
    # sup of a concave piecewise-linear function is attained at a node, or diverges
    val = np.max(q[..., None] * tp - th, axis=-1)
    val = np.where(q > final_slope + 1e-12, np.inf, val)
    return np.broadcast_to(val, shape)


def eval_H(spec: HamiltonianSpec, x, t, p):
    edges, offsets, scalar = _locus(x)
    val = spec.H(edges, offsets, t, p)
    return float(np.ravel(val)[0]) if scalar and np.ndim(p) == 0 else val


def legendre_L(spec: HamiltonianSpec, x, t, q):
    """sup over p >= 0 of {p q - H(x, t, p)}; closed form except for tables.

    The eikonal form returns +inf past unit speed. Any other form raising to
    +inf means the supremum diverged, which is reported as a CoercivityError.
    """
    edges, offsets, scalar = _locus(x)
    val = spec.L(edges, offsets, t, q)
    if spec.form != "eikonal" and np.any(np.isinf(val)):
        raise CoercivityError("sup over p diverges: H is not coercive at this slope")
    return float(np.ravel(val)[0]) if scalar and np.ndim(q) == 0 else val


# numerical conjugation -----------------------------------------------------------


def sup_concave(phi: Callable[[np.ndarray], np.ndarray], upper, n: int = 512, lower: float = 1e-3):
    """Maximize concave phi over [0, upper] for a batch of problems.

    ``phi`` maps an (m, k) array of abscissae to values, row i belonging to
    problem i. The grid {0} U geomspace(lower, upper, n) brackets the maximizer
    and golden-section search refines it. Returns (max value, maximizer).
    """
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    start = np.minimum(lower, upper / 2.0)
    grid = np.concatenate([np.zeros((len(upper), 1)), np.geomspace(start, upper, n, axis=1)], axis=1)
    vals = phi(grid)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    i = np.argmax(vals, axis=1)
    rows = np.arange(len(upper))
    best, arg = vals[rows, i], grid[rows, i]
    a = grid[rows, np.maximum(i - 1, 0)]
    b = grid[rows, np.minimum(i + 1, grid.shape[1] - 1)]

    def ev(x):
        v = phi(x[:, None])[:, 0]
        return np.where(np.isnan(v), -np.inf, v)

    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = ev(c), ev(d)
    for _ in range(100):
        left = fc >= fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        c_new = np.where(left, b - GOLDEN * (b - a), d)
        d_new = np.where(left, c, a + GOLDEN * (b - a))
        fp = ev(np.where(left, c_new, d_new))
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_new, d_new
    for x, fx in ((c, fc), (d, fd)):
        better = fx > best
        best, arg = np.where(better, fx, best), np.where(better, x, arg)
    return best, arg


def expand_upper(phi: Callable[[np.ndarray], np.ndarray], rows: int, start: float = 1.0, cap: float = 1e12) -> np.ndarray:
    """Per-row upper end u with phi(u) at least 1 below max(phi(0), phi(u/2)) and falling.

    For concave phi this puts the maximizer inside [0, u].
    """
    upper = np.full(rows, np.nan)
    u = start
    while u <= cap:
        v = phi(np.tile([0.0, u / 2.0, u], (rows, 1)))
        done = np.isnan(upper) & (v[:, 2] <= np.maximum(v[:, 0], v[:, 1]) - 1.0) & (v[:, 2] < v[:, 1])
        upper = np.where(done, u, upper)
        if not np.any(np.isnan(upper)):
            return upper
        u *= 2.0
    raise CoercivityError("supremum does not settle: the function grows too slowly")


def numeric_L(spec: HamiltonianSpec, x, t, q) -> np.ndarray:
    """Grid-plus-golden conjugate of H, independent of the closed forms."""
    edges, offsets, _ = _locus(x)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    e = np.broadcast_to(edges, q.shape)[:, None]
    s = np.broadcast_to(offsets, q.shape)[:, None]

    def phi(P):
        return P * q[:, None] - spec.H(e, s, t, P)

    return sup_concave(phi, expand_upper(phi, len(q)))[0]


def legendre_H_back(view: "LagrangianView", x, t, p):
    """sup over q >= 0 of {p q - L(x, t, q)}, computed numerically."""
    edges, offsets, scalar = _locus(x)
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p_arr < 0):
        raise DomainError("H is defined for p >= 0 only")
    e = np.broadcast_to(edges, p_arr.shape)[:, None]
    s = np.broadcast_to(offsets, p_arr.shape)[:, None]

    def phi(Q):
        with np.errstate(invalid="ignore"):
            return Q * p_arr[:, None] - view.L(e, s, t, Q)

    if np.isfinite(view.max_speed):
        upper = np.full(len(p_arr), view.max_speed)
    else:
        upper = expand_upper(phi, len(p_arr))
    val = sup_concave(phi, upper)[0]
    return float(val[0]) if scalar and np.ndim(p) == 0 else val


# Lagrangian view ---------------------------------------------------------------


def sample_locus(g: MetricGraph, per_edge: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """All vertices plus ``per_edge`` equispaced interior points on every edge."""
    edges, offsets = [], []
    for v in range(len(g.vertices)):
        p = g.vertex_point(v)
        edges.append(p.edge)
        offsets.append(p.offset)
    for e, edge in enumerate(g.edges):
        for k in range(1, per_edge + 1):
            edges.append(e)
            offsets.append(edge.length * k / (per_edge + 1))
    return np.array(edges), np.array(offsets)


def sample_times(T: float, n: int) -> np.ndarray:
    return np.linspace(0.0, T, n, endpoint=False)


def _lower_hull(q: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lower convex hull of (q, y), evaluated back on q."""
    hull: list[int] = []
    for i in range(len(q)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            if (q[i1] - q[i0]) * (y[i] - y[i0]) - (y[i1] - y[i0]) * (q[i] - q[i0]) <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(q, q[hull], y[hull])


@dataclass
class LagrangianView:
    """L on a sampled region with its lower envelope m and the bounds L0, L1."""

    spec: HamiltonianSpec
    graph: MetricGraph
    x_edges: np.ndarray
    x_offsets: np.ndarray
    times: np.ndarray
    q_grid: np.ndarray
    m_values: np.ndarray
    L0: float
    L1: float
    inf_values: np.ndarray | None = None

    @property
    def max_speed(self) -> float:
        return 1.0 if self.spec.form == "eikonal" else math.inf

    @property
    def xt_independent(self) -> bool:
        return self.spec.xt_independent

    def L(self, edges, offsets, t, q) -> np.ndarray:
        return self.spec.L(edges, offsets, t, q)

    def _grid(self):
        e = np.repeat(self.x_edges, len(self.times))
        s = np.repeat(self.x_offsets, len(self.times))
        t = np.tile(self.times, len(self.x_edges))
        return e, s, t

    def inf_L(self, q) -> np.ndarray:
        """Minimum of L(., ., q) over the sampled (x, t), vectorized in q."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        e, s, t = self._grid()
        return np.min(self.L(e[:, None], s[:, None], t[:, None], q[None, :]), axis=0)

    def m(self, q) -> np.ndarray:
        """Convex lower envelope, extended linearly past the sampled range."""
        q = np.asarray(q, dtype=float)
        fin = np.isfinite(self.m_values)
        qg, mg = self.q_grid[fin], self.m_values[fin]
        out = np.interp(q, qg, mg)
        if len(qg) >= 2:
            slope = (mg[-1] - mg[-2]) / (qg[-1] - qg[-2])
            out = np.where(q > qg[-1], mg[-1] + slope * (q - qg[-1]), out)
        if self.spec.form == "eikonal":
            out = np.where(q > 1.0, np.inf, out)
        return out


def lagrangian_view(spec: HamiltonianSpec, g: MetricGraph, per_edge: int = 3, n_t: int = 9, n_q: int = 64) -> LagrangianView:
    edges, offsets = sample_locus(g, per_edge)
    times = sample_times(spec.T, n_t)
    top = 1.0 if spec.form == "eikonal" else 1e4
    q_grid = np.concatenate([[0.0], np.geomspace(1e-3, top, n_q - 1)])
    view = LagrangianView(spec, g, edges, offsets, times, q_grid, np.zeros_like(q_grid), 0.0, 0.0)
    low = view.inf_L(q_grid)
    view.inf_values = low
    # L is nondecreasing in q, so inf L on [q_j, q_j+1] is at least its value at
    # q_j; hulling the right-shifted values gives a minorant between nodes too
    shifted = np.concatenate([low[:1], low[:-1]])
    fin = np.isfinite(shifted)
    m_vals = np.full_like(q_grid, np.inf)
    if np.count_nonzero(fin):
        m_vals[fin] = _lower_hull(q_grid[fin], shifted[fin])
    view.m_values = m_vals
    # bounds are taken over a 10x denser verification grid as well
    dense_e, dense_s = sample_locus(g, 10 * per_edge + 9)
    dense_t = sample_times(spec.T, 10 * n_t)
    for q, name in ((0.0, "L0"), (1.0, "L1")):
        vals = [np.abs(spec.L(edges[:, None], offsets[:, None], times[None, :], q))]
        vals.append(np.abs(spec.L(dense_e[:, None], dense_s[:, None], dense_t[None, :], q)))
        setattr(view, name, float(max(np.max(v) for v in vals)))
    return view


def search_radius(view: LagrangianView, C: float) -> float:
    """2 R0 where R0 >= 1 is the smallest q past which C (q + 1) <= inf L(., ., q)."""
    if view.spec.form == "eikonal":
        raise DomainError("eikonal Lagrangian is +inf past speed 1: use unit radius")
    if C < 0:
        raise DomainError("Lipschitz bound C must be nonnegative")
    q = view.q_grid
    gap = C * (q + 1.0) - view.inf_values
    pos = np.nonzero(gap > 0)[0]
    if len(pos) == 0:
        r0 = 0.0
    elif pos[-1] == len(q) - 1:
        raise CoercivityError(f"C (q + 1) still exceeds the envelope at q = {q[-1]:g}")
    else:
        j = pos[-1]
        lo, hi = q[j], q[j + 1]

        def exact(x):
            return C * (x + 1.0) - float(view.inf_L(x)[0])

        if exact(lo) > 0 >= exact(hi):
            r0 = brentq(exact, lo, hi, xtol=1e-13)
        else:
            r0 = lo + gap[j] / (gap[j] - gap[j + 1]) * (hi - lo)
    return 2.0 * max(r0, 1.0)


def time_lipschitz_constant(view: LagrangianView, n_t: int | None = None) -> float:
    """Sampled sup of |L(x, t, q) - L(x, s, q)| / |t - s| over the q-range in use."""
    times = view.times if n_t is None else sample_times(view.spec.T, n_t)
    if len(times) < 2 or not view.spec.time_dependent:
        return 0.0
    qs = _modulus_speeds(view)
    vals = view.L(view.x_edges[:, None, None], view.x_offsets[:, None, None], times[None, :, None], qs[None, None, :])
    diff = np.abs(np.diff(vals, axis=1)) / np.diff(times)[None, :, None]
    return float(np.max(np.where(np.isfinite(diff), diff, 0.0)))


def _modulus_speeds(view: LagrangianView) -> np.ndarray:
    return np.array([0.0, 0.5, 1.0]) if view.spec.form == "eikonal" else np.array([0.0, 0.5, 1.0, 2.0, 4.0])


def predicted_time_lipschitz(view: LagrangianView, C0: float, C_T: float = 0.0) -> tuple[float, float]:
    """Time-Lipschitz bound K and the speed range R it is built on.

    K = L0 + C0 R + T C_T + sup over [0, R] of |m|, with R the largest speed at
    which a hop can still beat staying put: m(R) <= L0 + T C_T + 1 + C0 R.
    The eikonal route has R = 1 and m = inf f.
    """
    T = view.spec.T
    if view.spec.form == "eikonal":
        R = 1.0
        sup_m = abs(float(view.m_values[0]))
    else:
        q = np.concatenate([view.q_grid, view.q_grid[-1] * np.geomspace(1.0, 1e4, 32)[1:]])
        mq = view.m(q)
        ok = np.nonzero(mq <= view.L0 + T * C_T + 1.0 + C0 * q)[0]
        R = float(q[ok[-1]]) if len(ok) else 0.0
        if len(ok) and ok[-1] < len(q) - 1:
            R = float(q[ok[-1] + 1])
        sup_m = float(np.max(np.abs(mq[q <= R]))) if len(ok) else abs(float(mq[0]))
    return view.L0 + C0 * R + T * C_T + sup_m, R


# assumption audit --------------------------------------------------------------


@dataclass
class Verdict:
    passed: bool | None
    detail: str = ""
    witness: dict | None = None

    def to_json(self) -> dict:
        return {"pass": self.passed, "detail": self.detail, "witness": self.witness}


@dataclass
class AssumptionAudit:
    form: str
    verdicts: dict[str, Verdict]
    coercivity_profile: list[tuple[float, float]]
    modulus: dict[str, float]
    constants: dict[str, float | None]
    repairs: list[str]
    region: str
    route: str | None

    REQUIRED = {
        "eikonal": ("H1", "f_bounded"),
        "general": ("H1", "coercivity", "H2", "H3", "H4", "H5"),
    }

    def failures(self, route: str) -> list[str]:
        return [name for name in self.REQUIRED[route] if not self.verdicts[name].passed]

    def passes(self, route: str) -> bool:
        return not self.failures(route)

    def to_json(self) -> dict:
        return {
            "form": self.form,
            "route": self.route,
            "verdicts": {k: v.to_json() for k, v in self.verdicts.items()},
            "coercivity_profile": [list(r) for r in self.coercivity_profile],
            "modulus": self.modulus,
            "constants": self.constants,
            "repairs": self.repairs,
            "sampled_region": self.region,
        }


def _tol(v):
    return 1e-9 * (1.0 + np.abs(v))


def _check_H1(spec: HamiltonianSpec, e, s, t, n_p: int) -> Verdict:
    p_hi = 1.25 * spec.table_p[-1] if spec.form == "tabulated" else 10.0
    even = np.linspace(0.0, p_hi, n_p)
    grid = np.union1d(even, spec.table_p) if spec.form == "tabulated" else even

    def where(idx, p, vals):
        i, j = idx
        return {"x": {"edge": int(e[i, 0]), "offset": float(s[i, 0])}, "t": float(t[i, 0]),
                "p": [float(v) for v in p[j]], "H": [float(v) for v in vals[i, j]]}

    Hv = spec.H(e, s, t, even[None, :], raw=True)
    mid = Hv[:, 1:-1] - 0.5 * (Hv[:, :-2] + Hv[:, 2:])
    bad = np.argwhere(mid > _tol(Hv[:, 1:-1]))
    if len(bad):
        i, j = bad[0]
        return Verdict(False, "midpoint convexity fails", where((i, [j, j + 1, j + 2]), even, Hv))
    Hg = spec.H(e, s, t, grid[None, :], raw=True)
    slope = np.diff(Hg, axis=1) / np.diff(grid)
    bad = np.argwhere(np.diff(slope, axis=1) < -_tol(slope[:, 1:]))
    if len(bad):
        i, j = bad[0]
        return Verdict(False, "slopes decrease: H is not convex in p", where((i, [j, j + 1, j + 2]), grid, Hg))
    bad = np.argwhere(np.diff(Hg, axis=1) < -_tol(Hg[:, 1:]))
    if len(bad):
        i, j = bad[0]
        return Verdict(False, "H decreases in p", where((i, [j, j + 1]), grid, Hg))
    return Verdict(True, "convex and nondecreasing on sampled grid")


def _coercivity(spec: HamiltonianSpec, e, s, t) -> tuple[Verdict, list[tuple[float, float]]]:
    profile = []
    for R in 10.0 ** np.arange(9):
        p = R * np.geomspace(1.0, 1e3, 16)
        profile.append((float(R), float(np.min(spec.H(e, s, t, p[None, :]) / p))))
    vals = np.array([v for _, v in profile])
    ratios = vals[-3:] / vals[-4:-1]
    if vals[-4] > 0 and np.all(ratios >= 1.01):
        return Verdict(True, "inf H/p over p >= R grows without bound"), profile
    detail = "coercivity profile flat: eikonal route required" if spec.form == "eikonal" else "coercivity profile does not grow"
    return Verdict(False, detail, {"R": profile[-1][0], "inf_H_over_p": profile[-1][1], "ratios": ratios.tolist()}), profile


def _check_H2(view: LagrangianView) -> Verdict:
    q = view.q_grid
    if not np.all(np.isfinite(view.m_values)):
        return Verdict(False, "envelope is +inf on part of the q-grid", {"q": float(q[np.argmax(~np.isfinite(view.m_values))])})
    mids = 0.5 * (q[1:] + q[:-1])
    gap = view.inf_L(mids) - view.m(mids)
    if np.min(gap) < -1e-9 * (1 + np.max(np.abs(view.m_values))):
        j = int(np.argmin(gap))
        return Verdict(False, "sampled L dips below the fitted envelope", {"q": float(mids[j]), "gap": float(gap[j])})
    qs = 10.0 ** np.arange(1, 5)
    growth = view.m(qs) / qs
    ratios = growth[1:] / growth[:-1]
    if growth[0] > 0 and np.all(ratios >= 1.01):
        return Verdict(True, "L >= m with m(q)/q growing")
    return Verdict(False, "envelope m is not superlinear", {"q": qs.tolist(), "m_over_q": growth.tolist()})


def _modulus(view: LagrangianView, graph: MetricGraph) -> tuple[Verdict, dict]:
    spec = view.spec
    e0, s0 = view.x_edges, view.x_offsets
    times = view.times
    e = np.repeat(e0, len(times))
    s = np.repeat(s0, len(times))
    t = np.tile(times, len(e0))
    qs = _modulus_speeds(view)
    scale = 1.0 + np.abs(view.m(qs))
    eps = 1e-3 * float(np.min(graph.lengths))
    lens = graph.lengths[e]
    t_near = np.minimum(t + 1e-3 * spec.T, spec.T * (1 - 1e-9))
    La = spec.L(e[:, None], s[:, None], t[:, None], qs[None, :])
    near = np.zeros(len(e))
    s_near = s.copy()
    for side in (eps, -eps):
        s_side = np.clip(s + side, 0.0, lens)
        Lb = spec.L(e[:, None], s_side[:, None], t_near[:, None], qs[None, :])
        with np.errstate(invalid="ignore"):
            jump = np.nan_to_num(np.abs(La - Lb) / scale, nan=0.0).max(axis=1)
        s_near = np.where(jump > near, s_side, s_near)
        near = np.maximum(near, jump)
    r_small = max(eps, 1e-3 * spec.T)
    # all sampled pairs give the large-scale modulus
    dist = np.stack([graph.distances_from(graph.point(int(a), float(b)), e, s) for a, b in zip(e, s)])
    rbar = np.maximum(dist, np.abs(t[:, None] - t[None, :]))
    with np.errstate(invalid="ignore"):
        far = np.nan_to_num(np.abs(La[:, None, :] - La[None, :, :]) / scale, nan=0.0).max(axis=2)
    w_small, w_large = float(near.max()), float(far.max())
    info = {"r_small": r_small, "omega_small": w_small, "r_large": float(rbar.max()), "omega_large": w_large}
    if w_large <= 1e-12 or w_small <= 0.5 * w_large:
        return Verdict(True, "empirical modulus decays at small distances"), info
    i = int(np.argmax(near))
    return Verdict(False, "L jumps between nearby samples", {
        "x": {"edge": int(e[i]), "offset": float(s[i])}, "t": float(t[i]),
        "y": {"edge": int(e[i]), "offset": float(s_near[i])}, "s": float(t_near[i]),
        "omega_small": w_small, "omega_large": w_large}), info


def audit_assumptions(spec: HamiltonianSpec, g: MetricGraph, per_edge: int = 3, n_t: int = 9, n_pq: int = 64) -> AssumptionAudit:
    if per_edge < 3 or n_t < 3 or n_pq < 3:
        raise DomainError("sample counts must be at least 3 per axis")
    view = lagrangian_view(spec, g, per_edge, n_t, n_pq)
    e = np.repeat(view.x_edges, n_t)[:, None]
    s = np.repeat(view.x_offsets, n_t)[:, None]
    t = np.tile(view.times, len(view.x_edges))[:, None]
    verdicts: dict[str, Verdict] = {}
    verdicts["H1"] = _check_H1(spec, e, s, t, n_pq)
    verdicts["coercivity"], profile = _coercivity(spec, e, s, t)
    f_sup = float(np.max(np.abs(spec.f(e, s, t))))
    verdicts["f_bounded"] = Verdict(bool(np.isfinite(f_sup)), f"sup |f| = {f_sup:g}")
    modulus: dict[str, float] = {}
    C_T = None
    R = None
    if spec.form == "eikonal":
        for name in ("H2", "H3", "H4", "H5"):
            verdicts[name] = Verdict(None, "not used on the eikonal route")
        route = "eikonal" if verdicts["H1"].passed and verdicts["f_bounded"].passed else None
        R = 1.0
        C_T = time_lipschitz_constant(view)
    else:
        verdicts["H2"] = _check_H2(view)
        verdicts["H3"] = Verdict(bool(np.isfinite(view.L0)), f"sup |L(x, t, 0)| = {view.L0:g}",
                                 None if np.isfinite(view.L0) else {"L0": view.L0})
        verdicts["H4"], modulus = _modulus(view, g)
        c_coarse = time_lipschitz_constant(view)
        c_fine = time_lipschitz_constant(view, 2 * n_t)
        if np.isfinite(c_fine) and c_fine <= 1.5 * c_coarse + 1e-9:
            verdicts["H5"] = Verdict(True, f"time Lipschitz constant {c_fine:g}")
            C_T = c_fine
        else:
            verdicts["H5"] = Verdict(False, "time difference quotients grow under refinement",
                                     {"C_T_coarse": c_coarse, "C_T_fine": c_fine})
        route = "general" if all(verdicts[k].passed for k in AssumptionAudit.REQUIRED["general"]) else None
        if route == "general":
            R = search_radius(view, 1.0)
    repairs = spec.repaired_table()[2] if spec.form == "tabulated" else []
    region = (f"{len(view.x_edges)} points on {len(g.edges)} edges x {n_t} times in [0, {spec.T:g}), "
              f"{n_pq} p/q samples")
    constants = {"L0": view.L0, "L1": view.L1, "R": R, "C_T": C_T}
    return AssumptionAudit(spec.form, verdicts, profile, modulus, constants, repairs, region, route)
