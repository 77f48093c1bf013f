"""Executable checks of the qualitative theory on solved fields.

Every check returns a VerdictReport. A failing report always carries at least
one witness: a point with the values that reproduce the violation.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .expressions import Callable as FnCallable
from .expressions import parse_function
from .graph import MetricGraph, Point, sample_mesh
from .hamiltonian import HamiltonianSpec, predicted_time_lipschitz
from .monge import estimate_k, monge_residual, shift_v, slope_table, default_deltas, sample_points
from .problem import Problem
from .solver import SpaceTimeField, make_step, solve_eikonal, solve_general


@dataclass
class VerdictReport:
    kind: str
    passed: bool
    measurements: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    config_hash: str = ""
    seed: int | None = None

    def __post_init__(self):
        if not self.passed and not self.witnesses:
            raise ValueError(f"failing {self.kind} verdict without a witness")

    def to_json(self) -> dict:
        return {"kind": self.kind, "pass": bool(self.passed), "measurements": self.measurements,
                "witnesses": self.witnesses, "config_hash": self.config_hash, "seed": self.seed}


def _where(field: SpaceTimeField, n: int, x: int, **values) -> dict:
    m = field.mesh
    out = {"id": int(x), "edge": int(m.edge[x]), "offset": float(m.offset[x]), "t": float(n * field.grid.dt)}
    out.update({k: float(v) for k, v in values.items()})
    return out


def _first_violation(field, mask, **arrays) -> list:
    if not np.any(mask):
        return []
    n, x = np.argwhere(mask)[0]
    return [_where(field, n, x, **{k: np.broadcast_to(a, mask.shape)[n, x] for k, a in arrays.items()})]


# bounds ------------------------------------------------------------------------


def f_sup(problem: Problem, field: SpaceTimeField) -> tuple[float, float]:
    """inf and sup of f on a twice-refined mesh at grid times and half steps."""
    fine = sample_mesh(problem.graph, field.mesh.h / 2)
    times = np.union1d(field.grid.times, field.grid.times + field.grid.dt / 2)
    vals = problem.spec.f(fine.edge[None, :], fine.offset[None, :], times[:, None])
    return float(vals.min()), float(vals.max())


def check_bounds(field: SpaceTimeField, problem: Problem) -> VerdictReport:
    u, t = field.values, field.grid.times[:, None]
    u0 = u[0][None, :]
    meas: dict = {}
    witnesses = []
    if problem.spec.form == "eikonal":
        lo_f, hi_f = f_sup(problem, field)
        bound = float(np.max(np.abs(u0))) + problem.T * max(abs(lo_f), abs(hi_f))
        meas.update(sup_abs_u=float(np.max(np.abs(u))), bound=bound)
        witnesses += _first_violation(field, np.abs(u) > bound, u=u, bound=bound)
    else:
        # the scheme only evaluates L at mesh nodes and grid times
        m = field.mesh
        on_mesh = np.abs(problem.spec.L(m.edge[None, :], m.offset[None, :], field.grid.times[:, None], 0.0))
        L0 = max(problem.view.L0, float(np.max(on_mesh)))
        lower = -L0 * t + u0.min()
        upper = L0 * t + u0
        meas.update(L0=L0, min_gap_lower=float(np.min(u - lower)), min_gap_upper=float(np.min(upper - u)))
        witnesses += _first_violation(field, u < lower, u=u, lower=lower)
        witnesses += _first_violation(field, u > upper, u=u, upper=upper)
    return VerdictReport("bounds", not witnesses, meas, witnesses, problem.digest())


def predicted_K(field: SpaceTimeField, problem: Problem) -> float:
    C0 = field.mesh.interval_lipschitz(field.values[0])
    C_T = problem.audit.constants.get("C_T") or 0.0
    return predicted_time_lipschitz(problem.view, C0, C_T)[0]


def check_initial_layer(field: SpaceTimeField, problem: Problem, K: float | None = None) -> VerdictReport:
    K = predicted_K(field, problem) if K is None else K
    times = field.grid.times[1:]
    err = np.max(np.abs(field.values[1:] - field.values[0]), axis=1)
    rates = err / times
    K_meas = float(rates.max()) if len(rates) else 0.0
    slope = float(np.dot(times, err) / np.dot(times, times)) if len(times) else 0.0
    meas = {"K_meas": K_meas, "K_pred": K, "fit_slope": slope, "limit": 1.5 * K}
    ok = K_meas <= 1.5 * K
    witnesses = []
    if not ok:
        n = int(np.argmax(rates)) + 1
        x = int(np.argmax(np.abs(field.values[n] - field.values[0])))
        witnesses.append(_where(field, n, x, u=field.values[n, x], u0=field.values[0, x]))
    return VerdictReport("initial", ok, meas, witnesses, problem.digest())


def lipschitz_constants(field: SpaceTimeField) -> tuple[float, float, tuple, tuple]:
    u = field.values
    if u.shape[0] < 2:
        dt_rate = np.zeros((0, u.shape[1]))
    else:
        dt_rate = np.abs(np.diff(u, axis=0)) / field.grid.dt
    space = np.array([field.mesh.interval_lipschitz(row) for row in u])
    t_where = np.unravel_index(int(np.argmax(dt_rate)), dt_rate.shape) if dt_rate.size else (0, 0)
    n = int(np.argmax(space))
    return (float(dt_rate.max()) if dt_rate.size else 0.0), float(space.max()), t_where, (n,)


def check_lipschitz(field: SpaceTimeField, problem: Problem, K: float | None = None) -> VerdictReport:
    K = predicted_K(field, problem) if K is None else K
    L1 = problem.view.L1
    k_t, k_x, tw, xw = lipschitz_constants(field)
    meas = {"time": k_t, "space": k_x, "K": K, "K_plus_L1": K + L1}
    witnesses = []
    if k_t > 1.5 * K:
        n, x = tw
        witnesses.append(_where(field, n + 1, x, u=field.values[n + 1, x], u_prev=field.values[n, x]))
    if k_x > 1.5 * (K + L1):
        n = xw[0]
        u = field.values[n]
        m = field.mesh
        k = int(np.argmax(np.abs(u[m.ib] - u[m.ia]) / m.igap))
        witnesses.append(_where(field, n, int(m.ia[k]), u=u[m.ia[k]], neighbour=u[m.ib[k]], gap=m.igap[k]))
    return VerdictReport("lipschitz", not witnesses, meas, witnesses, problem.digest())


# comparison --------------------------------------------------------------------


def _shifted_f(f, extra):
    extra = parse_function(extra)
    return FnCallable(lambda e, s, t: f(e, s, t) + extra(e, s, t), f.time_dependent or extra.time_dependent)


def _solve_variant(problem: Problem, route: str, f=None, u0=None) -> SpaceTimeField:
    spec = problem.spec if f is None else dataclasses.replace(problem.spec, f=f)
    u0 = problem.u0_function if u0 is None else u0
    if route == "eikonal":
        return solve_eikonal(problem.graph, problem.mesh, spec.f, u0, problem.grid, problem.config)
    return solve_general(problem.graph, problem.mesh, spec, u0, problem.grid, problem.config, problem.audit)


def comparison_experiment(problem: Problem, epsilons=(0.0, 0.1, 0.5), field: SpaceTimeField | None = None,
                          seed: int = 0) -> VerdictReport:
    """(a) v - eps t lowers every subslope by eps; (b) ordered data give ordered fields."""
    route = problem.resolved_route()
    field = field if field is not None else problem.solve()
    spec = problem.spec
    k = estimate_k(field, spec.f if route == "eikonal" else None).k
    v = shift_v(field, k)
    deltas = default_deltas(field)
    nodes, slices = sample_points(field, deltas)
    lspec = None if route == "eikonal" else spec
    base = slope_table(v, nodes, slices, deltas, lspec)
    meas: dict = {"k": k, "epsilons": list(epsilons)}
    witnesses = []
    worst = 0.0
    for eps in epsilons:
        pert = v.with_values(v.values - eps * field.grid.times[:, None])
        table = slope_table(pert, nodes, slices, deltas, lspec)
        dev = np.abs((base - table) - eps)
        dev = np.where(np.isfinite(dev), dev, 0.0)
        worst = max(worst, float(dev.max()))
        if dev.max() > 1e-9:
            i, s, x = np.unravel_index(int(np.argmax(dev)), dev.shape)
            witnesses.append(_where(field, slices[s], nodes[x], eps=eps, delta=deltas[i], shift=base[i, s, x] - table[i, s, x]))
        above = pert.values > v.values
        witnesses += _first_violation(field, above, eps=eps, perturbed=pert.values, v=v.values)
    meas["perturbation_max_deviation"] = worst

    rng = np.random.default_rng(seed)
    a, b = rng.uniform(1, 9, 2)
    # vanishes at vertices, so the lowered data stay continuous across edges
    bump = f"0.5 * sin(pi * x / len) * abs(sin({a:.6f} * x + {b:.6f} * e))"
    u0 = problem.u0_function
    bump_fn = parse_function(bump, problem.graph)
    lowered = FnCallable(lambda e, s, t: u0(e, s, t) - bump_fn(e, s, t), False)
    pairs = [
        ("shift_u0", FnCallable(lambda e, s, t: u0(e, s, t) - 0.5, False), None),
        ("raise_f", None, _shifted_f(spec.f, 1.0)),
        ("random", lowered, _shifted_f(spec.f, bump_fn)),
    ]
    violations = 0
    diffs = {}
    for name, u0_low, f_high in pairs:
        low = _solve_variant(problem, route, u0=u0_low) if u0_low is not None else field
        high = _solve_variant(problem, route, f=f_high) if f_high is not None else field
        bad = low.values > high.values
        violations += int(np.count_nonzero(bad))
        diffs[name] = float(np.min(high.values - low.values))
        witnesses += _first_violation(field, bad, low=low.values, high=high.values)
    meas.update(order_violations=violations, min_gap=diffs)
    return VerdictReport("comparison", not witnesses, meas, witnesses, problem.digest(), seed)


# curves ------------------------------------------------------------------------


class _Walker:
    """Moves a point along the graph, turning at random at vertices."""

    def __init__(self, g: MetricGraph, rng: np.random.Generator):
        self.g, self.rng = g, rng

    def start(self, p: Point):
        return [p.edge, p.offset, 1 if self.rng.random() < 0.5 else -1]

    def move(self, state, dist: float):
        g = self.g
        e, s, dirn = state
        while dist > 0:
            length = g.edges[e].length
            room = length - s if dirn > 0 else s
            if dist < room:
                s += dirn * dist
                dist = 0.0
                break
            dist -= room
            v = g.edges[e].v if dirn > 0 else g.edges[e].u
            e, end = g.incident[v][int(self.rng.integers(len(g.incident[v])))]
            s, dirn = (0.0, 1) if end == 0 else (g.edges[e].length, -1)
        state[:] = [e, s, dirn]
        return e, s


def _running_cost(field: SpaceTimeField, spec: HamiltonianSpec, route: str, xs, ts, speeds, dts) -> float:
    """Solver-matched quadrature along a sampled curve.

    Nodes xs[i] at times ts[i] (decreasing), piece i runs from node i + 1 to node
    i at speed speeds[i]. The general route uses the arrival-endpoint rule, the
    eikonal route the trapezoid rule.
    """
    total = 0.0
    for i in range(len(speeds)):
        (e1, s1), (e0, s0) = xs[i], xs[i + 1]
        if route == "eikonal":
            f1 = spec.f(np.array([e1]), np.array([s1]), ts[i])[0]
            f0 = spec.f(np.array([e0]), np.array([s0]), ts[i + 1])[0]
            total += dts[i] * 0.5 * (f0 + f1)
        else:
            total += dts[i] * float(spec.L(np.array([e1]), np.array([s1]), ts[i], np.array([speeds[i]]))[0])
    return total


def _random_curve(field, walker, rng, route, speed_cap, x0: Point, t0: float):
    dt, h = field.grid.dt, field.mesh.h
    n_seg = int(rng.integers(3, 9))
    durations = rng.uniform(dt, 4 * dt, n_seg)
    if durations.sum() > t0:
        durations *= t0 / durations.sum()
    speeds = rng.uniform(0.0, speed_cap, n_seg)
    state = walker.start(x0)
    xs = [(x0.edge, x0.offset)]
    ts = [t0]
    pspeeds, pdts = [], []
    for tau, q in zip(durations, speeds):
        # sub-pieces of at most dt in time and h in space
        n_sub = max(1, math.ceil(tau / dt - 1e-9), math.ceil(q * tau / h - 1e-9) if route == "eikonal" else 1)
        for _ in range(n_sub):
            sub = tau / n_sub
            xs.append(walker.move(state, q * sub))
            ts.append(ts[-1] - sub)
            pspeeds.append(q)
            pdts.append(sub)
    return xs, np.array(ts), pspeeds, pdts


def curve_residual(field: SpaceTimeField, problem: Problem, n_curves: int = 1000, n_chains: int = 200,
                   seed: int = 0, tol: float | None = None) -> VerdictReport:
    """Curve inequalities: every admissible curve (sub side), argmin hop chains (super side)."""
    route = field.meta.get("route") or problem.resolved_route()
    spec = problem.spec
    dt, h = field.grid.dt, field.mesh.h
    tol = 3 * (h + dt) if tol is None else tol
    rng = np.random.default_rng(seed)
    g = problem.graph
    walker = _Walker(g, rng)
    speed_cap = 1.0 if route == "eikonal" else float(field.meta.get("R", 1.0))
    t_last = field.grid.times[-1]
    sub_gap = []
    witnesses = []
    for _ in range(n_curves):
        e = int(rng.integers(len(g.edges)))
        x0 = g.point(e, float(rng.uniform(0, g.edges[e].length)))
        t0 = float(rng.uniform(4 * dt, t_last))
        xs, ts, sp, dts = _random_curve(field, walker, rng, route, speed_cap, x0, t0)
        cost = _running_cost(field, spec, route, xs, ts, sp, dts)
        lhs = float(field.value_at(np.array([xs[0][0]]), np.array([xs[0][1]]), ts[0])[0])
        end = float(field.value_at(np.array([xs[-1][0]]), np.array([xs[-1][1]]), ts[-1])[0])
        gap = lhs - (cost + end)
        sub_gap.append(gap)
        if gap > tol:
            witnesses.append({"side": "sub", "edge": x0.edge, "offset": x0.offset, "t": t0, "u": lhs,
                              "cost": cost, "u_end": end, "duration": float(ts[0] - ts[-1])})

    step = make_step(field, spec)
    super_gap = []
    m = field.mesh
    for _ in range(n_chains):
        n = int(rng.integers(1, field.grid.n_steps))
        x = int(rng.integers(m.size))
        hops = int(rng.integers(1, min(8, n) + 1))
        here = Point(int(m.edge[x]), float(m.offset[x]))
        y = g.point(int(field.dep_edge[n, x]), float(field.dep_offset[n, x])) if field.dep_edge is not None else None
        cost = 0.0
        for j in range(hops):
            nj = n - j
            if j == 0 and y is not None:
                dep = y
            else:
                dep = step.apply_at(here, field.values[nj - 1], (nj - 1) * dt)[1]
            cost += _hop_cost(step, spec, route, here, dep, nj * dt)
            here = dep
        end = float(field.value_at(np.array([here.edge]), np.array([here.offset]), (n - hops) * dt)[0])
        gap = (cost + end) - field.values[n, x]
        super_gap.append(gap)
        if gap > tol:
            witnesses.append({"side": "super", **_where(field, n, x, u=field.values[n, x], cost=cost, u_end=end, hops=hops)})
    meas = {"tol": tol, "n_curves": n_curves, "n_chains": n_chains,
            "sub_max_excess": float(max(sub_gap)) if sub_gap else 0.0,
            "super_max_excess": float(max(super_gap)) if super_gap else 0.0}
    return VerdictReport("curve", not witnesses, meas, witnesses[:20], problem.digest(), seed)


def _hop_cost(step, spec: HamiltonianSpec, route: str, arrive: Point, depart: Point, t_arrive: float) -> float:
    g = step.mesh.graph
    d = g.distance(arrive, depart)
    dt = step.dt
    if route == "eikonal":
        from .solver import _sample_path

        e, s, arc = _sample_path(g, arrive, depart, d, step.mesh.h)
        sigma = dt * arc / d if d > 0 else np.array([0.0, dt])
        fv = spec.f(e, s, t_arrive - sigma)
        return float(np.sum(np.diff(sigma) * (fv[1:] + fv[:-1]) / 2))
    return dt * float(spec.L(np.array([arrive.edge]), np.array([arrive.offset]), t_arrive, np.array([d / dt]))[0])


def hop_curve_check(field: SpaceTimeField, problem: Problem, n_curves: int = 200, seed: int = 0) -> VerdictReport:
    """Concatenations of node-to-node solver hops must satisfy the curve inequality with no slack."""
    spec = problem.spec
    route = field.meta.get("route") or problem.resolved_route()
    step = make_step(field, spec)
    rng = np.random.default_rng(seed)
    m, dt = field.mesh, field.grid.dt
    D = m.distance_matrix()
    radius = step.speed_radius * dt
    worst = -math.inf
    witnesses = []
    for _ in range(n_curves):
        n = int(rng.integers(1, field.grid.n_steps))
        x = int(rng.integers(m.size))
        hops = int(rng.integers(1, min(8, n) + 1))
        cur, cost = x, 0.0
        for j in range(hops):
            nbrs = np.nonzero(D[cur] <= radius * (1 + 1e-12))[0]
            nxt = int(rng.choice(nbrs))
            cost += _hop_cost(step, spec, route, Point(int(m.edge[cur]), float(m.offset[cur])),
                              Point(int(m.edge[nxt]), float(m.offset[nxt])), (n - j) * dt)
            cur = nxt
        gap = field.values[n, x] - (cost + field.values[n - hops, cur])
        worst = max(worst, gap)
        if gap > 0:
            witnesses.append(_where(field, n, x, u=field.values[n, x], cost=cost, u_end=field.values[n - hops, cur]))
    return VerdictReport("hop_curve", not witnesses, {"max_excess": worst}, witnesses[:20], problem.digest(), seed)


# equivalence and convergence ---------------------------------------------------


def _check_hypotheses(problem: Problem):
    route = problem.resolved_route()
    if problem.spec.form == "power":
        a = problem.spec.a
        m = problem.mesh
        if np.min(a(m.edge, m.offset, 0.0)) <= 0:
            raise ValueError("hypothesis failed: inf a > 0")
    return route


def equivalence_crosscheck(problem: Problem, grids, n_curves: int = 1000, seed: int = 0,
                           median_tol: float = 0.1, max_tol: float = 0.3, transform=None) -> VerdictReport:
    """Each grid's field must pass both the Monge and the curve certificate.

    The curve tolerance is 3 (h + dt). The Monge thresholds are fixed and the
    residuals must not grow as the grid refines. ``transform(field)`` may
    replace each solved field before checking (corruption experiments).
    """
    _check_hypotheses(problem)
    rows = []
    witnesses = []
    for h, dt in grids:
        p = problem.with_grid(h, dt)
        fld = p.solve()
        if transform is not None:
            fld = transform(fld)
        mr = monge_residual(fld, p.spec, fld.meta["route"])
        cr = curve_residual(fld, p, n_curves, seed=seed)
        monge_ok = mr.median_abs <= median_tol and mr.max_abs <= max_tol
        rows.append({"h": h, "dt": dt, "monge_median": mr.median_abs, "monge_max": mr.max_abs,
                     "monge_pass": monge_ok, "curve_pass": cr.passed, **{f"curve_{k}": v for k, v in cr.measurements.items()}})
        if not monge_ok:
            i = int(np.argmax(np.abs(mr.residual)))
            witnesses.append({"certificate": "monge", "h": h, "dt": dt, "id": int(mr.node[i]), "t": float(mr.t[i]),
                              "estimate": float(mr.estimate[i]), "target": float(mr.target[i])})
        if not cr.passed:
            witnesses.append({"certificate": "curve", "h": h, "dt": dt, **cr.witnesses[0]})
        if monge_ok != cr.passed:
            witnesses.append({"red_flag": "certificates disagree", "h": h, "dt": dt})
    for a, b in zip(rows, rows[1:]):
        for key in ("monge_median", "monge_max"):
            if b[key] > a[key] + 1e-12:
                witnesses.append({"red_flag": f"{key} grew under refinement", "coarse": a[key], "fine": b[key],
                                  "h": b["h"], "dt": b["dt"]})
    return VerdictReport("equivalence", not witnesses, {"grids": rows}, witnesses, problem.digest(), seed)


def observed_rate(sizes, errors) -> float | None:
    """Least-squares slope of log error against log (h + dt); None if undefined."""
    sizes, errors = np.asarray(sizes, float), np.asarray(errors, float)
    if len(sizes) < 2:
        return None
    if np.all(errors <= 1e-12):
        return math.inf
    ok = errors > 0
    if np.count_nonzero(ok) < 2:
        return math.inf
    return float(np.polyfit(np.log(sizes[ok]), np.log(errors[ok]), 1)[0])


def convergence_study(problem: Problem, grids) -> tuple[list[dict], float | None]:
    rows = []
    for h, dt in grids:
        p = problem.with_grid(h, dt)
        fld = p.solve()
        err = float(np.max(np.abs(fld.values - p.oracle_values(fld))))
        rows.append({"h": h, "dt": dt, "max_error": err})
    rate = observed_rate([r["h"] + r["dt"] for r in rows], [r["max_error"] for r in rows])
    for r in rows:
        r["rate"] = rate
    return rows, rate
