"""Problem configs: graph + Hamiltonian + initial data + grid + route."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .expressions import Expression, parse_function
from .graph import MetricGraph, sample_mesh
from .hamiltonian import AssumptionAudit, HamiltonianSpec, audit_assumptions, lagrangian_view
from .solver import HypothesisError, SolveConfig, SpaceTimeField, TimeGrid, hopflax_direct, solve_eikonal, solve_general

ROUTES = ("auto", "eikonal", "general")


class ProblemError(ValueError):
    pass


class NoOracleError(LookupError):
    pass


@dataclass
class Problem:
    graph: MetricGraph
    hamiltonian: dict
    u0: Any
    h: float = 0.01
    dt: float = 0.01
    T: float = 1.0
    route: str = "auto"
    oracle: Any = None
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ProblemError(f"route must be one of {ROUTES}")
        self.hamiltonian = {**self.hamiltonian, "T": self.T}

    @classmethod
    def from_json(cls, obj: dict, base: Path | None = None) -> "Problem":
        try:
            gspec = obj["graph"]
            if isinstance(gspec, str):
                path = Path(gspec)
                if base is not None and not path.is_absolute():
                    path = base / path
                graph = MetricGraph.load(path)
            else:
                graph = MetricGraph.from_json(gspec)
            grid = obj.get("grid", {})
            return cls(graph, dict(obj["hamiltonian"]), obj.get("u0", 0.0),
                       float(grid.get("h", 0.01)), float(grid.get("dt", 0.01)),
                       float(grid.get("T", obj["hamiltonian"].get("T", 1.0))),
                       obj.get("route", "auto"), obj.get("oracle"), dict(obj.get("solver", {})))
        except KeyError as exc:
            raise ProblemError(f"config is missing {exc.args[0]!r}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Problem":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text()), path.parent)

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(), "hamiltonian": self.hamiltonian, "u0": self.u0,
            "grid": {"h": self.h, "dt": self.dt, "T": self.T}, "route": self.route,
            "oracle": self.oracle, "solver": self.solver,
        }

    def digest(self) -> str:
        # worker count does not change results
        obj = self.to_json()
        obj["solver"] = {k: v for k, v in self.solver.items() if k != "threads"}
        return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()

    def with_grid(self, h: float, dt: float) -> "Problem":
        return dataclasses.replace(self, h=h, dt=dt)

    # derived objects ------------------------------------------------------

    @cached_property
    def spec(self) -> HamiltonianSpec:
        if any(isinstance(self.hamiltonian.get(k), dict) and "table" in self.hamiltonian[k] for k in "fab"):
            return HamiltonianSpec.from_json(self.hamiltonian, self.graph, self.mesh)
        return HamiltonianSpec.from_json(self.hamiltonian, self.graph)

    @cached_property
    def audit(self) -> AssumptionAudit:
        return audit_assumptions(self.spec, self.graph)

    @cached_property
    def view(self):
        return lagrangian_view(self.spec, self.graph)

    @cached_property
    def mesh(self):
        return sample_mesh(self.graph, self.h)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_dt(self.T, self.dt)

    @property
    def config(self) -> SolveConfig:
        return SolveConfig(self.h, self.dt, self.T, **self.solver)

    @property
    def u0_function(self):
        return parse_function(self.u0, self.graph, self.mesh)

    def resolved_route(self) -> str:
        audit = self.audit
        if self.route == "auto":
            if audit.route is None:
                failed = [k for k, v in audit.verdicts.items() if v.passed is False]
                raise HypothesisError(f"no route: audit failed {', '.join(failed)}")
            return audit.route
        if self.route == "general" and self.spec.form == "eikonal":
            raise HypothesisError("coercivity fails for the eikonal form: eikonal route required")
        if self.route == "eikonal" and self.spec.form != "eikonal":
            raise HypothesisError("the eikonal route needs H = p - f")
        failed = audit.failures(self.route)
        if failed:
            raise HypothesisError(f"audit failed for the {self.route} route: {', '.join(failed)}")
        return self.route

    def solve(self) -> SpaceTimeField:
        route = self.resolved_route()
        mesh, grid, cfg = self.mesh, self.grid, self.config
        if route == "eikonal":
            return solve_eikonal(self.graph, mesh, self.spec.f, self.u0_function, grid, cfg, self.digest())
        return solve_general(self.graph, mesh, self.spec, self.u0_function, grid, cfg, self.audit, self.digest())

    # oracles --------------------------------------------------------------

    def oracle_kind(self) -> str:
        if self.oracle is not None:
            if self.oracle == "hopflax" or (isinstance(self.oracle, dict) and "expr" in self.oracle):
                return "hopflax" if self.oracle == "hopflax" else "closed"
            if isinstance(self.oracle, str):
                return "closed"
            raise ProblemError(f"cannot interpret oracle {self.oracle!r}")
        spec = self.spec
        if spec.xt_independent and not spec.time_dependent:
            return "hopflax"
        raise NoOracleError("no oracle; run cmd_check instead")

    def oracle_values(self, field: SpaceTimeField, fine_h: float | None = None) -> np.ndarray:
        kind = self.oracle_kind()
        m, times = field.mesh, field.grid.times
        if kind == "closed":
            src = self.oracle["expr"] if isinstance(self.oracle, dict) else self.oracle
            fn = Expression(src, lengths=self.graph.lengths)
            return fn(m.edge[None, :], m.offset[None, :], times[:, None])
        if not (self.spec.xt_independent and not self.spec.time_dependent):
            raise NoOracleError("Hopf-Lax oracle needs L independent of (x, t)")
        fine = sample_mesh(self.graph, fine_h or min(self.h / 20, 1 / 4000))
        E = np.repeat(m.edge, len(times))
        S = np.repeat(m.offset, len(times))
        Tt = np.tile(times, m.size)
        vals = hopflax_direct(self.view, fine, self.u0_function, (E, S), Tt)
        return vals.reshape(m.size, len(times)).T
