import numpy as np
import pytest

from mongehj.graph import MetricGraph, SpaceTimePoint, sample_mesh
from mongehj.hamiltonian import HamiltonianSpec
from mongehj.monge import (ShiftError, default_deltas, estimate_k, lagrangian_subslope, monge_residual, sample_points,
                           shift_v, slope_table, subslope)
from mongehj.solver import ConfigError, SolveConfig, SpaceTimeField, TimeGrid, solve_eikonal, solve_general

H = DT = 0.02


@pytest.fixture(scope="module")
def seg():
    return MetricGraph.segment()


@pytest.fixture(scope="module")
def mesh(seg):
    return sample_mesh(seg, H)


@pytest.fixture(scope="module")
def grid():
    return TimeGrid.from_dt(1.0, DT)


def field_of(mesh, grid, fn):
    return SpaceTimeField(mesh, grid, fn(mesh.offset[None, :], grid.times[:, None]))


def at(seg, x, t):
    return SpaceTimePoint(seg.point(0, x), t)


def test_estimate_k_examples(mesh, grid):
    assert estimate_k(field_of(mesh, grid, lambda x, t: t + 0 * x)).k == 0.0
    assert estimate_k(field_of(mesh, grid, lambda x, t: -2 * t + 0 * x)).k == pytest.approx(2.1)


def test_estimate_k_with_running_cost(seg, mesh, grid):
    u = solve_eikonal(seg, mesh, 1.0, 0.0, grid, SolveConfig(H, DT))
    est = estimate_k(u, HamiltonianSpec.eikonal(1.0).f)
    assert est.k == 0.0 and est.margin == pytest.approx(1.0)
    # a negative running cost forces k up to -inf f
    est = estimate_k(u, HamiltonianSpec.eikonal(-3.0).f)
    assert est.k == pytest.approx(3.0) and est.margin == pytest.approx(0.0)


def test_estimate_k_needs_two_slices(mesh):
    with pytest.raises(ConfigError):
        estimate_k(SpaceTimeField(mesh, TimeGrid(1.0, 1), np.zeros((1, mesh.size))))


def test_shift_v_examples(mesh, grid):
    v = shift_v(field_of(mesh, grid, lambda x, t: 0 * x + 0 * t), 1.0)
    assert np.allclose(v.values, grid.times[:, None])
    u = field_of(mesh, grid, lambda x, t: -2 * t + 0 * x)
    v = shift_v(u, 2.1)
    assert np.allclose(v.values, 0.1 * grid.times[:, None])
    assert np.all(np.diff(v.values, axis=0) >= 0)
    assert v.k_shift == 2.1


def test_shift_v_rejects_small_k_with_witness(mesh, grid):
    u = field_of(mesh, grid, lambda x, t: -2 * t * x)
    with pytest.raises(ShiftError, match="rate"):
        shift_v(u, 1.0)


def test_subslope_examples(seg, mesh, grid):
    z = at(seg, 0.5, 0.4)
    assert subslope(field_of(mesh, grid, lambda x, t: t + 0 * x), z).reported == pytest.approx(1.0)
    assert subslope(field_of(mesh, grid, lambda x, t: 3.0 + 0 * x + 0 * t), z).reported == 0.0
    exact = field_of(mesh, grid, lambda x, t: np.maximum(x - t, 0.0))
    est = subslope(exact, at(seg, 0.8, 0.3))
    assert est.reported == pytest.approx(0.0, abs=1e-12)
    assert len(est.values) == len(est.deltas) == 4


def test_subslope_rejects_bad_deltas(seg, mesh, grid):
    v = field_of(mesh, grid, lambda x, t: t + 0 * x)
    with pytest.raises(ConfigError):
        subslope(v, at(seg, 0.5, 0.4), deltas=[0.03])
    with pytest.raises(ConfigError):
        subslope(v, at(seg, 0.5, 0.4), deltas=[0.01])
    with pytest.raises(ConfigError):
        subslope(v, at(seg, 0.5, 0.1), deltas=[0.16])


def test_lagrangian_subslope_examples(seg, mesh, grid):
    flat = HamiltonianSpec.tabulated([0, 1, 2], [0, 0, 0])  # L = 0 for q <= 0, +inf beyond
    zero_L = HamiltonianSpec.tabulated([0.0, 1e6], [0.0, 0.0])
    z = at(seg, 0.5, 0.4)
    v = field_of(mesh, grid, lambda x, t: t + 0 * x)
    assert lagrangian_subslope(v, zero_L, z).reported == pytest.approx(1.0)
    assert lagrangian_subslope(v, flat, z).reported == pytest.approx(1.0)
    zero = field_of(mesh, grid, lambda x, t: 0 * x + 0 * t)
    assert lagrangian_subslope(zero, HamiltonianSpec.power(), z).reported == 0.0


def test_residual_examples(seg, mesh, grid):
    spec = HamiltonianSpec.eikonal(1.0)
    rep = monge_residual(field_of(mesh, grid, lambda x, t: t + 0 * x), spec)
    assert rep.k == 0.0 and rep.max_abs == pytest.approx(0.0, abs=1e-12)
    frozen = field_of(mesh, grid, lambda x, t: 0.7 + 0 * x + 0 * t)
    rep = monge_residual(frozen, spec)
    assert np.allclose(rep.residual, -1.0)


def test_sample_points_exclude_leaves_and_early_times(seg, mesh, grid):
    nodes, slices = sample_points(field_of(mesh, grid, lambda x, t: t + 0 * x), default_deltas(
        field_of(mesh, grid, lambda x, t: t + 0 * x)))
    assert not np.any(mesh.vertex[nodes] >= 0)
    t = grid.times[slices]
    assert t.min() >= 0.16 - 1e-12 and t.max() <= 0.9 + 1e-12


@pytest.fixture(scope="module")
def eik_field(seg, mesh, grid):
    return solve_eikonal(seg, mesh, "1 + 0.5*sin(3*x)", "sin(4*x)", grid, SolveConfig(H, DT))


@pytest.fixture(scope="module")
def gen_field(seg, mesh, grid):
    spec = HamiltonianSpec.power(a="1 + 0.3*x", f="0.2*x")
    return spec, solve_general(seg, mesh, spec, "abs(x - 0.5)", grid, SolveConfig(H, DT))


def test_S0_and_nonnegativity(eik_field):
    k = estimate_k(eik_field).k
    v = shift_v(eik_field, k)
    assert np.all(v.values[1:] >= v.values[:-1])
    nodes, slices = sample_points(v, default_deltas(v))
    table = slope_table(v, nodes, slices, default_deltas(v))
    assert table.min() >= -1e-12


def test_form_equivalence(eik_field):
    v = shift_v(eik_field, estimate_k(eik_field).k)
    deltas = default_deltas(v)
    nodes, slices = sample_points(v, deltas)
    exact = slope_table(v, nodes, slices, deltas)
    pos = slope_table(v, nodes, slices, deltas, positive_part=True)
    assert np.max(np.abs(exact - pos)) <= 1e-9


def test_k_independence(eik_field, gen_field):
    spec_e = HamiltonianSpec.eikonal("1 + 0.5*sin(3*x)")
    k = estimate_k(eik_field, spec_e.f).k
    a = monge_residual(eik_field, spec_e, k=k)
    b = monge_residual(eik_field, spec_e, k=k + 1)
    assert np.max(np.abs((b.estimate - a.estimate) - 1.0)) <= 1e-9
    assert np.max(np.abs(b.residual - a.residual)) <= 1e-9
    spec, u = gen_field
    k = estimate_k(u).k
    a = monge_residual(u, spec, k=k)
    b = monge_residual(u, spec, k=k + 1)
    assert np.max(np.abs((b.estimate - a.estimate) - 1.0)) <= 1e-9


def test_perturbation_lowers_subslope_by_eps(gen_field):
    spec, u = gen_field
    v = shift_v(u, estimate_k(u).k)
    deltas = default_deltas(v)
    nodes, slices = sample_points(v, deltas)
    base = slope_table(v, nodes, slices, deltas, spec)
    for eps in (0.1, 0.5):
        low = v.with_values(v.values - eps * v.grid.times[:, None])
        assert np.max(np.abs(slope_table(low, nodes, slices, deltas, spec) - (base - eps))) <= 1e-9


def test_solver_fields_are_near_monge(eik_field, gen_field):
    rep = monge_residual(eik_field, HamiltonianSpec.eikonal("1 + 0.5*sin(3*x)"))
    assert rep.median_abs <= 0.1 and rep.max_abs <= 0.3
    spec, u = gen_field
    rep = monge_residual(u, spec)
    assert rep.median_abs <= 0.1 and rep.max_abs <= 0.3


def test_residual_report_json(eik_field):
    rep = monge_residual(eik_field, HamiltonianSpec.eikonal("1 + 0.5*sin(3*x)"))
    obj = rep.to_json()
    assert set(obj) == {"route", "k", "deltas", "points", "aggregate"}
    p = obj["points"][0]
    assert set(p) == {"id", "t", "estimate", "target", "residual", "plateau_ok"}
    assert p["residual"] == pytest.approx(p["estimate"] - p["target"])


def test_eikonal_route_needs_eikonal_spec(gen_field):
    spec, u = gen_field
    with pytest.raises(ConfigError):
        monge_residual(u, spec, route="eikonal")
