import json

import numpy as np
import pytest

from mongehj.fieldio import IntegrityError, atomic_write, read_field, read_manifest, slice_name, write_field, write_json
from mongehj.graph import MetricGraph, sample_mesh
from mongehj.hamiltonian import HamiltonianSpec
from mongehj.solver import SolveConfig, TimeGrid, solve_general


@pytest.fixture(scope="module")
def field():
    g = MetricGraph.star([1.0, 0.7, 1.3])
    mesh = sample_mesh(g, 0.05)
    spec = HamiltonianSpec.power(a="1 + 0.3*x", f="0.5*sin(3*x)")
    return solve_general(g, mesh, spec, "sin(2*x)", TimeGrid.from_dt(1.0, 0.05), SolveConfig(0.05, 0.05))


def test_round_trip_is_exact(field, tmp_path):
    write_field(field, tmp_path, {"L0": 0.5})
    back = read_field(tmp_path, field.mesh)
    assert np.array_equal(back.values, field.values)
    assert back.grid.n_steps == field.grid.n_steps and back.grid.T == field.grid.T
    assert back.meta["config"] == json.loads(json.dumps(field.meta["config"]))
    man = read_manifest(tmp_path)
    assert man["constants"] == {"L0": 0.5}
    assert man["slices"][0] == slice_name(0) == "slice_00000.csv"
    assert len(list(tmp_path.glob("slice_*.csv"))) == field.grid.n_steps


def test_rewrite_is_byte_identical(field, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_field(field, a)
    write_field(field, b)
    for p in sorted(a.iterdir()):
        assert p.read_bytes() == (b / p.name).read_bytes()


def test_mesh_hash_mismatch(field, tmp_path):
    write_field(field, tmp_path)
    other = sample_mesh(MetricGraph.star([1.0, 0.7, 1.3]), 0.025)
    with pytest.raises(IntegrityError, match="mesh hash"):
        read_field(tmp_path, other)


def test_tampered_slice_layout(field, tmp_path):
    write_field(field, tmp_path)
    p = tmp_path / slice_name(3)
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(IntegrityError, match="layout"):
        read_field(tmp_path, field.mesh)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(2), "c": float("inf")})
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": 1.5, "b": [0, 1], "c": "inf"}
    atomic_write(tmp_path / "x.json", "replaced")
    assert (tmp_path / "x.json").read_text() == "replaced"
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
