"""On-disk form of solved fields and reports.

A field directory holds one CSV per time slice (point id, edge id, offset,
value) and a manifest.json with the mesh hash, grid, solver config and the
constants used. Values are written with 17 significant digits so a reload
reproduces the in-memory array bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .graph import Mesh
from .solver import SpaceTimeField, TimeGrid

MANIFEST = "manifest.json"
HEADER = ("point_id", "edge_id", "offset", "value")


class IntegrityError(ValueError):
    """Stored field does not belong to the problem it is checked against."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj) -> None:
    atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def slice_name(n: int) -> str:
    return f"slice_{n:05d}.csv"


def _slice_text(mesh: Mesh, row: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for i in range(mesh.size):
        w.writerow((i, int(mesh.edge[i]), "%.17g" % mesh.offset[i], "%.17g" % row[i]))
    return buf.getvalue()


def write_field(field: SpaceTimeField, out_dir: str | Path, constants: dict | None = None) -> Path:
    """Write slices one at a time, then the manifest last."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for n in range(field.grid.n_steps):
        atomic_write(out / slice_name(n), _slice_text(field.mesh, field.values[n]))
    meta = {k: v for k, v in field.meta.items() if k != "config"}
    manifest = {
        "mesh_hash": field.mesh.digest(),
        "h": field.mesh.h,
        "grid": {"T": field.grid.T, "n_steps": field.grid.n_steps, "dt": field.grid.dt},
        "config": field.meta.get("config", {}),
        "constants": constants or {},
        "meta": meta,
        "slices": [slice_name(n) for n in range(field.grid.n_steps)],
    }
    write_json(out / MANIFEST, manifest)
    return out


def read_manifest(field_dir: str | Path) -> dict:
    return json.loads((Path(field_dir) / MANIFEST).read_text())


def read_field(field_dir: str | Path, mesh: Mesh) -> SpaceTimeField:
    """Reload a field onto ``mesh``; the stored mesh hash must match."""
    field_dir = Path(field_dir)
    man = read_manifest(field_dir)
    if man.get("mesh_hash") != mesh.digest():
        raise IntegrityError(f"mesh hash {man.get('mesh_hash')} does not match {mesh.digest()}")
    grid = TimeGrid(float(man["grid"]["T"]), int(man["grid"]["n_steps"]))
    values = np.empty((grid.n_steps, mesh.size))
    for n, name in enumerate(man["slices"]):
        with open(field_dir / name, newline="") as fh:
            rows = list(csv.reader(fh))
        if tuple(rows[0]) != HEADER or len(rows) - 1 != mesh.size:
            raise IntegrityError(f"{name}: unexpected layout")
        ids = np.array([int(r[0]) for r in rows[1:]])
        if not np.array_equal(ids, np.arange(mesh.size)):
            raise IntegrityError(f"{name}: point ids out of order")
        values[n] = [float(r[3]) for r in rows[1:]]
    meta = dict(man.get("meta", {}))
    meta["config"] = man.get("config", {})
    return SpaceTimeField(mesh, grid, values, meta)


def write_table(path: str | Path, rows: list[dict]) -> None:
    """CSV with the union of row keys as columns, in first-seen order."""
    cols: list[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    buf = io.StringIO()
    w = csv.DictWriter(buf, cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("%.17g" % v if isinstance(v, float) else v) for k, v in r.items()})
    atomic_write(path, buf.getvalue())
