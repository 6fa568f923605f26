"""Per-step CSV records and legacy ASCII VTK snapshots.

CSV columns are fixed: ``step, load_factor``, then one column per monitored
quantity, then ``membrane_energy, bending_energy, newton_iterations``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ["CSV_LEADING", "CSV_TRAILING", "StepRecord", "write_csv", "read_csv", "write_vtk", "read_vtk_cell_data"]

CSV_LEADING = ("step", "load_factor")
CSV_TRAILING = ("membrane_energy", "bending_energy", "newton_iterations")


class StepRecord(dict):
    """One CSV row; a plain dict with the column names as keys."""


def step_record(model, state, monitors: dict) -> StepRecord:
    """Row for a converged state; ``monitors`` maps column name to value."""
    mem, bend = model.element_energies(state.u)
    row = StepRecord(step=state.step, load_factor=state.load_factor)
    row.update(monitors)
    row.update(
        membrane_energy=float(mem.sum()),
        bending_energy=float(bend.sum()),
        newton_iterations=state.iterations,
    )
    return row


def write_csv(path, records, monitored):
    """Write ``records`` (dicts) with the stable column layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(CSV_LEADING) + list(monitored) + list(CSV_TRAILING)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: _fmt(rec[k]) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_csv(path):
    with Path(path).open(newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_vtk(path, nodes, triangles, u, cell_data=None, title="shell state"):
    """Legacy ASCII unstructured grid of the reference mesh.

    Point data: ``u`` (vector) and ``u_z``; cell data from ``cell_data``
    (name -> per-triangle array).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes = np.asarray(nodes, dtype=float)
    tri = np.asarray(triangles, dtype=np.int64)
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(nodes)} double")
    lines += [" ".join(f"{c:.17g}" for c in p) for p in nodes]
    lines.append(f"CELLS {len(tri)} {4 * len(tri)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tri]
    lines.append(f"CELL_TYPES {len(tri)}")
    lines += ["5"] * len(tri)
    lines.append(f"POINT_DATA {len(nodes)}")
    lines.append("VECTORS u double")
    lines += [" ".join(f"{c:.17g}" for c in p) for p in u]
    lines += ["SCALARS u_z double 1", "LOOKUP_TABLE default"]
    lines += [f"{c:.17g}" for c in u[:, 2]]
    if cell_data:
        lines.append(f"CELL_DATA {len(tri)}")
        for name, values in cell_data.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{c:.17g}" for c in np.asarray(values, dtype=float)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_cell_data(path) -> dict:
    """Cell scalar arrays of a file written by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    out = {}
    in_cells = False
    n_cells = 0
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("CELL_DATA"):
            in_cells, n_cells = True, int(line.split()[1])
        elif in_cells and line.startswith("SCALARS"):
            name = line.split()[1]
            out[name] = np.array([float(t) for t in tokens[i + 2 : i + 2 + n_cells]])
            i += 1 + n_cells
        i += 1
    return out
