"""Legacy ASCII VTK output for meshes, solutions and indicator fields."""

import numpy as np

VTK_TRIANGLE = 5


def _fmt(a):
    return " ".join(repr(float(v)) for v in a)


def export_vtk(mesh, solution=None, indicators=None, path="out.vtk", title="forchheimer_afem"):
    """Write an unstructured triangle grid with optional fields.

    Velocity is sampled at the mesh vertices (higher-order nodes are
    dropped), pressure is written as point data and the indicator values
    as cell data.
    """
    nv, nt = mesh.n_vertices, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [_fmt((x, y, 0.0)) for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    if solution is not None:
        ns = solution.space.n_scalar
        ux, uy = solution.u[:nv], solution.u[ns:ns + nv]
        lines += [f"POINT_DATA {nv}", "VECTORS velocity double"]
        lines += [_fmt((a, b, 0.0)) for a, b in zip(ux, uy)]
        lines += ["SCALARS pressure double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(v)) for v in solution.p]
    if indicators is not None:
        vals = np.asarray(getattr(indicators, "values", indicators), dtype=float)
        if len(vals) != nt:
            raise ValueError(f"{len(vals)} indicator values for {nt} elements")
        lines += [f"CELL_DATA {nt}", "SCALARS indicator double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(v)) for v in vals]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_vtk(path):
    """Parse a file written by :func:`export_vtk`.

    Returns a dict with ``points (n,3)``, ``cells (m,3)`` and the point and
    cell arrays by name.
    """
    with open(path) as fh:
        tok = fh.read().split("\n")
    out = {"point_data": {}, "cell_data": {}}
    i = 4
    section = None
    while i < len(tok):
        words = tok[i].split()
        i += 1
        if not words:
            continue
        key = words[0]
        if key == "POINTS":
            n = int(words[1])
            out["points"] = np.array([tok[i + k].split() for k in range(n)], dtype=float)
            i += n
        elif key == "CELLS":
            n = int(words[1])
            cells = np.array([tok[i + k].split() for k in range(n)], dtype=np.int64)
            out["cells"] = cells[:, 1:]
            i += n
        elif key == "CELL_TYPES":
            n = int(words[1])
            out["cell_types"] = np.array(tok[i:i + n], dtype=np.int64)
            i += n
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = "point_data" if key == "POINT_DATA" else "cell_data"
            count = int(words[1])
        elif key == "VECTORS":
            out[section][words[1]] = np.array([tok[i + k].split() for k in range(count)],
                                              dtype=float)
            i += count
        elif key == "SCALARS":
            i += 1  # lookup table line
            out[section][words[1]] = np.array(tok[i:i + count], dtype=float)
            i += count
    return out
