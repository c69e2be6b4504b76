"""On-disk output: CSV time series, legacy-VTK snapshots, checkpoints.

All floating-point text uses shortest round-trip formatting (Python
repr), so CSV rows are bitwise reproducible and resume-exact; checkpoint
arrays are raw little-endian float64, lossless by construction.
"""

import os

import numpy as np

from .diagnostics import CSV_COLUMNS

CHECKPOINT_MAGIC = "DUALFLOW-CKPT"
CHECKPOINT_VERSION = 1


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class CsvWriter:
    """Append-only fixed-schema CSV; one row per emitted step."""

    def __init__(self, path):
        self.path = path
        exists = os.path.exists(path) and os.path.getsize(path) > 0
        self._fh = open(path, "a", encoding="utf-8", newline="")
        if not exists:
            self._fh.write(",".join(CSV_COLUMNS) + "\n")
            self._fh.flush()

    def write_row(self, row):
        self._fh.write(",".join(_fmt(v) for v in row.csv_values()) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path):
    """CSV rows as a dict of numpy arrays keyed by column name."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [[] for _ in header]
        for line in fh:
            for slot, tok in zip(data, line.strip().split(",")):
                slot.append(float(tok))
    return {name: np.asarray(col) for name, col in zip(header, data)}


# ---------------------------------------------------------------------------
# Legacy VTK


def write_vtk(state, path):
    """ASCII legacy-VTK snapshot of one simulation state.

    Point data: phi, omega, omega_tilde sampled at mesh vertices (CG
    vertex dofs).  Cell data: pressure reduced to its cell mean and
    velocity averaged at cell centroids (RT point values are
    tangentially discontinuous, so vertex sampling would be misleading).
    """
    u = state.u_half
    U = u.space
    mesh = U.mesh
    verts = mesh.render_vertices
    cells = mesh.render_cells
    vmap = mesh.render_vertex_map
    nv, nc = len(verts), len(cells)

    def point_scalar(fld):
        if fld is None:
            return np.zeros(nv)
        return fld.coefficients[vmap]  # CG vertex dofs come first

    J, det, _ = mesh.jacobians()
    rval, _ = U.element.tabulate(np.array([[1.0 / 3.0, 1.0 / 3.0]]))
    phys = np.einsum("cde,ne->cnd", J, rval[0]) / det[:, None, None]
    phys *= U.cell_dof_signs[:, :, None]
    vel = np.einsum("cnd,cn->cd", phys, u.coefficients[U.cell_dofs])

    if state.p_bar is not None:
        Q = state.p_bar.space
        pc = state.p_bar.coefficients[Q.cell_dofs]
        pressure = pc.mean(axis=1)  # DG_0 reduction: cell mean
    else:
        pressure = np.zeros(nc)

    lines = [
        "# vtk DataFile Version 3.0",
        "dualflow snapshot (velocity as centroid averages; see package docs)",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    for x, y in verts:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0.0")
    lines.append(f"CELLS {nc} {4 * nc}")
    for a, b, c in cells:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nc}")
    lines.extend(["5"] * nc)
    lines.append(f"POINT_DATA {nv}")
    for name, fld in (("phi", state.phi), ("omega", state.omega), ("omega_tilde", state.omega_tilde)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in point_scalar(fld))
    lines.append(f"CELL_DATA {nc}")
    lines.append("SCALARS pressure double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(_fmt(v) for v in pressure)
    lines.append("VECTORS velocity double")
    for vx, vy in vel:
        lines.append(f"{_fmt(vx)} {_fmt(vy)} 0.0")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Checkpoints


class CheckpointError(RuntimeError):
    pass


_FIELD_ORDER = ("u_half", "omega", "phi", "p_bar", "omega_tilde")


def save_checkpoint(path, state, engine, model):
    """Versioned header plus raw float64 dof vectors; lossless round trip."""
    fields = {}
    for name in _FIELD_ORDER:
        fld = getattr(state, name)
        if fld is not None:
            fields[name] = np.ascontiguousarray(fld.coefficients, dtype="<f8")
    scalars = {
        "Ev": engine.Ev, "Es": engine.Es,
        "K_half0": engine.K_half0, "Ep0": engine.Ep0,
        "m_p0": engine.m_p0, "base_exchange": engine.base_exchange,
    }
    header = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"mode {model.physics.mode}",
        f"degree {model.degree}",
        f"k {state.k}",
        f"dt {float(model.time.dt).hex()}",
        "fields " + " ".join(fields),
        "dims " + " ".join(str(len(v)) for v in fields.values()),
        "scalars " + " ".join(f"{k}={float(v).hex()}" for k, v in scalars.items()),
        "END",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        for v in fields.values():
            fh.write(v.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    end = raw.find(b"END\n")
    if end < 0:
        raise CheckpointError("checkpoint header is missing its END marker")
    header = raw[:end].decode("ascii").splitlines()
    blob = raw[end + 4:]
    first = header[0].split()
    if first[0] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a dualflow checkpoint")
    if int(first[1]) != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {first[1]}")
    meta = {}
    for line in header[1:]:
        key, _, rest = line.partition(" ")
        meta[key] = rest
    names = meta["fields"].split()
    dims = [int(d) for d in meta["dims"].split()]
    expected = 8 * sum(dims)
    if len(blob) != expected:
        raise CheckpointError(f"checkpoint payload is {len(blob)} bytes, expected {expected}")
    fields = {}
    off = 0
    for name, dim in zip(names, dims):
        fields[name] = np.frombuffer(blob, dtype="<f8", count=dim, offset=off).copy()
        off += 8 * dim
    scalars = {}
    for tok in meta["scalars"].split():
        key, _, val = tok.partition("=")
        scalars[key] = float.fromhex(val)
    return {
        "mode": meta["mode"],
        "degree": int(meta["degree"]),
        "k": int(meta["k"]),
        "dt": float.fromhex(meta["dt"]),
        "fields": fields,
        "scalars": scalars,
    }


def restore_state(data, model):
    """Rebuild a SimulationState from checkpoint data, validating shapes."""
    from .spaces import Field
    from .stepper import SimulationState

    if data["mode"] != model.physics.mode:
        raise CheckpointError(
            f"checkpoint mode {data['mode']!r} does not match configured {model.physics.mode!r}"
        )
    if data["degree"] != model.degree:
        raise CheckpointError("checkpoint polynomial degree does not match configuration")
    if abs(data["dt"] - model.time.dt) > 0.0:
        raise CheckpointError("checkpoint time step does not match configuration")
    spaces = {"u_half": model.U, "omega": model.W, "phi": model.W,
              "p_bar": model.Q, "omega_tilde": model.W}
    kwargs = {}
    for name, coef in data["fields"].items():
        space = spaces[name]
        if len(coef) != space.dim:
            raise CheckpointError(
                f"field {name!r} has {len(coef)} dofs, expected {space.dim}"
            )
        kwargs[name] = Field(space, coef)
    return SimulationState(k=data["k"], **kwargs)
