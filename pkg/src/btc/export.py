"""Deterministic writers for run outputs.

Every float is written with 17 significant digits so that a value read back is the
value computed, and rows end in a bare newline. Reruns of the same config therefore
produce identical bytes.
"""

import csv
import json
import logging
import math
import pathlib
import struct
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np  # type: ignore[import]
import pydantic
from btc import core, fixedpoints
from btc.cumulant import pair_multiplicity
from btc.registry import CsvSchemas

LOGGER = logging.getLogger()

RHO_MAGIC = b"BTCRHO01"
RHO_HEADER = struct.Struct("<8sQ")  # magic, dimension

PathLike = Union[str, pathlib.Path]


def fmt(val: Any) -> str:
    """CSV cell text: empty for missing values, 17 significant digits for floats."""
    if val is None:
        return ""
    if isinstance(val, (bool, np.bool_)):
        return str(int(val))
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    if isinstance(val, (float, np.floating)):
        if math.isnan(val):
            return ""
        return f"{float(val):.17g}"
    if isinstance(val, str):
        return val
    return str(val)


def write_csv(
    path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header {len(header)}")
            writer.writerow([fmt(v) for v in row])
    LOGGER.info(f"Wrote {path}")
    return path


def write_json(path: PathLike, obj: Any) -> pathlib.Path:
    """Writes a pydantic model or plain JSON-able object with sorted keys."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, pydantic.BaseModel):
        obj = obj.model_dump(mode="json")
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    LOGGER.info(f"Wrote {path}")
    return path


########################################################################################
# SERIES ###############################################################################
########################################################################################


def write_trajectory(path: PathLike, traj: core.Trajectory) -> pathlib.Path:
    rows = (
        (t, *state, n, None if singular else ratio)
        for t, state, n, ratio, singular in zip(
            traj.times, traj.states, traj.n_total, traj.m_ratio, traj.m_ratio_singular
        )
    )
    return write_csv(path, CsvSchemas.TRAJECTORY, rows)


def write_trajectory_json(path: PathLike, traj: core.Trajectory) -> pathlib.Path:
    """Trajectory columns plus the params that produced them. M is null where
    singular.
    """
    ratio = [
        None if singular else float(val)
        for val, singular in zip(traj.m_ratio, traj.m_ratio_singular)
    ]
    return write_json(
        path,
        {
            "params": traj.params.model_dump(mode="json"),
            "times": np.asarray(traj.times).tolist(),
            "states": np.asarray(traj.states).tolist(),
            "N": np.asarray(traj.n_total).tolist(),
            "M": ratio,
            "truncated": traj.truncated,
            "message": traj.message,
            "stats": traj.stats.model_dump(mode="json"),
        },
    )


def write_gaussian(path: PathLike, traj: core.GaussTrajectory) -> pathlib.Path:
    """Writes m, the distance-averaged correlator and Delta_z per sample."""
    n_sites = traj.params.n_sites
    if n_sites is None:
        corr = traj.corr[:, 0]
    else:
        mult = pair_multiplicity(n_sites)
        corr = np.einsum("r,nrab->nab", mult, traj.corr) / (n_sites - 1)
    flat = core.sym_to_flat(corr)
    rows = (
        (t, *m, *c, dz) for t, m, c, dz in zip(traj.times, traj.m, flat, traj.delta_z)
    )
    return write_csv(path, CsvSchemas.GAUSSIAN, rows)


def write_gaussian_distances(
    path: PathLike, traj: core.GaussTrajectory
) -> pathlib.Path:
    flat = core.sym_to_flat(traj.corr)
    rows = (
        (t, r + 1, *flat[k, r])
        for k, t in enumerate(traj.times)
        for r in range(flat.shape[1])
    )
    return write_csv(path, CsvSchemas.GAUSSIAN_DISTANCE, rows)


def write_exact(path: PathLike, series: core.ExactSeries) -> pathlib.Path:
    rows = (
        (s.t, s.m.mx, s.m.my, s.m.mz, s.delta_z, s.s2_norm, s.trace_err)
        for s in series.samples
    )
    return write_csv(path, CsvSchemas.EXACT, rows)


########################################################################################
# TABLES ###############################################################################
########################################################################################


def _padded(values: Sequence[Any], width: int = 3) -> List[Any]:
    return list(values) + [None] * (width - len(values))


def write_phase_diagram(path: PathLike, grid: core.PhaseDiagramGrid) -> pathlib.Path:
    rows = []
    for i_eta, eta in enumerate(grid.eta_axis):
        for i_chi, chi in enumerate(grid.chi_axis):
            points = grid.fixed_points[i_eta][i_chi]
            label = grid.labels[i_eta][i_chi]
            mz = [fp.m.mz for fp in points]
            rows.append((chi, eta, label.value, len(points), *_padded(mz)))
    return write_csv(path, CsvSchemas.PHASE_DIAGRAM, rows)


def write_phase_diagram_json(
    path: PathLike, grid: core.PhaseDiagramGrid
) -> pathlib.Path:
    """The whole grid, with every fixed point's eigenvalues and stability."""
    return write_json(path, grid)


def write_branches(
    path: PathLike, rows: Sequence[fixedpoints.BranchRow]
) -> pathlib.Path:
    out = []
    for row in rows:
        mz = [fp.m.mz for fp in row.points]
        stab = [fp.stability.value for fp in row.points]
        out.append((row.chi, len(row.points), *_padded(mz), *_padded(stab)))
    return write_csv(path, CsvSchemas.BRANCHES, out)


def write_decay(path: PathLike, scan: core.DecayScan) -> pathlib.Path:
    rows = ((r.eta, r.B, r.B_stderr) for r in scan.rows)
    return write_csv(path, CsvSchemas.DECAY, rows)


def write_basin(path: PathLike, traces: Sequence[core.BasinTrace]) -> pathlib.Path:
    rows = (
        (p.init.mx, p.init.my, p.init.mz, p.attractor, p.transit_time) for p in traces
    )
    return write_csv(path, CsvSchemas.BASIN, rows)


def write_coeff(
    path: PathLike,
    sizes: Sequence[int],
    etas: Sequence[float],
    values: Sequence[Sequence[float]],
) -> pathlib.Path:
    """F coefficient table; a size of 0 is written as an empty n_sites (the N -> inf
    curve).
    """
    rows = (
        (eta, n if n else None, values[i][j])
        for i, n in enumerate(sizes)
        for j, eta in enumerate(etas)
    )
    return write_csv(path, CsvSchemas.COEFF, rows)


def write_cusp(path: PathLike, points: Sequence[core.CuspPoint]) -> pathlib.Path:
    rows = ((p.method, p.chi, p.eta, p.mz) for p in points)
    return write_csv(path, CsvSchemas.CUSP, rows)


########################################################################################
# DENSITY-MATRIX SNAPSHOTS #############################################################
########################################################################################


def write_rho_dump(path: PathLike, snapshots: Sequence[np.ndarray]) -> pathlib.Path:
    """Appends each snapshot as header + row-major little-endian complex128 data."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        for rho in snapshots:
            rho = np.asarray(rho)
            f.write(RHO_HEADER.pack(RHO_MAGIC, rho.shape[0]))
            f.write(np.ascontiguousarray(rho, dtype="<c16").tobytes())
    LOGGER.info(f"Wrote {len(snapshots)} density matrices to {path}")
    return path


def read_rho_dump(path: PathLike) -> List[np.ndarray]:
    raw = pathlib.Path(path).read_bytes()
    out = []
    offset = 0
    while offset < len(raw):
        magic, dim = RHO_HEADER.unpack_from(raw, offset)
        if magic != RHO_MAGIC:
            raise core.DomainError(f"bad density-matrix header at byte {offset}")
        offset += RHO_HEADER.size
        n_bytes = 16 * dim * dim
        data = np.frombuffer(raw, dtype="<c16", count=dim * dim, offset=offset)
        out.append(data.reshape(dim, dim).copy())
        offset += n_bytes
    return out


def read_csv(path: PathLike) -> List[List[str]]:
    with pathlib.Path(path).open(newline="") as f:
        return list(csv.reader(f))


def optional_float(text: str) -> Optional[float]:
    return float(text) if text else None
