"""Binary snapshot format for map slices.

Layout (little-endian): magic b"CSM1", version u32, mu i32, N u32,
L f64, t f64, s f64, then 3*N*N f64 payload (row-major y0 y1 y2
triples). Round trips are bit-exact.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, ConstraintViolation, TruncatedPayload
from .manifold import MapField, TargetManifold, constraint_deviation
from .spectral import GridSpec

MAGIC = b"CSM1"
VERSION = 1
_HEADER = struct.Struct("<4sIiIddd")
READ_CONSTRAINT_TOL = 1e-6


@dataclass
class Snapshot:
    mu: int
    N: int
    L: float
    t: float
    s: float
    values: np.ndarray

    def to_map_field(self, dealias_fraction=2.0 / 3.0):
        grid = GridSpec(self.N, self.L, dealias_fraction)
        return MapField(grid, TargetManifold(self.mu), self.values)


def write_snapshot(field, path, t=0.0, s=0.0):
    """Write one map slice; payload bytes mirror the array exactly."""
    vals = np.ascontiguousarray(field.values, dtype="<f8")
    header = _HEADER.pack(MAGIC, VERSION, field.target.mu, field.grid.N,
                          field.grid.L, float(t), float(s))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(vals.tobytes())


def read_snapshot(path, constraint_tol=READ_CONSTRAINT_TOL):
    """Read and validate a snapshot; raises BadMagic, TruncatedPayload,
    or ConstraintViolation (values off-target beyond constraint_tol)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not a CSM1 snapshot")
    magic, version, mu, N, L, t, s = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 3 * N * N * 8
    if len(raw) < expected:
        raise TruncatedPayload(
            f"{path}: payload has {len(raw) - _HEADER.size} bytes, "
            f"needs {expected - _HEADER.size}")
    vals = np.frombuffer(raw, dtype="<f8", count=3 * N * N,
                         offset=_HEADER.size).reshape(N, N, 3).copy()
    target = TargetManifold(mu)
    dev = constraint_deviation(vals, target)
    if dev > constraint_tol:
        raise ConstraintViolation(
            f"{path}: values off target by {dev:.3e} (tol {constraint_tol:g})")
    return Snapshot(mu=mu, N=N, L=L, t=t, s=s, values=vals)
