"""Closed triangle meshes: generation, OFF I/O, validation and per-triangle geometry.

Two geometry backends are supported.  ``Embedded3D`` meshes carry a 3D position per
vertex.  ``Periodic2D`` meshes carry parameter coordinates in a rectangle with
periods ``(Lu, Lv)``; edge vectors are unwrapped to the representative within half
a period, which gives the intrinsic flat metric of the torus.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateGeometryError,
    InvalidGridError,
    OFFParseError,
    SizeLimitError,
)

MIN_TRIANGLE_AREA = 1e-12
MAX_SUBDIVISIONS = 8

EMBEDDED_3D = "embedded3d"
PERIODIC_2D = "periodic2d"


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangle mesh.

    ``vertices`` is (V, 3) for embedded meshes and (V, 2) for periodic ones;
    ``periods`` is ``(Lu, Lv)`` for periodic meshes and ``None`` otherwise.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    periods: tuple[float, float] | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.periods is None:
            if v.ndim != 2 or v.shape[1] != 3:
                raise ValueError("embedded meshes need (V, 3) vertex positions")
        else:
            if v.ndim != 2 or v.shape[1] != 2:
                raise ValueError("periodic meshes need (V, 2) parameter coordinates")
            if min(self.periods) <= 0:
                raise ValueError("periods must be positive")
            object.__setattr__(self, "periods", (float(self.periods[0]), float(self.periods[1])))
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def geometry(self) -> str:
        return EMBEDDED_3D if self.periods is None else PERIODIC_2D

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def edge_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(e1, e2)``, the vectors from corner 0 to corners 1 and 2 of each triangle.

        Always 3-component; periodic meshes get a zero third component.
        """
        t = self.triangles
        p = self.vertices
        e1 = p[t[:, 1]] - p[t[:, 0]]
        e2 = p[t[:, 2]] - p[t[:, 0]]
        if self.periods is not None:
            period = np.asarray(self.periods)
            e1 = e1 - period * np.round(e1 / period)
            e2 = e2 - period * np.round(e2 / period)
            pad = np.zeros((len(t), 1))
            e1 = np.hstack([e1, pad])
            e2 = np.hstack([e2, pad])
        return e1, e2


class MeshDiagnostics(NamedTuple):
    is_closed: bool
    is_oriented: bool
    euler_characteristic: int
    min_triangle_area: float
    min_angle: float
    boundary_edge_count: int


class TriangleGeometry(NamedTuple):
    area: float
    cotangents: np.ndarray
    local_frame: np.ndarray


# ---------------------------------------------------------------------------
# generators

_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICOSAHEDRON_VERTICES = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)
_ICOSAHEDRON_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


def _subdivide(vertices, faces):
    # one midpoint split: each triangle becomes four, shared edges share a midpoint
    nv = len(vertices)
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    unique, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    mid = 0.5 * (vertices[unique[:, 0]] + vertices[unique[:, 1]])
    nf = len(faces)
    m01 = nv + inverse[:nf]
    m12 = nv + inverse[nf:2 * nf]
    m20 = nv + inverse[2 * nf:]
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([b, m12, m01], axis=1),
            np.stack([c, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    return np.vstack([vertices, mid]), new_faces


def generate_icosphere(subdivisions: int, radius: float = 1.0) -> TriangleMesh:
    """Icosahedron refined ``subdivisions`` times by midpoint splitting, projected to the sphere."""
    if subdivisions < 0:
        raise ValueError("subdivisions must be non-negative")
    if subdivisions > MAX_SUBDIVISIONS:
        raise SizeLimitError(
            f"subdivisions={subdivisions} exceeds the limit of {MAX_SUBDIVISIONS}"
        )
    if not radius > 0:
        raise ValueError("radius must be positive")
    v = _ICOSAHEDRON_VERTICES / np.linalg.norm(_ICOSAHEDRON_VERTICES, axis=1, keepdims=True)
    f = _ICOSAHEDRON_FACES.copy()
    for _ in range(subdivisions):
        v, f = _subdivide(v, f)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
    return TriangleMesh(radius * v, f)


def generate_flat_torus(nu: int, nv: int, Lu: float = 2 * np.pi, Lv: float = 2 * np.pi) -> TriangleMesh:
    """Regular ``nu`` x ``nv`` grid on the flat torus ``[0, Lu) x [0, Lv)``."""
    if nu < 3 or nv < 3:
        raise InvalidGridError(f"torus grid needs nu, nv >= 3, got ({nu}, {nv})")
    if not (Lu > 0 and Lv > 0):
        raise ValueError("periods must be positive")
    i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    coords = np.stack([i.ravel() * Lu / nu, j.ravel() * Lv / nv], axis=1)

    def idx(a, b):
        return (a % nu) * nv + (b % nv)

    i, j = i.ravel(), j.ravel()
    v00, v10, v11, v01 = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
    tris = np.concatenate(
        [np.stack([v00, v10, v11], axis=1), np.stack([v00, v11, v01], axis=1)]
    )
    return TriangleMesh(coords, tris, periods=(Lu, Lv))


# ---------------------------------------------------------------------------
# OFF I/O


def load_off(source) -> TriangleMesh:
    """Parse an ASCII OFF stream (text or bytes) into an embedded mesh.

    Blank lines and ``#`` comments are skipped.  The mesh is not validated.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    elif isinstance(source, str):
        source = io.StringIO(source)

    def lines():
        for number, raw in enumerate(source, start=1):
            if isinstance(raw, bytes):
                raw = raw.decode("ascii", errors="replace")
            text = raw.split("#", 1)[0].strip()
            if text:
                yield number, text

    it = lines()
    try:
        number, header = next(it)
    except StopIteration:
        raise OFFParseError("empty stream") from None
    tokens = header.split()
    if tokens[0] != "OFF":
        raise OFFParseError("missing OFF header", number)
    # some writers put the counts on the header line
    rest = tokens[1:]
    if not rest:
        try:
            number, counts = next(it)
        except StopIteration:
            raise OFFParseError("truncated stream: missing counts line", number + 1) from None
        rest = counts.split()
    try:
        nverts, nfaces = int(rest[0]), int(rest[1])
    except (IndexError, ValueError):
        raise OFFParseError("malformed counts line", number) from None
    if nverts < 0 or nfaces < 0:
        raise OFFParseError("negative element count", number)

    vertices = np.empty((nverts, 3))
    for k in range(nverts):
        try:
            number, text = next(it)
        except StopIteration:
            raise OFFParseError(f"truncated stream: expected {nverts} vertices, got {k}", number + 1) from None
        parts = text.split()
        try:
            vertices[k] = [float(x) for x in parts[:3]]
        except ValueError:
            raise OFFParseError("malformed vertex", number) from None
        if len(parts) < 3:
            raise OFFParseError("vertex needs three coordinates", number)

    triangles = np.empty((nfaces, 3), dtype=np.int64)
    for k in range(nfaces):
        try:
            number, text = next(it)
        except StopIteration:
            raise OFFParseError(f"truncated stream: expected {nfaces} faces, got {k}", number + 1) from None
        try:
            parts = [int(x) for x in text.split()]
        except ValueError:
            raise OFFParseError("malformed face", number) from None
        if not parts or parts[0] != 3 or len(parts) < 4:
            raise OFFParseError("non-triangle face", number)
        face = parts[1:4]
        if min(face) < 0 or max(face) >= nverts:
            raise OFFParseError("vertex index out of range", number)
        triangles[k] = face
    return TriangleMesh(vertices, triangles)


def write_off(mesh: TriangleMesh, sink) -> None:
    """Write an embedded mesh as ASCII OFF with 17 significant digits."""
    if mesh.geometry != EMBEDDED_3D:
        raise ValueError("OFF output needs an embedded 3D mesh")
    out = [f"OFF\n{mesh.vertex_count} {mesh.triangle_count} 0\n"]
    out.extend("%.17g %.17g %.17g\n" % tuple(p) for p in mesh.vertices)
    out.extend("3 %d %d %d\n" % tuple(t) for t in mesh.triangles)
    text = "".join(out)
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sink.write(text)


def off_string(mesh: TriangleMesh) -> str:
    buf = io.StringIO()
    write_off(mesh, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# geometry


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    e1, e2 = mesh.edge_vectors()
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def triangle_cotangents(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(areas, cot)`` with ``cot[:, k]`` the cotangent of the angle at corner k.

    Raises DegenerateGeometryError if any triangle is below the area threshold.
    """
    e1, e2 = mesh.edge_vectors()
    e3 = e2 - e1  # corner 1 -> corner 2
    double_area = np.linalg.norm(np.cross(e1, e2), axis=1)
    areas = 0.5 * double_area
    bad = np.flatnonzero(areas <= MIN_TRIANGLE_AREA)
    if bad.size:
        raise DegenerateGeometryError(
            f"{bad.size} degenerate triangle(s), first at index {bad[0]} (area {areas[bad[0]]:.3g})"
        )
    cot = np.empty((len(areas), 3))
    cot[:, 0] = np.einsum("ij,ij->i", e1, e2) / double_area
    cot[:, 1] = np.einsum("ij,ij->i", -e1, e3) / double_area
    cot[:, 2] = np.einsum("ij,ij->i", e2, e3) / double_area
    return areas, cot


def local_frames(mesh: TriangleMesh) -> np.ndarray:
    """Isometric planar layout of every triangle, shape (F, 3, 2).

    Corner 0 sits at the origin and corner 1 on the positive x axis.
    """
    e1, e2 = mesh.edge_vectors()
    l1 = np.linalg.norm(e1, axis=1)
    x2 = np.einsum("ij,ij->i", e1, e2) / l1
    y2 = np.linalg.norm(np.cross(e1, e2), axis=1) / l1
    frames = np.zeros((len(l1), 3, 2))
    frames[:, 1, 0] = l1
    frames[:, 2, 0] = x2
    frames[:, 2, 1] = y2
    return frames


def triangle_geometry(mesh: TriangleMesh, triangle_index: int) -> TriangleGeometry:
    if not 0 <= triangle_index < mesh.triangle_count:
        raise IndexError(f"triangle index {triangle_index} out of range")
    sub = TriangleMesh(mesh.vertices, mesh.triangles[triangle_index:triangle_index + 1], mesh.periods)
    areas, cot = triangle_cotangents(sub)
    return TriangleGeometry(float(areas[0]), cot[0], local_frames(sub)[0])


def total_area(mesh: TriangleMesh) -> float:
    return float(triangle_areas(mesh).sum())


def _interior_angles(mesh):
    e1, e2 = mesh.edge_vectors()
    e3 = e2 - e1

    def angle(a, b):
        return np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b))

    return np.stack([angle(e1, e2), angle(-e1, e3), angle(-e2, -e3)], axis=1)


def undirected_edges(mesh: TriangleMesh) -> np.ndarray:
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def validate(mesh: TriangleMesh) -> MeshDiagnostics:
    """Report topology and quality diagnostics.  Never raises on a bad mesh."""
    t = mesh.triangles
    if len(t) == 0:
        return MeshDiagnostics(False, False, mesh.vertex_count, 0.0, 0.0, 0)
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    undirected, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    _, directed_counts = np.unique(directed, axis=0, return_counts=True)
    boundary = int(np.sum(counts == 1))
    closed = bool(np.all(counts == 2))
    # consistent orientation: no directed edge is traversed twice
    oriented = bool(np.all(directed_counts == 1))
    euler = mesh.vertex_count - len(undirected) + len(t)
    areas = triangle_areas(mesh)
    angles = _interior_angles(mesh)
    return MeshDiagnostics(
        is_closed=closed,
        is_oriented=oriented,
        euler_characteristic=int(euler),
        min_triangle_area=float(areas.min()),
        min_angle=float(np.nanmin(angles)),
        boundary_edge_count=boundary,
    )


def mean_edge_length(mesh: TriangleMesh) -> float:
    e1, e2 = mesh.edge_vectors()
    lengths = np.concatenate(
        [np.linalg.norm(e1, axis=1), np.linalg.norm(e2, axis=1), np.linalg.norm(e2 - e1, axis=1)]
    )
    return float(lengths.mean())
