"""Triangular meshes of the square [-1, 1]^2 and a plain-text mesh format."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# local edge k runs between these local vertices (A: B->C, B: C->A, C: A->B)
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    """Conforming triangulation.

    Attributes
    ----------
    vertices : (nV, 2) float array
    triangles : (nT, 3) int array, counterclockwise, 0-based
    edges : (nE, 2) int array, each row sorted so the canonical direction
        runs from the lower to the higher vertex id
    edge_triangles : (nE, 2) int array of adjacent triangles, -1 on the boundary
    triangle_edges : (nT, 3) int array, global edge id of local edges A, B, C
    h : float
        Nominal element size (square side for structured meshes).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    h: float
    edges: np.ndarray = field(init=False)
    edge_triangles: np.ndarray = field(init=False)
    triangle_edges: np.ndarray = field(init=False)
    structured_n: int | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nT, 3) array")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle refers to a missing vertex")
        if np.any(self.areas <= 0):
            bad = int(np.flatnonzero(self.areas <= 0)[0])
            raise MeshError(f"triangle {bad + 1} is not counterclockwise")
        self._build_edges()

    def _build_edges(self):
        t = self.triangles
        pairs = np.stack([t[:, [a, b]] for a, b in LOCAL_EDGES], axis=1).reshape(-1, 2)
        keys = np.sort(pairs, axis=1)
        edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        if counts.max() > 2:
            raise MeshError("an edge is shared by more than two triangles")
        inverse = inverse.reshape(-1)
        self.edges = edges
        self.triangle_edges = inverse.reshape(-1, 3)
        et = np.full((len(edges), 2), -1, dtype=np.int64)
        tri = np.repeat(np.arange(len(t)), 3)
        order = np.argsort(inverse, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = inverse[order][1:] != inverse[order][:-1]
        et[inverse[order][first], 0] = tri[order][first]
        et[inverse[order][~first], 1] = tri[order][~first]
        self.edge_triangles = et

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def jacobian_determinants(self) -> np.ndarray:
        """Constant det of the affine map from the reference triangle (area 2)."""
        return self.areas / 2

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_triangles[:, 1] < 0)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_triangles[:, 1] >= 0)

    def edge_orientation(self) -> np.ndarray:
        """(nT, 3) bool: local edge runs in the canonical (ascending id) direction."""
        t = self.triangles
        return np.stack([t[:, a] < t[:, b] for a, b in LOCAL_EDGES], axis=1)

    def to_physical(self, r, s) -> tuple[np.ndarray, np.ndarray]:
        """Map reference points to every element; results have shape (nT,) + r.shape."""
        r, s = np.asarray(r, dtype=float), np.asarray(s, dtype=float)
        lam = np.stack([(1 + s) / 2, -(r + s) / 2, (1 + r) / 2])
        p = self.vertices[self.triangles]
        x = np.tensordot(p[:, :, 0], lam, axes=(1, 0))
        y = np.tensordot(p[:, :, 1], lam, axes=(1, 0))
        return x, y

    def locate(self, x, y, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Element index and reference coordinates (r, s) of physical points.

        Raises ``MeshError`` for points outside the mesh.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        if self.structured_n is not None:
            elem = self._locate_structured(x, y)
        else:
            elem = self._locate_search(x, y, tol)
        p = self.vertices[self.triangles[elem]]
        lam = _barycentric(p, x, y)
        if np.any(lam.min(axis=1) < -1e-9):
            bad = int(np.flatnonzero(lam.min(axis=1) < -1e-9)[0])
            raise MeshError(f"point ({x[bad]}, {y[bad]}) lies outside the mesh")
        return elem, 2 * lam[:, 2] - 1, 2 * lam[:, 0] - 1

    def _locate_structured(self, x, y):
        n = self.structured_n
        i = np.clip(np.floor((x + 1) / self.h).astype(np.int64), 0, n - 1)
        j = np.clip(np.floor((y + 1) / self.h).astype(np.int64), 0, n - 1)
        fx = (x + 1) / self.h - i
        fy = (y + 1) / self.h - j
        upper = fy > fx
        return 2 * (j * n + i) + upper

    def _locate_search(self, x, y, tol):
        p = self.vertices[self.triangles]
        elem = np.full(len(x), -1, dtype=np.int64)
        for k in range(0, len(x), 256):
            sl = slice(k, k + 256)
            lam = _barycentric(p[None], x[sl, None], y[sl, None])
            inside = lam.min(axis=-1) >= -tol * 10
            found = inside.any(axis=1)
            elem[sl] = np.where(found, inside.argmax(axis=1), -1)
        if np.any(elem < 0):
            bad = int(np.flatnonzero(elem < 0)[0])
            raise MeshError(f"point ({x[bad]}, {y[bad]}) lies outside the mesh")
        return elem


def _barycentric(p, x, y):
    """Barycentric coordinates of (x, y) in triangles ``p[..., 3, 2]``."""
    x0, y0 = p[..., 0, 0], p[..., 0, 1]
    x1, y1 = p[..., 1, 0], p[..., 1, 1]
    x2, y2 = p[..., 2, 0], p[..., 2, 1]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    l1 = ((x - x0) * (y2 - y0) - (x2 - x0) * (y - y0)) / det
    l2 = ((x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)) / det
    return np.stack(np.broadcast_arrays(1 - l1 - l2, l1, l2), axis=-1)


def build_structured_mesh(n: int) -> Mesh:
    """Split each of n x n squares covering [-1, 1]^2 along its SW-NE diagonal."""
    if n < 1:
        raise ValueError(f"need at least one square per side, got n={n}")
    h = 2.0 / n
    g = np.linspace(-1, 1, n + 1)
    xx, yy = np.meshgrid(g, g)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    v00 = j * (n + 1) + i
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return Mesh(vertices, triangles, h, structured_n=n)


def reference_mesh() -> Mesh:
    """The reference triangle itself as a one-element mesh."""
    return Mesh(np.array([[-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]), np.array([[0, 1, 2]]), 2.0)


def write_mesh(mesh: Mesh, path) -> None:
    """Write ``$vertices`` / ``$triangles`` sections with 1-based ids."""
    lines = ["$vertices", str(mesh.n_vertices)]
    lines += [f"{k + 1} {x!r} {y!r}" for k, (x, y) in enumerate(mesh.vertices.tolist())]
    lines += ["$triangles", str(mesh.n_triangles)]
    lines += [f"{k + 1} {a + 1} {b + 1} {c + 1}" for k, (a, b, c) in enumerate(mesh.triangles.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    sections: dict[str, list[list[str]]] = {}
    current = None
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#")[0].strip()
        if not line:
            continue
        if line.startswith("$"):
            current = line[1:].lower()
            sections[current] = []
        elif current is None:
            raise MeshError(f"data before any section header: {raw!r}")
        else:
            sections[current].append(line.split())
    for name in ("vertices", "triangles"):
        if name not in sections:
            raise MeshError(f"missing ${name} section")
    vertices = _read_section(sections["vertices"], 2, float)
    triangles = _read_section(sections["triangles"], 3, int) - 1
    areas = np.sqrt(2 * np.abs(_signed_areas(vertices, triangles)))
    return Mesh(vertices, triangles, float(areas.max()))


def _read_section(rows, width, kind):
    count = int(rows[0][0]) if rows and len(rows[0]) == 1 else None
    body = rows[1:] if count is not None else rows
    if count is not None and len(body) != count:
        raise MeshError(f"section declares {count} entries, found {len(body)}")
    data = []
    for k, row in enumerate(body):
        if len(row) != width + 1:
            raise MeshError(f"malformed line: {' '.join(row)}")
        if int(row[0]) != k + 1:
            raise MeshError(f"ids must be consecutive from 1, found {row[0]} at position {k + 1}")
        data.append([kind(v) for v in row[1:]])
    return np.array(data, dtype=kind).reshape(-1, width)


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
