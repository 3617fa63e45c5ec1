"""Uniformly refined meshes of the unit equilateral triangle.

Vertices are the lattice points ``0 <= l <= k <= n`` with ``n = 2**level``;
vertex ``(k, l)`` sits at ``k h e1 + l h e2``. Edges carry the subgrid id of
the lattice direction they follow: 1 for ``(k,l)->(k+1,l)``, 2 for
``(k,l)->(k,l+1)`` and 3 for ``(k,l)->(k+1,l+1)``, oriented along it.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..discretizations import cell_triangles
from ..lattice import equilateral_basis, node_position

__all__ = ["TriMesh", "build_mesh", "write_mesh", "read_mesh"]

MAX_LEVEL = 10
EDGE_DIRS = {1: (1, 0), 2: (0, 1), 3: (1, 1)}


@dataclass
class TriMesh:
    level: int
    n: int
    h: float
    kl: np.ndarray          # (nv, 2) lattice index per vertex
    vertices: np.ndarray    # (nv, 2) positions
    vid: np.ndarray         # (n+1, n+1) lattice -> vertex id, -1 outside
    triangles: np.ndarray   # (nt, 3) vertex ids
    tri_edges: np.ndarray   # (nt, 3) edge ids aligned with fem.LOCAL_EDGES
    tri_signs: np.ndarray   # (nt, 3) orientation of local edges
    edges: np.ndarray       # (ne, 2) vertex ids, oriented
    edge_sub: np.ndarray    # (ne,) subgrid id 1..3
    edge_kl: np.ndarray     # (ne, 2) lattice index of the edge's start vertex
    eid: np.ndarray         # (4, n+1, n+1) (sub, k, l) -> edge id, -1 outside
    vertex_boundary: np.ndarray
    edge_boundary: np.ndarray

    @property
    def nv(self) -> int:
        return len(self.vertices)

    @property
    def ne(self) -> int:
        return len(self.edges)

    @property
    def nt(self) -> int:
        return len(self.triangles)


def build_mesh(level: int) -> TriMesh:
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"mesh level must lie in [0, {MAX_LEVEL}], got {level}")
    n = 2 ** level
    h = 1.0 / n
    k, l = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    inside = l <= k
    # lexicographic numbering, l outer and k inner
    order = np.lexsort((k[inside], l[inside]))
    kl = np.column_stack([k[inside], l[inside]])[order]
    vid = np.full((n + 1, n + 1), -1, dtype=np.int64)
    vid[kl[:, 0], kl[:, 1]] = np.arange(len(kl))
    vertices = node_position(equilateral_basis(h), 0, kl[:, 0], kl[:, 1])

    eid = np.full((4, n + 1, n + 1), -1, dtype=np.int64)
    ekl, esub = [], []
    for sub, (dk, dl) in EDGE_DIRS.items():
        ok = inside & (k + dk <= n) & (l + dl <= k + dk)
        kk, ll = k[ok], l[ok]
        ekl.append(np.column_stack([kk, ll]))
        esub.append(np.full(len(kk), sub))
    ekl = np.concatenate(ekl)
    esub = np.concatenate(esub)
    order = np.lexsort((esub, ekl[:, 0], ekl[:, 1]))
    ekl, esub = ekl[order], esub[order]
    eid[esub, ekl[:, 0], ekl[:, 1]] = np.arange(len(esub))
    d = np.array([EDGE_DIRS[s] for s in esub])
    edges = np.column_stack([vid[ekl[:, 0], ekl[:, 1]], vid[ekl[:, 0] + d[:, 0], ekl[:, 1] + d[:, 1]]])

    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a, b = a.ravel(), b.ravel()
    verts, tedges = cell_triangles(a, b)
    keep_upper = b <= a
    keep_lower = b < a
    verts = np.concatenate([verts[keep_upper, 0], verts[keep_lower, 1]])
    tedges = np.concatenate([tedges[keep_upper, 0], tedges[keep_lower, 1]])
    triangles = vid[verts[..., 0], verts[..., 1]]
    tri_edges = eid[tedges[..., 0], tedges[..., 1], tedges[..., 2]]
    if (triangles < 0).any() or (tri_edges < 0).any():
        raise RuntimeError("inconsistent mesh connectivity")

    vb = (kl[:, 1] == 0) | (kl[:, 0] == n) | (kl[:, 0] == kl[:, 1])
    eb = (((esub == 1) & (ekl[:, 1] == 0)) | ((esub == 2) & (ekl[:, 0] == n))
          | ((esub == 3) & (ekl[:, 0] == ekl[:, 1])))
    return TriMesh(level, n, h, kl, vertices, vid, triangles, tri_edges,
                   tedges[..., 3].astype(float), edges, esub, ekl, eid, vb, eb)


def write_mesh(mesh: TriMesh, path) -> Path:
    """Plain-text export: vertex, triangle and edge sections with counts.

    ::

        # trilfa mesh level <L>
        vertices <nv>
        <id> <x> <y> <k> <l> <boundary>
        triangles <nt>
        <id> <v0> <v1> <v2>
        edges <ne>
        <id> <v0> <v1> <sub> <boundary>
    """
    path = Path(path)
    lines = [f"# trilfa mesh level {mesh.level}", f"vertices {mesh.nv}"]
    for i, ((x, y), (k, l), b) in enumerate(zip(mesh.vertices, mesh.kl, mesh.vertex_boundary)):
        lines.append(f"{i} {x:.17g} {y:.17g} {k} {l} {int(b)}")
    lines.append(f"triangles {mesh.nt}")
    lines += [f"{i} {t[0]} {t[1]} {t[2]}" for i, t in enumerate(mesh.triangles)]
    lines.append(f"edges {mesh.ne}")
    for i, (e, s, b) in enumerate(zip(mesh.edges, mesh.edge_sub, mesh.edge_boundary)):
        lines.append(f"{i} {e[0]} {e[1]} {s} {int(b)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_mesh(path) -> dict:
    """Parse a file written by :func:`write_mesh` into plain arrays."""
    out, section, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        head = line.split()
        if head[0] in ("vertices", "triangles", "edges"):
            if section:
                out[section] = np.array(rows, dtype=float)
            section, rows = head[0], []
            continue
        rows.append([float(x) for x in head[1:]])
    if section:
        out[section] = np.array(rows, dtype=float)
    return out
