"""Global sparse assembly with boundary elimination.

Unknowns are laid out by variable. For Stokes the full index is
``var * nv + vertex`` (``var`` 0, 1, 2 for u, v, p); for curl-curl it is the
edge id. Dirichlet unknowns (boundary velocities, boundary edges) are removed;
``free`` maps full indices to reduced ones (-1 when eliminated).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .. import fem
from ..discretizations import ProblemSpec
from .mesh import TriMesh

__all__ = ["SparseOperator", "assemble", "assemble_full", "boundary_lift"]


@dataclass
class SparseOperator:
    A: sp.csr_matrix
    kind: str
    nfull: int
    free: np.ndarray        # full -> reduced index, -1 when eliminated
    full_index: np.ndarray  # reduced -> full index
    var: np.ndarray         # variable of each reduced unknown
    site: np.ndarray        # vertex or edge id of each reduced unknown

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def layout(self) -> dict:
        names = ("u", "v", "p") if self.kind == "Stokes" else ("e1", "e2", "e3")
        return {nm: np.nonzero(self.var == j)[0] for j, nm in enumerate(names)}


def _element_data(mesh: TriMesh, problem: ProblemSpec, sel=slice(None)):
    tri = mesh.triangles[sel]
    X = mesh.vertices[tri]
    if problem.kind == "Stokes":
        E = fem.stokes_element(X, problem.beta, np.full(len(tri), mesh.h))
        dofs = np.concatenate([tri, tri + mesh.nv, tri + 2 * mesh.nv], axis=1)
        return E, dofs, 3 * mesh.nv
    N, M = fem.nedelec_elements(X, mesh.tri_signs[sel])
    return N + problem.kappa * M, mesh.tri_edges[sel], mesh.ne


def assemble_full(mesh: TriMesh, problem: ProblemSpec, chunk: int = 1 << 17) -> sp.csr_matrix:
    """Matrix over all unknowns, boundary included (natural boundary conditions).

    Triangles are processed in chunks to bound the size of the COO buffers.
    """
    A = None
    for lo in range(0, mesh.nt, chunk):
        E, dofs, nfull = _element_data(mesh, problem, slice(lo, lo + chunk))
        nloc = dofs.shape[1]
        rows = np.repeat(dofs, nloc, axis=1).ravel()
        cols = np.tile(dofs, (1, nloc)).ravel()
        part = sp.csr_matrix((E.ravel(), (rows, cols)), shape=(nfull, nfull))
        A = part if A is None else A + part
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def _dirichlet(mesh: TriMesh, kind: str) -> np.ndarray:
    if kind == "Stokes":
        vb = mesh.vertex_boundary
        return np.concatenate([vb, vb, np.zeros(mesh.nv, dtype=bool)])
    return mesh.edge_boundary.copy()


def assemble(mesh: TriMesh, problem: ProblemSpec) -> SparseOperator:
    Afull = assemble_full(mesh, problem)
    fixed = _dirichlet(mesh, problem.kind)
    keep = np.nonzero(~fixed)[0]
    free = np.full(len(fixed), -1, dtype=np.int64)
    free[keep] = np.arange(len(keep))
    A = Afull[keep][:, keep].tocsr()
    A.sort_indices()
    if problem.kind == "Stokes":
        var, site = np.divmod(keep, mesh.nv)
    else:
        var, site = mesh.edge_sub[keep] - 1, keep
    return SparseOperator(A, problem.kind, len(fixed), free, keep, var, site)


def boundary_lift(mesh: TriMesh, problem: ProblemSpec, op: SparseOperator, g_full) -> np.ndarray:
    """Right-hand side ``-A_{free, fixed} g`` for prescribed boundary values ``g``."""
    Afull = assemble_full(mesh, problem)
    g = np.asarray(g_full, dtype=float)
    fixed = op.free < 0
    gb = np.where(fixed, g, 0.0)
    return -(Afull @ gb)[op.full_index]
