"""Nested meshes, rediscretized operators and transfer matrices."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..discretizations import ProblemSpec
from ..transfer import TransferStencil, transfer_for
from .assembly import SparseOperator, assemble
from .mesh import MAX_LEVEL, TriMesh, build_mesh

__all__ = ["Hierarchy", "build_hierarchy", "prolongation"]


def _site(mesh: TriMesh, kind: str, var: int, k, l):
    """Full index of unknown ``var`` at lattice index ``(k, l)``; -1 outside."""
    n = mesh.n
    ok = (k >= 0) & (k <= n) & (l >= 0) & (l <= n)
    kc, lc = np.clip(k, 0, n), np.clip(l, 0, n)
    if kind == "Stokes":
        v = np.where(ok, mesh.vid[kc, lc], -1)
        return np.where(v >= 0, var * mesh.nv + v, -1)
    return np.where(ok, mesh.eid[var + 1, kc, lc], -1)


def prolongation(coarse: TriMesh, cop: SparseOperator, fine: TriMesh, fop: SparseOperator,
                 transfer: TransferStencil) -> sp.csr_matrix:
    """Apply the transfer stencil on the structured meshes, free unknowns only."""
    kind = cop.kind
    rows, cols, vals = [], [], []
    for (i, r, dk, dl), w in transfer.entries.items():
        sel = cop.var == r
        cfull = cop.full_index[sel]
        if kind == "Stokes":
            K, L = coarse.kl[cop.site[sel]].T
        else:
            K, L = coarse.edge_kl[cop.site[sel]].T
        ffull = _site(fine, kind, i, 2 * K + dk, 2 * L + dl)
        ok = ffull >= 0
        frow = np.where(ok, fop.free[np.maximum(ffull, 0)], -1)
        ok &= frow >= 0
        rows.append(frow[ok])
        cols.append(cop.free[cfull[ok]])
        vals.append(np.full(ok.sum(), w))
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(fop.dim, cop.dim)).tocsr()
    P.sum_duplicates()
    return P


@dataclass
class Hierarchy:
    problem: ProblemSpec
    meshes: list
    operators: list
    prolongations: list = field(default_factory=list)  # prolongations[j]: level j -> j+1

    @property
    def levels(self) -> int:
        return len(self.meshes)

    def restriction(self, j: int) -> sp.csr_matrix:
        """Restriction from level ``j+1`` to ``j``: the transpose of the prolongation."""
        return self.prolongations[j].T.tocsr()


DEFAULT_COARSEST = 3


def build_hierarchy(problem: ProblemSpec, levels: int, coarsest: int | None = None) -> Hierarchy:
    """Meshes at refinement ``coarsest .. levels`` with operators rediscretized per level.

    ``problem.h`` is ignored; every level uses its own mesh size. The default
    coarsest level is 3, the first mesh holding an interior vertex whose
    Vanka block is not truncated by the boundary (or ``levels - 1`` when
    that is smaller).
    """
    if coarsest is None:
        coarsest = min(DEFAULT_COARSEST, levels - 1)
    if not 1 <= coarsest < levels:
        raise ValueError("need 1 <= coarsest < levels")
    if levels > MAX_LEVEL:
        raise MemoryError(f"levels > {MAX_LEVEL} exceed the supported problem size")
    transfer = transfer_for(problem.kind)
    meshes, ops = [], []
    for L in range(coarsest, levels + 1):
        mesh = build_mesh(L)
        meshes.append(mesh)
        ops.append(assemble(mesh, ProblemSpec(problem.kind, mesh.h, problem.beta, problem.kappa)))
    H = Hierarchy(problem, meshes, ops)
    for j in range(len(meshes) - 1):
        H.prolongations.append(prolongation(meshes[j], ops[j], meshes[j + 1], ops[j + 1], transfer))
    return H
