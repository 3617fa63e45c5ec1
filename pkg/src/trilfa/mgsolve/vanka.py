"""Multiplicative overlapping block (Vanka-type) relaxation on sparse matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..smoother import BlockSpec, SingularBlockError
from .assembly import SparseOperator
from .mesh import TriMesh

__all__ = ["BlockSmoother", "build_blocks", "schur_solve"]

# blocks are rejected only when numerically singular; curl-curl vertex blocks
# with tiny kappa are legitimately ill-conditioned (gradient near-kernel)
_COND_LIMIT = 1.0 / np.finfo(float).eps


def build_blocks(mesh: TriMesh, op: SparseOperator, spec: BlockSpec):
    """Member index lists per anchor vertex, truncated at the boundary.

    Anchors follow the vertex numbering, which is lexicographic (``l`` outer,
    ``k`` inner). Returns ``(members, counts, anchors)``; ``members`` is padded
    with -1.
    """
    k, l = mesh.kl[:, 0], mesh.kl[:, 1]
    n = mesh.n
    cols = []
    for r, (dk, dl) in spec.members:
        kk, ll = k + dk, l + dl
        ok = (kk >= 0) & (kk <= n) & (ll >= 0) & (ll <= n)
        if op.kind == "Stokes":
            v = np.where(ok, mesh.vid[np.clip(kk, 0, n), np.clip(ll, 0, n)], -1)
            full = np.where(v >= 0, r * mesh.nv + v, -1)
        else:
            full = np.where(ok, mesh.eid[r + 1, np.clip(kk, 0, n), np.clip(ll, 0, n)], -1)
        cols.append(np.where(full >= 0, op.free[np.maximum(full, 0)], -1))
    raw = np.stack(cols, axis=1)
    counts = (raw >= 0).sum(axis=1)
    # compact each row, keeping member order
    order = np.argsort(raw < 0, axis=1, kind="stable")
    members = np.take_along_axis(raw, order, axis=1)
    use = counts > 0
    return members[use], counts[use], np.nonzero(use)[0]


def schur_solve(D, b, c, ru, rp):
    """Solve ``[[diag(D), b], [b^T, c]] [du; dp] = [ru; rp]`` in closed form."""
    Dinv_b = b / D
    denom = b @ Dinv_b - c
    dp = (Dinv_b @ ru - rp) / denom
    return (ru - dp * b) / D, dp


@numba.njit(cache=True)
def _residual(indptr, indices, data, x, f, i):
    s = f[i]
    for jj in range(indptr[i], indptr[i + 1]):
        s -= data[jj] * x[indices[jj]]
    return s


@numba.njit(cache=True)
def _sweep_dense(indptr, indices, data, x, f, members, counts, mat_id, inv, omega):
    nb = members.shape[0]
    q = members.shape[1]
    r = np.empty(q)
    for b in range(nb):
        c = counts[b]
        for a in range(c):
            r[a] = _residual(indptr, indices, data, x, f, members[b, a])
        M = inv[mat_id[b]]
        for a in range(c):
            d = 0.0
            for e in range(c):
                d += M[a, e] * r[e]
            x[members[b, a]] += omega[b, a] * d


@numba.njit(cache=True)
def _sweep_schur(indptr, indices, data, x, f, members, counts, piv, D, B, C, omega):
    nb = members.shape[0]
    q = members.shape[1]
    r = np.empty(q)
    for b in range(nb):
        c = counts[b]
        p = piv[b]
        for a in range(c):
            r[a] = _residual(indptr, indices, data, x, f, members[b, a])
        num = -r[p]
        den = -C[b]
        for a in range(c):
            if a != p:
                num += B[b, a] / D[b, a] * r[a]
                den += B[b, a] * B[b, a] / D[b, a]
        dp = num / den
        for a in range(c):
            if a != p:
                x[members[b, a]] += omega[b, a] * (r[a] - dp * B[b, a]) / D[b, a]
        x[members[b, p]] += omega[b, p] * dp


@dataclass
class BlockSmoother:
    """Precomputed block data for one level.

    ``Full`` blocks store inverses of the principal submatrices, shared
    between blocks with identical local matrices. ``Diagonal`` blocks store
    the diagonal, the coupling column of the single Schur variable and its
    diagonal entry.
    """

    op: SparseOperator
    spec: BlockSpec
    members: np.ndarray
    counts: np.ndarray
    anchors: np.ndarray
    omega: np.ndarray
    mat_id: np.ndarray | None = None
    inv: np.ndarray | None = None
    piv: np.ndarray | None = None
    D: np.ndarray | None = None
    B: np.ndarray | None = None
    C: np.ndarray | None = None

    @classmethod
    def build(cls, mesh: TriMesh, op: SparseOperator, spec: BlockSpec) -> "BlockSmoother":
        members, counts, anchors = build_blocks(mesh, op, spec)
        return cls.from_blocks(op, spec, members, counts, anchors, mesh)

    @classmethod
    def from_blocks(cls, op: SparseOperator, spec: BlockSpec, members, counts, anchors=None,
                    mesh: TriMesh | None = None) -> "BlockSmoother":
        """Smoother over explicit member lists (rows padded with -1, visited in order)."""
        members = np.asarray(members, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        anchors = np.arange(len(counts)) if anchors is None else np.asarray(anchors)
        var = np.where(members >= 0, op.var[np.maximum(members, 0)], -1)
        omega = np.where(members >= 0, np.asarray(spec.omega)[np.maximum(var, 0)], 0.0)
        self = cls(op, spec, members, counts, anchors, omega)
        if spec.local_solver == "Full":
            self._factor_full(mesh)
        else:
            self._split_diagonal(var, mesh)
        return self

    def _entries(self, rows, a, e):
        """``A[members[rows, a], members[rows, e]]`` with zeros for padding."""
        ia, ie = self.members[rows, a], self.members[rows, e]
        ok = (ia >= 0) & (ie >= 0)
        vals = np.asarray(self.op.A[np.maximum(ia, 0), np.maximum(ie, 0)]).ravel()
        return np.where(ok, vals, 0.0)

    def _anchor(self, mesh, b):
        if mesh is None:
            return int(self.anchors[b])
        return tuple(int(v) for v in mesh.kl[self.anchors[b]])

    def _factor_full(self, mesh, chunk: int = 65536):
        nb, q = self.members.shape
        scale = abs(self.op.A).max()
        cache, inv = {}, []
        mat_id = np.empty(nb, dtype=np.int64)
        for lo in range(0, nb, chunk):
            rows = np.arange(lo, min(nb, lo + chunk))
            local = np.zeros((len(rows), q, q))
            for a in range(q):
                for e in range(q):
                    local[:, a, e] = self._entries(rows, a, e)
            keys = np.round(local.reshape(len(rows), -1) / scale, 12)
            uniq, first, which = np.unique(keys, axis=0, return_index=True, return_inverse=True)
            ids = np.empty(len(uniq), dtype=np.int64)
            for u, j in enumerate(first):
                key = uniq[u].tobytes()
                if key not in cache:
                    b = lo + j
                    c = self.counts[b]
                    Ab = local[j, :c, :c]
                    if not np.linalg.cond(Ab) < _COND_LIMIT:
                        raise SingularBlockError(f"singular block {b} at anchor {self._anchor(mesh, b)}")
                    full = np.zeros((q, q))
                    full[:c, :c] = np.linalg.inv(Ab)
                    cache[key] = len(inv)
                    inv.append(full)
                ids[u] = cache[key]
            mat_id[rows] = ids[which.ravel()]
        self.mat_id = mat_id
        self.inv = np.array(inv)

    def _split_diagonal(self, var, mesh):
        nb, q = self.members.shape
        schur = self.spec.schur_vars
        if len(schur) != 1:
            raise ValueError("the closed-form diagonal solve needs exactly one Schur variable")
        ispiv = var == schur[0]
        if not ispiv.any(axis=1).all():
            raise SingularBlockError("a block lacks its Schur variable")
        piv = np.argmax(ispiv, axis=1)
        rows = np.arange(nb)
        pm = self.members[rows, piv]
        D = np.ones((nb, q))
        B = np.zeros((nb, q))
        for a in range(q):
            ia = self.members[:, a]
            ok = ia >= 0
            D[:, a] = np.where(ok, np.asarray(self.op.A[np.maximum(ia, 0), np.maximum(ia, 0)]).ravel(), 1.0)
            B[:, a] = np.where(ok, np.asarray(self.op.A[np.maximum(ia, 0), pm]).ravel(), 0.0)
        C = np.asarray(self.op.A[pm, pm]).ravel()
        B[rows, piv] = 0.0
        den = np.einsum("bq,bq->b", B, B / D) - C
        bad = (D == 0).any(axis=1) | (np.abs(den) < 1e-14 * np.abs(D).max(axis=1))
        if bad.any():
            b = int(np.nonzero(bad)[0][0])
            raise SingularBlockError(f"zero Schur denominator in block {b} at anchor {self._anchor(mesh, b)}")
        self.piv, self.D, self.B, self.C = piv.astype(np.int64), D, B, C

    def sweep(self, x, f):
        """One lexicographic relaxation step, in place."""
        A = self.op.A
        if self.spec.local_solver == "Full":
            _sweep_dense(A.indptr, A.indices, A.data, x, f, self.members, self.counts,
                         self.mat_id, self.inv, self.omega)
        else:
            _sweep_schur(A.indptr, A.indices, A.data, x, f, self.members, self.counts,
                         self.piv, self.D, self.B, self.C, self.omega)
        return x
