"""Inter-grid transfer stencils and their Fourier symbols.

Prolongation is the canonical finite-element interpolation of a coarse
function: nodal values of the coarse P1 hat functions, or tangential line
integrals of the coarse Whitney functions along fine edges. Restriction is
the transpose, which is the consistent choice for unscaled FE matrices.

A transfer stencil entry ``(i, r, dk, dl) -> w`` means the fine unknown of
variable ``i`` at lattice index ``x`` receives ``w * U_r(X)`` where
``x - 2 X = (dk, dl)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .discretizations import cell_triangles
from .lattice import SUBGRID_DELTAS, equilateral_basis, node_position

__all__ = [
    "TransferStencil",
    "nodal_prolongation",
    "edge_prolongation",
    "transfer_for",
    "gradient_symbol",
]

_EDGE_DIRS = {1: (1, 0), 2: (0, 1), 3: (1, 1)}


def _coarse_triangle(p):
    """Coarse cell and triangle (0 upper, 1 lower) containing lattice point ``p``."""
    a, b = np.floor(p[0]), np.floor(p[1])
    s, t = p[0] - a, p[1] - b
    return int(a), int(b), 0 if s >= t else 1


def _coarse_basis_at(kind, p, basis):
    """Values of all coarse basis functions nonzero at lattice point ``p``.

    ``p`` is in coarse lattice units. Returns ``[(r, K, L, value)]`` where
    ``value`` is a scalar (nodal) or a 2-vector (Whitney, in coarse-unit geometry).
    """
    a, b, tri = _coarse_triangle(p)
    verts, edges = cell_triangles(np.array([a]), np.array([b]))
    V = verts[0, tri]
    X = node_position(basis, 0, V[:, 0], V[:, 1])[None]
    x = node_position(basis, 0, p[0], p[1])[None]
    if kind == "nodal":
        _, G = fem.barycentric_gradients(X)
        lam1 = G[0, 1] @ (x[0] - X[0, 0])
        lam2 = G[0, 2] @ (x[0] - X[0, 0])
        lam = (1.0 - lam1 - lam2, lam1, lam2)
        return [(0, int(V[j, 0]), int(V[j, 1]), lam[j]) for j in range(3)]
    E = edges[0, tri]
    phi = fem.whitney_eval(X, E[None, :, 3].astype(float), x)[0]
    return [(int(E[j, 0]) - 1, int(E[j, 1]), int(E[j, 2]), phi[j]) for j in range(3)]


@dataclass
class TransferStencil:
    kind: str
    subgrids: tuple
    entries: dict

    @property
    def m(self) -> int:
        return len(self.subgrids)

    def arrays(self):
        keys = sorted(self.entries)
        arr = np.array(keys, dtype=int).reshape(-1, 4)
        return arr[:, 0], arr[:, 1], arr[:, 2:4], np.array([self.entries[k] for k in keys])

    def symbols(self, fine_thetas, coarse_theta):
        """Return ``(P, R)`` restricted to the harmonics ``fine_thetas``.

        ``fine_thetas`` has shape ``(4, 2)`` or ``(N, 4, 2)`` and ``coarse_theta``
        shape ``(2,)`` or ``(N, 2)``. ``P`` has shape ``(..., 4 m, m)`` and ``R``
        shape ``(..., m, 4 m)``, fine index ordered (harmonic, variable). Each
        fine frequency must satisfy ``2 theta == coarse_theta (mod 2 pi)``.
        ``P`` is obtained by projecting the prolongated coarse mode onto the
        harmonic basis, so any representative of a frequency class may be used
        as long as the same one is used for the fine-grid symbols.
        """
        phis = np.asarray(fine_thetas, dtype=float)
        Th = np.asarray(coarse_theta, dtype=float)
        single = phis.ndim == 2
        if single:
            phis, Th = phis[None], Th[None]
        if phis.shape[1] != 4:
            raise ValueError("prolongation symbols need the 4 harmonics of one coarse mode")
        N, m = phis.shape[0], self.m
        d = np.array([SUBGRID_DELTAS[s] for s in self.subgrids])
        I, R, off, w = self.arrays()
        P = np.zeros((N, 4 * m, m), dtype=complex)
        Rm = np.zeros((N, m, 4 * m), dtype=complex)
        xs = np.array([(0, 0), (0, 1), (1, 0), (1, 1)])
        for i in range(m):
            # F[n, x, alpha] = fine mode alpha of variable i at lattice point x
            F = np.exp(1j * np.einsum("xd,nad->nxa", xs + d[i], phis))
            for r in range(m):
                sel = (I == i) & (R == r)
                if not sel.any():
                    continue
                vals = np.zeros((N, 4), dtype=complex)
                for j, x in enumerate(xs):
                    X2 = x[None, :] - off[sel]
                    ok = np.all(X2 % 2 == 0, axis=1)
                    if ok.any():
                        Xc = X2[ok] // 2 + d[r]
                        vals[:, j] = np.exp(1j * Th @ Xc.T) @ w[sel][ok]
                P[:, i::m, r] = np.linalg.solve(F, vals[..., None])[..., 0]
                # R = P^T applied to fine mode alpha, read at coarse index 0
                val = np.exp(1j * np.einsum("nad,td->nat", phis, off[sel] + d[i])) @ w[sel]
                Rm[:, r, i::m] = val / np.exp(1j * Th @ d[r])[:, None]
        return (P[0], Rm[0]) if single else (P, Rm)


def _snap(val):
    # interpolation weights are multiples of 1/8; remove geometric round-off
    q = np.round(val * 8.0) / 8.0
    return float(q) if abs(q - val) < 1e-12 else float(val)


def _collect(kind, subgrids, basis, radius=3):
    entries = {}
    for i, sub in enumerate(subgrids):
        dx, dy = SUBGRID_DELTAS[sub]
        for k in range(-radius, radius + 1):
            for l in range(-radius, radius + 1):
                if kind == "nodal":
                    pt = np.array([k, l], dtype=float)
                    for _, K, L, val in _coarse_basis_at("nodal", pt / 2.0, basis):
                        if abs(val) > 1e-14:
                            entries[(i, i, k - 2 * K, l - 2 * L)] = _snap(val)
                else:
                    mid = np.array([k + dx, l + dy])
                    t = np.array(_EDGE_DIRS[sub], dtype=float)
                    tvec = node_position(basis, 0, t[0], t[1]) * 0.5  # fine edge in coarse units
                    for r, K, L, phi in _coarse_basis_at("edge", mid / 2.0, basis):
                        val = float(phi @ tvec)
                        if abs(val) > 1e-14:
                            entries[(i, r, k - 2 * K, l - 2 * L)] = _snap(val)
    return entries


def nodal_prolongation(m: int = 3) -> TransferStencil:
    """Linear interpolation on the triangular lattice, one copy per nodal variable."""
    basis = equilateral_basis(1.0)
    base = _collect("nodal", (0,), basis)
    entries = {}
    for (_, _, dk, dl), w in base.items():
        for v in range(m):
            entries[(v, v, dk, dl)] = w
    return TransferStencil("nodal-linear", (0,) * m, entries)


def edge_prolongation() -> TransferStencil:
    """Canonical lowest-order Nedelec interpolation of coarse Whitney functions."""
    return TransferStencil("edge-canonical", (1, 2, 3),
                           _collect("edge", (1, 2, 3), equilateral_basis(1.0)))


def transfer_for(kind: str) -> TransferStencil:
    return nodal_prolongation(3) if kind == "Stokes" else edge_prolongation()


def gradient_symbol(theta, subgrid_phase: bool = True):
    """Symbol (3 x 1) of the discrete gradient from nodal values to edge dofs."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros((3, 1), dtype=complex)
    for i, sub in enumerate((1, 2, 3)):
        d = np.array(_EDGE_DIRS[sub], dtype=float)
        val = np.exp(1j * theta @ d) - 1.0
        if subgrid_phase:
            val *= np.exp(-1j * theta @ np.array(SUBGRID_DELTAS[sub]))
        out[i, 0] = val
    return out
