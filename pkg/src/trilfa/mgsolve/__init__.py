"""Geometric multigrid on uniformly refined equilateral triangles."""
from __future__ import annotations

import numpy as np

from ..smoother import BlockSpec
from .assembly import SparseOperator, assemble, assemble_full, boundary_lift
from .cycle import ConvergenceReport, CoarseSolver, CycleSpec, Multigrid, asymptotic_factor, solve
from .experiments import cavity_benchmark, kappa_robustness, lid_velocity, measure_factor
from .hierarchy import Hierarchy, build_hierarchy, prolongation
from .mesh import TriMesh, build_mesh, read_mesh, write_mesh
from .vanka import BlockSmoother, build_blocks, schur_solve

__all__ = [
    "TriMesh", "build_mesh", "write_mesh", "read_mesh",
    "SparseOperator", "assemble", "assemble_full", "boundary_lift",
    "Hierarchy", "build_hierarchy", "prolongation",
    "BlockSmoother", "build_blocks", "schur_solve", "vanka_sweep",
    "CycleSpec", "ConvergenceReport", "CoarseSolver", "Multigrid", "cycle",
    "asymptotic_factor", "solve",
    "measure_factor", "cavity_benchmark", "kappa_robustness", "lid_velocity",
]


def vanka_sweep(op: SparseOperator, blocks, solver: str, omega, state, rhs) -> np.ndarray:
    """One multiplicative sweep over ``blocks`` (lists of unknown indices), in place.

    ``solver`` is ``Full`` (dense local solve) or ``Diagonal`` (closed-form
    Schur solve, pivot on the unknown whose variable occurs once per block).
    ``omega`` holds one factor per variable of ``op``.
    """
    q = max(len(b) for b in blocks)
    members = np.full((len(blocks), q), -1, dtype=np.int64)
    for i, b in enumerate(blocks):
        members[i, :len(b)] = b
    counts = np.array([len(b) for b in blocks])
    omega = tuple(float(w) for w in omega)
    # the block spec only carries the solver choice and relaxation factors here
    if solver == "Diagonal":
        last = len(omega) - 1
        spec = BlockSpec(len(omega), ((0, (0, 0)), (0, (1, 0)), (last, (0, 0))), "Diagonal", omega)
    else:
        spec = BlockSpec(len(omega), ((0, (0, 0)),), "Full", omega)
    sm = BlockSmoother.from_blocks(op, spec, members, counts)
    return sm.sweep(state, rhs)


def cycle(h: Hierarchy, spec: CycleSpec, state, rhs, mg: Multigrid | None = None) -> np.ndarray:
    """One V or W cycle on the finest level of ``h``, in place."""
    mg = mg or Multigrid(h, spec)
    return mg.cycle(state, rhs)
