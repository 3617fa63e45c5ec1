"""Solver experiments: measured factors, the triangular cavity and kappa robustness."""
from __future__ import annotations

import numpy as np

from ..discretizations import ProblemSpec
from .assembly import boundary_lift
from .cycle import ConvergenceReport, CycleSpec, Multigrid, asymptotic_factor, solve
from .hierarchy import build_hierarchy

__all__ = ["measure_factor", "cavity_benchmark", "kappa_robustness", "lid_velocity"]


def measure_factor(problem: ProblemSpec, spec: CycleSpec, levels: int, two_level: bool = False,
                   iters: int = 30, seed: int = 42) -> ConvergenceReport:
    """Asymptotic factor of a full hierarchy, or of the two-level method on ``levels``.

    The two-level variant solves the ``levels - 1`` problem exactly, which is
    what the two-grid analysis predicts.
    """
    coarsest = levels - 1 if two_level else spec.coarsest
    H = build_hierarchy(problem, levels, coarsest=coarsest)
    mg = Multigrid(H, spec, max_direct=10 ** 5 if two_level else 10 ** 4)
    return asymptotic_factor(H, spec, iters=iters, seed=seed, mg=mg)


def lid_velocity(mesh) -> np.ndarray:
    """Full-layout boundary data: unit tangential velocity on the side ``y = 0``.

    The two lid endpoints keep the no-slip value.
    """
    g = np.zeros(3 * mesh.nv)
    k, l = mesh.kl[:, 0], mesh.kl[:, 1]
    lid = (l == 0) & (k > 0) & (k < mesh.n)
    g[:mesh.nv][lid] = 1.0
    return g


def cavity_benchmark(levels: int, spec: CycleSpec, tol: float = 1e-10, maxiter: int = 200,
                     beta: float = 1.0 / 12.0) -> ConvergenceReport:
    """Iterations to reduce the initial residual of the lid-driven cavity by ``tol``."""
    problem = ProblemSpec("Stokes", beta=beta)
    H = build_hierarchy(problem, levels, coarsest=spec.coarsest)
    mesh, op = H.meshes[-1], H.operators[-1]
    f = boundary_lift(mesh, ProblemSpec("Stokes", mesh.h, beta), op, lid_velocity(mesh))
    mg = Multigrid(H, spec)
    _, rep = solve(mg, f, tol=tol, maxiter=maxiter)
    return rep


def kappa_robustness(levels_list, kappas, spec: CycleSpec | None = None, tol: float = 1e-10,
                     maxiter: int = 200, seed: int = 42) -> dict:
    """Iteration counts ``{(kappa, levels): n}`` for curl-curl, zero rhs and random start.

    Counts are ``None`` when the tolerance is not reached within ``maxiter``.
    """
    spec = spec or CycleSpec("V", 1, 1, "nedelec-vertex")
    out = {}
    for kappa in kappas:
        for L in levels_list:
            H = build_hierarchy(ProblemSpec("CurlCurl", kappa=kappa), L, coarsest=spec.coarsest)
            mg = Multigrid(H, spec)
            n = H.operators[-1].dim
            x0 = np.random.default_rng(seed).uniform(-1.0, 1.0, n)
            _, rep = solve(mg, np.zeros(n), x0=x0, tol=tol, maxiter=maxiter)
            out[(kappa, L)] = rep.iterations_to_tol
    return out
