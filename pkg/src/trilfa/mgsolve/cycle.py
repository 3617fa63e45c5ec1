"""V/W cycles and asymptotic convergence measurement."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..smoother import BlockSpec, preset
from .hierarchy import Hierarchy
from .vanka import BlockSmoother

__all__ = ["CycleSpec", "ConvergenceReport", "CoarseSolver", "Multigrid", "asymptotic_factor", "solve"]

MAX_DIRECT = 10_000


@dataclass(frozen=True)
class CycleSpec:
    kind: str = "V"
    nu1: int = 1
    nu2: int = 1
    smoother: str = "stokes-diag"
    omega: tuple = (1.0, 1.0, 1.0)
    coarsest: int | None = None  # None: level 3, or levels - 1 when smaller

    def __post_init__(self):
        if self.kind not in ("V", "W"):
            raise ValueError(f"unknown cycle kind {self.kind!r}")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValueError("smoothing counts must be non-negative")
        if self.coarsest is not None and self.coarsest < 1:
            raise ValueError("coarsest level must be at least 1")

    @property
    def gamma(self) -> int:
        return 1 if self.kind == "V" else 2

    def block(self) -> BlockSpec:
        return preset(self.smoother, tuple(self.omega))


@dataclass
class ConvergenceReport:
    rho_h: float
    diverged: bool
    iterations_to_tol: int | None = None
    history: list = field(default_factory=list)

    def csv_rows(self):
        return [(i, float(r)) for i, r in enumerate(self.history)]


class CoarseSolver:
    """Sparse LU of the coarsest operator.

    For Stokes the matrix is bordered with the pressure-mean constraint,
    which removes the constant-pressure kernel without breaking symmetry.
    """

    def __init__(self, op, max_dim: int = MAX_DIRECT):
        if op.dim > max_dim:
            raise ValueError(f"coarsest system has {op.dim} unknowns, above the direct-solve limit {max_dim}")
        A = op.A
        self.n = op.dim
        self.stokes = op.kind == "Stokes"
        if self.stokes:
            e = (op.var == 2).astype(float)[:, None]
            A = sp.bmat([[A, sp.csr_matrix(e)], [sp.csr_matrix(e.T), None]])
        try:
            self.lu = spla.splu(sp.csc_matrix(A))
        except RuntimeError as exc:
            raise np.linalg.LinAlgError(f"coarsest direct solve failed: {exc}") from exc

    def __call__(self, f):
        rhs = np.append(f, 0.0) if self.stokes else f
        return self.lu.solve(rhs)[:self.n]


class Multigrid:
    def __init__(self, H: Hierarchy, spec: CycleSpec, max_direct: int = MAX_DIRECT):
        self.H = H
        self.spec = spec
        block = spec.block()
        if block.m != 3:
            raise ValueError("block preset does not match the problem")
        self.smoothers = [None] + [BlockSmoother.build(m, op, block)
                                   for m, op in zip(H.meshes[1:], H.operators[1:])]
        self.R = [H.restriction(j) for j in range(H.levels - 1)]
        self._coarse = CoarseSolver(H.operators[0], max_direct)
        self.stokes = H.problem.kind == "Stokes"
        self._pidx = [np.nonzero(op.var == 2)[0] for op in H.operators] if self.stokes else None

    def project(self, x, j):
        if self.stokes:
            p = self._pidx[j]
            x[p] -= x[p].mean()
        return x

    def residual(self, x, f, j=None):
        j = self.H.levels - 1 if j is None else j
        return f - self.H.operators[j].A @ x

    def cycle(self, x, f, j=None):
        """One cycle on level ``j`` (finest by default); updates ``x`` in place."""
        j = self.H.levels - 1 if j is None else j
        if j == 0:
            x[:] = self._coarse(f)
            return self.project(x, 0)
        sm = self.smoothers[j]
        for _ in range(self.spec.nu1):
            sm.sweep(x, f)
        rc = self.R[j - 1] @ self.residual(x, f, j)
        ec = np.zeros(len(rc))
        for _ in range(self.spec.gamma if j > 1 else 1):
            self.cycle(ec, rc, j - 1)
        x += self.H.prolongations[j - 1] @ ec
        self.project(x, j)
        for _ in range(self.spec.nu2):
            sm.sweep(x, f)
        return self.project(x, j)


def asymptotic_factor(H: Hierarchy, spec: CycleSpec, iters: int = 30, seed: int = 42,
                      mg: Multigrid | None = None) -> ConvergenceReport:
    """Measured factor for zero right-hand side and a random initial guess.

    The iterate is renormalized after every cycle; the factor is the
    geometric mean of the residual ratios of the last 10 cycles, after
    at least 20 burn-in cycles.
    """
    if iters < 30:
        raise ValueError("need at least 30 iterations")
    mg = mg or Multigrid(H, spec)
    rng = np.random.default_rng(seed)
    n = H.operators[-1].dim
    x = rng.uniform(-1.0, 1.0, n)
    f = np.zeros(n)
    mg.project(x, H.levels - 1)
    r0 = np.linalg.norm(mg.residual(x, f))
    x /= r0
    ratios, hist, scale = [], [r0], r0
    diverged = False
    for _ in range(iters):
        mg.cycle(x, f)
        r = np.linalg.norm(mg.residual(x, f))
        if not np.isfinite(r):
            diverged = True
            break
        ratios.append(r)
        scale *= r
        hist.append(scale)
        if r == 0.0:
            break
        x /= r
    ratios = np.array(ratios)
    if len(ratios) and ratios[-1] == 0.0:
        return ConvergenceReport(0.0, False, history=hist)
    diverged |= bool((ratios > 1.5).any())
    tail = ratios[-10:]
    rho = float(np.exp(np.mean(np.log(tail)))) if len(tail) else np.inf
    return ConvergenceReport(rho, diverged or rho >= 1.0, history=hist)


def solve(mg: Multigrid, f, x0=None, tol: float = 1e-10, maxiter: int = 200) -> tuple:
    """Iterate cycles until ``|r| <= tol |r0|``; returns ``(x, report)``."""
    x = np.zeros_like(f) if x0 is None else np.array(x0, dtype=float)
    r0 = np.linalg.norm(mg.residual(x, f))
    hist = [r0]
    it = 0
    while hist[-1] > tol * r0 and it < maxiter:
        mg.cycle(x, f)
        hist.append(np.linalg.norm(mg.residual(x, f)))
        it += 1
        if not np.isfinite(hist[-1]) or hist[-1] > 1e6 * r0:
            break
    ok = hist[-1] <= tol * r0
    ratios = np.array(hist[1:]) / np.maximum(np.array(hist[:-1]), 1e-300)
    rho = float(np.exp(np.mean(np.log(ratios[-10:])))) if len(ratios) else 0.0
    return x, ConvergenceReport(rho, not ok, it if ok else None, hist)
