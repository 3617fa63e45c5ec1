"""Smoothing, two-grid and three-grid local Fourier analysis.

Error-propagation operators are assembled as small matrices on the space
spanned by the 2h- (4 frequencies) or 4h-harmonics (16 frequencies) of one
base frequency. All routines are vectorised over batches of base
frequencies; batches are evaluated in chunks, optionally on a thread pool,
and reduced with a deterministic arg-max.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .discretizations import ProblemSpec, operator_symbol, problem_stencils
from .lattice import reduce_angle, sample_base_frequencies, sample_high_frequencies
from .smoother import BlockSpec, SmootherSymbol
from .transfer import TransferStencil, transfer_for

__all__ = [
    "EigenvalueError",
    "DegenerateConfigError",
    "KGridConfig",
    "FactorReport",
    "TransferSymbols",
    "Analyzer",
    "worker_count",
    "spectral_radius",
    "smoothing_factor",
    "transfer_symbols",
    "two_grid_factor",
    "three_grid_factor",
    "analyze",
    "omega_grid",
    "optimize_omega",
]

_PAIRS = np.array([(0, 0), (0, 1), (1, 0), (1, 1)], dtype=float)
_CHUNK = 256


class EigenvalueError(np.linalg.LinAlgError):
    pass


class DegenerateConfigError(ValueError):
    pass


def worker_count() -> int:
    """Thread count for frequency sweeps, capped by ``TRILFA_THREADS``."""
    default = min(4, os.cpu_count() or 1)
    raw = os.environ.get("TRILFA_THREADS")
    if raw is None:
        return default
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, min(n, os.cpu_count() or 1))


@dataclass(frozen=True)
class KGridConfig:
    nu1: int = 1
    nu2: int = 0
    gamma: int = 1
    coarse_op: str = "rediscretized"
    freq_n: int = 33
    singular_tol: float = 1e-10
    exclude_low: float = 0.0  # diagnostic: drop base frequencies with max|theta_i| <= this

    def __post_init__(self):
        if self.nu1 < 0 or self.nu2 < 0:
            raise ValueError("smoothing counts must be non-negative")
        if self.gamma not in (1, 2):
            raise ValueError("gamma must be 1 (V) or 2 (W)")
        if self.coarse_op not in ("rediscretized", "galerkin"):
            raise ValueError(f"unknown coarse operator {self.coarse_op!r}")
        if self.freq_n < 8:
            raise ValueError("freq_n must be at least 8")
        if self.exclude_low < 0:
            raise ValueError("exclude_low must be non-negative")

    @property
    def nu(self) -> int:
        return self.nu1 + self.nu2


@dataclass
class FactorReport:
    mu: float | None = None
    rho2g: float | None = None
    rho3g: float | None = None
    argmax_theta: tuple | None = None
    skipped: int = 0
    evaluated: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TransferSymbols:
    """Prolongation/restriction symbols on one set of 2h-harmonics."""

    prolong: np.ndarray
    restrict: np.ndarray
    kind: str


# --------------------------------------------------------------------------
# linear algebra helpers


def spectral_radius(M) -> np.ndarray | float:
    """Largest eigenvalue modulus of a square matrix or a batch of them."""
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError("spectral_radius needs square matrices")
    if M.shape[-1] > 48:
        raise ValueError("matrices larger than 48 x 48 are outside the supported range")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError:
        flat = M.reshape(-1, M.shape[-1], M.shape[-1])
        ev = np.empty(flat.shape[:2], dtype=complex)
        for j, A in enumerate(flat):
            try:
                ev[j] = np.linalg.eigvals(A)
            except np.linalg.LinAlgError as exc:
                raise EigenvalueError(f"eigenvalue iteration failed for\n{A!r}") from exc
        ev = ev.reshape(M.shape[:-1])
    rho = np.abs(ev).max(axis=-1)
    return float(rho) if M.ndim == 2 else rho


def _mpow(A, n):
    out = np.broadcast_to(np.eye(A.shape[-1], dtype=A.dtype), A.shape).copy()
    for _ in range(n):
        out = out @ A
    return out


def _blockdiag(blocks):
    """``(N, k, m, m)`` -> block-diagonal ``(N, k m, k m)``."""
    N, k, m, _ = blocks.shape
    out = np.zeros((N, k * m, k * m), dtype=complex)
    for a in range(k):
        out[:, a * m:(a + 1) * m, a * m:(a + 1) * m] = blocks[:, a]
    return out


def _singular(A, tol, scale=1.0):
    """Relative determinant test ``|det A| < tol * ||A||^m`` per batch entry.

    Symbols whose norm is negligible against the stencil ``scale`` (the
    constant mode of a Stokes operator, for instance) are singular as well.
    """
    m = A.shape[-1]
    nrm = np.linalg.norm(A, ord=2, axis=(-2, -1))
    det = np.abs(np.linalg.det(A))
    return ~(det >= tol * nrm ** m) | (nrm <= 1e-12 * scale)


def _sign(x):
    return np.where(x >= 0.0, 1.0, -1.0)


def _harmonics2(theta):
    """Vectorised 2h-harmonics, ordering as in :func:`lattice.harmonics_2h`."""
    s = _sign(theta)
    return reduce_angle(theta[:, None, :] - _PAIRS[None] * s[:, None, :] * np.pi)


def _harmonics4(theta):
    """Vectorised 4h-harmonics, ordering as in :func:`lattice.harmonics_4h`."""
    s = _sign(theta)
    mids = theta[:, None, :] - _PAIRS[None] * s[:, None, :] * (np.pi / 2)
    sm = _sign(mids)
    members = mids[:, :, None, :] - _PAIRS[None, None] * sm[:, :, None, :] * np.pi
    return mids, reduce_angle(members.reshape(-1, 16, 2))


# --------------------------------------------------------------------------
# analyzer


class _Level:
    def __init__(self, problem: ProblemSpec, block: BlockSpec):
        self.problem = problem
        self.stencil = problem_stencils(problem)
        self.smoother = SmootherSymbol(self.stencil, block)
        self.scale = float(np.abs(self.stencil.arrays()[3]).max())

    def A(self, theta):
        return operator_symbol(self.stencil, None, theta)


class Analyzer:
    """Symbol factory for one problem, block smoother and cycle configuration.

    ``problem`` describes the finest level; coarser levels are rediscretized
    at ``2h`` and ``4h`` with the same block smoother.
    """

    def __init__(self, problem: ProblemSpec, block: BlockSpec, config: KGridConfig | None = None,
                 transfer: TransferStencil | None = None):
        self.problem = problem
        self.block = block
        self.config = config or KGridConfig()
        self.transfer = transfer or transfer_for(problem.kind)
        self.m = problem.m
        self._levels = {}

    def level(self, j: int) -> _Level:
        if j not in self._levels:
            self._levels[j] = _Level(self.problem.coarsened(2.0 ** j), self.block)
        return self._levels[j]

    # -- symbol pieces -----------------------------------------------------

    def smoother_blocks(self, j, phis):
        """Block-diagonal smoother symbol over harmonic sets ``phis`` (N, k, 2)."""
        N, k, _ = phis.shape
        S, bad = self.level(j).smoother(phis.reshape(-1, 2))
        return _blockdiag(S.reshape(N, k, self.m, self.m)), bad.reshape(N, k).any(axis=1)

    def operator_blocks(self, j, phis):
        N, k, _ = phis.shape
        A = self.level(j).A(phis.reshape(-1, 2))
        return _blockdiag(A.reshape(N, k, self.m, self.m))

    def two_grid_symbols(self, theta, nu1=None, nu2=None):
        """``(M, skipped)`` for base frequencies ``theta`` (N, 2) in ``(-pi/2, pi/2]^2``."""
        cfg = self.config
        nu1 = cfg.nu1 if nu1 is None else nu1
        nu2 = cfg.nu2 if nu2 is None else nu2
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        phis = _harmonics2(theta)
        coarse = 2.0 * theta
        Ah = self.operator_blocks(0, phis)
        S, bad = self.smoother_blocks(0, phis)
        P, R = self.transfer.symbols(phis, coarse)
        if cfg.coarse_op == "galerkin":
            Ac = R @ Ah @ P
        else:
            Ac = self.level(1).A(coarse)
        bad = bad | _singular(Ac, cfg.singular_tol, self.level(1).scale)
        ok = ~bad
        K = np.broadcast_to(np.eye(4 * self.m, dtype=complex), Ah.shape).copy()
        if ok.any():
            K[ok] -= P[ok] @ np.linalg.solve(Ac[ok], R[ok] @ Ah[ok])
        M = _mpow(S, nu2) @ K @ _mpow(S, nu1)
        M[bad] = np.nan
        return M, bad

    def three_grid_symbols(self, theta, inner=None):
        """``(M, skipped)`` on the 16 m dimensional 4h-harmonic space.

        ``inner`` overrides the coarse two-grid iteration matrix raised to
        ``gamma`` (shape ``(N, 4m, 4m)``); passing zeros gives the exact
        coarse-solve limit.
        """
        cfg = self.config
        m = self.m
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        N = theta.shape[0]
        mids, phis = _harmonics4(theta)
        Theta = 2.0 * mids  # intermediate-level frequencies, one per 2h group

        Ah = self.operator_blocks(0, phis)
        S, bad = self.smoother_blocks(0, phis)
        P1 = np.zeros((N, 16 * m, 4 * m), dtype=complex)
        R1 = np.zeros((N, 4 * m, 16 * m), dtype=complex)
        for g in range(4):
            P, R = self.transfer.symbols(phis[:, 4 * g:4 * g + 4], Theta[:, g])
            P1[:, 4 * m * g:4 * m * (g + 1), m * g:m * (g + 1)] = P
            R1[:, m * g:m * (g + 1), 4 * m * g:4 * m * (g + 1)] = R
        A2 = self.operator_blocks(1, Theta)
        A2b = A2.reshape(N, 4, m, 4, m)[:, np.arange(4), :, np.arange(4), :].transpose(1, 0, 2, 3)
        bad = bad | _singular(A2b, cfg.singular_tol, self.level(1).scale).any(axis=1)

        if inner is None:
            # the 2h-harmonics of 4 theta are exactly the four Theta values
            M2, bad2 = self._coarse_two_grid(theta, Theta)
            bad = bad | bad2
            inner = _mpow(M2, cfg.gamma)
        ok = ~bad
        C = np.broadcast_to(np.eye(4 * m, dtype=complex), A2.shape) - inner
        K = np.broadcast_to(np.eye(16 * m, dtype=complex), Ah.shape).copy()
        if ok.any():
            K[ok] -= P1[ok] @ C[ok] @ np.linalg.solve(A2[ok], R1[ok] @ Ah[ok])
        M = _mpow(S, cfg.nu2) @ K @ _mpow(S, cfg.nu1)
        M[bad] = np.nan
        return M, bad

    def _coarse_two_grid(self, theta, Theta):
        cfg = self.config
        A2 = self.operator_blocks(1, Theta)
        S2, bad = self.smoother_blocks(1, Theta)
        P2, R2 = self.transfer.symbols(Theta, 4.0 * theta)
        A4 = self.level(2).A(4.0 * theta)
        bad = bad | _singular(A4, cfg.singular_tol, self.level(2).scale)
        ok = ~bad
        K = np.broadcast_to(np.eye(4 * self.m, dtype=complex), A2.shape).copy()
        if ok.any():
            K[ok] -= P2[ok] @ np.linalg.solve(A4[ok], R2[ok] @ A2[ok])
        M = _mpow(S2, cfg.nu2) @ K @ _mpow(S2, cfg.nu1)
        M[bad] = np.nan
        return M, bad

    # -- sweeps --------------------------------------------------------------

    def _sweep(self, fn, thetas):
        chunks = [thetas[i:i + _CHUNK] for i in range(0, len(thetas), _CHUNK)]
        nw = min(worker_count(), len(chunks))
        if nw > 1:
            with ThreadPoolExecutor(max_workers=nw) as pool:
                parts = list(pool.map(fn, chunks))
        else:
            parts = [fn(c) for c in chunks]
        rho = np.concatenate([p[0] for p in parts])
        bad = np.concatenate([p[1] for p in parts])
        if bad.all():
            raise DegenerateConfigError("every sampled frequency was skipped as singular")
        r = np.where(bad, -np.inf, rho)
        k = int(np.argmax(r))  # first maximum: independent of chunk timing
        return float(r[k]), tuple(float(x) for x in thetas[k]), int(bad.sum()), int((~bad).sum())

    def _rho(self, fn):
        def run(chunk):
            M, bad = fn(chunk)
            rho = np.zeros(len(chunk))
            if (~bad).any():
                rho[~bad] = spectral_radius(M[~bad])
            return rho, bad
        return run

    def smoothing(self):
        thetas = sample_high_frequencies(self.config.freq_n)

        def run(chunk):
            S, bad = self.level(0).smoother(chunk)
            rho = np.zeros(len(chunk))
            if (~bad).any():
                rho[~bad] = spectral_radius(S[~bad])
            return rho, bad

        return self._sweep(run, thetas)

    def _base(self, half):
        thetas = sample_base_frequencies(self.config.freq_n, half)
        if self.config.exclude_low > 0:
            thetas = thetas[np.abs(thetas).max(axis=1) > self.config.exclude_low]
        return thetas

    def two_grid(self):
        return self._sweep(self._rho(self.two_grid_symbols), self._base(np.pi / 2))

    def three_grid(self):
        return self._sweep(self._rho(self.three_grid_symbols), self._base(np.pi / 4))


# --------------------------------------------------------------------------
# public operations


def _config_dict(problem, block, config):
    return {
        "problem": problem.kind, "h": problem.h, "kappa": problem.kappa,
        "smoother": block.name, "local_solver": block.local_solver,
        "omega": list(block.omega), **asdict(config),
    }


def smoothing_factor(problem: ProblemSpec, spec: BlockSpec, config: KGridConfig | None = None) -> float:
    """Sup of ``rho(S(theta))`` over sampled high frequencies (one sweep)."""
    return Analyzer(problem, spec, config).smoothing()[0]


def transfer_symbols(problem: ProblemSpec, hs) -> TransferSymbols:
    if hs.kind != "TwoGrid":
        raise ValueError("transfer symbols are defined on 2h-harmonic sets")
    t = transfer_for(problem.kind)
    P, R = t.symbols(hs.members, hs.coarse)
    return TransferSymbols(P, R, t.kind)


def two_grid_factor(problem: ProblemSpec, spec: BlockSpec, config: KGridConfig | None = None) -> FactorReport:
    an = Analyzer(problem, spec, config)
    rho, arg, skipped, n = an.two_grid()
    mu = an.smoothing()[0]
    return FactorReport(mu=mu, rho2g=rho, argmax_theta=arg, skipped=skipped, evaluated=n,
                        config=_config_dict(problem, spec, an.config))


def three_grid_factor(problem: ProblemSpec, spec: BlockSpec, config: KGridConfig | None = None) -> FactorReport:
    an = Analyzer(problem, spec, config)
    rho, arg, skipped, n = an.three_grid()
    mu = an.smoothing()[0]
    return FactorReport(mu=mu, rho3g=rho, argmax_theta=arg, skipped=skipped, evaluated=n,
                        config=_config_dict(problem, spec, an.config))


def analyze(problem: ProblemSpec, spec: BlockSpec, config: KGridConfig, mode: str) -> FactorReport:
    """Run one analysis mode: ``smooth``, ``twogrid`` or ``threegrid``.

    In ``smooth`` mode ``mu`` is reported as the per-sweep factor raised to
    ``nu1 + nu2``.
    """
    if mode == "smooth":
        an = Analyzer(problem, spec, config)
        mu, arg, skipped, n = an.smoothing()
        return FactorReport(mu=mu ** config.nu, argmax_theta=arg, skipped=skipped, evaluated=n,
                            config=_config_dict(problem, spec, config))
    if mode == "twogrid":
        return two_grid_factor(problem, spec, config)
    if mode == "threegrid":
        return three_grid_factor(problem, spec, config)
    raise ValueError(f"unknown analysis mode {mode!r}")


def omega_grid(problem: ProblemSpec, spec: BlockSpec, config: KGridConfig,
               omega_u, omega_p, objective: str = "rho2g") -> np.ndarray:
    """Factor table over an omega grid: rows ``(omega_u, omega_p, rho)``.

    For single-parameter problems ``omega_p`` is ignored and ``omega_u``
    is applied to every variable.
    """
    omega_u = np.atleast_1d(np.asarray(omega_u, dtype=float))
    omega_p = np.atleast_1d(np.asarray(omega_p, dtype=float))
    if problem.kind != "Stokes":
        omega_p = omega_p[:1] if omega_p.size else np.array([np.nan])
    if omega_u.size == 0 or omega_p.size == 0:
        raise ValueError("empty omega grid")
    if objective not in ("rho2g", "rho3g"):
        raise ValueError(f"unknown objective {objective!r}")
    rows = []
    for wu in omega_u:
        for wp in omega_p:
            om = (wu, wu, wp) if problem.kind == "Stokes" else (wu,) * spec.m
            an = Analyzer(problem, spec.with_omega(om), config)
            res = an.two_grid() if objective == "rho2g" else an.three_grid()
            rows.append((wu, wp, res[0]))
    return np.array(rows)


def optimize_omega(problem: ProblemSpec, spec: BlockSpec, config: KGridConfig,
                   omega_u, omega_p, objective: str = "rho2g") -> tuple:
    """Exhaustive grid search; ties go to the smallest ``omega_u`` then ``omega_p``."""
    table = omega_grid(problem, spec, config, omega_u, omega_p, objective)
    order = np.lexsort((table[:, 1], table[:, 0], table[:, 2]))
    wu, wp, rho = table[order[0]]
    return float(wu), float(wp), float(rho)
