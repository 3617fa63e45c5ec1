"""Fourier symbols of overlapping block (Vanka-type) smoothers.

A block is a list of ``(variable, offset)`` members relative to an anchor
vertex. Anchors are swept lexicographically, ``l`` outer and ``k`` inner, both
ascending. Because blocks overlap, an unknown is corrected several times per
sweep; the intermediate error states are tracked through the update schedule
and eliminated via the ``P alpha = Q alpha0`` system.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretizations import MultiStencil

__all__ = [
    "BlockSpec",
    "UpdateSchedule",
    "PQSystem",
    "FrequencySingularityError",
    "SingularBlockError",
    "STOKES_NEIGHBOURS",
    "stokes_block",
    "nedelec_vertex_block",
    "preset",
    "precedes",
    "updates_per_sweep",
    "update_count",
    "update_schedule",
    "build_local_matrix",
    "SmootherSymbol",
    "build_PQ",
    "smoother_symbol",
]


class FrequencySingularityError(ArithmeticError):
    pass


class SingularBlockError(ArithmeticError):
    pass


STOKES_NEIGHBOURS = ((1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1))


@dataclass(frozen=True)
class BlockSpec:
    m: int
    members: tuple  # ((var, (kk, ll)), ...)
    local_solver: str = "Full"
    omega: tuple = ()
    name: str = ""

    def __post_init__(self):
        members = tuple((int(r), (int(o[0]), int(o[1]))) for r, o in self.members)
        if len(set(members)) != len(members):
            raise ValueError("block members must be distinct")
        if any(not 0 <= r < self.m for r, _ in members):
            raise ValueError("member variable out of range")
        if self.local_solver not in ("Full", "Diagonal"):
            raise ValueError(f"unknown local solver {self.local_solver!r}")
        omega = tuple(float(w) for w in self.omega) or (1.0,) * self.m
        if len(omega) != self.m:
            raise ValueError("need one relaxation parameter per variable")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "omega", omega)
        if self.local_solver == "Diagonal" and not self.schur_vars:
            raise ValueError("diagonal local solver needs a variable with a single block member")

    @property
    def q(self) -> int:
        return len(self.members)

    @property
    def schur_vars(self) -> tuple:
        """Variables appearing once per block; the diagonal solver keeps their couplings."""
        counts = np.bincount([r for r, _ in self.members], minlength=self.m)
        return tuple(int(r) for r in np.nonzero(counts == 1)[0]) if self.m > 1 else ()

    def with_omega(self, omega) -> "BlockSpec":
        return BlockSpec(self.m, self.members, self.local_solver, tuple(omega), self.name)


def stokes_block(local_solver: str = "Full", omega=(1.0, 1.0, 1.0)) -> BlockSpec:
    members = [(0, o) for o in STOKES_NEIGHBOURS] + [(1, o) for o in STOKES_NEIGHBOURS]
    members.append((2, (0, 0)))
    name = "stokes-full" if local_solver == "Full" else "stokes-diag"
    return BlockSpec(3, tuple(members), local_solver, tuple(omega), name)


def nedelec_vertex_block(omega=(1.0, 1.0, 1.0)) -> BlockSpec:
    members = ((0, (0, 0)), (0, (-1, 0)), (1, (0, 0)), (1, (0, -1)), (2, (0, 0)), (2, (-1, -1)))
    return BlockSpec(3, members, "Full", tuple(omega), "nedelec-vertex")


def preset(name: str, omega=None) -> BlockSpec:
    omega = omega or (1.0, 1.0, 1.0)
    if name == "stokes-full":
        return stokes_block("Full", omega)
    if name == "stokes-diag":
        return stokes_block("Diagonal", omega)
    if name == "nedelec-vertex":
        return nedelec_vertex_block(omega)
    raise KeyError(f"unknown block preset {name!r}")


# --------------------------------------------------------------------------
# schedule


def precedes(c) -> bool:
    """True when anchor offset ``c`` is visited before the origin."""
    return c[1] < 0 or (c[1] == 0 and c[0] < 0)


def updates_per_sweep(spec: BlockSpec) -> tuple:
    # an unknown at x is covered by the anchors x - o for each member offset o
    return tuple(int(c) for c in np.bincount([r for r, _ in spec.members], minlength=spec.m))


def update_count(spec: BlockSpec, var: int, offset) -> tuple:
    """Return ``(n, updated_now)`` for unknown ``var`` at ``offset`` from the anchor."""
    offset = (int(offset[0]), int(offset[1]))
    n = sum(1 for r, o in spec.members
            if r == var and precedes((offset[0] - o[0], offset[1] - o[1])))
    return n, (var, offset) in spec.members


@dataclass
class UpdateSchedule:
    s: tuple
    stage: dict
    external: dict = field(default_factory=dict)

    def states(self) -> dict:
        """All reachable unknowns with their prior-update count."""
        out = dict(self.external)
        out.update(self.stage)
        return out


def update_schedule(spec: BlockSpec, st: MultiStencil | None = None) -> UpdateSchedule:
    s = updates_per_sweep(spec)
    stage = {(r, o): update_count(spec, r, o)[0] for r, o in spec.members}
    external = {}
    if st is not None:
        for i, oa in spec.members:
            for r, kk, ll, _ in st.neighbours(i):
                pos = (oa[0] + kk, oa[1] + ll)
                if (r, pos) not in stage:
                    external[(r, pos)] = update_count(spec, r, pos)[0]
    return UpdateSchedule(s, stage, external)


# --------------------------------------------------------------------------
# local block matrix


def build_local_matrix(st: MultiStencil, spec: BlockSpec) -> np.ndarray:
    """``A_h^B``: stencil couplings among block members (diagonal variant if requested)."""
    q = spec.q
    A = np.zeros((q, q))
    for a, (i, oa) in enumerate(spec.members):
        for b, (r, ob) in enumerate(spec.members):
            A[a, b] = st.entries.get((i, r, ob[0] - oa[0], ob[1] - oa[1]), 0.0)
    if spec.local_solver == "Diagonal":
        keep = np.array([r in spec.schur_vars for r, _ in spec.members])
        mask = np.eye(q, dtype=bool) | keep[:, None] | keep[None, :]
        A = np.where(mask, A, 0.0)
    return A


@dataclass
class PQSystem:
    P: np.ndarray
    Q: np.ndarray
    theta: np.ndarray
    unknowns: tuple  # ((var, n), ...) in column order of P


class SmootherSymbol:
    """Precomputed P/Q structure for one (stencil, block) pair.

    Calling the object with a frequency batch returns the symbols ``S(theta)``.
    """

    def __init__(self, st: MultiStencil, spec: BlockSpec, subgrid_phase: bool = True):
        if st.m != spec.m:
            raise ValueError("stencil and block disagree on the number of variables")
        self.st = st
        self.spec = spec
        self.s = updates_per_sweep(spec)
        S = max(self.s)
        # column order: stage levels aligned so every variable ends on level S
        cols = sorted(((n + S - self.s[r], r, n) for r in range(spec.m)
                       for n in range(1, self.s[r] + 1)))
        self.unknowns = tuple((r, n) for _, r, n in cols)
        self.q = len(self.unknowns)
        if self.q != spec.q:
            raise ValueError(f"block has {spec.q} members but {self.q} updated coefficients")
        col = {u: j for j, u in enumerate(self.unknowns)}

        AB = build_local_matrix(st, spec)
        deltas = st.deltas if subgrid_phase else np.zeros((spec.m, 2))
        p_terms, q_terms = [], []

        def add(row, r, n, coef, pos):
            shift = np.asarray(pos, dtype=float) + deltas[r]
            if n == 0:
                # alpha^(0) terms move to the right-hand side
                q_terms.append((row, r, -coef, shift))
            else:
                p_terms.append((row, col[(r, n)], coef, shift))

        for a, (i, oa) in enumerate(spec.members):
            for b, (r, ob) in enumerate(spec.members):
                if AB[a, b] == 0.0:
                    continue
                c = AB[a, b] if spec.omega[r] == 1.0 else AB[a, b] / spec.omega[r]
                n = update_count(spec, r, ob)[0]
                add(a, r, n + 1, c, ob)
                add(a, r, n, -c, ob)
            # residual of equation a at the pre-block state: r = -A e
            for r, kk, ll, c in st.neighbours(i):
                pos = (oa[0] + kk, oa[1] + ll)
                n = update_count(spec, r, pos)[0]
                add(a, r, n, c, pos)

        self._p = self._pack(p_terms, self.q)
        self._q = self._pack(q_terms, spec.m)

    @staticmethod
    def _pack(terms, ncol):
        rows = np.array([t[0] for t in terms], dtype=int)
        cols = np.array([t[1] for t in terms], dtype=int)
        coef = np.array([t[2] for t in terms], dtype=float)
        shift = np.array([t[3] for t in terms], dtype=float).reshape(-1, 2)
        return rows * ncol + cols, coef, shift

    @staticmethod
    def _eval(packed, theta, nrow, ncol):
        idx, coef, shift = packed
        vals = np.exp(1j * theta @ shift.T) * coef
        out = np.zeros((theta.shape[0], nrow * ncol), dtype=complex)
        np.add.at(out.T, idx, vals.T)
        return out.reshape(-1, nrow, ncol)

    def pq(self, theta):
        th = np.atleast_2d(np.asarray(theta, dtype=float))
        return self._eval(self._p, th, self.q, self.q), self._eval(self._q, th, self.q, self.spec.m)

    def __call__(self, theta, cond_limit: float | None = None):
        """Return ``(S, singular)`` for a batch of frequencies of shape ``(N, 2)``.

        Rows of ``S`` flagged in ``singular`` are NaN. ``cond_limit`` enables an
        explicit condition-number check on ``P``.
        """
        th = np.atleast_2d(np.asarray(theta, dtype=float))
        P, Q = self.pq(th)
        bad = np.zeros(th.shape[0], dtype=bool)
        if cond_limit is not None:
            bad |= ~(np.linalg.cond(P) < cond_limit)
        X = np.full((th.shape[0], self.q, self.spec.m), np.nan, dtype=complex)
        ok = ~bad
        try:
            X[ok] = np.linalg.solve(P[ok], Q[ok])
        except np.linalg.LinAlgError:
            for j in np.nonzero(ok)[0]:
                try:
                    X[j] = np.linalg.solve(P[j], Q[j])
                except np.linalg.LinAlgError:
                    bad[j] = True
        bad |= ~np.all(np.isfinite(X), axis=(1, 2))
        return X[:, -self.spec.m:, :], bad


def build_PQ(st: MultiStencil, spec: BlockSpec, basis, theta) -> PQSystem:
    sym = SmootherSymbol(st, spec)
    P, Q = sym.pq(theta)
    return PQSystem(P[0], Q[0], np.asarray(theta, dtype=float), sym.unknowns)


def smoother_symbol(st: MultiStencil, spec: BlockSpec, basis, theta) -> np.ndarray:
    """``S(theta)`` for a single frequency; raises on a numerically singular ``P``."""
    S, bad = SmootherSymbol(st, spec)(np.asarray(theta, dtype=float)[None, :], cond_limit=1e14)
    if bad[0]:
        raise FrequencySingularityError(f"P is numerically singular at theta={theta}")
    return S[0]
