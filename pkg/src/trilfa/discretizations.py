"""Translation-invariant stencils of the two model discretizations.

Stokes (stabilized P1-P1) uses variables ``u, v, p`` on the nodal grid; the
curl-curl problem uses one edge unknown on each of the three edge subgrids.
Edge degrees of freedom are tangential line integrals along the globally
oriented edges ``+e1``, ``+e2``, ``+(e1+e2)``.

Stencils not printed in closed form are produced by a brute-force
finite-element assembly on a periodic patch (:func:`assemble_patch_oracle`)
and stored as golden text files under ``trilfa/data``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import fem
from .lattice import SUBGRID_DELTAS, LatticeBasis, equilateral_basis, node_position

__all__ = [
    "ProblemSpec",
    "MultiStencil",
    "SymbolMatrix",
    "PatchSizeError",
    "stokes_stencils",
    "nedelec_curlcurl_stencils",
    "nedelec_mass_stencils",
    "problem_stencils",
    "assemble_patch_oracle",
    "operator_symbol",
    "cell_triangles",
    "read_golden",
    "parse_golden",
    "write_golden",
    "golden_path",
    "render_golden",
    "GOLDEN_FILES",
    "golden_reference",
]

SQRT3 = math.sqrt(3.0)


class PatchSizeError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    kind: str  # "Stokes" | "CurlCurl"
    h: float = 1.0
    beta: float = 1.0 / 12.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.kind not in ("Stokes", "CurlCurl"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.h <= 0:
            raise ValueError("mesh size must be positive")
        if self.kind == "Stokes" and not self.beta > 0:
            raise ValueError("Stokes stabilization beta must be positive")
        if self.kind == "CurlCurl" and self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    def coarsened(self, factor: float = 2.0) -> "ProblemSpec":
        return ProblemSpec(self.kind, self.h * factor, self.beta, self.kappa)

    @property
    def subgrids(self) -> tuple:
        return (0, 0, 0) if self.kind == "Stokes" else (1, 2, 3)

    @property
    def m(self) -> int:
        return 3


@dataclass
class MultiStencil:
    """Coefficients ``s[i, r, kk, ll]`` coupling equation ``i`` to unknown ``r``.

    ``subgrids[r]`` is 0 for nodal variables, else the edge subgrid id.
    """

    subgrids: tuple
    entries: dict = field(default_factory=dict)
    h: float = 1.0
    names: tuple = ()

    @property
    def m(self) -> int:
        return len(self.subgrids)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([SUBGRID_DELTAS[s] for s in self.subgrids])

    def __add__(self, other: "MultiStencil") -> "MultiStencil":
        return self.combine(other, 1.0)

    def combine(self, other: "MultiStencil", factor: float) -> "MultiStencil":
        if self.subgrids != other.subgrids:
            raise ValueError("stencils live on different grids")
        out = dict(self.entries)
        for key, c in other.entries.items():
            out[key] = out.get(key, 0.0) + factor * c
        return MultiStencil(self.subgrids, out, self.h, self.names)

    def block(self, i: int, r: int) -> dict:
        return {(kk, ll): c for (a, b, kk, ll), c in self.entries.items() if a == i and b == r}

    def neighbours(self, i: int):
        """Iterate ``(r, kk, ll, coef)`` over the stencil row of equation ``i``."""
        for (a, r, kk, ll), c in self.entries.items():
            if a == i:
                yield r, kk, ll, c

    def support(self) -> int:
        return max((max(abs(kk), abs(ll)) for (_, _, kk, ll) in self.entries), default=0)

    def arrays(self):
        keys = sorted(self.entries)
        arr = np.array(keys, dtype=int).reshape(-1, 4)
        coef = np.array([self.entries[k] for k in keys], dtype=float)
        return arr[:, 0], arr[:, 1], arr[:, 2:4], coef

    def scaled(self, blockscale) -> "MultiStencil":
        """Multiply block ``(i, r)`` by ``blockscale(i, r)``."""
        out = {k: c * blockscale(k[0], k[1]) for k, c in self.entries.items()}
        return MultiStencil(self.subgrids, out, self.h, self.names)


@dataclass
class SymbolMatrix:
    data: np.ndarray
    theta: np.ndarray

    @property
    def dim(self) -> int:
        return self.data.shape[-1]


# --------------------------------------------------------------------------
# lattice triangulation helpers shared with the mesh assembly


def cell_triangles(a, b):
    """Triangles of lattice cells ``(a, b)``: upper and lower.

    Returns ``(verts, edges)`` where ``verts`` has shape ``(..., 2, 3, 2)`` of
    lattice vertex indices and ``edges`` has shape ``(..., 2, 3, 4)`` with rows
    ``(sub, k, l, sign)`` aligned with ``fem.LOCAL_EDGES``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    o = np.ones_like(a)
    upper_v = np.stack([np.stack([a, b], -1), np.stack([a + 1, b], -1),
                        np.stack([a + 1, b + 1], -1)], -2)
    lower_v = np.stack([np.stack([a, b], -1), np.stack([a + 1, b + 1], -1),
                        np.stack([a, b + 1], -1)], -2)
    upper_e = np.stack([np.stack([o, a, b, o], -1),
                        np.stack([2 * o, a + 1, b, o], -1),
                        np.stack([3 * o, a, b, o], -1)], -2)
    lower_e = np.stack([np.stack([3 * o, a, b, o], -1),
                        np.stack([o, a, b + 1, -o], -1),
                        np.stack([2 * o, a, b, o], -1)], -2)
    return np.stack([upper_v, lower_v], -3), np.stack([upper_e, lower_e], -3)


# --------------------------------------------------------------------------
# oracle


def _wrap(x, n):
    x = np.mod(x, n)
    return np.where(x > n // 2, x - n, x)


def assemble_patch_oracle(spec: ProblemSpec, patch_n: int = 6, basis: LatticeBasis | None = None,
                          part: str = "full") -> MultiStencil:
    """Assemble the FE matrix on a doubly periodic patch and read off stencils.

    ``part`` selects, for the curl-curl problem, ``"full"`` (N + kappa M),
    ``"curl"`` (N) or ``"mass"`` (M). For Stokes, ``part`` must be ``"full"``.
    """
    if patch_n < 4:
        raise PatchSizeError(f"patch_n={patch_n} is too small; need at least 4 cells")
    basis = basis or equilateral_basis(spec.h)
    n = patch_n
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    verts, edges = cell_triangles(a.ravel(), b.ravel())
    verts = verts.reshape(-1, 3, 2)
    edges = edges.reshape(-1, 3, 4)
    X = node_position(basis, 0, verts[..., 0], verts[..., 1])
    vid = np.mod(verts[..., 0], n) * n + np.mod(verts[..., 1], n)

    if spec.kind == "Stokes":
        if part != "full":
            raise ValueError("Stokes oracle only supports part='full'")
        hT = np.full(len(X), spec.h)
        E = fem.stokes_element(X, spec.beta, hT)
        dofs = np.concatenate([vid, vid + n * n, vid + 2 * n * n], axis=1)
    else:
        N, M = fem.nedelec_elements(X, edges[..., 3].astype(float))
        E = {"full": N + spec.kappa * M, "curl": N, "mass": M}[part]
        dofs = (edges[..., 0] - 1) * n * n + np.mod(edges[..., 1], n) * n + np.mod(edges[..., 2], n)
    # unknown (variable, k, l) lives at column var * n^2 + k * n + l
    ndof = 3 * n * n

    A = np.zeros((ndof, ndof))
    nloc = dofs.shape[1]
    for p in range(nloc):
        for q in range(nloc):
            np.add.at(A, (dofs[:, p], dofs[:, q]), E[:, p, q])

    entries = {}
    scale = np.abs(A).max()
    for i in range(3):
        row = i * n * n
        for col in np.nonzero(np.abs(A[row]) > 1e-14 * scale)[0]:
            r, v = divmod(int(col), n * n)
            k, l = divmod(v, n)
            kk, ll = int(_wrap(k, n)), int(_wrap(l, n))
            entries[(i, int(r), kk, ll)] = entries.get((i, int(r), kk, ll), 0.0) + A[row, col]
    names = ("u", "v", "p") if spec.kind == "Stokes" else ("e1", "e2", "e3")
    return MultiStencil(spec.subgrids, entries, spec.h, names)


# --------------------------------------------------------------------------
# golden data

GOLDEN_FILES = {
    "stokes": "stokes_p1_h1.txt",
    "nedelec_mass": "nedelec_mass_h1.txt",
}

_GOLDEN_HEADERS = {
    "stokes": [
        "stabilized P1-P1 Stokes on the equilateral lattice, h = 1, beta = 1",
        "variables: 0=u 1=v 2=p (nodal)",
        "scaling: coefficient * h**hpow, hpow = 0 for (u|v,u|v), 1 for blocks with one p, 2 for (p,p)",
        "the (p,p) block is additionally multiplied by beta",
    ],
    "nedelec_mass": [
        "lowest-order Nedelec mass matrix on the equilateral lattice, h = 1",
        "variables: 0,1,2 = edge subgrids 1,2,3 (line-integral dofs, orientation +e1,+e2,+(e1+e2))",
        "scaling: coefficient * h**0",
    ],
}


def golden_path(name: str) -> Path:
    return Path(str(resources.files("trilfa") / "data" / GOLDEN_FILES[name]))


def render_golden(name: str, st: MultiStencil) -> str:
    lines = ["# trilfa golden stencil v1", f"# name: {name}"]
    lines += [f"# {h}" for h in _GOLDEN_HEADERS[name]]
    lines.append("# columns: i r kk ll coefficient")
    for key in sorted(st.entries):
        i, r, kk, ll = key
        lines.append(f"{i} {r} {kk} {ll} {st.entries[key]:.17g}")
    return "\n".join(lines) + "\n"


def write_golden(name: str, st: MultiStencil, path: Path | None = None) -> Path:
    path = Path(path) if path else golden_path(name)
    path.write_text(render_golden(name, st))
    return path


def read_golden(name: str, path: Path | None = None) -> dict:
    path = Path(path) if path else golden_path(name)
    return parse_golden(path.read_text())


def parse_golden(text: str) -> dict:
    """Entries ``{(i, r, kk, ll): coefficient}`` of a golden stencil file."""
    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        i, r, kk, ll, c = line.split()
        entries[(int(i), int(r), int(kk), int(ll))] = float(c)
    return entries


def golden_reference(name: str) -> MultiStencil:
    """Recompute the golden stencil of ``name`` with the oracle."""
    if name == "stokes":
        return assemble_patch_oracle(ProblemSpec("Stokes", 1.0, beta=1.0), 6)
    if name == "nedelec_mass":
        return assemble_patch_oracle(ProblemSpec("CurlCurl", 1.0, kappa=0.0), 6, part="mass")
    raise KeyError(name)


# --------------------------------------------------------------------------
# stencil generators


def stokes_stencils(spec: ProblemSpec) -> MultiStencil:
    if spec.kind != "Stokes":
        raise ValueError(f"stokes_stencils needs a Stokes spec, got {spec.kind}")
    h, beta = spec.h, spec.beta

    def scale(i, r):
        npress = (i == 2) + (r == 2)
        return h ** npress * (beta if npress == 2 else 1.0)

    st = MultiStencil((0, 0, 0), read_golden("stokes"), h, ("u", "v", "p"))
    return st.scaled(scale)


def _pictorial(arr, factor):
    """3x3 picture (rows ll = 1, 0, -1; columns kk = -1, 0, 1) to offsets."""
    out = {}
    for row, ll in enumerate((1, 0, -1)):
        for col, kk in enumerate((-1, 0, 1)):
            if arr[row][col]:
                out[(kk, ll)] = factor * arr[row][col]
    return out


_CENTER = [[0, 0, 0], [0, 1, 0], [0, 0, 0]]
_N_PICTURES = {
    (0, 0): (8, _CENTER),
    (0, 1): (4, [[0, 0, 0], [0, 0, 1], [0, 1, 0]]),
    (0, 2): (-4, [[0, 0, 0], [0, 1, 0], [0, 1, 0]]),
    (1, 0): (4, [[0, 1, 0], [1, 0, 0], [0, 0, 0]]),
    (1, 1): (8, _CENTER),
    (1, 2): (-4, [[0, 0, 0], [1, 1, 0], [0, 0, 0]]),
    (2, 0): (-4, [[0, 1, 0], [0, 1, 0], [0, 0, 0]]),
    (2, 1): (-4, [[0, 0, 0], [0, 1, 1], [0, 0, 0]]),
    (2, 2): (8, _CENTER),
}


def nedelec_curlcurl_stencils(spec: ProblemSpec) -> MultiStencil:
    """The curl-rot stencils N_h on the three edge subgrids."""
    entries = {}
    for (i, r), (num, pic) in _N_PICTURES.items():
        for (kk, ll), c in _pictorial(pic, num / (SQRT3 * spec.h ** 2)).items():
            entries[(i, r, kk, ll)] = c
    return MultiStencil((1, 2, 3), entries, spec.h, ("e1", "e2", "e3"))


def nedelec_mass_stencils(spec: ProblemSpec) -> MultiStencil:
    return MultiStencil((1, 2, 3), read_golden("nedelec_mass"), spec.h, ("e1", "e2", "e3"))


def problem_stencils(spec: ProblemSpec) -> MultiStencil:
    """Full operator stencil: Stokes, or N + kappa M for curl-curl."""
    if spec.kind == "Stokes":
        return stokes_stencils(spec)
    N = nedelec_curlcurl_stencils(spec)
    if spec.kappa == 0:
        return N
    return N.combine(nedelec_mass_stencils(spec), spec.kappa)


# --------------------------------------------------------------------------
# symbols


def operator_symbol(st: MultiStencil, basis: LatticeBasis | None, theta, subgrid_phase: bool = True):
    """Fourier symbol ``A(theta)`` of a multi-stencil.

    ``theta`` may be a single frequency (returns an ``(m, m)`` array) or a
    batch of shape ``(N, 2)`` (returns ``(N, m, m)``). ``basis`` is accepted
    for interface symmetry; symbols only depend on reciprocal coordinates.
    """
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    th = np.atleast_2d(theta)
    I, R, off, coef = st.arrays()
    shift = off.astype(float)
    if subgrid_phase:
        d = st.deltas
        shift = shift + d[R] - d[I]
    ph = np.exp(1j * th @ shift.T) * coef  # (N, T)
    m = st.m
    out = np.zeros((th.shape[0], m * m), dtype=complex)
    np.add.at(out.T, I * m + R, ph.T)
    out = out.reshape(-1, m, m)
    return out[0] if single else out
