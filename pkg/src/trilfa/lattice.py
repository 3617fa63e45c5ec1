"""Triangular lattice geometry and harmonic frequency sets.

Frequencies are always expressed in reciprocal-basis coordinates, i.e. a
grid function ``exp(i * theta . (k, l))`` on lattice indices ``(k, l)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateBasisError",
    "FrequencyDomainError",
    "LatticeBasis",
    "SUBGRID_DELTAS",
    "NODAL",
    "reciprocal_basis",
    "equilateral_basis",
    "node_position",
    "reduce_angle",
    "HarmonicSet",
    "harmonics_2h",
    "harmonics_4h",
    "sample_base_frequencies",
    "sample_high_frequencies",
]


class DegenerateBasisError(ValueError):
    pass


class FrequencyDomainError(ValueError):
    pass


#: fractional offsets of the three edge subgrids; key 0 is the nodal grid
SUBGRID_DELTAS = {
    0: (0.0, 0.0),
    1: (0.5, 0.0),
    2: (0.0, 0.5),
    3: (0.5, 0.5),
}
NODAL = 0


def reciprocal_basis(e1, e2):
    """Return ``(e1p, e2p)`` with ``dot(e_i, e'_j) = delta_ij``."""
    E = np.array([e1, e2], dtype=float)
    if abs(np.linalg.det(E)) < 1e-12:
        raise DegenerateBasisError(f"basis vectors {e1}, {e2} are (nearly) parallel")
    # rows of inv(E).T are the dual vectors
    Ep = np.linalg.inv(E).T
    return Ep[0], Ep[1]


@dataclass(frozen=True)
class LatticeBasis:
    e1: np.ndarray
    e2: np.ndarray
    h1: float = 1.0
    h2: float = 1.0
    e1p: np.ndarray = field(init=False, repr=False)
    e2p: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e1 = np.asarray(self.e1, dtype=float)
        e2 = np.asarray(self.e2, dtype=float)
        for v in (e1, e2):
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError("lattice basis vectors must have unit norm")
        e1p, e2p = reciprocal_basis(e1, e2)
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)
        object.__setattr__(self, "e1p", e1p)
        object.__setattr__(self, "e2p", e2p)

    @property
    def angle(self) -> float:
        """Angle between ``e1`` and ``e2`` in degrees."""
        return float(np.degrees(np.arccos(np.clip(self.e1 @ self.e2, -1.0, 1.0))))

    def scaled(self, factor: float) -> "LatticeBasis":
        return LatticeBasis(self.e1, self.e2, self.h1 * factor, self.h2 * factor)


def equilateral_basis(h: float = 1.0) -> LatticeBasis:
    """Basis of the equilateral grid whose diagonal neighbours are ``(k+1, l+1)``.

    With this index connectivity the two basis vectors enclose 120 degrees, so
    that ``e1``, ``e2`` and ``e1 + e2`` all have unit length.
    """
    return LatticeBasis(np.array([1.0, 0.0]), np.array([-0.5, np.sqrt(3.0) / 2.0]), h, h)


def node_position(basis: LatticeBasis, sub: int, k, l):
    """Cartesian position ``(k+d1) h1 e1 + (l+d2) h2 e2`` of a grid point.

    ``sub`` is 0 for the nodal grid and 1, 2, 3 for the edge subgrids.
    ``k`` and ``l`` may be arrays.
    """
    d1, d2 = SUBGRID_DELTAS[sub]
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    return (
        ((k + d1) * basis.h1)[..., None] * basis.e1
        + ((l + d2) * basis.h2)[..., None] * basis.e2
    )


def reduce_angle(theta):
    """Map angles into ``(-pi, pi]``."""
    t = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(t <= -np.pi, t + 2.0 * np.pi, t)


def _sign(x):
    # sign(0) := +1
    return np.where(np.asarray(x) >= 0.0, 1.0, -1.0)


def _in_box(theta, half):
    theta = np.asarray(theta, dtype=float)
    return bool(np.all((theta > -half) & (theta <= half)))


@dataclass(frozen=True)
class HarmonicSet:
    """Frequencies coupled under (one or two levels of) standard coarsening.

    ``members`` has shape ``(4, 2)`` ordered by ``(a1, a2)`` lexicographically,
    or ``(16, 2)`` ordered by ``(n, m, i, j)``. ``coarse`` holds the frequency
    of the corresponding coarse-grid mode(s): ``2 * base`` for two-grid sets
    and, for three-grid sets, the four intermediate-level frequencies.
    """

    base: np.ndarray
    members: np.ndarray
    kind: str

    @property
    def coarse(self) -> np.ndarray:
        if self.kind == "TwoGrid":
            return 2.0 * self.base
        return 2.0 * self.members[::4]


_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))


def harmonics_2h(theta00) -> HarmonicSet:
    theta00 = np.asarray(theta00, dtype=float)
    if not _in_box(theta00, np.pi / 2):
        raise FrequencyDomainError(f"{theta00} is outside (-pi/2, pi/2]^2")
    s = _sign(theta00)
    members = np.array([theta00 - np.array(a) * s * np.pi for a in _PAIRS])
    return HarmonicSet(theta00, reduce_angle(members), "TwoGrid")


def harmonics_4h(theta00) -> HarmonicSet:
    theta00 = np.asarray(theta00, dtype=float)
    if not _in_box(theta00, np.pi / 4):
        raise FrequencyDomainError(f"{theta00} is outside (-pi/4, pi/4]^2")
    s = _sign(theta00)
    members = []
    for nm in _PAIRS:
        mid = theta00 - np.array(nm) * s * np.pi / 2
        smid = _sign(mid)
        for ij in _PAIRS:
            members.append(mid - np.array(ij) * smid * np.pi)
    return HarmonicSet(theta00, reduce_angle(np.array(members)), "ThreeGrid")


def _axis_samples(lo, hi, n, offset):
    return lo + (np.arange(n) + offset) * (hi - lo) / n


def sample_base_frequencies(freq_n: int, half: float, offset: float = 1.0 / 3.0):
    """Uniform ``freq_n x freq_n`` sample of the open square ``(-half, half)^2``.

    The fractional ``offset`` keeps every component away from 0, the square
    edges and their quarter points for any ``freq_n``.
    """
    t = _axis_samples(-half, half, freq_n, offset)
    g1, g2 = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def sample_high_frequencies(freq_n: int, offset: float = 1.0 / 3.0):
    """Samples of ``(-pi, pi]^2`` minus the low-frequency square ``(-pi/2, pi/2]^2``.

    The axis spacing matches :func:`sample_base_frequencies` on ``(-pi/2, pi/2)``.
    The edges ``theta_i = -pi/2`` belong to the high set and are sampled as
    well, since smoothing factors typically peak on the low/high border.
    """
    t = _axis_samples(-np.pi, np.pi, 2 * freq_n, offset)
    g1, g2 = np.meshgrid(t, t, indexing="ij")
    pts = np.column_stack([g1.ravel(), g2.ravel()])
    low = np.all((pts > -np.pi / 2) & (pts <= np.pi / 2), axis=1)
    edge = np.concatenate([t, [-np.pi / 2]])
    border = np.concatenate([np.column_stack([np.full_like(edge, -np.pi / 2), edge]),
                             np.column_stack([t, np.full_like(t, -np.pi / 2)])])
    return np.concatenate([pts[~low], border])
