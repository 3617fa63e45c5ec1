import numpy as np
import pytest

from trilfa.lattice import (DegenerateBasisError, FrequencyDomainError, LatticeBasis, equilateral_basis,
                            harmonics_2h, harmonics_4h, node_position, reciprocal_basis, reduce_angle,
                            sample_base_frequencies, sample_high_frequencies)


def test_reciprocal_basis_identity():
    b = equilateral_basis()
    E = np.array([b.e1, b.e2])
    Ep = np.array([b.e1p, b.e2p])
    assert np.allclose(E @ Ep.T, np.eye(2), atol=1e-14)


def test_parallel_basis_rejected():
    with pytest.raises(DegenerateBasisError):
        reciprocal_basis([1.0, 0.0], [1.0, 1e-14])


def test_non_unit_basis_rejected():
    with pytest.raises(ValueError):
        LatticeBasis(np.array([2.0, 0.0]), np.array([0.0, 1.0]))


def test_equilateral_neighbours_have_unit_length():
    b = equilateral_basis(0.25)
    for k, l in ((1, 0), (0, 1), (1, 1)):
        assert np.linalg.norm(node_position(b, 0, k, l)) == pytest.approx(0.25, abs=1e-15)
    assert b.angle == pytest.approx(120.0)


def test_edge_subgrids_are_midpoints():
    b = equilateral_basis()
    mid = node_position(b, 3, 2, 1)
    ends = node_position(b, 0, 2, 1) + node_position(b, 0, 3, 2)
    assert np.allclose(mid, ends / 2)


def test_harmonics_2h_alias_to_coarse_mode():
    hs = harmonics_2h([0.3, -1.2])
    assert hs.members.shape == (4, 2)
    assert np.allclose(hs.members[0], [0.3, -1.2])
    diff = reduce_angle(2 * hs.members - 2 * hs.base)
    assert np.allclose(diff, 0, atol=1e-13)
    pairs = {tuple(np.round(m, 12)) for m in hs.members}
    assert len(pairs) == 4


def test_harmonics_4h_alias_and_distinct():
    hs = harmonics_4h([0.1, -0.7])
    assert hs.members.shape == (16, 2)
    assert np.allclose(reduce_angle(4 * hs.members - 4 * hs.base), 0, atol=1e-12)
    assert len({tuple(np.round(m, 12)) for m in hs.members}) == 16
    # members 4j..4j+3 are the 2h-harmonics of the intermediate frequency
    for j in range(4):
        assert np.allclose(reduce_angle(2 * hs.members[4 * j:4 * j + 4] - hs.coarse[j]), 0, atol=1e-12)


def test_harmonics_domain_checks():
    with pytest.raises(FrequencyDomainError):
        harmonics_2h([2.0, 0.0])
    with pytest.raises(FrequencyDomainError):
        harmonics_4h([0.0, 1.0])


def test_sampling_avoids_special_points():
    base = sample_base_frequencies(33, np.pi / 2)
    assert base.shape == (33 * 33, 2)
    assert np.abs(base).min() > 1e-3
    assert np.all(np.abs(base) < np.pi / 2)
    high = sample_high_frequencies(33)
    assert np.all(np.abs(high).max(axis=1) >= np.pi / 2)
    # interior grid plus the two border lines theta_i = -pi/2 (shared corner once)
    assert len(high) == (66 * 66 - 33 * 33) + 2 * 66 + 1
    assert len(np.unique(high, axis=0)) == len(high)
    assert np.any(np.all(high == -np.pi / 2, axis=1))
