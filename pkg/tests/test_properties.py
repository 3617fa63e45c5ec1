"""Randomized invariants of the lattice, symbols, smoothers and local solves."""
from functools import lru_cache

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import point_gs_symbol, seeded_field, spectral_radius_oracle

from trilfa.discretizations import (MultiStencil, ProblemSpec, assemble_patch_oracle,
                                    nedelec_curlcurl_stencils, operator_symbol, problem_stencils,
                                    stokes_stencils)
from trilfa.lattice import LatticeBasis, harmonics_2h, harmonics_4h, reciprocal_basis, reduce_angle
from trilfa.lfa import Analyzer, KGridConfig, spectral_radius
from trilfa.mgsolve import BlockSmoother, assemble, build_mesh, schur_solve
from trilfa.smoother import BlockSpec, SmootherSymbol, preset, update_count
from trilfa.transfer import gradient_symbol

PI = np.pi
SETTINGS = settings(max_examples=40, deadline=None, derandomize=True)
angle = st.floats(-PI, PI, allow_nan=False)


def _open_box(half):
    # strictly inside the box, away from the sign switch at 0 and the corner
    return st.floats(-half * 0.999, half * 0.999).filter(lambda t: abs(t) > 1e-6)


@SETTINGS
@given(st.floats(0.2, 3.0), st.floats(-PI, PI))
def test_reciprocal_basis_identity(gap, rot):
    e1 = np.array([np.cos(rot), np.sin(rot)])
    e2 = np.array([np.cos(rot + gap), np.sin(rot + gap)])
    b = LatticeBasis(e1, e2)
    E = np.array([b.e1, b.e2])
    assert np.allclose(E @ np.array(reciprocal_basis(e1, e2)).T, np.eye(2), atol=1e-12)


@SETTINGS
@given(_open_box(PI / 2), _open_box(PI / 2))
def test_2h_harmonics_distinct_and_aliased(t1, t2):
    hs = harmonics_2h([t1, t2])
    m = hs.members
    assert np.allclose(m[0], [t1, t2])
    assert np.allclose(reduce_angle(2 * m - 2 * hs.base), 0, atol=1e-12)
    gaps = np.abs(reduce_angle(m[:, None] - m[None])).max(axis=-1) + np.eye(4) * 10
    assert gaps.min() > 1.0


@SETTINGS
@given(_open_box(PI / 4), _open_box(PI / 4))
def test_4h_harmonics_distinct_and_aliased(t1, t2):
    hs = harmonics_4h([t1, t2])
    m = hs.members
    assert np.allclose(reduce_angle(4 * m - 4 * hs.base), 0, atol=1e-11)
    gaps = np.abs(reduce_angle(m[:, None] - m[None])).max(axis=-1) + np.eye(16) * 10
    assert gaps.min() > 0.5


@settings(max_examples=6, deadline=None, derandomize=True)
@given(st.sampled_from(["Stokes", "CurlCurl"]), st.floats(0.01, 2.0), st.floats(0.0, 5.0))
def test_stencils_equal_patch_oracle(kind, h, kappa):
    spec = ProblemSpec(kind, h, kappa=kappa)
    a, b = problem_stencils(spec), assemble_patch_oracle(spec, 6)
    scale = max(abs(v) for v in a.entries.values())
    keys = set(a.entries) | set(b.entries)
    assert max(abs(a.entries.get(k, 0) - b.entries.get(k, 0)) for k in keys) <= 1e-13 * scale


@SETTINGS
@given(angle, angle, st.floats(1e-3, 1.0))
def test_stokes_symbol_hermitian(t1, t2, h):
    sten = stokes_stencils(ProblemSpec("Stokes", h))
    A = operator_symbol(sten, None, np.array([t1, t2]))
    scale = max(abs(v) for v in sten.entries.values())
    assert np.abs(A - A.conj().T).max() <= 1e-12 * scale


@SETTINGS
@given(angle, angle, st.floats(1e-3, 1.0))
def test_curl_annihilates_discrete_gradients(t1, t2, h):
    N = nedelec_curlcurl_stencils(ProblemSpec("CurlCurl", h))
    th = np.array([t1, t2])
    A = operator_symbol(N, None, th)
    scale = max(abs(v) for v in N.entries.values())
    assert np.abs(A @ gradient_symbol(th)).max() <= 1e-12 * scale


@lru_cache(maxsize=None)
def _scalar_laplacian():
    uu = stokes_stencils(ProblemSpec("Stokes")).block(0, 0)
    return uu, MultiStencil((0,), {(0, 0, kk, ll): c for (kk, ll), c in uu.items()})


@SETTINGS
@given(angle, angle)
def test_point_gauss_seidel_symbol(t1, t2):
    uu, sten = _scalar_laplacian()
    th = np.array([[t1, t2]])
    S, bad = SmootherSymbol(sten, BlockSpec(1, ((0, (0, 0)),)))(th)
    if not bad[0]:
        assert abs(S[0, 0, 0] - point_gs_symbol(uu, th[0])) <= 1e-10


@SETTINGS
@given(st.integers(1, 16), st.integers(0, 2 ** 31))
def test_schur_solve_matches_dense(q, seed):
    rng = np.random.default_rng(seed)
    D = rng.uniform(0.5, 4.0, q)
    b = rng.standard_normal(q)
    c = -rng.uniform(0.0, 1.0)
    ru, rp = rng.standard_normal(q), rng.standard_normal()
    M = np.block([[np.diag(D), b[:, None]], [b[None, :], np.array([[c]])]])
    ref = np.linalg.solve(M, np.append(ru, rp))
    du, dp = schur_solve(D, b, c, ru, rp)
    assert np.abs(np.append(du, dp) - ref).max() <= 1e-12 * np.linalg.cond(M) * np.abs(ref).max()


@lru_cache(maxsize=None)
def _interior_setup(kind, name):
    mesh = build_mesh(5)
    problem = ProblemSpec(kind, h=mesh.h)
    op = assemble(mesh, problem)
    spec = preset(name, (0.9, 0.9, 0.7))
    sm = BlockSmoother.build(mesh, op, spec)
    pos = (mesh.kl if kind == "Stokes" else mesh.edge_kl)[op.site]
    anchor = (18, 9)
    b = int(np.nonzero((mesh.kl[sm.anchors] == anchor).all(axis=1))[0][0])
    one = BlockSmoother.from_blocks(op, spec, sm.members[b:b + 1], sm.counts[b:b + 1])
    return op, problem_stencils(problem), spec, pos, anchor, one, sm.members[b, :sm.counts[b]]


@settings(max_examples=15, deadline=None, derandomize=True)
@given(st.sampled_from([("Stokes", "stokes-full"), ("Stokes", "stokes-diag"), ("CurlCurl", "nedelec-vertex")]),
       angle, angle, st.integers(0, 2 ** 31))
def test_interior_sweep_agrees_with_symbol(case, t1, t2, seed):
    op, sten, spec, pos, anchor, one, members = _interior_setup(*case)
    th = np.array([t1, t2])
    rng = np.random.default_rng(seed)
    a0 = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    x, alpha = seeded_field(pos, op.var, anchor, sten, spec, th, a0)
    re, im = x.real.copy(), x.imag.copy()
    one.sweep(re, np.zeros_like(re))
    one.sweep(im, np.zeros_like(im))
    y = re + 1j * im
    expected = x.copy()
    for i in members:
        r = int(op.var[i])
        k, l = pos[i]
        n = update_count(spec, r, (k - anchor[0], l - anchor[1]))[0]
        expected[i] = alpha[(r, n + 1)] * np.exp(1j * th @ (np.array([k, l], float) + sten.deltas[r]))
    assert np.abs(y - expected).max() <= 1e-8 * np.abs(expected).max()


@lru_cache(maxsize=None)
def _analyzer(kind, name):
    problem = ProblemSpec(kind, h=1.0 if kind == "Stokes" else 2.0 ** -9)
    return Analyzer(problem, preset(name), KGridConfig(nu1=1, nu2=1))


@settings(max_examples=20, deadline=None, derandomize=True)
@given(st.sampled_from([("Stokes", "stokes-diag"), ("Stokes", "stokes-full"), ("CurlCurl", "nedelec-vertex")]),
       _open_box(PI / 2), _open_box(PI / 2))
def test_spectral_radius_matches_charpoly(case, t1, t2):
    M, bad = _analyzer(*case).two_grid_symbols(np.array([[t1, t2]]))
    if not bad[0]:
        assert abs(spectral_radius(M[0]) - spectral_radius_oracle(M[0])) <= 1e-8 * max(1.0, spectral_radius(M[0]))
