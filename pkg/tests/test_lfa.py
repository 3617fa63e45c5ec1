import numpy as np
import pytest
from oracles import spectral_radius_oracle

from trilfa import lfa
from trilfa.discretizations import ProblemSpec
from trilfa.lattice import harmonics_2h
from trilfa.lfa import (Analyzer, DegenerateConfigError, KGridConfig, analyze, omega_grid, optimize_omega,
                        spectral_radius, transfer_symbols, two_grid_factor, worker_count)
from trilfa.smoother import preset

STOKES = ProblemSpec("Stokes")
CURL = ProblemSpec("CurlCurl", h=2.0 ** -9)
RNG = np.random.default_rng(7)


def test_spectral_radius_matches_charpoly_oracle():
    an = Analyzer(STOKES, preset("stokes-diag"), KGridConfig(nu1=1, nu2=1))
    M, bad = an.two_grid_symbols(RNG.uniform(-1.5, 1.5, (6, 2)))
    assert not bad.any()
    for A in M:
        assert spectral_radius(A) == pytest.approx(spectral_radius_oracle(A), rel=1e-8, abs=1e-12)
    an = Analyzer(CURL, preset("nedelec-vertex"), KGridConfig(nu1=1))
    M, bad = an.two_grid_symbols(RNG.uniform(-1.5, 1.5, (4, 2)))
    for A in M[~bad]:
        assert spectral_radius(A) == pytest.approx(spectral_radius_oracle(A), rel=1e-8, abs=1e-12)


def test_spectral_radius_batch_and_errors():
    A = RNG.standard_normal((5, 4, 4))
    r = spectral_radius(A)
    assert r.shape == (5,)
    assert r[2] == pytest.approx(spectral_radius(A[2]))
    with pytest.raises(ValueError):
        spectral_radius(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        spectral_radius(np.zeros((49, 49)))


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("TRILFA_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("TRILFA_THREADS", "1000")
    assert 1 <= worker_count() <= 1000


def test_config_validation():
    with pytest.raises(ValueError):
        KGridConfig(nu1=-1)
    with pytest.raises(ValueError):
        KGridConfig(gamma=3)
    with pytest.raises(ValueError):
        KGridConfig(freq_n=4)
    with pytest.raises(ValueError):
        KGridConfig(coarse_op="algebraic")


def test_zero_smoothing_steps_is_identity():
    rep = analyze(STOKES, preset("stokes-diag"), KGridConfig(nu1=0, nu2=0, freq_n=9), "smooth")
    assert rep.mu == 1.0


def test_split_invariance_of_two_grid():
    a = two_grid_factor(STOKES, preset("stokes-diag"), KGridConfig(nu1=2, nu2=0, freq_n=12)).rho2g
    b = two_grid_factor(STOKES, preset("stokes-diag"), KGridConfig(nu1=1, nu2=1, freq_n=12)).rho2g
    assert a == pytest.approx(b, abs=1e-10)


def test_three_grid_with_exact_inner_solve_is_two_grid():
    cfg = KGridConfig(nu1=1, nu2=1)
    an = Analyzer(STOKES, preset("stokes-diag"), cfg)
    theta = np.array([[0.31, -0.52], [0.6, 0.13]])
    M3, bad3 = an.three_grid_symbols(theta, inner=np.zeros((2, 12, 12)))
    assert not bad3.any()
    r3 = spectral_radius(M3)
    mids = lfa._harmonics4(theta)[0]
    M2, _ = an.two_grid_symbols(mids.reshape(-1, 2))
    r2 = spectral_radius(M2).reshape(2, 4).max(axis=1)
    assert np.allclose(r3, r2, atol=1e-10)


def test_galerkin_coarse_symbols():
    theta = RNG.uniform(-1.5, 1.5, (5, 2))
    phis = lfa._harmonics2(theta)
    # curl-curl: the Galerkin product reproduces the rediscretized operator
    an = Analyzer(CURL, preset("nedelec-vertex"))
    P, R = an.transfer.symbols(phis, 2 * theta)
    G = R @ an.operator_blocks(0, phis) @ P
    assert np.abs(G - an.level(1).A(2 * theta)).max() < 1e-9 * an.level(0).scale
    # Stokes: all blocks agree except the h^2-weighted stabilization, which keeps h^2
    an = Analyzer(STOKES, preset("stokes-diag"))
    P, R = an.transfer.symbols(phis, 2 * theta)
    G = R @ an.operator_blocks(0, phis) @ P
    A2 = an.level(1).A(2 * theta)
    A2[:, 2, 2] /= 4.0
    assert np.abs(G - A2).max() < 1e-12


def test_galerkin_two_grid_equals_rediscretized_for_curlcurl():
    a = two_grid_factor(CURL, preset("nedelec-vertex"), KGridConfig(nu1=1, freq_n=12)).rho2g
    b = two_grid_factor(CURL, preset("nedelec-vertex"), KGridConfig(nu1=1, freq_n=12, coarse_op="galerkin")).rho2g
    assert a == pytest.approx(b, abs=1e-6)


def test_transfer_symbols_shapes():
    ts = transfer_symbols(STOKES, harmonics_2h([0.2, 0.4]))
    assert ts.prolong.shape == (12, 3) and ts.restrict.shape == (3, 12)


def test_report_fields_and_determinism(monkeypatch):
    cfg = KGridConfig(nu1=1, freq_n=20)
    monkeypatch.setenv("TRILFA_THREADS", "1")
    a = two_grid_factor(STOKES, preset("stokes-full"), cfg)
    monkeypatch.setenv("TRILFA_THREADS", "4")
    b = two_grid_factor(STOKES, preset("stokes-full"), cfg)
    assert a.to_dict() == b.to_dict()
    assert a.evaluated + a.skipped == 400
    assert a.config["smoother"] == "stokes-full"


def test_degenerate_config():
    an = Analyzer(STOKES, preset("stokes-diag"), KGridConfig(freq_n=8))

    def all_bad(chunk):
        return np.zeros(len(chunk)), np.ones(len(chunk), dtype=bool)

    with pytest.raises(DegenerateConfigError):
        an._sweep(all_bad, np.zeros((3, 2)))


def test_omega_grid_single_point_and_ties():
    cfg = KGridConfig(nu1=3, freq_n=10)
    wu, wp, rho = optimize_omega(STOKES, preset("stokes-diag"), cfg, [1.05], [0.6])
    assert (wu, wp) == (1.05, 0.6)
    table = omega_grid(STOKES, preset("stokes-diag"), cfg, [1.0, 1.05], [0.6])
    assert table.shape == (2, 3)
    with pytest.raises(ValueError):
        omega_grid(STOKES, preset("stokes-diag"), cfg, [], [0.6])


def test_curlcurl_mu_depends_on_mesh_size():
    # stiffness scales like h^-2, mass like h^0
    coarse = lfa.smoothing_factor(ProblemSpec("CurlCurl", 1.0), preset("nedelec-vertex"), KGridConfig(freq_n=12))
    fine = lfa.smoothing_factor(CURL, preset("nedelec-vertex"), KGridConfig(freq_n=12))
    assert coarse < fine
