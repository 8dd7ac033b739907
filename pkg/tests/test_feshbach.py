import numpy as np
import pytest

from hydrofine.bounds import hph_margin, ladder_bounds, loglog_slope, op_norm, p_bar_margin, wg_relative_norms
from hydrofine.feshbach import (FeshbachConfig, FeshbachError, f0_norm_check, feshbach_direct,
                                feshbach_series, p_rho_mask, project_p_rho)
from hydrofine.fock import build_model, ground_spectrum
from hydrofine.grid import GridSpec, build_grid
from hydrofine.model import PhysicalParams, derive_constants


def model(g=0.02, spec=(4, 2, 2), n_max=2, quad=True, p_total=(0.0, 0.0, 0.0)):
    p = PhysicalParams(g=g, p_total=p_total)
    d = derive_constants(p)
    return build_model(p, d, build_grid(GridSpec(*spec), 1.0), n_max, quad)


def ground(m):
    res = ground_spectrum(m.hg, 8)
    return res.eigenvalues[0], res.ground_cluster()


# ---------------------------------------------------------------- projector

def test_projector_examples():
    m = model()
    b = m.basis
    kmin = b.modes.k_norm.min()
    p = project_p_rho(b, 0.5 * kmin).toarray()
    assert np.trace(p).real == 4 and np.all(np.diag(p)[:4] == 1)
    assert np.array_equal(project_p_rho(b, b.photon_energy.max()).toarray(), np.eye(b.dim))
    for rho in (0.1, 0.3, 0.9):
        p = project_p_rho(b, rho).toarray()
        assert np.array_equal(p @ p, p) and np.array_equal(p, p.conj().T)
        assert np.array_equal(np.diag(p).real.astype(bool), p_rho_mask(b, rho))


# ---------------------------------------------------------------- config

def test_config_rules():
    d = derive_constants(PhysicalParams())
    cfg = FeshbachConfig.from_coupling(0.01, tau=0.1)
    assert cfg.rho == pytest.approx(0.01 ** 1.8)
    with pytest.raises(ValueError):
        FeshbachConfig.from_coupling(0.01, tau=0.3)
    with pytest.raises(ValueError, match="g\\^2"):
        FeshbachConfig(rho=1e-3).validate(0.02, d)
    FeshbachConfig(rho=1e-3, regime_factor=1.0).validate(0.02, d)
    with pytest.raises(ValueError, match="e0"):
        FeshbachConfig(rho=0.4).validate(0.0, d)
    with pytest.raises(ValueError):
        FeshbachConfig(rho=0.1, epsilon=-1).validate(0.0, d)


# ------------------------------------------------------------------ direct

def test_zero_coupling_reduces_to_free_block():
    m = model(g=0.0)
    d = m.derived
    cfg = FeshbachConfig(rho=0.3, epsilon=1e-2)
    res = feshbach_direct(m.hg, d.e0_fiber, cfg, m.basis)
    mask = p_rho_mask(m.basis, 0.3)
    h0 = m.h0.matrix.diagonal()[mask]
    assert np.allclose(res.f_matrix, np.diag(h0 - d.e0_fiber + 1e-2), rtol=0, atol=1e-15)
    s = feshbach_series(m.hg, m.h0, d.e0_fiber, cfg, m.basis)
    assert np.allclose(s.f_matrix, res.f_matrix, rtol=0, atol=1e-15)
    assert s.series_ratios.size == 0


def test_identity_and_kernel_at_moderate_coupling():
    m = model(g=0.05)
    e_g, cluster = ground(m)
    rho = 0.15
    for eps in (1e-2, 1e-3):
        r = feshbach_direct(m.hg, e_g, FeshbachConfig(rho, eps, regime_factor=1.0), m.basis)
        assert r.residual_identity <= 1e-8
        assert r.block_gap > 0
    r0 = feshbach_direct(m.hg, e_g, FeshbachConfig(rho, 0.0, regime_factor=1.0), m.basis, ground=cluster)
    assert r0.residual_kernel <= 1e-8
    # F_ρ(0) is singular with the ground cluster in its kernel
    assert np.linalg.svd(r0.f_matrix, compute_uv=False).min() <= 1e-8


def test_series_matches_direct():
    m = model(g=0.02)
    e_g, cluster = ground(m)
    cfg = FeshbachConfig(0.15, 0.0, regime_factor=1.0, series_cap=60)
    direct = feshbach_direct(m.hg, e_g, cfg, m.basis, ground=cluster)
    s = feshbach_series(m.hg, m.h0, e_g, cfg, m.basis, direct=direct)
    scale = np.linalg.norm(direct.f_matrix, 2)
    assert s.series_errors[-1] <= 1e-12 * max(scale, 1e-300) + 1e-15
    assert not s.divergent
    assert np.all(s.series_ratios[s.series_ratios > 0] < 1)


def test_non_invertible_block_is_reported():
    m = model(g=0.02)
    cfg = FeshbachConfig(0.05, 0.0, regime_factor=1.0)
    with pytest.raises(FeshbachError) as exc:
        feshbach_direct(m.hg, m.derived.e0 + 0.5, cfg, m.basis)
    assert exc.value.min_eigenvalue < 0


def test_f0_norm_check_free_case():
    m = model(g=0.0)
    d = m.derived
    rho = 0.3
    out = f0_norm_check(m.hg, d.e0_fiber, FeshbachConfig(rho, regime_factor=1.0), m.basis)
    mask = p_rho_mask(m.basis, rho)
    top = (m.h0.matrix.diagonal().real[mask] - d.e0_fiber).max()
    assert out["norm"] == pytest.approx(top, rel=1e-14)
    assert out["norm"] <= rho
    assert all(a > b for a, b in zip(out["eps_diffs"], out["eps_diffs"][1:]))


# ------------------------------------------------------------------ bounds

def test_hph_and_pbar_margins():
    m = model(g=0.02, p_total=(0.0, 30.0, 60.0))
    assert hph_margin(m.basis, m.h0, m.derived) >= -1e-10
    for rho in (0.05, 0.2, 0.5):
        assert p_bar_margin(m.basis, m.h0, m.derived, rho) >= -1e-10


def test_ladder_bounds_hold():
    m = model(g=0.02, spec=(3, 2, 2))
    rng = np.random.default_rng(0)
    f = rng.normal(size=len(m.basis.modes)) + 1j * rng.normal(size=len(m.basis.modes))
    for name, (val, bound) in ladder_bounds(m.basis, f, 0.1).items():
        assert val <= bound + 1e-10, name


def test_op_norm_sparse_and_dense():
    a = np.diag([1.0, -3.0, 2.0])
    assert op_norm(a) == pytest.approx(3.0)
    import scipy.sparse as sp
    assert op_norm(sp.csr_matrix(a)) == pytest.approx(3.0)
    assert op_norm(sp.csr_matrix((3, 3))) == 0.0


def test_w_relative_norms_are_linear_in_g():
    gs = (0.005, 0.01, 0.02)
    norms = []
    for g in gs:
        m = model(g=g, spec=(6, 1, 2))
        e_g = ground_spectrum(m.hg, 4).eigenvalues[0]
        norms.append(wg_relative_norms(m.basis, m.h0, m.w, e_g, 0.3))
    norms = np.array(norms)
    for col in range(3):
        assert loglog_slope(gs, norms[:, col]) == pytest.approx(1.0, abs=0.15)
