import numpy as np
import pytest
from scipy import integrate, special

from hydrofine.kernels import (cutoff, frozen_vertex, h_A, h_B, hydrogen_form_factor, polarization,
                               polarization_of, vertex_arrays)
from hydrofine.model import PhysicalParams, derive_constants

S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2)


def random_k(rng, n, scale=1.0):
    return rng.normal(size=(n, 3)) * scale


# --------------------------------------------------------------------- oracles

def phi0_sq(r, mu):
    return mu ** 3 / np.pi * np.exp(-2 * mu * r)


def radial_form_factor(q, mu):
    """∫ φ0² e^{-iq·r} d³r by 1-D adaptive quadrature of the angular-averaged integrand."""
    def f(r):
        return 4 * np.pi * r * r * phi0_sq(r, mu) * np.sinc(q * r / np.pi)
    val, _ = integrate.quad(f, 0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def ball_rule(mu, n_r=40, n_t=48, n_p=48):
    """Nodes and weights for ∫ φ0(r)² f(r) d³r over R³ (generalized Laguerre × sphere)."""
    t, wt = special.roots_genlaguerre(n_r, 2.0)
    r = t / (2 * mu)
    wr = wt / (2 * mu) ** 3 * mu ** 3 / np.pi
    ct, wc = np.polynomial.legendre.leggauss(n_t)
    ph = 2 * np.pi * np.arange(n_p) / n_p
    R, C, P = np.meshgrid(r, ct, ph, indexing="ij")
    W = wr[:, None, None] * wc[None, :, None] * (2 * np.pi / n_p)
    s = np.sqrt(1 - C * C)
    x = np.stack([R * s * np.cos(P), R * s * np.sin(P), R * C], axis=-1).reshape(-1, 3)
    return x, np.broadcast_to(W, R.shape).reshape(-1)


# ---------------------------------------------------------------- polarization

def test_polarization_examples():
    e1, e2 = polarization(np.array([1.0, 0, 0]))
    assert np.allclose(e1, [0, -1, 0]) and np.allclose(e2, [0, 0, 1])
    e1, e2 = polarization(np.array([0, 1.0, 0]))
    assert np.allclose(e1, [1, 0, 0]) and np.allclose(e2, [0, 0, 1])


def test_polarization_frame_and_completeness():
    rng = np.random.default_rng(1)
    k = random_k(rng, 500)
    e1, e2 = polarization(k)
    kh = k / np.linalg.norm(k, axis=1)[:, None]
    for e in (e1, e2):
        assert np.allclose(np.linalg.norm(e, axis=1), 1)
        assert np.allclose(np.sum(e * k, axis=1), 0, atol=1e-14)
    assert np.allclose(np.sum(e1 * e2, axis=1), 0, atol=1e-15)
    comp = np.einsum("ni,nj->nij", e1, e1) + np.einsum("ni,nj->nij", e2, e2)
    assert np.allclose(comp, np.eye(3) - np.einsum("ni,nj->nij", kh, kh), atol=1e-14)
    # displayed second vector is the negative of k̂ ∧ ε¹
    assert np.allclose(e2, -np.cross(kh, e1))


def test_polarization_rejects_third_axis():
    with pytest.raises(ValueError):
        polarization(np.array([0, 0, 2.0]))
    with pytest.raises(ValueError):
        polarization_of(np.array([1.0, 0, 0]), 3)


def test_cutoff_examples():
    lam = 1.3
    assert cutoff(np.array([lam / 2, 0, 0]), lam) == 1
    assert cutoff(np.array([0, 2 * lam, 0]), lam) == 0
    assert cutoff(np.array([0, lam, 0]), lam) == 1


# -------------------------------------------------------------------- kernels

def test_h_B_example():
    assert np.allclose(h_B(np.zeros(3), np.array([1.0, 0, 0]), 1, 1.0), [0, 0, 1j / (2 * np.pi)],
                       atol=1e-17)


def test_h_A_transverse_and_h_B_completeness():
    rng = np.random.default_rng(2)
    k = random_k(rng, 400, 0.7)
    x = random_k(rng, 400, 3.0)
    kn = np.linalg.norm(k, axis=1)
    chi = (kn <= 1.0).astype(float)
    total = np.zeros(len(k))
    for lam in (1, 2):
        ha = h_A(x, k, lam, 1.0)
        assert np.allclose(np.sum(ha * k, axis=1), 0, atol=1e-14)
        hb = h_B(np.zeros(3), k, lam, 1.0)
        total += np.sum(np.abs(hb) ** 2, axis=1)
        # brute-force definition
        e = polarization_of(k, np.full(len(k), lam))
        ref = (chi / (2 * np.pi) / np.sqrt(kn))[:, None] * e * np.exp(-1j * np.sum(k * x, 1))[:, None]
        assert np.allclose(ha, ref, atol=1e-15)
    assert np.allclose(total, kn * chi ** 2 / (2 * np.pi ** 2), rtol=1e-13, atol=0)


def test_kernels_vanish_outside_cutoff():
    k = np.array([[2.0, 0.5, 0.1]])
    assert not np.any(h_A(np.zeros(3), k, 1, 1.0))
    assert not np.any(h_B(np.zeros(3), k, 2, 1.0))


def test_h_B_displacement_bound():
    """|h^B_j(r) - h^B_j(0)| <= (1/2π)|k|^{3/2} χ |r| on random samples."""
    rng = np.random.default_rng(3)
    k = random_k(rng, 2000, 0.6)
    r = random_k(rng, 2000, 2.0)
    kn = np.linalg.norm(k, axis=1)
    bound = kn ** 1.5 * (kn <= 1) * np.linalg.norm(r, axis=1) / (2 * np.pi)
    worst = 0.0
    for lam in (1, 2):
        d = np.abs(h_B(r, k, lam, 1.0) - h_B(np.zeros(3), k, lam, 1.0))
        assert np.all(d <= bound[:, None] * (1 + 1e-12))
        worst = max(worst, np.max(d.max(1)[bound > 0] / bound[bound > 0]))
    # the constant is not loose by orders of magnitude
    assert worst > 0.5


# ---------------------------------------------------------------- form factor

def test_form_factor_examples():
    mu = 0.37
    assert hydrogen_form_factor(0.0, mu) == 1.0
    assert hydrogen_form_factor(2 * mu, mu) == pytest.approx(0.25, abs=1e-16)
    assert radial_form_factor(2 * mu, mu) == pytest.approx(0.25, rel=1e-10)
    assert radial_form_factor(1e-8, mu) == pytest.approx(1.0, rel=1e-10)


def test_form_factor_against_radial_oracle():
    for mu in (0.5, 1836.152 / 1837.152):
        q = np.linspace(0, 10 * mu, 41)
        ref = np.array([radial_form_factor(x, mu) for x in q])
        assert np.allclose(hydrogen_form_factor(q, mu), ref, rtol=1e-9, atol=1e-13)
        assert np.all(np.diff(ref) < 0)
        assert np.all(np.diff(hydrogen_form_factor(q, mu)) < 0)


# --------------------------------------------------------------------- vertex

def test_vertex_zero_coupling():
    p = PhysicalParams(g=0.0)
    v = frozen_vertex(np.array([0.2, 0.1, 0.3]), 1, p, derive_constants(p))
    assert not np.any(v.spin_coeff) and not np.any(v.current_coeff)


def test_vertex_equal_masses_has_no_current():
    p = PhysicalParams(m_el=1.0, m_n=1.0, g=0.3)
    d = derive_constants(p)
    rng = np.random.default_rng(4)
    k = random_k(rng, 50, 0.5)
    S, j = vertex_arrays(k, np.tile([1, 2], 25), p, d)
    assert not np.any(j)
    assert np.any(S)


def test_vertex_current_is_transverse():
    p = PhysicalParams(g=0.4, m_n=3.0)
    d = derive_constants(p)
    rng = np.random.default_rng(5)
    k = random_k(rng, 100, 0.5)
    _, j = vertex_arrays(k, np.tile([1, 2], 50), p, d)
    assert np.max(np.abs(np.sum(j * k, axis=1))) < 1e-16
    assert np.max(np.abs(j)) > 1e-3


def test_vertex_outside_cutoff_is_zero():
    p = PhysicalParams(g=0.1)
    S, j = vertex_arrays(np.array([[1.5, 0.1, 0.0]]), [1], p, derive_constants(p))
    assert not np.any(S) and not np.any(j)


@pytest.mark.parametrize("m_n,g", [(3.0, 0.3), (1836.152, 0.05), (1.0, 0.8)])
def test_vertex_matches_three_dimensional_oracle(m_n, g):
    """S and j against ⟨φ0|w(r,k,λ)|φ0⟩ integrated over r, assembled with explicit krons."""
    p = PhysicalParams(m_el=1.0, m_n=m_n, g=g, p_total=(0.01, -0.02, 0.03))
    d = derive_constants(p)
    x, w = ball_rule(d.mu)
    scale = g ** (2 / 3) / d.m_total
    x_el = p.m_el * scale * x
    x_n = -p.m_n * scale * x
    rng = np.random.default_rng(6)
    for k in rng.normal(size=(4, 3)) * 0.45:
        for lam in (1, 2):
            hb_el = w @ h_B(x_el, np.broadcast_to(k, x.shape), lam, 1.0)
            hb_n = w @ h_B(x_n, np.broadcast_to(k, x.shape), lam, 1.0)
            ha_el = w @ h_A(x_el, np.broadcast_to(k, x.shape), lam, 1.0)
            ha_n = w @ h_A(x_n, np.broadcast_to(k, x.shape), lam, 1.0)
            s_ref = sum(-(g / (2 * p.m_el)) * hb_el[i] * np.kron(s, I2)
                        + (g / (2 * p.m_n)) * hb_n[i] * np.kron(I2, s)
                        for i, s in enumerate((S1, S2, S3)))
            # coefficient of (P - P_ph) in the A-coupling terms
            j_ref = -(g / d.m_total) * ha_el + (g / d.m_total) * ha_n
            v = frozen_vertex(k, lam, p, d)
            assert np.allclose(v.spin_coeff, s_ref, rtol=0, atol=1e-12 * np.abs(s_ref).max())
            j_scale = g / d.m_total * np.abs(ha_el).max()
            assert np.allclose(v.current_coeff, j_ref, rtol=0, atol=1e-10 * j_scale)


@pytest.mark.parametrize("a", [0.05, 0.4, 1.5])
def test_relative_momentum_coupling_is_longitudinal(a):
    """⟨φ0| p_r e^{-i a k·r} |φ0⟩ points along k, so its transverse part vanishes."""
    mu = 0.5
    x, w = ball_rule(mu)
    rng = np.random.default_rng(7)
    for k in rng.normal(size=(3, 3)):
        q = a * k
        ph = np.exp(-1j * x @ q)
        r = np.linalg.norm(x, axis=1)
        # p_r acting on e^{-iq·r} φ0 gives e^{-iq·r} (-q φ0 + i μ r̂ φ0); divide by φ0 inside w
        vec = w @ (ph[:, None] * (-q[None, :] + 1j * mu * x / r[:, None]))
        e1, e2 = polarization(k)
        # limited by the resolution of the fixed product rule at the largest q
        assert abs(vec @ e1) < 1e-8 * np.linalg.norm(vec)
        assert abs(vec @ e2) < 1e-8 * np.linalg.norm(vec)
        assert np.linalg.norm(vec) > 1e-3 * np.linalg.norm(q)


def test_b_component_mask():
    p = PhysicalParams(g=0.1, m_n=2.0)
    d = derive_constants(p)
    k = np.array([[0.3, 0.2, 0.4]])
    full, _ = vertex_arrays(k, [2], p, d)
    parts = sum(vertex_arrays(k, [2], p, d, b_components=(c,))[0] for c in range(3))
    assert np.allclose(full, parts, atol=1e-18)
    nospin, j = vertex_arrays(k, [2], p, d, spin=False)
    assert not np.any(nospin) and np.any(j)
