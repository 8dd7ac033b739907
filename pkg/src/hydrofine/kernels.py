"""Photon-side kernels: polarization frame, cutoff, field form factors and the
frozen-core one-photon vertex.

All array functions accept wave vectors of shape (3,) or (N, 3).
"""
from dataclasses import dataclass

import numpy as np

from .model import SIGMA_EL, SIGMA_N

TWO_PI = 2.0 * np.pi


def _as_k(k):
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != 3:
        raise ValueError(f"wave vectors must have a trailing dimension of 3, got {k.shape}")
    return k


def polarization(k):
    """Return (eps1, eps2) for wave vector(s) ``k``.

    The second vector uses the explicit component formula
    (-k1 k3, -k2 k3, k1^2 + k2^2) / (|k_perp| |k|), which equals -(k̂ ∧ eps1).
    """
    k = _as_k(k)
    k1, k2, k3 = k[..., 0], k[..., 1], k[..., 2]
    perp2 = k1 * k1 + k2 * k2
    if np.any(perp2 <= 0):
        raise ValueError("polarization vectors are undefined for k on the third axis")
    perp = np.sqrt(perp2)
    kn = np.sqrt(perp2 + k3 * k3)
    eps1 = np.stack([k2 / perp, -k1 / perp, np.zeros_like(k1)], axis=-1)
    eps2 = np.stack([-k1 * k3, -k2 * k3, perp2], axis=-1) / (perp * kn)[..., None]
    return eps1, eps2


def polarization_of(k, lam):
    """Polarization vector eps^lam(k) with ``lam`` in {1, 2} (broadcast over modes)."""
    eps1, eps2 = polarization(k)
    lam = np.asarray(lam)
    if np.any((lam != 1) & (lam != 2)):
        raise ValueError("polarization index must be 1 or 2")
    return np.where((lam == 1)[..., None], eps1, eps2)


def cutoff(k, lambda_uv):
    """Sharp ultraviolet cutoff 1_{|k| <= Λ} as a float array (boundary included)."""
    kn = np.linalg.norm(_as_k(k), axis=-1)
    return (kn <= lambda_uv).astype(float)


def _phase(x, k):
    x = np.asarray(x, dtype=float)
    return np.exp(-1j * np.sum(np.asarray(k) * x, axis=-1))


def h_A(x, k, lam, lambda_uv):
    """Vector-potential form factor (1/2π) χ_Λ(k) |k|^{-1/2} ε^λ(k) e^{-ik·x}."""
    k = _as_k(k)
    kn = np.linalg.norm(k, axis=-1)
    amp = cutoff(k, lambda_uv) / (TWO_PI * np.sqrt(kn))
    return (amp * _phase(x, k))[..., None] * polarization_of(k, lam)


def h_B(x, k, lam, lambda_uv):
    """Magnetic form factor -(i/2π) |k|^{1/2} χ_Λ(k) (k̂ ∧ ε^λ(k)) e^{-ik·x}."""
    k = _as_k(k)
    kn = np.linalg.norm(k, axis=-1)
    khat = k / kn[..., None]
    amp = -1j * np.sqrt(kn) * cutoff(k, lambda_uv) / TWO_PI
    return (amp * _phase(x, k))[..., None] * np.cross(khat, polarization_of(k, lam))


def hydrogen_form_factor(q, mu):
    """<φ0| e^{-i q·r} |φ0> for the hydrogen ground state, (1 + q²/4μ²)^-2."""
    q = np.asarray(q, dtype=float)
    return 1.0 / (1.0 + q * q / (4.0 * mu * mu)) ** 2


@dataclass(frozen=True)
class VertexData:
    """One-photon creation vertex S(k,λ) ⊗ a† plus the current coefficient j·(P - P_ph)."""

    spin_coeff: np.ndarray
    current_coeff: np.ndarray
    k: np.ndarray
    lam: int


def vertex_arrays(k, lam, params, derived, *, form_factors=True, spin=True,
                  current=True, b_components=(0, 1, 2)):
    """Batch frozen-core vertex.

    Returns ``(S, j)`` with S of shape (N, 4, 4) and j of shape (N, 3). The
    creation part of the interaction for mode (k, λ) is (S + j·(P - P_ph)) a†.

    ``b_components`` selects which Cartesian components of the magnetic
    kernel enter S; it exists to isolate individual terms of the hyperfine
    matrix.
    """
    k = np.atleast_2d(_as_k(k))
    lam = np.broadcast_to(np.asarray(lam), k.shape[:1])
    g = params.g
    n = k.shape[0]
    kn = np.linalg.norm(k, axis=1)
    a_scale = g ** (2.0 / 3.0) / derived.m_total
    if form_factors:
        f_el = hydrogen_form_factor(params.m_el * a_scale * kn, derived.mu)
        f_n = hydrogen_form_factor(params.m_n * a_scale * kn, derived.mu)
    else:
        f_el = f_n = np.ones(n)

    S = np.zeros((n, 4, 4), dtype=complex)
    j = np.zeros((n, 3), dtype=complex)
    if g == 0.0:
        return S, j
    origin = np.zeros(3)
    if spin:
        hb = h_B(origin, k, lam, params.lambda_uv)
        mask = np.zeros(3)
        mask[list(b_components)] = 1.0
        hb = hb * mask
        S = (-(g / (2 * params.m_el)) * f_el[:, None, None] * np.einsum("ni,iab->nab", hb, SIGMA_EL)
             + (g / (2 * params.m_n)) * f_n[:, None, None] * np.einsum("ni,iab->nab", hb, SIGMA_N))
    if current:
        ha = h_A(origin, k, lam, params.lambda_uv)
        j = -(g / derived.m_total) * ha * (f_el - f_n)[:, None]
    return S, j


def frozen_vertex(k, lam, params, derived, **kw):
    k = _as_k(k)
    S, j = vertex_arrays(k[None, :], np.array([lam]), params, derived, **kw)
    return VertexData(spin_coeff=S[0], current_coeff=j[0], k=k.copy(), lam=int(lam))
