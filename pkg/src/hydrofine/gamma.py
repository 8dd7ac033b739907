"""Second-order hyperfine matrix Γ: continuum quadrature, grid-matched mode
sum, the closed-form splitting constant C₀ and the induced level pattern.

Γ = Σ_λ ∫ V(k,λ)† [e0 + (P-k)²/2M + |k| - e_ref]^{-1} V(k,λ) d³k with
V = S + j·P the frozen-core creation vertex.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .kernels import vertex_arrays
from .model import singlet_vector

ALL_PARTS = frozenset({"B1", "B2", "B3", "A"})
CLUSTER_RTOL = 1e-6


class QuadratureError(RuntimeError):
    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


@dataclass
class GammaMatrix:
    matrix: np.ndarray
    provenance: str
    params: object
    denominator_energy: float
    grid: tuple | None = None
    form_factors: bool = True
    error_estimate: float | None = None

    def entry(self, row, col):
        """1-based (row, column) entry in the fixed spin ordering."""
        return self.matrix[row - 1, col - 1]


@dataclass
class SplittingReport:
    gamma_eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    multiplicity_pattern: list
    predicted_gap: float
    singlet_alignment: float
    extras: dict = field(default_factory=dict)


def _parts_vertex(k, lam, params, derived, parts, form_factors):
    parts = frozenset(parts)
    unknown = parts - ALL_PARTS
    if unknown:
        raise ValueError(f"unknown vertex parts {sorted(unknown)}")
    comps = tuple(i for i, name in enumerate(("B1", "B2", "B3")) if name in parts)
    S, j = vertex_arrays(k, lam, params, derived, form_factors=form_factors,
                         spin=bool(comps), current="A" in parts, b_components=comps)
    return S + np.einsum("ni,i->n", j, derived.p_total)[:, None, None] * np.eye(4)


def _denominator(k, derived, e_ref):
    d = derived.p_total[None, :] - k
    return derived.e0 + np.einsum("ni,ni->n", d, d) / (2 * derived.m_total) + np.linalg.norm(k, axis=1) - e_ref


def _resolve_e_ref(derived, e_ref):
    e_ref = derived.e0_fiber if e_ref is None else float(e_ref)
    if e_ref > derived.e0_fiber + 1e-15 * abs(derived.e0_fiber):
        raise ValueError(f"e_ref={e_ref} lies above E0={derived.e0_fiber}; the resolvent is not positive")
    return e_ref


def _weighted_sum(k, lam, weight, params, derived, e_ref, left, right, form_factors):
    vl = _parts_vertex(k, lam, params, derived, left, form_factors)
    vr = vl if frozenset(left) == frozenset(right) else _parts_vertex(k, lam, params, derived, right, form_factors)
    coef = weight / _denominator(k, derived, e_ref)
    return np.einsum("n,nba,nbc->ac", coef, vl.conj(), vr)


def gamma_discrete(grid, params, derived, e_ref=None, *, form_factors=True,
                   left=ALL_PARTS, right=ALL_PARTS):
    e_ref = _resolve_e_ref(derived, e_ref)
    mat = _weighted_sum(grid.k, grid.lam, grid.weight, params, derived, e_ref, left, right, form_factors)
    return GammaMatrix(matrix=mat, provenance="discrete", params=params, denominator_energy=e_ref,
                       grid=grid.spec.as_tuple(), form_factors=form_factors)


def _angular_rule(n_theta, n_phi):
    ct, wc = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    C, F = np.meshgrid(ct, phi, indexing="ij")
    st = np.sqrt(1 - C * C)
    dirs = np.stack([st * np.cos(F), st * np.sin(F), C], axis=-1).reshape(-1, 3)
    w = (wc[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]).reshape(-1)
    return dirs, w


def gamma_continuum(params, derived, e_ref=None, *, form_factors=True, rtol=1e-10,
                    n_theta=24, n_phi=24, left=ALL_PARTS, right=ALL_PARTS, limit=400):
    """Adaptive radial Gauss-Kronrod nested with a fixed angular product rule.

    The angular integrand (summed over polarizations) is a low-degree polynomial
    in k̂ times a smooth denominator, so a fixed Gauss-Legendre × trapezoid rule
    is spectrally accurate.
    """
    e_ref = _resolve_e_ref(derived, e_ref)
    if params.g == 0.0:
        return GammaMatrix(np.zeros((4, 4), complex), "continuum", params, e_ref, None, form_factors, 0.0)
    dirs, wang = _angular_rule(n_theta, n_phi)
    dirs2 = np.repeat(dirs, 2, axis=0)
    lam = np.tile([1, 2], dirs.shape[0])
    w2 = np.repeat(wang, 2)

    def integrand(r):
        if r == 0.0:
            return np.zeros(32)
        m = _weighted_sum(r * dirs2, lam, w2 * r * r, params, derived, e_ref, left, right, form_factors)
        return np.concatenate([m.real.ravel(), m.imag.ravel()])

    # A cross block (left != right) may vanish identically; its accuracy is then judged
    # against the Cauchy-Schwarz scale sqrt(|Γ_LL| |Γ_RR|) from a coarse fixed rule.
    atol = 0.0
    if frozenset(left) != frozenset(right):
        def coarse(parts):
            xr, wr = np.polynomial.legendre.leggauss(32)
            r = 0.5 * params.lambda_uv * (xr + 1.0)
            wr = 0.5 * params.lambda_uv * wr
            tot = sum(wi * _weighted_sum(ri * dirs2, lam, w2 * ri * ri, params, derived, e_ref,
                                         parts, parts, form_factors) for ri, wi in zip(r, wr))
            return np.max(np.abs(tot))
        atol = rtol * np.sqrt(coarse(left) * coarse(right))
    # identically vanishing blocks (e.g. the current term at P = 0) must not drive bisection
    atol = max(atol, np.finfo(float).tiny)

    val, err = integrate.quad_vec(integrand, 0.0, params.lambda_uv, epsrel=rtol, epsabs=atol,
                                  limit=limit, norm="max")
    scale = np.max(np.abs(val))
    if err > 10 * max(rtol * scale, atol):
        raise QuadratureError(f"Γ quadrature reached error {err:.3e} (requested {rtol * scale:.3e})",
                              achieved=err / scale)
    mat = val[:16].reshape(4, 4) + 1j * val[16:].reshape(4, 4)
    return GammaMatrix(matrix=mat, provenance="continuum", params=params, denominator_energy=e_ref,
                       grid=None, form_factors=form_factors, error_estimate=float(err))


def _bracket(x):
    """ln(1+x) - x + x²/2 without cancellation."""
    if x < 0.1:
        total, term, n = 0.0, x * x, 3
        while True:
            term *= -x if n > 3 else x
            add = term / n
            total += add
            if abs(add) <= 1e-18 * abs(total):
                return total
            n += 1
    return np.log1p(x) - x + 0.5 * x * x


def c0_closed_form(params, derived, *, rtol=1e-12, n_theta=32, n_phi=32):
    """Splitting constant C₀ with Γ32 = -C₀ g² at leading order.

    At P = 0 this is the closed form (4M / 3π m_el m_n) [Λ²/2 - 2MΛ + 4M² ln(1 + Λ/2M)];
    the bracket is evaluated as 4M² (ln(1+x) - x + x²/2), x = Λ/2M, which is the
    same quantity free of cancellation. For P ≠ 0 it falls back to quadrature.
    """
    M = derived.m_total
    lam = params.lambda_uv
    pref = 1.0 / (8 * np.pi ** 2 * params.m_el * params.m_n)
    if not np.any(derived.p_total):
        x = lam / (2 * M)
        bracket = 4 * M * M * _bracket(x)
        return 4 * M / (3 * np.pi * params.m_el * params.m_n) * bracket
    P = derived.p_total
    dirs, wang = _angular_rule(n_theta, n_phi)
    ang = dirs[:, 2] ** 2 + 1.0

    def radial(r):
        if r == 0.0:
            return 0.0
        den = r * r / (2 * M) - r * (dirs @ P) / M + r
        return r * r * np.sum(wang * r * ang / den)

    val, _ = integrate.quad(radial, 0.0, lam, epsrel=rtol, epsabs=0.0, limit=200)
    return pref * val


def c0_quadrature(params, derived, rtol=1e-13):
    """Independent oracle for C₀ at P = 0: adaptive radial quadrature times ∫(cos²θ+1)dΩ = 16π/3."""
    M = derived.m_total
    val, _ = integrate.quad(lambda r: r ** 3 / (r * r / (2 * M) + r) if r > 0 else 0.0,
                            0.0, params.lambda_uv, epsrel=rtol, epsabs=0.0, limit=200)
    return (16 * np.pi / 3) * val / (8 * np.pi ** 2 * params.m_el * params.m_n)


def _clusters(vals, rtol):
    scale = max(np.max(np.abs(vals)), np.finfo(float).tiny)
    sizes = [1]
    for d in -np.diff(vals):
        if d <= rtol * scale:
            sizes[-1] += 1
        else:
            sizes.append(1)
    return sizes


def splitting_prediction(gamma, rtol=CLUSTER_RTOL):
    """Eigenstructure of Γ. Second-order energies are E0 - eig(Γ), so the top
    eigenvalue labels the predicted ground state."""
    mat = gamma.matrix if isinstance(gamma, GammaMatrix) else np.asarray(gamma)
    herm = 0.5 * (mat + mat.conj().T)
    vals, vecs = np.linalg.eigh(herm)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    pattern = _clusters(vals, rtol)
    gap = float(vals[0] - np.mean(vals[1:]))
    align = float(abs(np.vdot(singlet_vector(), vecs[:, 0])) ** 2)
    return SplittingReport(gamma_eigenvalues=vals, eigenvectors=vecs, multiplicity_pattern=pattern,
                           predicted_gap=gap, singlet_alignment=align)
