"""Truncated Fock space over a mode grid and the fiber Hamiltonian at fixed
total momentum in the frozen-core approximation.

The full space is spin ⊗ Fock with composite index ``4 * state + spin``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _accel
from .kernels import h_A, hydrogen_form_factor, vertex_arrays
from .model import singlet_vector

DEFAULT_MAX_DIM = 4_000_000
DENSE_THRESHOLD = 3000
CLUSTER_RTOL = 1e-11
RESIDUAL_RTOL = 1e-9


class BudgetError(RuntimeError):
    """Requested basis or solve exceeds the configured budget."""


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class FockBasis:
    modes: object
    n_max: int
    occ: np.ndarray
    photon_energy: np.ndarray
    p_ph: np.ndarray
    n_ph: np.ndarray

    @property
    def n_modes(self):
        return 0 if self.modes is None else len(self.modes)

    @property
    def n_states(self):
        return self.occ.shape[0]

    @property
    def dim(self):
        return 4 * self.n_states


def enumerate_basis(modes, n_max, max_dim=DEFAULT_MAX_DIM):
    if n_max not in (1, 2):
        raise ValueError(f"fock.n_max must be 1 or 2, got {n_max!r}")
    M = 0 if modes is None else len(modes)
    dim = 4 * _accel.n_states(M, n_max)
    if dim > max_dim:
        raise BudgetError(f"Fock dimension {dim} exceeds the budget {max_dim} "
                          f"(M={M}, n_max={n_max})")
    occ = _accel.occupations(M, n_max)
    n_states = occ.shape[0]
    energy = np.zeros(n_states)
    p_ph = np.zeros((n_states, 3))
    if M:
        kn = modes.k_norm
        for slot in range(2):
            filled = occ[:, slot] >= 0
            energy[filled] += kn[occ[filled, slot]]
            p_ph[filled] += modes.k[occ[filled, slot]]
    n_ph = (occ >= 0).sum(axis=1).astype(float)
    return FockBasis(modes=modes, n_max=n_max, occ=occ, photon_energy=energy,
                     p_ph=p_ph, n_ph=n_ph)


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    matrix: sp.csr_matrix
    label: str

    @property
    def shape(self):
        return self.matrix.shape

    def hermiticity_defect(self):
        a = self.matrix
        d = abs(a - a.conj().T)
        scale = abs(a).max() if a.nnz else 0.0
        return (d.max() if d.nnz else 0.0), scale


def _spin_lift(photon_op):
    return sp.kron(photon_op, sp.identity(4, dtype=complex, format="csr"), format="csr")


def _diag(values):
    return sp.diags(np.repeat(np.asarray(values, dtype=float), 4).astype(complex), format="csr")


def build_h0(basis, params, derived):
    shift = derived.p_total[None, :] - basis.p_ph
    diag = derived.e0 + np.einsum("si,si->s", shift, shift) / (2 * derived.m_total) + basis.photon_energy
    return AssembledOperator(_diag(diag), "H0")


def build_hph(basis):
    return AssembledOperator(_diag(basis.photon_energy), "Hph")


def build_nph(basis):
    return AssembledOperator(_diag(basis.n_ph), "Nph")


def build_pph(basis, axis):
    return AssembledOperator(_diag(basis.p_ph[:, axis]), "Pph_" + "xyz"[axis])


def _blocks_to_csr(tgt, src, blocks, dim):
    # blocks (T, 4, 4) at (4*tgt + a, 4*src + b)
    a = np.arange(4)
    rows = (4 * tgt[:, None, None] + a[None, :, None]) + 0 * a[None, None, :]
    cols = (4 * src[:, None, None] + a[None, None, :]) + 0 * a[None, :, None]
    return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(dim, dim))


def linear_creation(basis, params, derived, *, spin=True, form_factors=True, backend=None):
    """Creation half of the one-photon interaction; W_lin = C + C†."""
    M = basis.n_modes
    dim = basis.dim
    if M == 0 or params.g == 0.0:
        return sp.csr_matrix((dim, dim), dtype=complex)
    modes = basis.modes
    S, j = vertex_arrays(modes.k, modes.lam, params, derived, spin=spin, form_factors=form_factors)
    tgt, src, m, amp = _accel.creation_transitions(M, basis.n_max, backend=backend)
    # j·(P - P_ph) evaluated on the source state; j_m ⟂ k_m makes the ordering immaterial
    shift = derived.p_total[None, :] - basis.p_ph[src]
    cur = np.einsum("ti,ti->t", j[m], shift)
    coef = np.sqrt(modes.weight[m]) * amp
    blocks = coef[:, None, None] * (S[m] + cur[:, None, None] * np.eye(4)[None])
    return _blocks_to_csr(tgt, src, blocks, dim)


def quadratic_terms(basis, params, derived, *, form_factors=True, backend=None):
    """Normal-ordered A² contributions (spin identity), Wick constant omitted."""
    M = basis.n_modes
    dim = basis.dim
    if M == 0 or params.g == 0.0:
        return sp.csr_matrix((dim, dim), dtype=complex)
    modes = basis.modes
    g = params.g
    ha = h_A(np.zeros(3), modes.k, modes.lam, params.lambda_uv) * np.sqrt(modes.weight)[:, None]
    kk = modes.k
    dm = np.linalg.norm(kk[:, None, :] - kk[None, :, :], axis=-1)
    dp = np.linalg.norm(kk[:, None, :] + kk[None, :, :], axis=-1)
    hop = np.zeros((M, M), dtype=complex)
    pair = np.zeros((M, M), dtype=complex)
    a_scale = g ** (2.0 / 3.0) / derived.m_total
    for mass in (params.m_el, params.m_n):
        pref = g * g / (2 * mass)
        if form_factors:
            f_m = hydrogen_form_factor(mass * a_scale * dm, derived.mu)
            f_p = hydrogen_form_factor(mass * a_scale * dp, derived.mu)
        else:
            f_m = f_p = 1.0
        hop += 2 * pref * (ha @ ha.conj().T) * f_m
        pair += pref * (ha @ ha.T) * f_p
    ns = basis.n_states
    r, c, v = _accel.hop_entries(M, basis.n_max, hop, backend=backend)
    hop_op = sp.csr_matrix((v, (r, c)), shape=(ns, ns))
    r, c, v = _accel.pair_creation_entries(M, basis.n_max, pair)
    pair_op = sp.csr_matrix((v, (r, c)), shape=(ns, ns))
    return _spin_lift(hop_op + pair_op + pair_op.conj().T)


def build_w(basis, params, derived, include_quadratic=False, *, spin=True,
            form_factors=True, backend=None):
    c = linear_creation(basis, params, derived, spin=spin, form_factors=form_factors,
                        backend=backend)
    w = c + c.conj().T
    if include_quadratic:
        w = w + quadratic_terms(basis, params, derived, form_factors=form_factors,
                                backend=backend)
    return AssembledOperator(sp.csr_matrix(w), "Wg")


def build_hg(basis, params, derived, include_quadratic=False, **kw):
    h0 = build_h0(basis, params, derived)
    w = build_w(basis, params, derived, include_quadratic, **kw)
    return AssembledOperator(sp.csr_matrix(h0.matrix + w.matrix), "Hg")


@dataclass(frozen=True, eq=False)
class FockModel:
    """Basis plus the assembled H0, W_g and H_g for one parameter point."""
    params: object
    derived: object
    basis: FockBasis
    h0: AssembledOperator
    w: AssembledOperator
    hg: AssembledOperator


def build_model(params, derived, modes, n_max=1, include_quadratic=False, *, spin=True,
                form_factors=True, backend=None, max_dim=DEFAULT_MAX_DIM):
    basis = enumerate_basis(modes, n_max, max_dim=max_dim)
    h0 = build_h0(basis, params, derived)
    w = build_w(basis, params, derived, include_quadratic, spin=spin,
                form_factors=form_factors, backend=backend)
    hg = AssembledOperator(sp.csr_matrix(h0.matrix + w.matrix), "Hg")
    return FockModel(params, derived, basis, h0, w, hg)


# ---------------------------------------------------------------- spectra

@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    norm_estimate: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def clusters(self, rtol=CLUSTER_RTOL):
        """Sizes of eigenvalue clusters (consecutive gaps <= rtol * ||H||)."""
        tol = rtol * self.norm_estimate
        sizes = [1]
        for d in np.diff(self.eigenvalues):
            if d <= tol:
                sizes[-1] += 1
            else:
                sizes.append(1)
        return sizes

    def ground_cluster(self, rtol=CLUSTER_RTOL):
        n = self.clusters(rtol)[0]
        return self.eigenvalues[:n], self.eigenvectors[:, :n]


def _start_vector(dim):
    # deterministic, generic (no symmetry-adapted components vanish)
    x = np.arange(1, dim + 1, dtype=float)
    return np.sin(x * 0.7548776662466927) + 0.5 * np.cos(x * 0.5698402909980532)


def _deflate_missing(mat, vals, vecs, norm, maxiter):
    """Recover eigenpairs a single-vector Lanczos run skipped inside degenerate clusters.

    The found vectors are shifted out of the way and the lowest remaining
    eigenvalue is computed; while it undercuts the current top value it is
    swapped in.
    """
    dim = mat.shape[0]
    if vecs.shape[1] >= dim - 1:
        return vals, vecs
    shift = 2.0 * norm + 1.0
    tol = RESIDUAL_RTOL * max(norm, 1.0)
    for _ in range(vecs.shape[1] + 1):
        basis = vecs

        def matvec(x, basis=basis):
            x = np.asarray(x).reshape(-1)
            return mat @ x + shift * (basis @ (basis.conj().T @ x))

        op = spla.LinearOperator((dim, dim), matvec=matvec, dtype=mat.dtype)
        try:
            lo, v = spla.eigsh(op, k=1, which="SA", v0=_start_vector(dim),
                               ncv=min(dim, 20), maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos deflation did not converge: {exc}") from exc
        if lo[0] >= vals[-1] - tol:
            break
        v = v[:, 0] - basis @ (basis.conj().T @ v[:, 0])
        v /= np.linalg.norm(v)
        vals = np.append(vals[:-1], lo[0])
        vecs = np.column_stack([vecs[:, :-1], v])
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    return vals, vecs


def ground_spectrum(op, m, dense_threshold=DENSE_THRESHOLD, maxiter=None, tol=0.0):
    """Lowest ``m`` eigenpairs of a Hermitian operator.

    Dense decomposition at or below ``dense_threshold``, ARPACK Lanczos above.
    """
    mat = op.matrix if isinstance(op, AssembledOperator) else op
    mat = sp.csr_matrix(mat)
    dim = mat.shape[0]
    if not 1 <= m <= dim:
        raise ValueError(f"requested {m} eigenpairs of a {dim}-dimensional operator")
    norm = float(spla.norm(mat, 1)) if mat.nnz else 0.0
    if dim <= dense_threshold:
        vals, vecs = sla.eigh(mat.toarray(), subset_by_index=[0, m - 1])
        method = "dense"
    else:
        # Asking for exactly ``m`` pairs matters: the first excited photon shell is
        # massively degenerate, and reaching into it stalls the restarted Lanczos.
        k = min(dim - 1, m)
        ncv = min(dim, max(2 * k + 1, 20))
        try:
            vals, vecs = spla.eigsh(mat, k=k, which="SA", v0=_start_vector(dim), ncv=ncv,
                                    tol=tol, maxiter=maxiter or 50 * dim)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(vals)[:m]
        vals, vecs = vals[order], vecs[:, order]
        vals, vecs = _deflate_missing(mat, vals, vecs, norm, maxiter or 50 * dim)
        method = "lanczos"
    res = np.linalg.norm(mat @ vecs - vecs * vals[None, :], axis=0)
    bound = RESIDUAL_RTOL * max(norm, 1.0)
    if np.any(res > bound):
        raise ConvergenceError(
            f"eigenpair residual {res.max():.3e} exceeds {bound:.3e}", residual=float(res.max()))
    return SpectrumResult(eigenvalues=vals, eigenvectors=vecs, residuals=res,
                          norm_estimate=norm, method=method)


def observables(result, basis):
    """Photon number, spin reduced density matrix and singlet⊗vacuum overlap² per vector."""
    vecs = result.eigenvectors
    n = vecs.shape[1]
    nph = np.repeat(basis.n_ph, 4)
    s = singlet_vector()
    n_exp = np.empty(n)
    rho = np.empty((n, 4, 4), dtype=complex)
    overlap = np.empty(n)
    for i in range(n):
        v = vecs[:, i]
        n_exp[i] = float(np.real(np.vdot(v, nph * v)))
        blocks = v.reshape(basis.n_states, 4)
        rho[i] = blocks.T @ blocks.conj()
        overlap[i] = abs(np.vdot(s, blocks[0])) ** 2
    diag = {"n_ph": n_exp, "spin_density": rho, "singlet_vacuum_overlap2": overlap}
    result.diagnostics.update(diag)
    return diag


# ---------------------------------------------------------------- photon-only ladder operators

def annihilation_operator(basis, f, backend=None):
    """a(f) = Σ_m conj(f_m) a_m on the photon space; ``f`` holds √w-weighted mode values."""
    M = basis.n_modes
    ns = basis.n_states
    if M == 0:
        return sp.csr_matrix((ns, ns), dtype=complex)
    tgt, src, m, amp = _accel.creation_transitions(M, basis.n_max, backend=backend)
    vals = np.conj(np.asarray(f, dtype=complex))[m] * amp
    return sp.csr_matrix((vals, (src, tgt)), shape=(ns, ns))


def second_order_matrix(basis, h0, w, e_ref):
    """P0 W (e_ref - H0)^{-1} P̄0 W P0 restricted to spin ⊗ vacuum (4x4), sign chosen
    so that it returns Σ V† [H0 - e_ref]^{-1} V."""
    wm = sp.csc_matrix(w.matrix if isinstance(w, AssembledOperator) else w)
    d = (h0.matrix if isinstance(h0, AssembledOperator) else h0).diagonal().real
    col = wm[:, :4].toarray()
    col[:4] = 0.0
    denom = d - e_ref
    denom[:4] = np.inf
    return col.conj().T @ (col / denom[:, None])
