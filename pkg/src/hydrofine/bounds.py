"""Numerical counterparts of the operator bounds used to control the
Feshbach-Schur reduction, evaluated on the truncated model."""
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .feshbach import p_rho_mask
from .fock import AssembledOperator, annihilation_operator

DENSE_NORM_LIMIT = 2500


def _mat(op):
    return sp.csr_matrix(op.matrix if isinstance(op, AssembledOperator) else op)


def op_norm(a):
    """Spectral norm of a (sparse or dense) matrix."""
    if sp.issparse(a):
        if a.nnz == 0:
            return 0.0
        if min(a.shape) <= DENSE_NORM_LIMIT:
            a = a.toarray()
        else:
            ata = (a.conj().T @ a).tocsr()
            top = spla.eigsh(ata, k=1, which="LA", ncv=min(ata.shape[0], 64), return_eigenvectors=False,
                             tol=1e-12)
            return float(np.sqrt(max(top[0], 0.0)))
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(sla.svdvals(a)[0])


def hph_margin(basis, h0, derived):
    """min eig of 2(H0 - E0) - H_ph; both operators are diagonal in the occupation basis."""
    d = _mat(h0).diagonal().real
    hph = np.repeat(basis.photon_energy, 4)
    return float(np.min(2 * (d - derived.e0_fiber) - hph))


def ladder_bounds(basis, f, rho):
    """Norms of a(f) against N and H_ph weights, with their stated bounds.

    ``f`` holds √w-weighted mode values so that ||f||² = Σ_m |f_m|².
    """
    f = np.asarray(f, dtype=complex)
    a = annihilation_operator(basis, f)
    n = basis.n_ph
    n_inv = np.where(n > 0, 1.0 / np.sqrt(np.where(n > 0, n, 1.0)), 0.0)
    h_inv = 1.0 / np.sqrt(basis.photon_energy + rho)
    fn = float(np.linalg.norm(f))
    kn = basis.modes.k_norm
    fk = float(np.linalg.norm(f / np.sqrt(kn)))
    out = {
        "a_Ninv": (op_norm(a @ sp.diags(n_inv)), fn),
        "Ninv_a": (op_norm(sp.diags(n_inv) @ a), np.sqrt(2.0) * fn),
        "a_Hinv": (op_norm(a @ sp.diags(h_inv)), fk),
        "Hinv_a": (op_norm(sp.diags(h_inv) @ a), fk + fn / np.sqrt(rho)),
    }
    return out


def p_bar_margin(basis, h0, derived, rho):
    """min over range(P̄_ρ) of H0 minus (P²/2M + e0 + ρ/2); the e1 branch is vacuous in the frozen core."""
    mask = ~p_rho_mask(basis, rho)
    if not mask.any():
        return np.inf
    d = _mat(h0).diagonal().real[mask]
    p2 = float(derived.p_total @ derived.p_total)
    return float(d.min() - (p2 / (2 * derived.m_total) + derived.e0 + rho / 2))


def wg_relative_norms(basis, h0, w, e_g, rho, eps=0.0):
    """The three W_g relative norms

        ||R^{1/2} P̄ W P̄ R^{1/2}||,  ||P W P̄ R^{1/2}||,  ||P W P||

    with R = [H0 - E_g + ε]^{-1} and P = P_ρ.
    """
    mask = p_rho_mask(basis, rho)
    lo = np.flatnonzero(mask)
    hi = np.flatnonzero(~mask)
    wm = _mat(w)
    d = _mat(h0).diagonal().real - e_g + eps
    if np.any(d[hi] <= 0):
        raise ValueError("H0 - E_g + eps is not positive on range(P̄)")
    rh = sp.diags(1.0 / np.sqrt(d[hi]))
    w_hh = rh @ wm[hi][:, hi] @ rh
    if w_hh.nnz == 0:
        n1 = 0.0
    elif hi.size <= DENSE_NORM_LIMIT:
        n1 = float(np.max(np.abs(sla.eigvalsh(w_hh.toarray()))))
    else:
        n1 = float(np.max(np.abs(spla.eigsh(w_hh, k=2, which="LM", ncv=min(hi.size, 64),
                                            return_eigenvectors=False, tol=1e-10))))
    n2 = op_norm((wm[lo][:, hi] @ rh).toarray())
    n3 = op_norm(wm[lo][:, lo].toarray())
    return n1, n2, n3


def loglog_slope(x, y):
    x = np.log(np.asarray(x, float))
    y = np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])
