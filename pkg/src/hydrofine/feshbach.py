"""Feshbach-Schur reduction onto the low-photon-energy block.

P_ρ keeps spin ⊗ (photon states with total photon energy <= ρ); the internal
hydrogen factor is the identity in the frozen-core truncation.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import AssembledOperator, ground_spectrum


class FeshbachError(RuntimeError):
    def __init__(self, msg, min_eigenvalue=None):
        super().__init__(msg)
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class FeshbachConfig:
    rho: float
    epsilon: float = 0.0
    tau: float = 0.1
    series_cap: int = 40
    regime_factor: float = 10.0
    max_rho_fraction: float = 0.5

    @classmethod
    def from_coupling(cls, g, tau=0.1, **kw):
        """ρ = g^(2 - 2τ)."""
        if not 0 < tau < 0.25:
            raise ValueError(f"tau must lie in (0, 1/4), got {tau}")
        return cls(rho=g ** (2 - 2 * tau), tau=tau, **kw)

    def validate(self, g, derived):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.rho < self.regime_factor * g * g:
            raise ValueError(f"rho={self.rho:.4g} violates rho >= {self.regime_factor} g^2 "
                             f"(= {self.regime_factor * g * g:.4g})")
        if self.rho > self.max_rho_fraction * abs(derived.e0):
            raise ValueError(f"rho={self.rho:.4g} exceeds {self.max_rho_fraction} |e0|")

    def with_epsilon(self, eps):
        return FeshbachConfig(self.rho, eps, self.tau, self.series_cap, self.regime_factor,
                              self.max_rho_fraction)


@dataclass
class FeshbachResult:
    f_matrix: np.ndarray
    series_ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual_identity: float | None = None
    residual_kernel: float | None = None
    block_gap: float | None = None
    series_errors: np.ndarray | None = None
    divergent: bool = False


_TINY_TERM = 1e-250
DENSE_FALLBACK = 8000


def p_rho_mask(basis, rho):
    return np.repeat(basis.photon_energy <= rho, 4)


def project_p_rho(basis, rho):
    """Diagonal 0/1 projector P_ρ on the full spin ⊗ Fock space."""
    return sp.diags(p_rho_mask(basis, rho).astype(complex), format="csr")


def _mat(op):
    return sp.csr_matrix(op.matrix if isinstance(op, AssembledOperator) else op)


def _split(hg, mask):
    h = _mat(hg)
    lo = np.flatnonzero(mask)
    hi = np.flatnonzero(~mask)
    return h, lo, hi


def _min_eig(a):
    n = a.shape[0]
    if n <= 2000:
        return float(sla.eigh(a.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0])
    # a wide Krylov space copes with the nearly degenerate photon shells at the block's bottom
    try:
        return float(spla.eigsh(a, k=1, which="SA", ncv=min(n, 64), return_eigenvectors=False,
                                tol=1e-12)[0])
    except spla.ArpackNoConvergence:
        if n > DENSE_FALLBACK:
            raise
        return float(sla.eigh(a.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0])


def _block_gap(h, hi, e_g):
    return _min_eig(h[hi][:, hi]) - e_g


def feshbach_direct(hg, e_g, config, basis, ground=None, check_gap=True, kernel=True):
    """F_ρ(ε) by direct inversion of the P̄_ρ block.

    ``ground`` is an optional (vals, vecs) ground cluster; at ε = 0 it is
    computed when absent and used for the kernel residual.
    """
    h, lo, hi = _split(hg, p_rho_mask(basis, config.rho))
    eps = config.epsilon
    shift = e_g - eps
    r = lo.size
    h_ll = h[lo][:, lo].toarray()
    res = FeshbachResult(f_matrix=np.zeros((r, r), complex))
    if hi.size == 0:
        # P_ρ = 1: no Schur complement
        f = h_ll - shift * np.eye(r)
    else:
        gap = _block_gap(h, hi, e_g) if (check_gap or eps == 0) else None
        res.block_gap = gap
        if gap is not None and gap + eps <= 0:
            raise FeshbachError(f"P̄ρ block is not invertible (min eigenvalue - E_g = {gap:.3e})",
                                min_eigenvalue=gap)
        a_hh = sp.csc_matrix(h[hi][:, hi] - shift * sp.identity(hi.size, format="csr"))
        x = spla.splu(a_hh).solve(h[hi][:, lo].toarray())
        f = h_ll - shift * np.eye(r) - h[lo][:, hi] @ x
    res.f_matrix = f
    if eps > 0:
        full = sp.csc_matrix(h - shift * sp.identity(h.shape[0], format="csr"))
        rhs = np.zeros((h.shape[0], r), complex)
        rhs[lo, np.arange(r)] = 1.0
        gmat = spla.splu(full).solve(rhs)[lo]
        eye = np.eye(r)
        res.residual_identity = float(max(np.linalg.norm(gmat @ f - eye, 2),
                                          np.linalg.norm(f @ gmat - eye, 2)))
    elif kernel:
        if ground is None:
            spec = ground_spectrum(h, min(8, h.shape[0]))
            ground = spec.ground_cluster()
        vecs = ground[1][lo]
        proj = vecs @ vecs.conj().T
        res.residual_kernel = float(np.linalg.norm(f @ proj, 2))
    return res


def feshbach_series(hg, h0, e_g, config, basis, direct=None):
    """F_ρ(ε) from the Neumann expansion of the reduced resolvent.

    Terms v_n = R0 (-P̄ W P̄ R0)^n P̄ W P_ρ with R0 = [H0 - E_g + ε]^{-1} on P̄_ρ;
    ``series_ratios`` holds ||v_{n+1}|| / ||v_n||.
    """
    h, lo, hi = _split(hg, p_rho_mask(basis, config.rho))
    d0 = _mat(h0).diagonal().real
    w = h - sp.diags(d0.astype(complex), format="csr")
    eps = config.epsilon
    r = lo.size
    base = np.diag(d0[lo] - e_g + eps) + w[lo][:, lo].toarray()
    if hi.size == 0:
        return FeshbachResult(f_matrix=base)
    r0 = 1.0 / (d0[hi] - e_g + eps)
    w_hh = w[hi][:, hi]
    w_lh = w[lo][:, hi]
    v = r0[:, None] * w[hi][:, lo].toarray()
    f = base.copy()
    ratios, errors = [], []
    prev = np.linalg.norm(v)
    for n in range(config.series_cap + 1):
        f = f - w_lh @ v
        if direct is not None:
            errors.append(np.linalg.norm(f - direct.f_matrix, 2))
        if n == config.series_cap or prev == 0.0:
            break
        v = -(r0[:, None] * (w_hh @ v))
        cur = np.linalg.norm(v)
        if cur < _TINY_TERM:
            # further terms are below the floating-point range; the series has terminated
            break
        ratios.append(cur / prev)
        prev = cur
    ratios = np.asarray(ratios)
    tail = ratios[ratios > 0]
    divergent = bool(tail.size and tail[-1] >= 1.0)
    return FeshbachResult(f_matrix=f, series_ratios=ratios, divergent=divergent,
                          series_errors=np.asarray(errors) if direct is not None else None)


def f0_norm_check(hg, e_g, config, basis, rho_values=None, eps_grid=(1e-2, 1e-3, 1e-4),
                  ground=None):
    """‖F_ρ(0)‖, the fitted ratio ‖F_ρ(0)‖/ρ over a ρ sweep and ‖F_ρ(ε) - F_ρ(0)‖ on an ε grid."""
    f0 = feshbach_direct(hg, e_g, config.with_epsilon(0.0), basis, ground=ground)
    norm0 = float(np.linalg.norm(f0.f_matrix, 2))
    ratios = {}
    for rho in (rho_values if rho_values is not None else [config.rho]):
        cfg = FeshbachConfig(rho, 0.0, config.tau, config.series_cap, config.regime_factor,
                             config.max_rho_fraction)
        fr = feshbach_direct(hg, e_g, cfg, basis, kernel=False)
        ratios[float(rho)] = float(np.linalg.norm(fr.f_matrix, 2)) / rho
    diffs = []
    for eps in eps_grid:
        fe = feshbach_direct(hg, e_g, config.with_epsilon(eps), basis, check_gap=False)
        diffs.append(float(np.linalg.norm(fe.f_matrix - f0.f_matrix, 2)))
    return {"norm": norm0, "norm_over_rho": ratios, "eps_grid": list(eps_grid), "eps_diffs": diffs}
