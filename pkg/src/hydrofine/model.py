"""Physical parameters, derived hydrogen constants and the two-spin Pauli algebra.

Spin basis ordering is fixed globally as (e↑n↑, e↑n↓, e↓n↑, e↓n↓); the electron
spin is the major index.
"""
from dataclasses import dataclass, field

import numpy as np

DEFAULT_M_NUCLEUS = 1836.152
DEFAULT_P_CEILING_FRACTION = 0.1

_S1 = np.array([[0, 1], [1, 0]], dtype=complex)
_S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_S3 = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)

SIGMA_EL = np.array([np.kron(s, _I2) for s in (_S1, _S2, _S3)])
SIGMA_N = np.array([np.kron(_I2, s) for s in (_S1, _S2, _S3)])
for _m in (SIGMA_EL, SIGMA_N):
    _m.setflags(write=False)

ID4 = np.eye(4, dtype=complex)
ID4.setflags(write=False)


@dataclass(frozen=True)
class PhysicalParams:
    """Masses, coupling, ultraviolet cutoff and total momentum.

    ``p_ceiling`` is the smallness ceiling on |P|; when left as ``None`` it
    defaults to ``0.1 * (m_el + m_n)``.
    """

    m_el: float = 1.0
    m_n: float = DEFAULT_M_NUCLEUS
    g: float = 0.0
    lambda_uv: float = 1.0
    p_total: tuple = (0.0, 0.0, 0.0)
    p_ceiling: float | None = None

    def __post_init__(self):
        if not (self.m_el > 0 and self.m_n > 0):
            raise ValueError(f"masses must be positive, got m_el={self.m_el}, m_n={self.m_n}")
        if not self.lambda_uv > 0:
            raise ValueError(f"lambda_uv must be positive, got {self.lambda_uv}")
        if not self.g >= 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        p = tuple(float(x) for x in np.broadcast_to(np.asarray(self.p_total, dtype=float), (3,)))
        object.__setattr__(self, "p_total", p)
        if self.p_ceiling is None:
            object.__setattr__(self, "p_ceiling", DEFAULT_P_CEILING_FRACTION * (self.m_el + self.m_n))
        if np.linalg.norm(p) > self.p_ceiling:
            raise ValueError(
                f"|p_total| = {np.linalg.norm(p):.6g} exceeds the ceiling p_c = {self.p_ceiling:.6g}"
            )

    @property
    def p_vec(self):
        return np.array(self.p_total)

    def replace(self, **changes):
        kw = dict(m_el=self.m_el, m_n=self.m_n, g=self.g, lambda_uv=self.lambda_uv,
                  p_total=self.p_total, p_ceiling=self.p_ceiling)
        kw.update(changes)
        return PhysicalParams(**kw)


@dataclass(frozen=True)
class DerivedConstants:
    m_total: float
    mu: float
    e0: float
    e1: float
    e0_fiber: float
    p_total: np.ndarray = field(repr=False)


def derive_constants(params):
    m_total = params.m_el + params.m_n
    mu = params.m_el * params.m_n / m_total
    e0 = -mu / 2
    e1 = -mu / 8
    p = params.p_vec
    return DerivedConstants(
        m_total=m_total,
        mu=mu,
        e0=e0,
        e1=e1,
        e0_fiber=e0 + float(p @ p) / (2 * m_total),
        p_total=p,
    )


def pauli(particle, axis):
    """Return the 4x4 Pauli matrix of ``particle`` ('el' or 'n') along ``axis`` (1, 2 or 3)."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis!r}")
    if particle == "el":
        return SIGMA_EL[axis - 1].copy()
    if particle == "n":
        return SIGMA_N[axis - 1].copy()
    raise ValueError(f"particle must be 'el' or 'n', got {particle!r}")


def spin_exchange():
    """σ^el · σ^n."""
    return np.einsum("iab,ibc->ac", SIGMA_EL, SIGMA_N)


def decompose_two_spin(m):
    """Project a 4x4 matrix on {I, σ^el_i, σ^n_j, σ^el_i σ^n_j} with <A,B> = tr(A†B)/4.

    Returns a dict with keys ``c0``, ``c_el`` (3,), ``c_n`` (3,) and ``c_ex`` (3, 3).
    """
    m = np.asarray(m, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    # all basis elements are Hermitian, so tr(B† m) = tr(B m)
    c0 = np.trace(m) / 4
    c_el = np.einsum("iab,ba->i", SIGMA_EL, m) / 4
    c_n = np.einsum("iab,ba->i", SIGMA_N, m) / 4
    ex = np.einsum("iab,jbc->ijac", SIGMA_EL, SIGMA_N)
    c_ex = np.einsum("ijab,ba->ij", ex, m) / 4
    return {"c0": c0, "c_el": c_el, "c_n": c_n, "c_ex": c_ex}


def compose_two_spin(c0, c_el, c_n, c_ex):
    ex = np.einsum("iab,jbc->ijac", SIGMA_EL, SIGMA_N)
    return (c0 * ID4 + np.einsum("i,iab->ab", c_el, SIGMA_EL)
            + np.einsum("i,iab->ab", c_n, SIGMA_N) + np.einsum("ij,ijab->ab", c_ex, ex))


def singlet_vector():
    return np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)
