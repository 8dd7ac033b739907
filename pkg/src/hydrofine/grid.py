"""Product quadrature over the photon wave-vector ball |k| <= Λ.

Gauss-Legendre in |k| and cos θ, uniform in φ. Every k-node is emitted once
per polarization and carries the full measure k² dk d(cos θ) dφ.
"""
from dataclasses import dataclass

import numpy as np

MAX_GRID_POINTS = 2_000_000


@dataclass(frozen=True)
class GridSpec:
    n_radial: int = 6
    n_costheta: int = 8
    n_phi: int = 8

    def __post_init__(self):
        for name in ("n_radial", "n_costheta", "n_phi"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"grid.{name} must be a positive integer, got {v!r}")

    @property
    def n_points(self):
        return self.n_radial * self.n_costheta * self.n_phi

    def as_tuple(self):
        return (self.n_radial, self.n_costheta, self.n_phi)


@dataclass(frozen=True)
class Mode:
    k: np.ndarray
    lam: int
    weight: float


@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Weighted (k, λ) modes; ``k`` is (M, 3), ``lam`` and ``weight`` are (M,)."""

    spec: GridSpec
    lambda_uv: float
    k: np.ndarray
    lam: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return self.k.shape[0]

    def __getitem__(self, i):
        return Mode(k=self.k[i], lam=int(self.lam[i]), weight=float(self.weight[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def k_norm(self):
        return np.linalg.norm(self.k, axis=1)


def build_grid(spec, lambda_uv):
    if not lambda_uv > 0:
        raise ValueError(f"lambda_uv must be positive, got {lambda_uv}")
    if spec.n_points > MAX_GRID_POINTS:
        raise OverflowError(f"grid {spec.as_tuple()} exceeds {MAX_GRID_POINTS} points")
    xr, wr = np.polynomial.legendre.leggauss(spec.n_radial)
    r = 0.5 * lambda_uv * (xr + 1.0)
    wr = 0.5 * lambda_uv * wr * r * r
    ct, wc = np.polynomial.legendre.leggauss(spec.n_costheta)
    if np.any(np.abs(ct) >= 1.0):
        raise ValueError("polar rule places a node on the third axis")
    phi = 2.0 * np.pi * np.arange(spec.n_phi) / spec.n_phi
    wphi = np.full(spec.n_phi, 2.0 * np.pi / spec.n_phi)

    R, C, F = np.meshgrid(r, ct, phi, indexing="ij")
    W = wr[:, None, None] * wc[None, :, None] * wphi[None, None, :]
    st = np.sqrt(1.0 - C * C)
    kpts = np.stack([R * st * np.cos(F), R * st * np.sin(F), R * C], axis=-1).reshape(-1, 3)
    wpts = W.reshape(-1)

    k = np.repeat(kpts, 2, axis=0)
    lam = np.tile(np.array([1, 2]), kpts.shape[0])
    weight = np.repeat(wpts, 2)
    for a in (k, lam, weight):
        a.setflags(write=False)
    return ModeGrid(spec=spec, lambda_uv=float(lambda_uv), k=k, lam=lam, weight=weight)


def refine(spec, max_points=MAX_GRID_POINTS):
    new = GridSpec(2 * spec.n_radial, 2 * spec.n_costheta, 2 * spec.n_phi)
    if new.n_points > max_points:
        raise OverflowError(f"refined grid {new.as_tuple()} exceeds {max_points} points")
    return new


def select_modes(grid, index):
    """Sub-grid keeping only the modes at ``index`` (weights unchanged)."""
    index = np.asarray(index, dtype=np.int64)
    return ModeGrid(spec=grid.spec, lambda_uv=grid.lambda_uv, k=grid.k[index],
                    lam=grid.lam[index], weight=grid.weight[index])
