"""Discrete energies E_eps(u, rho) and F_eps(u, lam) on a grid.

    E_eps(u, rho) = sum_nodes w [ W(grad u)/eps + eps |D2 u|^2 + eps (rho - |D2 u|)^2 ]
    F_eps(u, lam) = sum_nodes w [ W(grad u)/eps + eps |D2 u|^2 + eps min(lam^2, |D2 u|^2) ]

with w = h^N (midpoint rule) and |D2 u| the Frobenius norm over all d N^2
second derivatives.  On a grid of lower dimension than the potential (the
one-dimensional profile case) the gradient fills the trailing columns of the
d x N matrix and the leading ones are zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .fields import DensityField, Grid, GridField, gradient_flat, hessian_flat, region_mask, stencils
from .potential import PotentialSpec, eval_W, grad_W


@dataclass(frozen=True)
class EnergyBreakdown:
    potential_term: float
    second_gradient_term: float
    surfactant_term: float
    total: float
    epsilon: float

    def to_dict(self) -> dict:
        return {
            "potential": self.potential_term,
            "second_gradient": self.second_gradient_term,
            "surfactant": self.surfactant_term,
            "total": self.total,
            "epsilon": self.epsilon,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _make(pot, sec, surf, eps) -> EnergyBreakdown:
    return EnergyBreakdown(pot, sec, surf, (pot + sec) + surf, eps)


def embed_gradient(grid: Grid, spec: PotentialSpec, grad: np.ndarray) -> np.ndarray:
    """(n, d, grid.N) -> (n, d, spec.N), zero-padding the leading columns."""
    if grid.d != spec.d:
        raise ValueError(f"grid has d={grid.d}, potential has d={spec.d}")
    if grid.N == spec.N:
        return grad
    if grid.N > spec.N:
        raise ValueError("grid dimension exceeds the potential's N")
    xi = np.zeros(grad.shape[:2] + (spec.N,))
    xi[:, :, spec.N - grid.N :] = grad
    return xi


class NodeState:
    """Gradient, second derivatives and |D2 u| of one field, flat over nodes."""

    def __init__(self, grid: Grid, spec: PotentialSpec, u_flat: np.ndarray):
        self.grid = grid
        self.spec = spec
        self.xi = embed_gradient(grid, spec, gradient_flat(grid, u_flat))
        self.H = hessian_flat(grid, u_flat)
        st = stencils(grid)
        self.g2 = sum(st.mult[k] * np.sum(v**2, axis=-1) for k, v in self.H.items())
        self.g = np.sqrt(self.g2)
        self.W = np.asarray(eval_W(spec, self.xi))

    def assemble_gradient(self, w_pot: np.ndarray, c_hess: np.ndarray) -> np.ndarray:
        """Adjoint of the stencils.

        w_pot:  per-node factor multiplying grad W (the W term's weight)
        c_hess: per-node c with d(energy)/d(D2_k u) = c * mult_k * D2_k u
        """
        grid, spec = self.grid, self.spec
        st = stencils(grid)
        gW = grad_W(spec, self.xi)[:, :, spec.N - grid.N :] * w_pot[:, None, None]
        out = np.zeros((grid.n_nodes, grid.d))
        for ax in range(grid.N):
            out += st.D1T[ax] @ gW[:, :, ax]
        for k, v in self.H.items():
            out += st.D2T[k] @ ((c_hess * st.mult[k])[:, None] * v)
        return out


def _weights(grid: Grid, region) -> np.ndarray:
    return region_mask(grid, region).ravel() * grid.cell_volume


def _check_same_grid(u: GridField, rho: DensityField):
    if u.grid != rho.grid:
        raise ValueError("u and rho live on different grids")


def energy_E(u: GridField, rho: DensityField, eps: float, spec: PotentialSpec, region=None) -> EnergyBreakdown:
    _check_same_grid(u, rho)
    if eps <= 0:
        raise ValueError("eps must be positive")
    s = NodeState(u.grid, spec, u.flat())
    w = _weights(u.grid, region)
    r = rho.values.ravel()
    pot = float(np.sum(w * s.W)) / eps
    sec = eps * float(np.sum(w * s.g2))
    surf = eps * float(np.sum(w * (r - s.g) ** 2))
    return _make(pot, sec, surf, eps)


def energy_F(u: GridField, lam: float, eps: float, spec: PotentialSpec, region=None) -> EnergyBreakdown:
    if lam > 0:
        raise ValueError("lam must be <= 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    s = NodeState(u.grid, spec, u.flat())
    w = _weights(u.grid, region)
    pot = float(np.sum(w * s.W)) / eps
    sec = eps * float(np.sum(w * s.g2))
    surf = eps * float(np.sum(w * np.minimum(lam**2, s.g2)))
    return _make(pot, sec, surf, eps)


def grad_F(u: GridField, lam: float, eps: float, spec: PotentialSpec) -> np.ndarray:
    """Gradient of energy_F in every node value, band nodes held fixed (their entries are zero)."""
    if lam > 0:
        raise ValueError("lam must be <= 0")
    grid = u.grid
    s = NodeState(grid, spec, u.flat())
    w = _weights(grid, None)
    # tie |D2 u| = |lam| takes the lam^2 branch, which has no u-derivative
    on_g_branch = s.g < abs(lam)
    c = 2 * eps * w * (1.0 + on_g_branch)
    out = s.assemble_gradient(w / eps, c).reshape(grid.shape + (grid.d,))
    out[grid.band_mask()] = 0.0
    return out


def check_density_identity(lam: float, w: float) -> tuple[float, float]:
    """Both sides of min(lam^2 + w^2, 2 w^2) = w^2 + (max(lam + w, 0) - w)^2."""
    if lam > 0 or w < 0:
        raise ValueError("need lam <= 0 and w >= 0")
    lhs = min(lam * lam + w * w, 2 * w * w)
    rhs = w * w + (max(lam + w, 0.0) - w) ** 2
    return lhs, rhs


def optimal_density(u: GridField, lam: float) -> DensityField:
    """rho* = max(lam + |D2 u|, 0), the density that turns E into F."""
    g = u.grid
    s_g = np.sqrt(sum(stencils(g).mult[k] * np.sum(v**2, axis=-1) for k, v in hessian_flat(g, u.flat()).items()))
    return DensityField(g, np.maximum(lam + s_g, 0.0).reshape(g.shape))
