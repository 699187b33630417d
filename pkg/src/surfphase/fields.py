"""Gridded deformations on the unit box Q = (-1/2, 1/2)^N.

Nodes sit at cell centres, x_i = -1/2 + (i + 1/2) h, so the midpoint rule
has the uniform weight h^N.  The first N-1 axes (x') are periodic; the last
axis (x_N) is not and carries affine boundary bands at both ends.

All difference operators are assembled once per grid as sparse matrices
acting on node-major arrays of shape (n_nodes, d); energies take their
adjoints by transposition.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Grid:
    N: int
    d: int
    n_prime: int
    n_last: int
    band: int = 2

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.N > 1 and self.n_prime < 4:
            raise ValueError(f"n_prime must be >= 4, got {self.n_prime}")
        if self.n_last < 8:
            raise ValueError(f"n_last must be >= 8, got {self.n_last}")
        if self.band < 2:
            raise ValueError(f"band must be >= 2, got {self.band}")
        if 2 * self.band + 3 > self.n_last:
            raise ValueError("boundary bands leave fewer than 3 free layers")

    @classmethod
    def profile(cls, n: int, d: int, band: int = 2) -> "Grid":
        """A one-dimensional grid along x_N."""
        return cls(N=1, d=d, n_prime=1, n_last=n, band=band)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_prime,) * (self.N - 1) + (self.n_last,)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def axis_coords(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return -0.5 + (np.arange(n) + 0.5) / n

    def coords(self) -> list[np.ndarray]:
        """Broadcast-ready coordinate arrays, one per axis (x_1 ... x_N)."""
        return list(np.meshgrid(*[self.axis_coords(i) for i in range(self.N)], indexing="ij"))

    def band_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[..., : self.band] = True
        m[..., self.n_last - self.band :] = True
        return m

    def to_dict(self) -> dict:
        return {"N": self.N, "d": self.d, "n_prime": self.n_prime, "n_last": self.n_last, "band": self.band}


class GridField:
    """A deformation u: Q -> R^d sampled at the nodes of a grid."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape + (grid.d,):
            raise ValueError(f"values shape {values.shape} does not match grid {grid.shape + (grid.d,)}")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid) -> "GridField":
        return cls(grid, np.zeros(grid.shape + (grid.d,)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "GridField":
        """fn maps the list of coordinate arrays to an array of shape grid.shape + (d,)."""
        return cls(grid, np.broadcast_to(fn(grid.coords()), grid.shape + (grid.d,)).copy())

    def flat(self) -> np.ndarray:
        return self.values.reshape(self.grid.n_nodes, self.grid.d)

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy())

    def to_csv(self, path) -> None:
        write_field_csv(path, self.grid, self.values)

    @classmethod
    def from_csv(cls, path, grid: Grid) -> "GridField":
        return cls(grid, read_field_csv(path, grid, grid.d))

    def to_npy(self, path) -> None:
        np.save(path, self.values)


class DensityField:
    """A nonnegative scalar density on a grid."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        self.grid = grid
        self.values = values

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "DensityField":
        return cls(grid, np.full(grid.shape, float(c)))

    def to_csv(self, path) -> None:
        write_field_csv(path, self.grid, self.values[..., None])


def write_field_csv(path, grid: Grid, values: np.ndarray) -> None:
    """Node-major dump, axis order x_1 ... x_N, then the components."""
    ncomp = values.shape[-1]
    xs = [c.ravel() for c in grid.coords()]
    flat = values.reshape(-1, ncomp)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(grid.N)] + [f"u{k + 1}" for k in range(ncomp)])
        for row in zip(*xs, *flat.T):
            w.writerow([repr(float(v)) for v in row])


def read_field_csv(path, grid: Grid, ncomp: int) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.n_nodes, grid.N + ncomp):
        raise ValueError(f"CSV has shape {data.shape}, expected {(grid.n_nodes, grid.N + ncomp)}")
    return data[:, grid.N :].reshape(grid.shape + (ncomp,))


# ---------------------------------------------------------------------------
# Stencils
# ---------------------------------------------------------------------------


def _periodic_first(n: int, h: float) -> sp.csr_matrix:
    D = sp.diags([-1.0, 1.0], [-1, 1], shape=(n, n)).tolil()
    D[0, n - 1] = -1.0
    D[n - 1, 0] = 1.0
    return (D / (2 * h)).tocsr()


def _periodic_second(n: int, h: float) -> sp.csr_matrix:
    D = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)).tolil()
    D[0, n - 1] = 1.0
    D[n - 1, 0] = 1.0
    return (D / h**2).tocsr()


def _bounded_first(n: int, h: float) -> sp.csr_matrix:
    D = sp.diags([-1.0, 1.0], [-1, 1], shape=(n, n)).tolil()
    D[0, :3] = [-3.0, 4.0, -1.0]
    D[n - 1, n - 3 :] = [1.0, -4.0, 3.0]
    return (D / (2 * h)).tocsr()


def _bounded_second(n: int, h: float) -> sp.csr_matrix:
    D = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)).tolil()
    D[0, :4] = [2.0, -5.0, 4.0, -1.0]
    D[n - 1, n - 4 :] = [-1.0, 4.0, -5.0, 2.0]
    return (D / h**2).tocsr()


def _kron_axis(grid: Grid, ops: dict[int, sp.spmatrix]) -> sp.csr_matrix:
    mats = [ops.get(ax, sp.identity(n, format="csr")) for ax, n in enumerate(grid.shape)]
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


class Stencils:
    """Sparse first/second difference operators for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        first, second = {}, {}
        for ax, (n, h) in enumerate(zip(grid.shape, grid.h)):
            last = ax == grid.N - 1
            first[ax] = (_bounded_first if last else _periodic_first)(n, h)
            second[ax] = (_bounded_second if last else _periodic_second)(n, h)
        self.D1 = [_kron_axis(grid, {ax: first[ax]}) for ax in range(grid.N)]
        self.D2 = {}
        for i, j in itertools.combinations_with_replacement(range(grid.N), 2):
            if i == j:
                self.D2[(i, j)] = _kron_axis(grid, {i: second[i]})
            else:
                self.D2[(i, j)] = _kron_axis(grid, {i: first[i], j: first[j]})
        # Frobenius weight of each stored second derivative (mixed ones appear twice).
        self.mult = {key: (1.0 if key[0] == key[1] else 2.0) for key in self.D2}

    @cached_property
    def D1T(self):
        return [D.T.tocsr() for D in self.D1]

    @cached_property
    def D2T(self):
        return {k: D.T.tocsr() for k, D in self.D2.items()}


@lru_cache(maxsize=32)
def stencils(grid: Grid) -> Stencils:
    return Stencils(grid)


def gradient_flat(grid: Grid, u: np.ndarray) -> np.ndarray:
    """(n_nodes, d) -> (n_nodes, d, N)."""
    st = stencils(grid)
    return np.stack([D @ u for D in st.D1], axis=-1)


def hessian_flat(grid: Grid, u: np.ndarray) -> dict:
    """Stored second derivatives {(i, j): (n_nodes, d)} for i <= j."""
    st = stencils(grid)
    return {k: D @ u for k, D in st.D2.items()}


def hessian_norm_flat(grid: Grid, u: np.ndarray) -> np.ndarray:
    st = stencils(grid)
    H = hessian_flat(grid, u)
    sq = sum(st.mult[k] * np.sum(v**2, axis=-1) for k, v in H.items())
    return np.sqrt(sq)


def gradient(f: GridField) -> np.ndarray:
    """Per-node d x N gradient matrices, shape grid.shape + (d, N)."""
    g = f.grid
    return gradient_flat(g, f.flat()).reshape(g.shape + (g.d, g.N))


def hessian(f: GridField) -> np.ndarray:
    """Full per-node second-derivative tensors, shape grid.shape + (d, N, N)."""
    g = f.grid
    H = hessian_flat(g, f.flat())
    out = np.zeros((g.n_nodes, g.d, g.N, g.N))
    for (i, j), v in H.items():
        out[:, :, i, j] = v
        out[:, :, j, i] = v
    return out.reshape(g.shape + (g.d, g.N, g.N))


def hessian_norm(f: GridField) -> DensityField:
    g = f.grid
    return DensityField(g, hessian_norm_flat(g, f.flat()).reshape(g.shape))


# ---------------------------------------------------------------------------
# Boundary bands
# ---------------------------------------------------------------------------


def apply_boundary_bands(f: GridField, a) -> GridField:
    """Overwrite the x_N bands with -a x_N + c (bottom) and a x_N + c' (top).

    The constants extend the x'-mean of the adjacent free layer, so the
    operation is idempotent.
    """
    g = f.grid
    a = np.asarray(a, dtype=float)
    t = g.axis_coords(g.N - 1)
    b, n = g.band, g.n_last
    vals = f.values.copy()
    prime_axes = tuple(range(g.N - 1))
    lo = vals[..., b, :].mean(axis=prime_axes) if prime_axes else vals[b]
    hi = vals[..., n - b - 1, :].mean(axis=prime_axes) if prime_axes else vals[n - b - 1]
    for j in range(b):
        vals[..., j, :] = lo + a * (t[b] - t[j])
    for j in range(n - b, n):
        vals[..., j, :] = hi + a * (t[j] - t[n - b - 1])
    return GridField(g, vals)


class BandMap:
    """Affine map from free (non-band) node values to a full field with bands.

    u_full = P @ u_free + offset(a); P is sparse of shape (n_nodes, n_free).
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        g = grid
        idx = np.arange(g.n_nodes).reshape(g.shape)
        free = ~g.band_mask()
        self.free_index = idx[free]
        n_free = self.free_index.size
        free_pos = -np.ones(g.n_nodes, dtype=int)
        free_pos[self.free_index] = np.arange(n_free)
        b, n = g.band, g.n_last
        m = g.n_nodes // n  # nodes per x_N layer
        rows, cols, vals = [], [], []
        rows += list(self.free_index)
        cols += list(range(n_free))
        vals += [1.0] * n_free
        for j_band, j_src in [(j, b) for j in range(b)] + [(j, n - b - 1) for j in range(n - b, n)]:
            band_nodes = idx[..., j_band].ravel()
            src = free_pos[idx[..., j_src].ravel()]
            for r in band_nodes:
                rows += [r] * m
                cols += list(src)
                vals += [1.0 / m] * m
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(g.n_nodes, n_free))
        self.PT = self.P.T.tocsr()
        t = g.axis_coords(g.N - 1)
        shift = np.zeros(n)
        shift[:b] = t[b] - t[:b]
        shift[n - b :] = t[n - b :] - t[n - b - 1]
        self._shift = np.broadcast_to(shift, g.shape).ravel()

    @property
    def n_free(self) -> int:
        return self.free_index.size

    def offset(self, a) -> np.ndarray:
        return self._shift[:, None] * np.asarray(a, dtype=float)[None, :]

    def expand(self, u_free: np.ndarray, a) -> np.ndarray:
        return self.P @ u_free + self.offset(a)

    def restrict(self, u_full: np.ndarray) -> np.ndarray:
        return u_full[self.free_index]

    def pullback(self, grad_full: np.ndarray) -> np.ndarray:
        return self.PT @ grad_full


@lru_cache(maxsize=32)
def band_map(grid: Grid) -> BandMap:
    return BandMap(grid)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def region_mask(grid: Grid, region) -> np.ndarray:
    """Node mask for a region: None (all of Q), a boolean mask, or a box of (lo, hi) per axis."""
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    if isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != grid.shape:
            raise ValueError("region mask does not match the grid")
        return region
    box = list(region)
    if len(box) != grid.N:
        raise ValueError(f"region needs {grid.N} (lo, hi) pairs")
    mask = np.ones(grid.shape, dtype=bool)
    for ax, ((lo, hi), x) in enumerate(zip(box, grid.coords())):
        if lo < -0.5 - 1e-12 or hi > 0.5 + 1e-12 or lo > hi:
            raise ValueError(f"region ({lo}, {hi}) on axis {ax} is not inside (-1/2, 1/2)")
        mask &= (x >= lo) & (x < hi)
    return mask


def integrate(g, grid: Grid | None = None, region=None) -> float:
    """Midpoint rule with weight h^N per node."""
    if isinstance(g, (DensityField, GridField)):
        grid, vals = g.grid, g.values
    else:
        if grid is None:
            raise ValueError("a grid is required for raw arrays")
        vals = np.asarray(g, dtype=float)
    mask = region_mask(grid, region)
    if vals.shape == grid.shape:
        return float(np.sum(vals[mask]) * grid.cell_volume)
    return np.sum(vals[mask], axis=0) * grid.cell_volume
