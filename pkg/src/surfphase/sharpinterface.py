"""Sharp-interface limit objects: laminates, surfactant measures and the limit energy.

A laminate on Q = (-1/2, 1/2)^N is

    u(x) = gamma0 + a x_N - 2 psi(x_N) a,     psi(t) = int_0^t chi_E,

with E a union of horizontal slabs chosen so the topmost slab has gradient
A = a (x) e_N and the gradient alternates A/B across each height.  The limit
energy charges Phi(density) per unit interface area; atoms cost nothing.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cellproblem import PhiCurve
from .fields import Grid, GridField

log = logging.getLogger(__name__)

_BOX_TOL = 1e-12


def _in_box(x: np.ndarray) -> np.ndarray:
    return np.all(np.abs(x) <= 0.5 + _BOX_TOL, axis=-1)


@dataclass(frozen=True)
class Laminate:
    gamma0: tuple[float, ...]
    a: tuple[float, ...]
    heights: tuple[float, ...]
    N: int = 2

    def __post_init__(self):
        g0 = tuple(float(v) for v in np.atleast_1d(self.gamma0))
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        hs = tuple(float(t) for t in self.heights)
        object.__setattr__(self, "gamma0", g0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "heights", hs)
        if len(g0) != len(a):
            raise ValueError("gamma0 and a must have the same length")
        if np.linalg.norm(a) == 0:
            raise ValueError("a must be nonzero")
        if abs(np.dot(g0, a)) > 1e-12 * (1 + np.linalg.norm(g0) * np.linalg.norm(a)):
            raise ValueError("gamma0 must be orthogonal to a")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if any(not -0.5 < t < 0.5 for t in hs):
            raise ValueError("interface heights must lie in (-1/2, 1/2)")
        if any(b <= a_ for a_, b in zip(hs, hs[1:])):
            raise ValueError("interface heights must be strictly increasing")

    @property
    def d(self) -> int:
        return len(self.a)

    @property
    def n_interfaces(self) -> int:
        return len(self.heights)

    def slab_signs(self) -> np.ndarray:
        """+1 where the gradient is A, -1 where it is B, bottom slab first."""
        n = self.n_interfaces
        return np.array([1.0 if (n - k) % 2 == 0 else -1.0 for k in range(n + 1)])

    def psi(self, t) -> np.ndarray:
        """psi(t) = int_0^t chi_E, piecewise linear in t."""
        t = np.asarray(t, dtype=float)
        in_E = self.slab_signs() < 0
        edges = np.concatenate([[-np.inf], self.heights, [np.inf]])
        out = np.zeros_like(t)
        for k in np.nonzero(in_E)[0]:
            lo, hi = edges[k], edges[k + 1]
            # signed measure of E-slab k between 0 and t
            out += np.clip(t, lo, hi) - np.clip(0.0, lo, hi)
        return out

    def cross_section_area(self, i: int) -> float:
        if not 0 <= i < self.n_interfaces:
            raise ValueError(f"no interface with index {i}")
        return 1.0

    def to_dict(self) -> dict:
        return {"gamma0": list(self.gamma0), "a": list(self.a), "heights": list(self.heights), "N": self.N}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "Laminate":
        missing = [k for k in ("a", "heights") if k not in obj]
        if missing:
            raise ValueError(f"laminate is missing field(s): {', '.join(missing)}")
        a = obj["a"]
        return cls(tuple(obj.get("gamma0", [0.0] * len(a))), tuple(a), tuple(obj["heights"]), int(obj.get("N", 2)))

    @classmethod
    def from_json(cls, text: str) -> "Laminate":
        return cls.from_dict(json.loads(text))


def eval_laminate(lam: Laminate, x) -> np.ndarray:
    """u at one point (shape (N,)) or a stack of points (shape (..., N))."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != lam.N:
        raise ValueError(f"points must have {lam.N} coordinates")
    if not np.all(_in_box(x)):
        raise ValueError("point outside the domain Q = (-1/2, 1/2)^N")
    t = x[..., -1]
    s = t - 2.0 * lam.psi(t)
    return np.asarray(lam.gamma0) + s[..., None] * np.asarray(lam.a)


def laminate_gradient_sign(lam: Laminate, t) -> np.ndarray:
    """+1 (gradient A) or -1 (gradient B) at heights t, away from interfaces."""
    idx = np.searchsorted(lam.heights, np.asarray(t, dtype=float))
    return lam.slab_signs()[idx]


def rasterize(lam: Laminate, grid: Grid) -> GridField:
    """Nodewise evaluation; grid may be full-dimensional or a 1D profile grid."""
    if grid.d != lam.d:
        raise ValueError("grid and laminate disagree on d")
    if grid.N not in (1, lam.N):
        raise ValueError("grid dimension must be 1 or the laminate's N")
    hN = grid.h[-1]
    hs = (-0.5,) + lam.heights + (0.5,)
    if lam.heights and min(b - a for a, b in zip(hs, hs[1:])) < 2 * hN:
        raise ValueError(f"interfaces closer than two grid cells (h = {hN:g}); refine n_last")
    t = grid.axis_coords(grid.N - 1)
    prof = eval_laminate(lam, _points_on_axis(t, lam.N))
    vals = np.broadcast_to(prof, grid.shape + (grid.d,))
    return GridField(grid, np.array(vals))


def _points_on_axis(t: np.ndarray, N: int) -> np.ndarray:
    pts = np.zeros((t.size, N))
    pts[:, -1] = t
    return pts


# ---------------------------------------------------------------------------
# Surfactant measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Patch:
    interface: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    density: float

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "density", float(self.density))
        if len(lo) != len(hi) or any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("patch box needs lo < hi in every coordinate")
        if self.density < 0 or not math.isfinite(self.density):
            raise ValueError("patch density must be finite and nonnegative")

    @property
    def area(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, xp: np.ndarray) -> np.ndarray:
        xp = np.asarray(xp, dtype=float)
        return np.all((xp >= np.asarray(self.lo)) & (xp < np.asarray(self.hi)), axis=-1)


@dataclass(frozen=True)
class Atom:
    location: tuple[float, ...]
    mass: float

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(float(v) for v in self.location))
        object.__setattr__(self, "mass", float(self.mass))
        if self.mass < 0 or not math.isfinite(self.mass):
            raise ValueError("atom mass must be finite and nonnegative")


@dataclass(frozen=True)
class SurfactantMeasure:
    patches: tuple[Patch, ...] = ()
    atoms: tuple[Atom, ...] = ()
    min_atom_distance: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        for i, p in enumerate(self.patches):
            for q in self.patches[i + 1 :]:
                if p.interface == q.interface and _boxes_overlap(p, q):
                    raise ValueError(f"overlapping patches on interface {p.interface}")

    @classmethod
    def uniform(cls, laminate: Laminate, density: float, atoms=()) -> "SurfactantMeasure":
        """Density on the whole of every interface."""
        m = laminate.N - 1
        return cls(tuple(Patch(i, (-0.5,) * m, (0.5,) * m, density) for i in range(laminate.n_interfaces)), tuple(atoms))

    def with_atoms(self, atoms) -> "SurfactantMeasure":
        return SurfactantMeasure(self.patches, self.atoms + tuple(atoms), self.min_atom_distance)

    def validate(self, laminate: Laminate) -> None:
        m = laminate.N - 1
        for p in self.patches:
            if not 0 <= p.interface < laminate.n_interfaces:
                raise ValueError(f"patch refers to missing interface {p.interface}")
            if len(p.lo) != m:
                raise ValueError(f"patch boxes must have {m} coordinates")
            if min(p.lo) < -0.5 - _BOX_TOL or max(p.hi) > 0.5 + _BOX_TOL:
                raise ValueError("patch lies outside the interface cross-section")
        for at in self.atoms:
            x = np.asarray(at.location)
            if x.shape != (laminate.N,) or not _in_box(x):
                raise ValueError(f"atom at {at.location} is outside the domain")
            if laminate.heights:
                dist = min(abs(x[-1] - t) for t in laminate.heights)
                if dist < self.min_atom_distance:
                    raise ValueError(f"atom at {at.location} is within {self.min_atom_distance} of an interface")

    def density_on_interface(self, i: int, xp) -> np.ndarray:
        """dmu/dH^{N-1} on interface i at cross-section points xp (shape (..., N-1))."""
        xp = np.asarray(xp, dtype=float)
        out = np.zeros(xp.shape[:-1])
        for p in self.patches:
            if p.interface == i:
                out = np.where(p.contains(xp), p.density, out)
        return out

    def interface_mass(self) -> float:
        return float(sum(p.density * p.area for p in self.patches))

    def atom_mass(self) -> float:
        return float(sum(a.mass for a in self.atoms))

    def total_mass(self) -> float:
        return self.interface_mass() + self.atom_mass()

    def integrate(self, fn, laminate: Laminate, n: int = 256) -> float:
        """int fn dmu, midpoint rule on every patch; fn takes points of shape (..., N)."""
        total = 0.0
        for p in self.patches:
            axes = [lo + (np.arange(n) + 0.5) * (hi - lo) / n for lo, hi in zip(p.lo, p.hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack(list(mesh) + [np.full(mesh[0].shape, laminate.heights[p.interface])], axis=-1)
            total += p.density * p.area * float(np.mean(fn(pts)))
        for at in self.atoms:
            total += at.mass * float(fn(np.asarray(at.location)))
        return total

    def to_dict(self) -> dict:
        return {
            "patches": [{"interface": p.interface, "lo": list(p.lo), "hi": list(p.hi), "density": p.density}
                        for p in self.patches],
            "atoms": [{"location": list(a.location), "mass": a.mass} for a in self.atoms],
            "min_atom_distance": self.min_atom_distance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "SurfactantMeasure":
        patches = tuple(Patch(int(p["interface"]), tuple(p["lo"]), tuple(p["hi"]), p["density"])
                        for p in obj.get("patches", []))
        atoms = tuple(Atom(tuple(a["location"]), a["mass"]) for a in obj.get("atoms", []))
        return cls(patches, atoms, float(obj.get("min_atom_distance", 0.05)))

    @classmethod
    def from_json(cls, text: str) -> "SurfactantMeasure":
        return cls.from_dict(json.loads(text))


def _boxes_overlap(p: Patch, q: Patch) -> bool:
    return all(min(ph, qh) > max(pl, ql) for pl, ph, ql, qh in zip(p.lo, p.hi, q.lo, q.hi))


# ---------------------------------------------------------------------------
# Limit energy
# ---------------------------------------------------------------------------


@dataclass
class LimitEnergyReport:
    value: float
    per_interface: list[float]
    extrapolated: list[float] = field(default_factory=list)

    @property
    def clamped(self) -> bool:
        return bool(self.extrapolated)


def limit_energy_report(lam: Laminate, mu: SurfactantMeasure, curve: PhiCurve) -> LimitEnergyReport:
    mu.validate(lam)
    extrapolated = []
    per = []
    for i in range(lam.n_interfaces):
        densities = [(p.density, p.area) for p in mu.patches if p.interface == i]
        bare = lam.cross_section_area(i) - sum(area for _, area in densities)
        if bare > 1e-12:
            densities.append((0.0, bare))
        e = 0.0
        for gamma, area in densities:
            if not curve.covers(gamma):
                extrapolated.append(gamma)
            e += curve.interp(gamma) * area
        per.append(float(e))
    if extrapolated:
        log.warning("Phi evaluated outside the sampled range at %s (held flat)", extrapolated)
    # atoms are singular with respect to the interface measure: no contribution
    return LimitEnergyReport(float(sum(per)), per, extrapolated)


def limit_energy(lam: Laminate, mu: SurfactantMeasure, curve: PhiCurve) -> float:
    """sum_i int_{interface i} Phi(dmu/dH^{N-1}) dH^{N-1}."""
    return limit_energy_report(lam, mu, curve).value
