"""Recovery sequences (u_eps, rho_eps) built from an optimal cell profile, and their checks.

For a single interface at height t1 the construction is

    z_eps(x)  = u(t1) + eps L v((x_N - t1) / (eps L))            (rescaled cell profile)
    u_eps     = psi(x_N) z_eps + (1 - psi(x_N)) u                  (glued to the laminate u)
    rho_eps   = max(|D2 z_eps| + lam / (eps L), 0)   in the slab |x_N - t1| <= eps L / 2
              + c(x')                                on two strips of width sqrt(eps)
              + renormalised bumps of radius eps^(1/(2N)) at the atoms

where c(x') tops the surfactant up to gamma(x') + tilde_delta * sqrt(eps).  A
partial patch blends the patch profile with the zero-budget profile through a
cutoff phi(x') whose transition lies inside the patch, so no surfactant leaks
onto the bare part of the interface.  Grids are resolution-matched: eps L n_last = n_cell, so slab
nodes sit on the cell nodes and the slab energy reproduces the cell value.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .cellproblem import CellSolution, PhiCurve, PhiPoint
from .energy import energy_E
from .fields import DensityField, Grid, GridField, gradient, hessian_norm, integrate
from .potential import PotentialSpec
from .sharpinterface import Laminate, SurfactantMeasure, eval_laminate, laminate_gradient_sign, limit_energy
from .waterfill import solve_lambda

log = logging.getLogger(__name__)


def smoothstep(s):
    """Quintic 0 -> 1 on [0, 1]: C2, with |f'| <= 15/8 and |f''| <= 10/sqrt(3)."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _ball_volume(N: int) -> float:
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def covers_partially(measure: SurfactantMeasure) -> bool:
    """True when some patch leaves part of its interface bare."""
    return any(lo > -0.5 or hi < 0.5 for p in measure.patches for lo, hi in zip(p.lo, p.hi))


@dataclass
class RecoveryConfig:
    epsilons: list[float]
    delta: float
    tilde_delta: float
    cell: CellSolution
    laminate: Laminate
    measure: SurfactantMeasure
    spec: PotentialSpec
    cell_zero: CellSolution | None = None
    curve: PhiCurve | None = None
    n_prime: int = 4
    n_last_min: int = 512
    match_resolution: bool = True
    seed: int = 0
    delta_prime: float | None = None

    def __post_init__(self):
        eps = [float(e) for e in self.epsilons]
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if self.laminate.n_interfaces != 1:
            raise ValueError("the recovery construction handles a single interface")
        if self.laminate.N != 2 or self.spec.N != 2:
            raise ValueError("the recovery construction is implemented for N = 2")
        if len(self.measure.patches) > 1:
            raise ValueError("at most one surfactant patch per construction")
        self.measure.validate(self.laminate)
        t1 = self.laminate.heights[0]
        if not 0 < self.delta < 0.5 - abs(t1):
            raise ValueError(f"delta must lie in (0, {0.5 - abs(t1):g}) so the cutoff stays inside the domain")
        if self.tilde_delta < 0:
            raise ValueError("tilde_delta must be nonnegative")
        if self.partial and self.cell_zero is None:
            raise ValueError("a partial patch needs the zero-budget cell solution (cell_zero)")
        if self.partial:
            width = min(self.measure.patches[0].hi[0] - self.measure.patches[0].lo[0], 1.0)
            if self.delta_prime is None:
                self.delta_prime = min(self.delta, width / 4)
            if not 0 < self.delta_prime <= width / 2:
                raise ValueError(f"delta_prime must lie in (0, {width / 2:g}] so the cutoff fits inside the patch")
        if self.match_resolution:
            eps = [self.matched(e)[0] for e in eps]
            if any(b >= a for a, b in zip(eps, eps[1:])):
                raise ValueError("epsilons collapse after resolution matching; space them further apart")
        margin = 0.5 - abs(t1)
        for e in eps:
            if e * self.cell.scale_L / 2 + math.sqrt(e) >= margin:
                raise ValueError(f"eps = {e:g}: slab and strips do not fit inside the domain")
        self.epsilons = eps

    @property
    def partial(self) -> bool:
        return covers_partially(self.measure)

    @property
    def gamma(self) -> float:
        return self.measure.patches[0].density if self.measure.patches else 0.0

    @property
    def n_cell(self) -> int:
        return self.cell.profile.grid.n_last

    def matched(self, eps: float) -> tuple[float, int]:
        """(eps', n_last) with eps' L n_last = n_cell and n_last even, closest to eps."""
        L = self.cell.scale_L
        n_last = max(2, 2 * round(self.n_cell / (2 * eps * L)))
        return self.n_cell / (L * n_last), n_last

    def grid_for(self, eps: float) -> Grid:
        if self.match_resolution:
            n_last = self.matched(eps)[1]
        else:
            n_last = 2 * math.ceil(self.n_cell / (2 * eps * self.cell.scale_L))
        if n_last < self.n_last_min:
            raise ValueError(
                f"eps = {eps:g} gives n_last = {n_last} < {self.n_last_min}; "
                f"use eps <= {self.n_cell / (self.cell.scale_L * self.n_last_min):.4g} or a finer cell"
            )
        return Grid(2, self.spec.d, self.n_prime, n_last)

    def pre_asymptotic(self, eps: float) -> bool:
        """Slab plus strips must sit where the x_N cutoff is identically one."""
        return eps * self.cell.scale_L / 2 + math.sqrt(eps) > self.delta / 2

    def target(self) -> float:
        return limit_energy(self.laminate, self.measure, self.reference_curve())

    def reference_curve(self) -> PhiCurve:
        if self.curve is not None:
            return self.curve
        pts = {}
        for sol in (self.cell_zero, self.cell):
            if sol is not None:
                pts[sol.gamma] = PhiPoint(sol.gamma, sol.value, sol.lam, sol.scale_L, 0, 0.0)
        return PhiCurve([pts[g] for g in sorted(pts)])

    def to_dict(self) -> dict:
        return {
            "epsilons": self.epsilons,
            "delta": self.delta,
            "tilde_delta": self.tilde_delta,
            "delta_prime": self.delta_prime,
            "laminate": self.laminate.to_dict(),
            "measure": self.measure.to_dict(),
            "potential": self.spec.to_dict(),
            "cell": {"gamma": self.cell.gamma, "phi": self.cell.value, "lambda": self.cell.lam,
                     "L": self.cell.scale_L, "n": self.n_cell},
            "n_prime": self.n_prime,
            "n_last_min": self.n_last_min,
            "match_resolution": self.match_resolution,
            "seed": self.seed,
        }


class ScaledProfile:
    """t -> v(t) from a 1D cell solution, continued affinely with slope -/+ a past the cell.

    The additive constant is fixed so that v(t) = a |t| far out (up to the
    profile's asymmetry, which is split evenly between the two ends).
    """

    def __init__(self, sol: CellSolution, a: np.ndarray):
        g = sol.profile.grid
        if g.N != 1:
            raise ValueError("recovery needs a 1D cell profile")
        self.t = g.axis_coords(0)
        v = sol.profile.values.copy()
        c_top = v[-1] - a * self.t[-1]
        c_bot = v[0] + a * self.t[0]
        v -= 0.5 * (c_top + c_bot)
        self.asymmetry = float(np.max(np.abs(c_top - c_bot)))
        self.v = v
        self.a = a
        self.spline = CubicSpline(self.t, v, axis=0)
        self.lam = sol.lam
        self.L = sol.scale_L

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = self.spline(np.clip(t, self.t[0], self.t[-1]))
        lo, hi = t < self.t[0], t > self.t[-1]
        out[lo] = self.v[0] - np.outer(t[lo] - self.t[0], self.a)
        out[hi] = self.v[-1] + np.outer(t[hi] - self.t[-1], self.a)
        return out


@dataclass
class RecoveryFields:
    u: GridField
    rho: DensityField
    eps: float
    masks: dict[str, np.ndarray]
    diagnostics: dict = field(default_factory=dict)


def _x_prime_cutoff(cfg: RecoveryConfig, xp: np.ndarray) -> np.ndarray:
    """phi(x') = 0 off the patch, 1 at depth >= delta_prime inside it (periodic distance)."""
    if not cfg.measure.patches:
        return np.zeros_like(xp)
    if not cfg.partial:
        return np.ones_like(xp)
    p = cfg.measure.patches[0]
    lo, hi = p.lo[0], p.hi[0]
    centre, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    dist = np.abs((xp - centre + 0.5) % 1.0 - 0.5) - half
    return smoothstep(-dist / cfg.delta_prime)


def _profile_fields(grid: Grid, prof: ScaledProfile, eps: float, t1: float, base: np.ndarray):
    """z_eps on the x_N axis and its slab density max(|D2 z| + lam/(eps L), 0)."""
    xN = grid.axis_coords(1)
    L = prof.L
    z = base + eps * L * prof((xN - t1) / (eps * L))
    g1 = Grid.profile(grid.n_last, grid.d, band=grid.band)
    gnorm = hessian_norm(GridField(g1, z)).values
    rho = np.maximum(gnorm + prof.lam / (eps * L), 0.0)
    return z, rho


def build_recovery(cfg: RecoveryConfig, eps: float) -> RecoveryFields:
    """Recovery pair at one eps (which must belong to cfg.epsilons)."""
    if not any(math.isclose(eps, e, rel_tol=1e-12) for e in cfg.epsilons):
        raise ValueError(f"eps = {eps:g} is not in the configured list {cfg.epsilons}")
    for sol in (cfg.cell, cfg.cell_zero):
        if sol is not None and not sol.converged:
            raise ValueError(f"cell solution at gamma = {sol.gamma:g} is flagged as not converged")
    grid = cfg.grid_for(eps)
    a = cfg.spec.a_vec
    lam_ = cfg.laminate
    t1 = lam_.heights[0]
    L = cfg.cell.scale_L
    xs = grid.coords()
    xp, xN = xs[0], xs[1]
    hN = grid.h[1]
    w = grid.cell_volume

    base = eval_laminate(lam_, np.array([0.0, t1]))
    u_lam = eval_laminate(lam_, np.stack([np.zeros_like(grid.axis_coords(1)), grid.axis_coords(1)], axis=-1))
    psi = 1.0 - smoothstep((np.abs(grid.axis_coords(1) - t1) - cfg.delta / 2) / (cfg.delta / 2))
    phi = _x_prime_cutoff(cfg, grid.axis_coords(0))

    prof = ScaledProfile(cfg.cell, a)
    z1, r1 = _profile_fields(grid, prof, eps, t1, base)
    if cfg.partial:
        prof0 = ScaledProfile(cfg.cell_zero, a)
        z0, r0 = _profile_fields(grid, prof0, eps, t1, base)
    else:
        z0, r0 = z1, r1

    z = phi[:, None, None] * z1[None] + (1 - phi)[:, None, None] * z0[None]
    u = psi[None, :, None] * z + (1 - psi)[None, :, None] * u_lam[None]

    dist = np.abs(grid.axis_coords(1) - t1)
    slab = dist <= eps * L / 2 + 1e-12 * hN
    strip = (~slab) & (dist <= eps * L / 2 + math.sqrt(eps))
    if slab.sum() < 16:
        raise ValueError(f"slab spans {slab.sum()} nodes; refine to n_last >= {math.ceil(16 / (eps * L))}")
    if not strip.any():
        raise ValueError("the sqrt(eps) strips contain no nodes; refine the grid")

    rho_slab = np.where(slab, 1.0, 0.0)[None, :] * (phi[:, None] * r1[None] + (1 - phi)[:, None] * r0[None])
    slab_mass = rho_slab.sum(axis=1) * hN
    patch_density = (cfg.measure.density_on_interface(0, grid.axis_coords(0)[:, None])
                     if cfg.measure.patches else np.zeros(grid.n_prime))
    slack = cfg.tilde_delta * math.sqrt(eps)
    deficit = patch_density + slack - slab_mass
    clipped = float(np.sum(np.minimum(deficit, 0.0)) * grid.h[0])
    strip_level = np.maximum(deficit, 0.0) / (strip.sum() * hN)
    rho = rho_slab + strip_level[:, None] * strip[None, :]

    atoms_info = []
    r_atom = eps ** (1.0 / (2 * grid.N))
    occupied = eps * L / 2 + math.sqrt(eps)
    for at in cfg.measure.atoms:
        x0 = np.asarray(at.location)
        dxp = (xp - x0[0] + 0.5) % 1.0 - 0.5
        ball = dxp**2 + (xN - x0[1]) ** 2 < r_atom**2
        if not ball.any():
            raise ValueError(f"atom ball of radius {r_atom:.3g} holds no grid node; refine the grid")
        inside = abs(x0[1]) + r_atom < 0.5
        disjoint = abs(x0[1] - t1) - r_atom > occupied
        nominal = at.mass / (math.sqrt(eps) * _ball_volume(grid.N))
        height = at.mass / (ball.sum() * w)
        rho = rho + height * ball
        atoms_info.append({"location": list(at.location), "mass": at.mass, "radius": r_atom,
                           "height": height, "nominal_height": nominal, "inside_domain": inside,
                           "disjoint_from_slab": disjoint})

    masks = {
        "slab": np.broadcast_to(slab, grid.shape),
        "strip": np.broadcast_to(strip, grid.shape),
        "glue": (np.broadcast_to((psi > 0) & (psi < 1), grid.shape)
                 | np.broadcast_to(((phi > 0) & (phi < 1))[:, None], grid.shape)),
    }
    diag = {
        "eps": eps,
        "n_last": grid.n_last,
        "n_prime": grid.n_prime,
        "slab_nodes": int(slab.sum()),
        "strip_nodes": int(strip.sum()),
        "slack": slack,
        "mass_clipped": clipped,
        "profile_asymmetry": prof.asymmetry,
        "atoms": atoms_info,
        "pre_asymptotic": cfg.pre_asymptotic(eps) or not all(
            i["inside_domain"] and i["disjoint_from_slab"] for i in atoms_info),
    }
    return RecoveryFields(GridField(grid, u), DensityField(grid, rho), eps, masks, diag)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

TEST_FUNCTIONS = (
    ("one", lambda x: np.ones(x.shape[:-1])),
    ("cos_x1", lambda x: np.cos(2 * np.pi * x[..., 0])),
    ("quadratic_xN", lambda x: 1.0 + 4.0 * x[..., -1] ** 2),
    ("mixed", lambda x: np.cos(np.pi * x[..., -1]) * (1.5 + np.sin(2 * np.pi * x[..., 0]))),
    ("gaussian", lambda x: np.exp(-8.0 * (x[..., -1] - 0.1) ** 2) * (1.2 + np.cos(2 * np.pi * x[..., 0]))),
)


def _nodes(grid: Grid) -> np.ndarray:
    return np.stack(grid.coords(), axis=-1)


def laminate_gradient_error(rec: RecoveryFields, lam: Laminate, p: float) -> float:
    """sum_nodes w |grad u_eps - grad u|^p with grad u = +/- a (x) e_N by slab."""
    grid = rec.u.grid
    du = gradient(rec.u)
    sign = laminate_gradient_sign(lam, grid.coords()[-1])
    ref = np.zeros_like(du)
    ref[..., :, -1] = sign[..., None] * np.asarray(lam.a)
    err = np.sqrt(np.sum((du - ref) ** 2, axis=(-2, -1)))
    return float(np.sum(err**p) * grid.cell_volume)


@dataclass
class RecoveryRow:
    epsilon: float
    energy: float
    target: float
    ratio: float
    mass: float
    mass_error: float
    glue_share: float
    w1p_error: float
    weak_errors: list[float]
    pre_asymptotic: bool
    n_last: int


CSV_COLUMNS = ("epsilon", "energy", "target", "ratio", "mass", "mass_error", "glue_share", "w1p_error",
               "weak_error_max", "pre_asymptotic", "n_last")


@dataclass
class RecoveryReport:
    rows: list[RecoveryRow]
    target: float
    mass_target: float
    mass_slope: float
    ratios_nonincreasing: bool
    w1p_decreasing: bool
    weak_decreasing: bool
    final_ratio: float
    flags: list[str] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CSV_COLUMNS)
            for r in self.rows:
                wr.writerow([repr(r.epsilon), repr(r.energy), repr(r.target), repr(r.ratio), repr(r.mass),
                             repr(r.mass_error), repr(r.glue_share), repr(r.w1p_error),
                             repr(max(r.weak_errors)), int(r.pre_asymptotic), r.n_last])

    def to_dict(self) -> dict:
        return {
            "rows": [r.__dict__ for r in self.rows],
            "target": self.target,
            "mass_target": self.mass_target,
            "mass_slope": self.mass_slope,
            "ratios_nonincreasing": self.ratios_nonincreasing,
            "w1p_decreasing": self.w1p_decreasing,
            "weak_decreasing": self.weak_decreasing,
            "final_ratio": self.final_ratio,
            "flags": self.flags,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def evaluate_recovery(cfg: RecoveryConfig, eps: float, target: float | None = None) -> RecoveryRow:
    rec = build_recovery(cfg, eps)
    target = cfg.target() if target is None else target
    br = energy_E(rec.u, rec.rho, eps, cfg.spec)
    glue = energy_E(rec.u, rec.rho, eps, cfg.spec, region=rec.masks["glue"]).total
    mass = integrate(rec.rho)
    mass_target = cfg.measure.total_mass()
    pts = _nodes(rec.rho.grid)
    weak = []
    for _, fn in TEST_FUNCTIONS:
        approx = integrate(fn(pts) * rec.rho.values, rec.rho.grid)
        exact = cfg.measure.integrate(fn, cfg.laminate)
        weak.append(abs(approx - exact))
    return RecoveryRow(
        epsilon=eps,
        energy=br.total,
        target=target,
        ratio=br.total / target if target > 0 else float("inf"),
        mass=mass,
        mass_error=abs(mass - mass_target),
        glue_share=glue / br.total if br.total > 0 else 0.0,
        w1p_error=laminate_gradient_error(rec, cfg.laminate, cfg.spec.p),
        weak_errors=weak,
        pre_asymptotic=bool(rec.diagnostics["pre_asymptotic"]),
        n_last=rec.u.grid.n_last,
    )


def _decreasing(values, rtol=1e-12) -> bool:
    return all(b <= a + rtol * abs(a) for a, b in zip(values, values[1:]))


def validate_limsup(cfg: RecoveryConfig, jobs: int = 1) -> RecoveryReport:
    """E_eps(u_eps, rho_eps) against the limit energy over the configured eps list."""
    target = cfg.target()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(evaluate_recovery, [cfg] * len(cfg.epsilons), cfg.epsilons,
                               [target] * len(cfg.epsilons)))
    else:
        rows = [evaluate_recovery(cfg, e, target) for e in cfg.epsilons]
    asym = [r for r in rows if not r.pre_asymptotic]
    flags = [f"pre-asymptotic eps = {r.epsilon:g}" for r in rows if r.pre_asymptotic]
    slope = loglog_slope([r.epsilon for r in asym], [r.mass_error for r in asym])
    ratios_ok = _decreasing([r.ratio for r in asym])
    w1p_ok = _decreasing([r.w1p_error for r in asym], 0.0)
    weak_ok = _decreasing([max(r.weak_errors) for r in asym], 0.0)
    if not ratios_ok:
        flags.append("energy ratios increase as eps decreases")
    if len(asym) < 2:
        flags.append("fewer than two asymptotic eps values; no slope")
    return RecoveryReport(rows, target, cfg.measure.total_mass(), slope, ratios_ok, w1p_ok, weak_ok,
                          rows[-1].ratio, flags)


# ---------------------------------------------------------------------------
# Sampled lower bound
# ---------------------------------------------------------------------------


@dataclass
class LiminfReport:
    trials: int
    epsilon: float
    target: float
    baseline: float
    minimum: float
    threshold: float
    energies: list[float]
    amplitudes: list[float]
    violations: list[int]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("trials", "epsilon", "target", "baseline", "minimum",
                                               "threshold", "energies", "amplitudes", "violations")} | {
            "passed": self.passed}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(("trial", "amplitude", "energy", "ratio"))
            for k, (amp, e) in enumerate(zip(self.amplitudes, self.energies)):
                wr.writerow([k, repr(amp), repr(e), repr(e / self.target)])


def _smooth_field(grid: Grid, rng: np.random.Generator, ncomp: int, centre: float, width: float) -> np.ndarray:
    """Random trigonometric field times a bump in x_N vanishing well before the bands."""
    xp, xN = grid.coords()
    out = np.zeros(grid.shape + (ncomp,))
    env = np.exp(-0.5 * ((xN - centre) / width) ** 2)
    edge = 1.0 - smoothstep((np.abs(xN) - 0.4) / 0.05)
    for k in range(ncomp):
        f = np.zeros(grid.shape)
        for _ in range(4):
            mx = rng.integers(0, 3)
            kn = rng.uniform(0.5, 4.0)
            f += rng.standard_normal() * np.cos(2 * np.pi * mx * xp + rng.uniform(0, 2 * np.pi)) * \
                np.cos(kn * (xN - centre) / width + rng.uniform(0, 2 * np.pi))
        out[..., k] = f * env * edge
    return out


def _rebalance(rho: np.ndarray, mass: float, w: float) -> np.ndarray:
    """Nonnegative density with the given mass: water-fill down if too heavy, lift uniformly if too light."""
    current = float(np.sum(rho) * w)
    if current > mass:
        return solve_lambda(rho.ravel(), w, mass).v_star.reshape(rho.shape)
    return rho + (mass - current) / (rho.size * w)


def perturbed_energy(cfg: RecoveryConfig, rec: RecoveryFields, amplitude: float, seed) -> float:
    rng = np.random.default_rng(seed)
    grid = rec.u.grid
    eps = rec.eps
    t1 = cfg.laminate.heights[0]
    width = eps * cfg.cell.scale_L * rng.uniform(0.2, 2.0) if rng.uniform() < 0.5 else rng.uniform(0.05, 0.2)
    du = _smooth_field(grid, rng, grid.d, t1, width)
    drho = _smooth_field(grid, rng, 1, t1, width)[..., 0]
    u = GridField(grid, rec.u.values + amplitude * du)
    scale = float(np.max(rec.rho.values)) or 1.0
    rho_raw = np.maximum(rec.rho.values + (amplitude / eps) * scale * drho, 0.0)
    rho = _rebalance(rho_raw, integrate(rec.rho), grid.cell_volume)
    return energy_E(u, DensityField(grid, rho), eps, cfg.spec).total


def probe_liminf(cfg: RecoveryConfig, trials: int = 200, seed: int = 0, threshold: float = 0.98,
                 amplitude_range: tuple[float, float] | None = None) -> LiminfReport:
    """Random admissible perturbations of the finest recovery pair; none may go below threshold * target."""
    eps = cfg.epsilons[-1]
    rec = build_recovery(cfg, eps)
    target = cfg.target()
    baseline = energy_E(rec.u, rec.rho, eps, cfg.spec).total
    lo, hi = amplitude_range or (1e-4 * eps, eps)
    seeds = np.random.SeedSequence(seed).spawn(trials)
    amps, energies = [], []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        amp = float(np.exp(rng.uniform(math.log(lo), math.log(hi))))
        amps.append(amp)
        energies.append(perturbed_energy(cfg, rec, amp, rng.integers(2**63)))
    bad = [k for k, e in enumerate(energies) if e < threshold * target]
    return LiminfReport(trials, eps, target, baseline, min(energies + [baseline]), threshold, energies, amps, bad)
