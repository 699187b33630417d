"""Surface tension Phi(gamma) from the periodic cell problem.

Phi(gamma) is approximated by

    inf { F_{1/L}(u, lam) : L > 0, u = -/+ a x_N + c in the x_N bands,
          u periodic in x', sum w max(lam + |D2 u|, 0) <= gamma }

on a finite grid.  The budget constraint is eliminated by water-filling: for a
fixed profile the best admissible level is the one returned by
``waterfill.solve_lambda``, so the u-step works on the reduced energy
J(u) = F(u, lam*(u)) whose gradient carries the implicit d lam*/du term.
Since J = L A(u) + B(u)/L with the budget independent of L, the scale enters
only through a one-dimensional golden-section search.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .energy import EnergyBreakdown, NodeState, energy_F
from .fields import BandMap, Grid, GridField, band_map, hessian_norm, stencils
from .potential import PotentialSpec, check_assumptions
from .waterfill import solve_lambda

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class SolverOptions:
    L_bracket: tuple[float, float] = (0.5, 50.0)
    scale_iterations: int = 40
    scale_xtol: float = 1e-4
    max_sweeps: int = 20
    # widening never pushes L past this many per grid node along x_N:
    # sharper transitions under-resolve and the discrete value drops below the continuum one
    max_L_per_node: float = 0.25
    sweep_rtol: float = 1e-8
    newton_maxit: int = 200
    newton_rtol: float = 1e-14
    search_newton_rtol: float = 1e-11
    init_width: float = 0.4
    init_L: float | None = None
    pin_lambda_zero: bool = False
    perturb: float = 0.0
    seed: int = 0
    band: int = 2

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Reduced cell energy
# ---------------------------------------------------------------------------


class CellState:
    """Evaluation of the reduced energy at one (u, L)."""

    def __init__(self, node: NodeState, u_full: np.ndarray, lam: float, A: float, B: float, L: float):
        self.node = node
        self.u_full = u_full
        self.lam = lam
        self.A = A
        self.B = B
        self.L = L
        self.J = L * A + B / L


class CellFunctional:
    """J(u; L) = L * sum w W(grad u) + (1/L) * sum w (|D2 u|^2 + min(lam*^2, |D2 u|^2)).

    Unknowns are the free (non-band) node values, stored component-major
    as a flat vector of length d * n_free.
    """

    def __init__(self, grid: Grid, spec: PotentialSpec, gamma: float, pin_lambda_zero: bool = False):
        if gamma < 0:
            raise ValueError("gamma must be nonnegative")
        self.grid = grid
        self.spec = spec
        self.gamma = float(gamma)
        self.pin = pin_lambda_zero
        self.bm: BandMap = band_map(grid)
        self.a = spec.a_vec
        self.w = grid.cell_volume

    # layout helpers
    def to_full(self, x: np.ndarray) -> np.ndarray:
        free = x.reshape(self.grid.d, -1).T
        return self.bm.expand(free, self.a)

    def from_full(self, u_full: np.ndarray) -> np.ndarray:
        return self.bm.restrict(u_full).T.ravel()

    def lam_for(self, g: np.ndarray) -> float:
        if self.pin:
            return 0.0
        return solve_lambda(g, self.w, self.gamma).lam

    def state(self, x: np.ndarray, L: float) -> CellState:
        u = self.to_full(x)
        node = NodeState(self.grid, self.spec, u)
        lam = self.lam_for(node.g)
        A = self.w * float(np.sum(node.W))
        B = self.w * float(np.sum(node.g2 + np.minimum(lam * lam, node.g2)))
        return CellState(node, u, lam, A, B, L)

    def _hess_coef(self, s: CellState) -> np.ndarray:
        """Per-node c with dJ/d(D2_k u) = c * mult_k * D2_k u."""
        eps = 1.0 / s.L
        g, lam = s.node.g, s.lam
        if self.pin or lam == 0.0:
            return np.full_like(g, 2 * eps * self.w)
        carrying = g > -lam
        safe = np.where(carrying, g, 1.0)
        # carrying nodes: d/dg [g^2 + lam^2] plus the implicit lam*(u) term
        return np.where(carrying, 2 * eps * self.w * (1.0 - lam / safe), 4 * eps * self.w)

    def gradient(self, s: CellState) -> np.ndarray:
        g = self.grid
        full = s.node.assemble_gradient(np.full(g.n_nodes, s.L * self.w), self._hess_coef(s))
        return self.bm.pullback(full).T.ravel()

    def hessian(self, s: CellState) -> sp.csc_matrix:
        """Sparse positive semidefinite model: exact for the W term, frozen coefficients for |D2 u|."""
        blocks = self._hessian_blocks(s)
        if blocks is None:
            return sp.block_diag([self._shared_block(s)] * self.grid.d, format="csc")
        return sp.bmat(blocks, format="csc")

    def newton_step(self, s: CellState, grad: np.ndarray) -> np.ndarray:
        """Solve (H + shift I) dx = -grad, one factorisation shared by all components when p = 2."""
        d, n_free = self.grid.d, self.bm.n_free
        blocks = self._hessian_blocks(s)
        H = self._shared_block(s) if blocks is None else sp.bmat(blocks, format="csc")
        shift = 1e-12 * float(H.diagonal().max()) + 1e-300
        lu = splu((H + shift * sp.identity(H.shape[0], format="csc")).tocsc())
        if blocks is None:
            return -lu.solve(np.ascontiguousarray(grad.reshape(d, n_free).T)).T.ravel()
        return -lu.solve(grad)

    def _second_gradient_block(self, s: CellState) -> sp.csr_matrix:
        st = stencils(self.grid)
        c = self._hess_coef(s)
        return sum(st.D2T[k] @ sp.diags(c * st.mult[k]) @ st.D2[k] for k in st.D2)

    def _shared_block(self, s: CellState) -> sp.csc_matrix:
        # p = 2: d^2 W = 2 I, so every component sees the same operator
        st = stencils(self.grid)
        M = self._second_gradient_block(s)
        M = M + sum(st.D1T[i] @ st.D1[i] for i in range(self.grid.N)) * (2.0 * s.L * self.w)
        return (self.bm.PT @ M @ self.bm.P).tocsc()

    def _hessian_blocks(self, s: CellState):
        if self.spec.p == 2:
            return None
        grid, spec = self.grid, self.spec
        st = stencils(grid)
        d = grid.d
        M = self._second_gradient_block(s)
        cols = list(range(spec.N - grid.N, spec.N))
        hw = _w_hessian(spec, s.node.xi, cols)
        scale = s.L * self.w
        P, PT = self.bm.P, self.bm.PT
        blocks = [[None] * d for _ in range(d)]
        for k in range(d):
            for kk in range(d):
                B = M if k == kk else None
                for i in range(len(cols)):
                    for ii in range(len(cols)):
                        term = st.D1T[i] @ sp.diags(scale * hw[(k, i, kk, ii)]) @ st.D1[ii]
                        B = term if B is None else B + term
                blocks[k][kk] = PT @ B @ P
        return blocks


def _w_hessian(spec: PotentialSpec, xi: np.ndarray, cols: list[int]) -> dict:
    """Second derivatives of W in the entries (k, cols[i]); keys (k, i, k', i')."""
    a = spec.a_vec
    A = np.zeros((spec.d, spec.N))
    A[:, -1] = a
    rA = np.sum((xi - A) ** 2, axis=(-2, -1))
    rB = np.sum((xi + A) ** 2, axis=(-2, -1))
    useA = rA <= rB
    diff = np.where(useA[:, None, None], xi - A, xi + A)
    r2 = np.where(useA, rA, rB)
    p = spec.p
    out = {}
    r = np.sqrt(r2)
    base = p * r ** (p - 2)
    safe = np.where(r > 0, r, 1.0)
    nvec = diff / safe[:, None, None]
    for k in range(spec.d):
        for i, ci in enumerate(cols):
            for kk in range(spec.d):
                for ii, cii in enumerate(cols):
                    val = base * (p - 2) * nvec[:, k, ci] * nvec[:, kk, cii]
                    if (k, i) == (kk, ii):
                        val = val + base
                    out[(k, i, kk, ii)] = val
    return out


@dataclass
class NewtonInfo:
    iterations: int
    grad_norm: float
    converged: bool


def minimize_profile(fun: CellFunctional, x0: np.ndarray, L: float, opts: SolverOptions) -> tuple[np.ndarray, CellState, NewtonInfo]:
    """Damped Newton on the reduced energy at fixed L with Armijo backtracking.

    Stops when half the Newton decrement -g.dx falls below newton_rtol * |J|.
    """
    x = x0.copy()
    s = fun.state(x, L)
    gnorm = np.inf
    converged = False
    it = 0
    for it in range(1, opts.newton_maxit + 1):
        grad = fun.gradient(s)
        gnorm = float(np.max(np.abs(grad)))
        try:
            dx = fun.newton_step(s, grad)
        except RuntimeError:
            dx = -grad
        slope = float(grad @ dx)
        if slope >= 0:
            dx, slope = -grad, -float(grad @ grad)
        if -0.5 * slope <= opts.newton_rtol * max(abs(s.J), 1e-300):
            converged = True
            break
        t = 1.0
        s_new = None
        while t >= 1e-10:
            trial = fun.state(x + t * dx, L)
            if trial.J <= s.J + 1e-4 * t * slope:
                s_new = trial
                break
            t *= 0.5
        if s_new is None:
            # roundoff floor: no representable descent along the Newton direction
            converged = -slope <= 1e-10 * abs(s.J)
            break
        x = x + t * dx
        s = s_new
    return x, s, NewtonInfo(iterations=it, grad_norm=gnorm, converged=converged)


# ---------------------------------------------------------------------------
# Scale search
# ---------------------------------------------------------------------------


def golden_section(f: Callable[[float], float], lo: float, hi: float, iterations: int = 40,
                   xtol: float = 1e-6, log_scale: bool = True) -> tuple[float, float, list[tuple[float, float]]]:
    """Golden-section minimisation; returns (argmin, min, evaluations) over all evaluated points."""
    if lo > hi:
        raise ValueError("empty bracket")
    evals: list[tuple[float, float]] = []

    def F(t):
        L = math.exp(t) if log_scale else t
        v = f(L)
        evals.append((L, v))
        return v

    if lo == hi:
        return lo, F(math.log(lo) if log_scale else lo), evals
    a, b = (math.log(lo), math.log(hi)) if log_scale else (lo, hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = F(c), F(d)
    for _ in range(iterations):
        if abs(b - a) <= xtol * max(1.0, abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = F(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = F(d)
    Lbest, vbest = min(evals, key=lambda e: e[1])
    return Lbest, vbest, evals


def optimize_scale(inner: Callable[[float], float], L_bracket: tuple[float, float], iterations: int = 40,
                   xtol: float = 1e-4, report: dict | None = None, L_cap: float = math.inf) -> float:
    """Golden-section search for the best scale L in the bracket (log-spaced).

    If the optimum sits at a bracket end with a value clearly below the
    interior, that side is widened four-fold (never beyond L_cap) and the
    search rerun once; if it is still at the end the report is flagged.
    """
    lo, hi = map(float, L_bracket)
    if not 0 < lo <= hi:
        raise ValueError("need 0 < L_min <= L_max")
    if lo == hi:
        if report is not None:
            report.update(evaluations=[], widened=False, flagged=False)
        return lo
    widened = False
    flagged = False
    all_evals: list[tuple[float, float]] = []
    for attempt in range(2):
        L, v, evals = golden_section(inner, lo, hi, iterations, xtol)
        all_evals += evals
        side = _boundary_side(L, v, evals, lo, hi)
        if side is None:
            break
        if attempt == 0:
            widened = True
            lo, hi = (lo / 4.0, hi) if side == "lo" else (lo, max(hi, min(hi * 4.0, L_cap)))
        else:
            flagged = True
    L, v = min(all_evals, key=lambda e: e[1])
    if report is not None:
        report.update(evaluations=all_evals, widened=widened, flagged=flagged, bracket=(lo, hi))
    return L


def _boundary_side(L, v, evals, lo, hi, rtol=1e-8):
    """'lo'/'hi' when the best point sits at a bracket end and V still slopes down into it."""
    span = math.log(hi / lo)
    if math.log(L / lo) < 0.05 * span:
        side = "lo"
    elif math.log(hi / L) < 0.05 * span:
        side = "hi"
    else:
        return None
    end = lo if side == "lo" else hi
    # compare against evaluations 5-20% of the span away from that end
    near = [e[1] for e in evals if 0.05 * span <= abs(math.log(e[0] / end)) <= 0.2 * span]
    if not near:
        return None
    # a plateau (flat to rtol) is not exhaustion
    return side if min(near) - v > rtol * abs(v) else None


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


@dataclass
class CellSolution:
    value: float
    lam: float
    scale_L: float
    profile: GridField
    gamma: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", False))

    def summary(self) -> dict:
        d = self.diagnostics
        return {
            "gamma": self.gamma,
            "phi": self.value,
            "lambda": self.lam,
            "L": self.scale_L,
            "iterations": d.get("iterations", 0),
            "grad_norm": d.get("final_grad_norm", float("nan")),
            "constraint_mass": d.get("constraint_mass", float("nan")),
            "converged": self.converged,
        }


def initial_profile(grid: Grid, a: np.ndarray, width: float = 0.4) -> np.ndarray:
    """u0(x_N) = a s(x_N), s' a clamped cubic step from -1 to 1 over the given width."""
    t = grid.axis_coords(grid.N - 1)
    z = np.clip((t + width / 2) / width, 0.0, 1.0)
    slope = -1.0 + 2.0 * (3 * z**2 - 2 * z**3)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (slope[1:] + slope[:-1]) / grid.n_last)])
    s -= np.interp(0.0, t, s)
    prof = s[:, None] * a[None, :]
    return np.broadcast_to(prof, grid.shape + (grid.d,)).reshape(grid.n_nodes, grid.d).copy()


def rescale_profile(grid: Grid, u_full: np.ndarray, a: np.ndarray, L_from: float, L_to: float) -> np.ndarray:
    """Map a profile optimal at L_from to the same shape at L_to: u(t) -> (L_from/L_to) u(t L_to / L_from).

    Values outside the box are continued with slope -/+ a.
    """
    if L_from == L_to:
        return u_full
    r = L_to / L_from
    t = grid.axis_coords(grid.N - 1)
    U = u_full.reshape(-1, grid.n_last, grid.d)
    tq = t * r
    out = np.empty_like(U)
    for k in range(grid.d):
        for m in range(U.shape[0]):
            col = U[m, :, k]
            v = np.interp(tq, t, col)
            below, above = tq < t[0], tq > t[-1]
            v[below] = col[0] - a[k] * (tq[below] - t[0])
            v[above] = col[-1] + a[k] * (tq[above] - t[-1])
            out[m, :, k] = v / r
    return out.reshape(-1, grid.d)


class _ScaleInner:
    """min_u J(u; L) as a function of L, warm-started from the best profile so far."""

    def __init__(self, fun: CellFunctional, opts: SolverOptions):
        self.fun = fun
        self.opts = opts
        self.best: tuple[float, float, np.ndarray] | None = None
        self.newton_iterations = 0

    def __call__(self, L: float) -> float:
        fun = self.fun
        _, L0, x0 = self.best
        u0 = rescale_profile(fun.grid, fun.to_full(x0), fun.a, L0, L)
        x, s, info = minimize_profile(fun, fun.from_full(u0), L, self.opts)
        self.newton_iterations += info.iterations
        if s.J < self.best[0]:
            self.best = (s.J, L, x)
        return s.J


def _solve_on_grid(spec: PotentialSpec, gamma: float, grid: Grid, opts: SolverOptions,
                   u_init: np.ndarray, L_init: float) -> CellSolution:
    fun = CellFunctional(grid, spec, gamma, opts.pin_lambda_zero)
    x = fun.from_full(u_init)
    L = L_init
    history = []
    total_newton = 0
    flagged = False
    info = None
    s = None
    search_opts = replace(opts, newton_rtol=max(opts.newton_rtol, opts.search_newton_rtol))
    for sweep in range(1, opts.max_sweeps + 1):
        # (i) u-step at the current scale; lam is re-solved inside every evaluation
        x, s, info = minimize_profile(fun, x, L, opts)
        total_newton += info.iterations
        history.append(s.J)
        if len(history) >= 2 and history[-2] - history[-1] <= opts.sweep_rtol * abs(history[-1]):
            break
        if opts.scale_iterations == 0 or opts.L_bracket[0] == opts.L_bracket[1] or sweep == opts.max_sweeps:
            break
        # (ii) scale step, each trial L warm-started from the best profile so far
        inner = _ScaleInner(fun, search_opts)
        inner.best = (s.J, L, x)
        report: dict = {}
        L_cap = opts.max_L_per_node * grid.n_last
        optimize_scale(inner, opts.L_bracket, opts.scale_iterations, opts.scale_xtol, report, L_cap)
        total_newton += inner.newton_iterations
        flagged = flagged or report.get("flagged", False)
        _, L, x = inner.best
    descent_ok = all(b <= a_ + 1e-12 * abs(a_) for a_, b in zip(history, history[1:]))
    u_full = s.u_full
    profile = GridField(grid, u_full.reshape(grid.shape + (grid.d,)))
    g = s.node.g
    mass = grid.cell_volume * float(np.sum(np.maximum(s.lam + g, 0.0)))
    br = EnergyBreakdown(
        potential_term=s.L * s.A,
        second_gradient_term=grid.cell_volume * float(np.sum(s.node.g2)) / s.L,
        surfactant_term=grid.cell_volume * float(np.sum(np.minimum(s.lam**2, s.node.g2))) / s.L,
        total=s.J,
        epsilon=1.0 / s.L,
    )
    converged = bool(info.converged and not flagged and descent_ok)
    diag = {
        "iterations": total_newton,
        "sweeps": len(history),
        "final_grad_norm": info.grad_norm,
        "constraint_mass": mass,
        "energy_breakdown": br.to_dict(),
        "converged": converged,
        "scale_flagged": flagged,
        "descent_ok": descent_ok,
        "lambda_pinned": opts.pin_lambda_zero,
        "grid": grid.to_dict(),
        "sweep_history": history,
    }
    if not converged:
        log.warning("cell solve at gamma=%g flagged as not converged", gamma)
    return CellSolution(value=s.J, lam=s.lam, scale_L=s.L, profile=profile, gamma=float(gamma), diagnostics=diag)


def _default_L(opts: SolverOptions) -> float:
    if opts.init_L is not None:
        return float(opts.init_L)
    lo, hi = opts.L_bracket
    return math.sqrt(lo * hi)


def solve_profile_1d(spec: PotentialSpec, gamma: float, n: int = 1024, opts: SolverOptions | None = None,
                     warm: CellSolution | None = None) -> CellSolution:
    """Cell problem restricted to profiles depending on x_N only."""
    opts = opts or SolverOptions()
    if n < 64:
        raise ValueError("1D profile solves need n >= 64")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    rep = check_assumptions(spec, samples=200, seed=opts.seed)
    if not rep.passed.get("H1d", False):
        log.warning("potential fails W(xi) >= W(0, xi_N); 1D profiles may not attain Phi")
    grid = Grid.profile(n, spec.d, band=opts.band)
    if warm is not None:
        u0 = _transfer_profile(warm.profile, grid, spec.a_vec)
        L0 = warm.scale_L
    else:
        u0 = initial_profile(grid, spec.a_vec, opts.init_width)
        L0 = _default_L(opts)
    return _solve_on_grid(spec, gamma, grid, opts, u0, L0)


def _transfer_profile(src: GridField, grid: Grid, a: np.ndarray) -> np.ndarray:
    """Interpolate a (1D or x'-averaged) profile onto the x_N axis of another grid."""
    sg = src.grid
    vals = src.values
    if sg.N > 1:
        vals = vals.mean(axis=tuple(range(sg.N - 1)))
    t_src = sg.axis_coords(sg.N - 1)
    t = grid.axis_coords(grid.N - 1)
    prof = np.empty((grid.n_last, grid.d))
    for k in range(grid.d):
        v = np.interp(t, t_src, vals[:, k])
        lo, hi = t < t_src[0], t > t_src[-1]
        v[lo] = vals[0, k] - a[k] * (t[lo] - t_src[0])
        v[hi] = vals[-1, k] + a[k] * (t[hi] - t_src[-1])
        prof[:, k] = v
    return np.broadcast_to(prof, grid.shape + (grid.d,)).reshape(grid.n_nodes, grid.d).copy()


def _smooth_perturbation(grid: Grid, amplitude: float, seed: int) -> np.ndarray:
    """Seeded x'-dependent perturbation, vanishing in the bands."""
    rng = np.random.default_rng(seed)
    xs = grid.coords()
    t = xs[-1]
    b = grid.band * grid.h[-1]
    envelope = np.clip((0.5 - b - np.abs(t)) / (0.5 - b), 0, 1) ** 3
    pert = np.zeros(grid.shape + (grid.d,))
    for k in range(grid.d):
        field_k = np.zeros(grid.shape)
        for mode in range(1, 4):
            for ax in range(grid.N - 1):
                ph = rng.uniform(0, 2 * np.pi)
                amp = rng.standard_normal() / mode**2
                field_k += amp * np.cos(2 * np.pi * mode * xs[ax] + ph) * np.cos(np.pi * mode * t + rng.uniform(0, np.pi))
        pert[..., k] = field_k * envelope
    return amplitude * pert.reshape(grid.n_nodes, grid.d)


def solve_profile_nd(spec: PotentialSpec, gamma: float, grid: Grid, opts: SolverOptions | None = None,
                     shift: int = 0, profile_1d: CellSolution | None = None) -> CellSolution:
    """Full-grid cell solve (N = 2), initialised from the rasterised 1D solution.

    ``shift`` rolls the initial guess by that many nodes along x_1.
    """
    opts = opts or SolverOptions()
    if grid.N != 2 or spec.N != 2:
        raise ValueError("full-dimensional solves support N = 2 only")
    if grid.d != spec.d:
        raise ValueError("grid and potential disagree on d")
    if profile_1d is None:
        profile_1d = solve_profile_1d(spec, gamma, max(grid.n_last, 64), opts)
    u0 = _transfer_profile(profile_1d.profile, grid, spec.a_vec)
    if opts.perturb:
        u0 = u0 + _smooth_perturbation(grid, opts.perturb, opts.seed)
    if shift:
        u0 = np.roll(u0.reshape(grid.shape + (grid.d,)), shift, axis=0).reshape(grid.n_nodes, grid.d)
    sol = _solve_on_grid(spec, gamma, grid, opts, u0, profile_1d.scale_L)
    sol.diagnostics["x_prime_variance"] = x_prime_variance(sol.profile)
    return sol


def x_prime_variance(profile: GridField) -> float:
    """Largest variance across x' of any component on any x_N layer."""
    if profile.grid.N == 1:
        return 0.0
    axes = tuple(range(profile.grid.N - 1))
    return float(np.max(np.var(profile.values, axis=axes)))


def cell_energy_breakdown(sol: CellSolution, spec: PotentialSpec) -> EnergyBreakdown:
    """Independent re-evaluation of F_{1/L}(profile, lam) through the energy module."""
    return energy_F(sol.profile, sol.lam, 1.0 / sol.scale_L, spec)


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass
class PhiPoint:
    gamma: float
    phi: float
    lam: float
    L: float
    iterations: int
    grad_norm: float
    converged: bool = True


CSV_COLUMNS = ("gamma", "phi", "lambda", "L", "iterations", "grad_norm")


@dataclass
class PhiCurve:
    points: list[PhiPoint]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        gs = [p.gamma for p in self.points]
        if any(b <= a for a, b in zip(gs, gs[1:])):
            raise ValueError("gammas must be strictly increasing")
        if any(not np.isfinite(p.phi) or p.phi < 0 for p in self.points):
            raise ValueError("phi values must be finite and nonnegative")

    @property
    def gammas(self) -> np.ndarray:
        return np.array([p.gamma for p in self.points])

    @property
    def phis(self) -> np.ndarray:
        return np.array([p.phi for p in self.points])

    def __call__(self, gamma) -> np.ndarray | float:
        return self.interp(gamma)

    def interp(self, gamma):
        """Piecewise-linear in gamma, clamped outside the sampled range.

        A running minimum is applied first so the interpolant is nonincreasing
        even if a sweep carries solver noise.
        """
        phis = np.minimum.accumulate(self.phis)
        out = np.interp(gamma, self.gammas, phis)
        return float(out) if np.ndim(out) == 0 else out

    def covers(self, gamma: float) -> bool:
        return bool(self.gammas[0] <= gamma <= self.gammas[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for p in self.points:
                w.writerow([repr(float(p.gamma)), repr(float(p.phi)), repr(float(p.lam)),
                            repr(float(p.L)), int(p.iterations), repr(float(p.grad_norm))])

    @classmethod
    def from_csv(cls, path) -> "PhiCurve":
        pts = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                pts.append(PhiPoint(float(row["gamma"]), float(row["phi"]), float(row["lambda"]),
                                    float(row["L"]), int(row["iterations"]), float(row["grad_norm"])))
        return cls(pts)

    def to_dict(self) -> dict:
        return {"points": [asdict(p) for p in self.points], "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=float)

    @classmethod
    def from_dict(cls, obj: dict) -> "PhiCurve":
        return cls([PhiPoint(**p) for p in obj["points"]], dict(obj.get("metadata", {})))


def phi_point(sol: CellSolution) -> PhiPoint:
    d = sol.diagnostics
    return PhiPoint(sol.gamma, sol.value, sol.lam, sol.scale_L, int(d["iterations"]),
                    float(d["final_grad_norm"]), sol.converged)


def sweep_phi(spec: PotentialSpec, gammas, resolution=1024, opts: SolverOptions | None = None,
              nd_grid: Grid | None = None, warm_start: bool = True,
              keep_solutions: bool = False) -> PhiCurve:
    """Phi at each gamma (strictly increasing), warm-starting each point from the previous one.

    ``resolution`` is an int or an increasing list of grid sizes; with a list
    every point is solved coarse to fine and the finest value is reported.
    """
    opts = opts or SolverOptions()
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValueError("need at least one gamma")
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gammas must be strictly increasing")
    levels = [int(resolution)] if np.isscalar(resolution) else [int(n) for n in resolution]
    points, failures, per_level, nd_points = [], [], [], []
    solutions = []
    prev: CellSolution | None = None
    for gamma in gammas:
        sol = None
        level_values = []
        for n in levels:
            warm = sol if sol is not None else (prev if warm_start else None)
            sol = solve_profile_1d(spec, gamma, n, opts, warm=warm)
            level_values.append(sol.value)
        per_level.append(level_values)
        if not sol.converged:
            failures.append(gamma)
        points.append(phi_point(sol))
        if nd_grid is not None:
            nd = solve_profile_nd(spec, gamma, nd_grid, opts, profile_1d=sol)
            nd_points.append(phi_point(nd))
        if keep_solutions:
            solutions.append(sol)
        prev = sol
    meta = {
        "potential": spec.to_dict(),
        "resolution": levels,
        "solver": opts.to_dict(),
        "per_level_values": per_level,
        "failures": failures,
        "warm_start": warm_start,
    }
    if nd_grid is not None:
        meta["nd_grid"] = nd_grid.to_dict()
        meta["nd_points"] = [asdict(p) for p in nd_points]
    curve = PhiCurve(points, meta)
    if keep_solutions:
        curve.solutions = solutions
    return curve


@dataclass
class MonotoneReport:
    passed: bool
    worst_violation: float
    worst_index: int | None
    slack: float


def check_monotone(curve: PhiCurve, slack: float = 0.0) -> MonotoneReport:
    phis = curve.phis
    if len(phis) < 2:
        return MonotoneReport(True, 0.0, None, slack)
    inc = phis[1:] - phis[:-1]
    k = int(np.argmax(inc))
    worst = float(inc[k])
    return MonotoneReport(worst <= slack, worst, k + 1 if worst > 0 else None, slack)


def gamma_saturation(sol: CellSolution) -> float:
    """sum w |D2 u| of a profile: the smallest budget for which lam* = 0 keeps it admissible."""
    return float(np.sum(hessian_norm(sol.profile).values) * sol.profile.grid.cell_volume)


def slack_budget(spec: PotentialSpec, n: int = 1024, opts: SolverOptions | None = None,
                 factor: float = 1.1) -> tuple[float, CellSolution]:
    """A budget large enough that lam* = 0, with the lam-pinned solution that certifies it.

    The pinned optimum spends gamma_saturation(K) of mass; any budget above
    that keeps it admissible at lam = 0, so Phi equals K there.
    """
    opts = opts or SolverOptions()
    K = solve_profile_1d(spec, 0.0, n, replace(opts, pin_lambda_zero=True))
    gamma_max = factor * gamma_saturation(K)
    K.diagnostics["gamma_saturation"] = gamma_saturation(K)
    return gamma_max, K
