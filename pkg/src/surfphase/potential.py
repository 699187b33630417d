"""Two-well potentials on d x N matrices and sampling checks of their hypotheses.

The shipped family is the prototype

    W(xi) = min(|xi - A|^p, |xi - B|^p),   A = a (x) e_N,  B = -A,

with the Frobenius norm.  Wells are rank-one connected through e_N.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

KINDS = ("PrototypeP",)


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    a: tuple[float, ...]
    p: float
    d: int
    N: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        a = tuple(float(v) for v in np.atleast_1d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "a", a)
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "N", int(self.N))
        if len(a) != self.d:
            raise ValueError(f"well vector a has length {len(a)}, expected d={self.d}")
        if not np.all(np.isfinite(a)) or np.linalg.norm(a) == 0.0:
            raise ValueError("well vector a must be finite and nonzero (wells would coincide)")
        if not np.isfinite(self.p) or self.p < 2:
            raise ValueError(f"growth exponent p must be >= 2, got {self.p}")
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def prototype(cls, a=(1.0, 0.0), p: float = 2.0, N: int = 2) -> "PotentialSpec":
        a = tuple(np.atleast_1d(np.asarray(a, dtype=float)))
        return cls("PrototypeP", a, p, len(a), N)

    @property
    def a_vec(self) -> np.ndarray:
        return np.asarray(self.a)

    @property
    def well_A(self) -> np.ndarray:
        A = np.zeros((self.d, self.N))
        A[:, -1] = self.a
        return A

    @property
    def well_B(self) -> np.ndarray:
        return -self.well_A

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "a": list(self.a), "p": self.p, "d": self.d, "N": self.N}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "PotentialSpec":
        missing = [k for k in ("kind", "a", "p", "d", "N") if k not in obj]
        if missing:
            raise ValueError(f"potential is missing field(s): {', '.join(missing)}")
        return cls(obj["kind"], tuple(obj["a"]), obj["p"], obj["d"], obj["N"])

    @classmethod
    def from_json(cls, text: str) -> "PotentialSpec":
        return cls.from_dict(json.loads(text))


def _check_shape(spec: PotentialSpec, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-2:] != (spec.d, spec.N):
        raise ValueError(f"expected trailing shape {(spec.d, spec.N)}, got {xi.shape}")
    return xi


def _branch_norms(spec: PotentialSpec, xi: np.ndarray):
    # |xi - A|^2 and |xi - B|^2 differ only through the last column.
    a = spec.a_vec
    base = np.sum(xi[..., :, :-1] ** 2, axis=(-2, -1))
    last = xi[..., :, -1]
    rA = base + np.sum((last - a) ** 2, axis=-1)
    rB = base + np.sum((last + a) ** 2, axis=-1)
    return rA, rB


def eval_W(spec: PotentialSpec, xi) -> np.ndarray | float:
    """Evaluate W on a single d x N matrix or on a stack of them (leading axes)."""
    xi = _check_shape(spec, xi)
    rA, rB = _branch_norms(spec, xi)
    r2 = np.minimum(rA, rB)
    out = r2 if spec.p == 2 else r2 ** (spec.p / 2)
    return float(out) if np.ndim(out) == 0 else out


def grad_W(spec: PotentialSpec, xi) -> np.ndarray:
    """Gradient p |xi - S|^(p-2) (xi - S), S the nearer well (ties go to A)."""
    xi = _check_shape(spec, xi)
    rA, rB = _branch_norms(spec, xi)
    useA = rA <= rB
    S = np.where(useA[..., None, None], spec.well_A, spec.well_B)
    diff = xi - S
    if spec.p == 2:
        return 2.0 * diff
    r2 = np.where(useA, rA, rB)
    return spec.p * (r2 ** ((spec.p - 2) / 2))[..., None, None] * diff


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass
class AssumptionReport:
    seed: int
    samples: int
    tol: float
    passed: dict[str, bool] = field(default_factory=dict)
    details: dict[str, str] = field(default_factory=dict)
    constants: dict[str, float] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "samples": self.samples,
            "tol": self.tol,
            "passed": dict(self.passed),
            "details": dict(self.details),
            "constants": dict(self.constants),
        }


def _sample_matrices(spec: PotentialSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    # Mix of scales so growth bounds see both small and large matrices.
    scale = np.abs(spec.a_vec).max()
    scales = scale * 10.0 ** rng.uniform(-2, 2, size=n)
    return rng.standard_normal((n, spec.d, spec.N)) * scales[:, None, None]


def _probes(spec: PotentialSpec) -> np.ndarray:
    A, B = spec.well_A, spec.well_B
    probes = [A, B, np.zeros_like(A), 0.5 * A, -0.5 * A]
    for k in range(spec.d):
        for j in range(spec.N):
            E = np.zeros_like(A)
            E[k, j] = 1.0
            probes += [E, -E, 3.0 * E]
    return np.array(probes)


def _smallest_lower_C(Wv: np.ndarray, normp: np.ndarray) -> float:
    """Smallest C >= 1 with |xi|^p / C - C <= W on the sample (bisection on C)."""

    def ok(C):
        return np.all(normp / C - C <= Wv + 1e-12 * (1 + normp))

    lo, hi = 1.0, 2.0
    if ok(lo):
        return lo
    while not ok(hi):
        hi *= 2.0
        if hi > 1e12:
            return np.inf
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def check_assumptions(
    spec: PotentialSpec, samples: int = 2000, tol: float = 1e-10, seed: int = 0
) -> AssumptionReport:
    """Statistical check of the structural hypotheses on W.

    Keys in the report: H1 (wells, positivity, continuity), H2 (p-growth),
    H3 (p-behaviour near the wells), H4 (sign flip of any single column),
    H5 (evenness), H1d (W(xi) >= W(0, xi_N)).  Failures are report entries.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    rep = AssumptionReport(seed=seed, samples=samples, tol=tol)
    xi = np.concatenate([_sample_matrices(spec, rng, samples), _probes(spec)])
    Wv = np.asarray(eval_W(spec, xi))
    p = spec.p
    A, B = spec.well_A, spec.well_B

    # H1
    at_wells = max(abs(eval_W(spec, A)), abs(eval_W(spec, B)))
    dist = np.minimum(
        np.linalg.norm(xi - A, axis=(-2, -1)), np.linalg.norm(xi - B, axis=(-2, -1))
    )
    off = dist > 1e-8
    positive = bool(np.all(Wv[off] > 0))
    step = 1e-7 * (1 + np.linalg.norm(xi, axis=(-2, -1)))
    jitter = rng.standard_normal(xi.shape)
    jitter /= np.linalg.norm(jitter, axis=(-2, -1), keepdims=True)
    W_near = np.asarray(eval_W(spec, xi + step[:, None, None] * jitter))
    scale = 1 + Wv + np.linalg.norm(xi, axis=(-2, -1)) ** p
    cont = float(np.max(np.abs(W_near - Wv) / scale))
    rep.passed["H1"] = at_wells <= tol and positive and cont < 1e-4
    rep.details["H1"] = f"W(A),W(B) max {at_wells:.3g}; min off-well W {Wv[off].min():.3g}; continuity defect {cont:.3g}"

    # H2
    normp = np.linalg.norm(xi, axis=(-2, -1)) ** p
    C_up = float(np.max(Wv / (normp + 1)))
    C_lo = _smallest_lower_C(Wv, normp)
    C = max(C_up, C_lo, 1.0 + 1e-12)
    rep.constants["C_growth"] = C
    rep.passed["H2"] = bool(np.isfinite(C))
    rep.details["H2"] = f"upper needs C>={C_up:.4g}, lower needs C>={C_lo:.4g}"

    # H3 on balls of radius |a|/2 around each well
    rho = 0.5 * np.linalg.norm(spec.a_vec)
    dirs = rng.standard_normal((samples, spec.d, spec.N))
    dirs /= np.linalg.norm(dirs, axis=(-2, -1), keepdims=True)
    radii = rho * rng.uniform(1e-3, 1.0, size=samples) ** (1 / (spec.d * spec.N))
    ratios = []
    for S in (A, B):
        pts = S + radii[:, None, None] * dirs
        ratios.append(np.asarray(eval_W(spec, pts)) / radii**p)
    ratios = np.concatenate(ratios)
    rep.constants["c_well"] = float(ratios.min())
    rep.constants["C_well"] = float(ratios.max())
    rep.constants["rho_well"] = float(rho)
    rep.passed["H3"] = bool(ratios.min() > 0 and np.isfinite(ratios.max()))
    rep.details["H3"] = f"W/|xi-S|^p in [{ratios.min():.4g}, {ratios.max():.4g}] for |xi-S|<={rho:.3g}"

    # H4: flip each column separately
    worst = 0.0
    for i in range(spec.N):
        flipped = xi.copy()
        flipped[..., :, i] *= -1
        worst = max(worst, float(np.max(np.abs(np.asarray(eval_W(spec, flipped)) - Wv) / (1 + Wv))))
    rep.passed["H4"] = worst <= tol
    rep.details["H4"] = f"max relative column-flip defect {worst:.3g}"

    # H5: evenness
    even = float(np.max(np.abs(np.asarray(eval_W(spec, -xi)) - Wv) / (1 + Wv)))
    rep.passed["H5"] = even <= tol
    rep.details["H5"] = f"max relative W(-xi)-W(xi) defect {even:.3g}"

    # H1d
    xi_last = np.zeros_like(xi)
    xi_last[..., :, -1] = xi[..., :, -1]
    W_last = np.asarray(eval_W(spec, xi_last))
    slack = float(np.min(Wv - W_last))
    rep.passed["H1d"] = slack >= -tol * (1 + float(np.max(Wv)))
    rep.details["H1d"] = f"min W(xi) - W(0, xi_N) = {slack:.3g}"

    # Empirical constants for C1 |xi'|^p <= W(xi) <= C2 (W(eta) + |xi - eta|^p)
    prime = np.linalg.norm(xi[..., :, :-1], axis=(-2, -1)) ** p
    nz = prime > 1e-12
    rep.constants["C1"] = float(np.min(Wv[nz] / prime[nz])) if nz.any() else np.inf
    eta = xi[rng.permutation(len(xi))]
    denom = np.asarray(eval_W(spec, eta)) + np.linalg.norm(xi - eta, axis=(-2, -1)) ** p
    nz = denom > 1e-12
    rep.constants["C2"] = float(np.max(Wv[nz] / denom[nz]))
    return rep
