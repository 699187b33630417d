import math

import numpy as np
import pytest

from oracles import phi_profile, tension_free, tension_zero_budget
from surfphase.cellproblem import (
    CellFunctional,
    PhiCurve,
    PhiPoint,
    SolverOptions,
    cell_energy_breakdown,
    check_monotone,
    golden_section,
    initial_profile,
    optimize_scale,
    rescale_profile,
    slack_budget,
    solve_profile_1d,
    solve_profile_nd,
    sweep_phi,
)
from surfphase.fields import Grid, hessian_norm
from surfphase.potential import PotentialSpec
from surfphase.waterfill import solve_lambda

SPEC = PotentialSpec.prototype(a=(1.0, 0.0), p=2, N=2)


@pytest.fixture(scope="module")
def solutions():
    return {g: solve_profile_1d(SPEC, g, 256) for g in (0.0, 0.5, 1.0)}


@pytest.fixture(scope="module")
def budget():
    return slack_budget(SPEC, 256)


def test_oracle_is_self_consistent():
    assert phi_profile(0.0) == pytest.approx(tension_zero_budget(), rel=1e-8)
    assert phi_profile(2.5) == pytest.approx(tension_free(), rel=1e-8)
    assert tension_zero_budget(1.0, 3.0) / tension_free(1.0, 3.0) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0])
def test_matches_continuum_oracle(solutions, gamma):
    sol = solutions[gamma]
    assert sol.converged
    assert sol.value == pytest.approx(phi_profile(gamma), rel=1e-4)


def test_slack_budget_gives_free_tension(budget):
    gamma_max, K = budget
    assert K.value == pytest.approx(tension_free(), rel=1e-6)
    assert K.diagnostics["lambda_pinned"]
    sol = solve_profile_1d(SPEC, gamma_max, 256)
    assert sol.lam == 0.0
    assert sol.value == pytest.approx(K.value, rel=1e-6)


def test_zero_budget_ratio(solutions, budget):
    assert solutions[0.0].value / budget[1].value == pytest.approx(math.sqrt(2), rel=1e-4)


@pytest.mark.parametrize("gamma", [0.5, 1.0])
def test_sandwich(solutions, budget, gamma):
    K = budget[1].value
    assert K - 1e-9 <= solutions[gamma].value <= math.sqrt(2) * K + 1e-9


@pytest.mark.parametrize("gamma", [0.5, 1.0])
def test_admissible_and_lambda_consistent(solutions, gamma):
    sol = solutions[gamma]
    assert sol.lam <= 0
    assert sol.diagnostics["constraint_mass"] <= gamma + 1e-9
    g = hessian_norm(sol.profile).values
    lam = solve_lambda(g, sol.profile.grid.cell_volume, gamma).lam
    assert abs(lam - sol.lam) <= 1e-9


@pytest.mark.parametrize("gamma", [0.0, 1.0])
def test_energy_module_reproduces_value(solutions, gamma):
    sol = solutions[gamma]
    assert cell_energy_breakdown(sol, SPEC).total == pytest.approx(sol.value, rel=1e-10)


def test_refinement_does_not_increase_value(solutions):
    coarse = solutions[1.0]
    mid = solve_profile_1d(SPEC, 1.0, 512, warm=coarse)
    fine = solve_profile_1d(SPEC, 1.0, 1024, warm=mid)
    assert mid.value <= coarse.value + 1e-6
    assert fine.value <= mid.value + 1e-6
    assert fine.value == pytest.approx(phi_profile(1.0), rel=2e-5)


def test_summary_fields(solutions):
    s = solutions[0.5].summary()
    assert set(s) >= {"gamma", "phi", "lambda", "L", "iterations", "grad_norm", "converged"}


@pytest.mark.parametrize("p,gamma,pin", [(2.0, 0.3, False), (2.0, 0.0, True), (3.0, 0.3, False)])
def test_reduced_gradient_matches_finite_differences(p, gamma, pin):
    spec = PotentialSpec.prototype(a=(1.0, 0.5), p=p)
    grid = Grid.profile(64, 2)
    fun = CellFunctional(grid, spec, gamma, pin)
    rng = np.random.default_rng(0)
    x = fun.from_full(initial_profile(grid, spec.a_vec, 0.5)) + 1e-3 * rng.standard_normal(2 * (64 - 4))
    L = 6.0
    G = fun.gradient(fun.state(x, L))
    for k in rng.choice(x.size, 12, replace=False):
        e = np.zeros_like(x)
        e[k] = 1e-6
        fd = (fun.state(x + e, L).J - fun.state(x - e, L).J) / 2e-6
        assert fd == pytest.approx(G[k], rel=1e-5, abs=1e-7 * np.abs(G).max())


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        solve_profile_1d(SPEC, 0.5, 32)
    with pytest.raises(ValueError):
        solve_profile_1d(SPEC, -0.1, 128)
    with pytest.raises(ValueError):
        solve_profile_nd(PotentialSpec.prototype(N=3), 0.5, Grid(N=3, d=2, n_prime=4, n_last=16))


def test_initial_profile_shape():
    grid = Grid.profile(128, 2)
    a = np.array([1.0, 0.5])
    u = initial_profile(grid, a).reshape(128, 2)
    t = grid.axis_coords(0)
    np.testing.assert_allclose(np.diff(u[:10], axis=0) / np.diff(t[:10])[:, None], -np.broadcast_to(a, (9, 2)))
    np.testing.assert_allclose(np.diff(u[-10:], axis=0) / np.diff(t[-10:])[:, None], np.broadcast_to(a, (9, 2)))


def test_rescale_profile_identity_and_round_trip():
    grid = Grid.profile(256, 1)
    a = np.array([1.0])
    u = initial_profile(grid, a, 0.3)
    assert rescale_profile(grid, u, a, 5.0, 5.0) is u
    back = rescale_profile(grid, rescale_profile(grid, u, a, 5.0, 4.0), a, 4.0, 5.0)
    np.testing.assert_allclose(back, u, atol=1e-4)


def test_golden_section_finds_interior_minimum():
    L, v, evals = golden_section(lambda L: L + 4.0 / L, 0.1, 100.0, iterations=60, xtol=1e-8)
    assert L == pytest.approx(2.0, rel=1e-6)
    assert v == pytest.approx(4.0, rel=1e-10)


def test_optimize_scale_degenerate_bracket():
    rep = {}
    assert optimize_scale(lambda L: L, (3.0, 3.0), report=rep) == 3.0
    assert rep["evaluations"] == []


def test_optimize_scale_rejects_bad_bracket():
    with pytest.raises(ValueError):
        optimize_scale(lambda L: L, (2.0, 1.0))


def test_optimize_scale_stable_under_wider_bracket():
    f = lambda L: 3 * L + 12.0 / L  # noqa: E731
    narrow = optimize_scale(f, (0.5, 50.0), xtol=1e-6)
    wide = optimize_scale(f, (0.25, 100.0), xtol=1e-6)
    assert wide == pytest.approx(narrow, rel=0.01)
    assert narrow == pytest.approx(2.0, rel=0.01)


def test_optimize_scale_widens_then_flags():
    rep = {}
    L = optimize_scale(lambda L: 1.0 / L, (1.0, 2.0), report=rep, L_cap=8.0)
    assert rep["widened"] and rep["flagged"]
    assert L == pytest.approx(8.0, rel=0.05)


def test_optimize_scale_widening_recovers_outside_minimum():
    rep = {}
    L = optimize_scale(lambda L: L + 9.0 / L, (0.5, 2.0), xtol=1e-6, report=rep)
    assert rep["widened"] and not rep["flagged"]
    assert L == pytest.approx(3.0, rel=0.01)


def test_plateau_is_not_exhaustion():
    rep = {}
    optimize_scale(lambda L: 2.0 + math.exp(-L), (1.0, 200.0), report=rep)
    assert not rep["flagged"]


def test_sweep_rejects_repeated_gamma():
    with pytest.raises(ValueError):
        sweep_phi(SPEC, [0.1, 0.1], 128)
    with pytest.raises(ValueError):
        sweep_phi(SPEC, [], 128)


def test_small_sweep_is_nonincreasing():
    curve = sweep_phi(SPEC, [0.0, 0.5, 1.5, 2.5], 128)
    assert check_monotone(curve, slack=1e-6).passed
    assert curve.metadata["resolution"] == [128]
    assert curve.metadata["failures"] == []
    assert curve.phis[-1] == pytest.approx(2.0, rel=1e-6)


def test_multilevel_sweep_reports_finest_level():
    curve = sweep_phi(SPEC, [0.5], [128, 256])
    per_level = curve.metadata["per_level_values"][0]
    assert len(per_level) == 2
    assert curve.phis[0] == per_level[-1]


def pts(phis):
    return [PhiPoint(float(k), p, 0.0, 1.0, 1, 0.0) for k, p in enumerate(phis)]


def test_check_monotone_detects_violation():
    rng = np.random.default_rng(0)
    phis = np.linspace(3, 2, 8)
    rng.shuffle(phis)
    rep = check_monotone(PhiCurve(pts(list(phis))))
    assert not rep.passed and rep.worst_violation > 0 and rep.worst_index is not None


def test_check_monotone_single_point_and_slack():
    assert check_monotone(PhiCurve(pts([2.5]))).passed
    rep = check_monotone(PhiCurve(pts([2.0, 2.0 + 1e-4])), slack=1e-3)
    assert rep.passed and rep.worst_violation == pytest.approx(1e-4)


def test_phi_curve_validation():
    with pytest.raises(ValueError):
        PhiCurve([PhiPoint(1.0, 2.0, 0, 1, 1, 0), PhiPoint(0.5, 2.0, 0, 1, 1, 0)])
    with pytest.raises(ValueError):
        PhiCurve(pts([float("nan")]))
    with pytest.raises(ValueError):
        PhiCurve(pts([-1.0]))


def test_phi_curve_interp_is_clamped_and_monotone():
    curve = PhiCurve(pts([3.0, 2.5, 2.6, 2.0]))
    assert curve(-1.0) == 3.0 and curve(10.0) == 2.0
    assert curve(2.0) == 2.5
    vals = curve(np.linspace(0, 3, 31))
    assert np.all(np.diff(vals) <= 0)
    assert curve.covers(1.5) and not curve.covers(3.5)


def test_phi_curve_round_trips(tmp_path):
    curve = PhiCurve(pts([2.8, 2.3, 2.0]), {"note": "x"})
    curve.to_csv(tmp_path / "c.csv")
    back = PhiCurve.from_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.phis, curve.phis)
    np.testing.assert_array_equal(back.gammas, curve.gammas)
    again = PhiCurve.from_dict(__import__("json").loads(curve.to_json()))
    assert again.points == curve.points and again.metadata == curve.metadata


def test_two_dimensional_solve_is_shift_invariant():
    grid = Grid(N=2, d=2, n_prime=8, n_last=64)
    p1 = solve_profile_1d(SPEC, 1.0, 64)
    opts = SolverOptions(perturb=1e-3, scale_iterations=6, L_bracket=(p1.scale_L / 1.5, p1.scale_L * 1.5))
    a = solve_profile_nd(SPEC, 1.0, grid, opts, profile_1d=p1)
    b = solve_profile_nd(SPEC, 1.0, grid, opts, shift=3, profile_1d=p1)
    assert a.converged and b.converged
    assert abs(a.value - b.value) < 1e-6
    assert a.value == pytest.approx(p1.value, rel=1e-8)
    assert a.diagnostics["x_prime_variance"] < 1e-10
