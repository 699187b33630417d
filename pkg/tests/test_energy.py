import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfphase.energy import check_density_identity, energy_E, energy_F, grad_F, optimal_density
from surfphase.fields import DensityField, Grid, GridField, apply_boundary_bands, hessian_norm
from surfphase.potential import PotentialSpec, eval_W
from surfphase.waterfill import solve_lambda

SPEC = PotentialSpec.prototype(a=(1.0, 0.0), p=2, N=2)
A_VEC = np.array(SPEC.a)


def grid(n_prime=8, n_last=32):
    return Grid(N=2, d=2, n_prime=n_prime, n_last=n_last)


def well_state(g):
    # gradient A at every node, including the one-sided rows
    return GridField.from_function(g, lambda X: X[1][..., None] * A_VEC)


def tanh_profile(g):
    return GridField.from_function(
        g, lambda X: (0.05 * np.log(np.cosh(X[1] / 0.05)) + 0.02 * np.sin(2 * np.pi * X[0]))[..., None] * A_VEC
    )


def random_field(g, seed, scale=0.05):
    rng = np.random.default_rng(seed)
    base = tanh_profile(g).values
    return apply_boundary_bands(GridField(g, base + scale * rng.standard_normal(base.shape)), A_VEC)


def test_well_state_has_zero_energy():
    g = grid()
    e = energy_E(well_state(g), DensityField.constant(g, 0.0), 0.1, SPEC)
    assert e.total == pytest.approx(0.0, abs=1e-20)


def test_unit_density_on_well_state():
    g = grid()
    e = energy_E(well_state(g), DensityField.constant(g, 1.0), 0.1, SPEC)
    assert e.surfactant_term == pytest.approx(0.1, rel=1e-12)
    assert e.total == pytest.approx(0.1, rel=1e-10)


def test_matching_density_removes_surfactant_term():
    g = grid()
    u = tanh_profile(g)
    e = energy_E(u, hessian_norm(u), 0.1, SPEC)
    assert e.surfactant_term == 0.0


def test_zero_lambda_drops_third_term():
    u = tanh_profile(grid())
    assert energy_F(u, 0.0, 0.2, SPEC).surfactant_term == 0.0


def test_very_negative_lambda_doubles_second_gradient():
    u = tanh_profile(grid())
    lam = -2 * hessian_norm(u).values.max()
    e = energy_F(u, lam, 0.2, SPEC)
    assert e.surfactant_term == pytest.approx(e.second_gradient_term, rel=1e-14)


def test_energy_F_matches_naive_sum():
    g = grid()
    u = tanh_profile(g)
    eps, lam = 0.3, -1.0
    h1, h2 = g.h
    vals = u.values
    total = 0.0
    # naive loops with the same stencils (periodic in x_1, one-sided at the x_2 ends)
    for i in range(g.n_prime):
        for j in range(g.n_last):
            ip, im = (i + 1) % g.n_prime, (i - 1) % g.n_prime
            d1 = (vals[ip, j] - vals[im, j]) / (2 * h1)
            if j == 0:
                d2 = (-3 * vals[i, 0] + 4 * vals[i, 1] - vals[i, 2]) / (2 * h2)
                d22 = (2 * vals[i, 0] - 5 * vals[i, 1] + 4 * vals[i, 2] - vals[i, 3]) / h2**2
            elif j == g.n_last - 1:
                d2 = (vals[i, j - 2] - 4 * vals[i, j - 1] + 3 * vals[i, j]) / (2 * h2)
                d22 = (-vals[i, j - 3] + 4 * vals[i, j - 2] - 5 * vals[i, j - 1] + 2 * vals[i, j]) / h2**2
            else:
                d2 = (vals[i, j + 1] - vals[i, j - 1]) / (2 * h2)
                d22 = (vals[i, j + 1] - 2 * vals[i, j] + vals[i, j - 1]) / h2**2
            d11 = (vals[ip, j] - 2 * vals[i, j] + vals[im, j]) / h1**2

            def ddx2(col):
                if col == 0:
                    return (-3 * vals[:, 0] + 4 * vals[:, 1] - vals[:, 2]) / (2 * h2)
                if col == g.n_last - 1:
                    return (vals[:, col - 2] - 4 * vals[:, col - 1] + 3 * vals[:, col]) / (2 * h2)
                return (vals[:, col + 1] - vals[:, col - 1]) / (2 * h2)

            dx2 = ddx2(j)
            d12 = (dx2[ip] - dx2[im]) / (2 * h1)
            xi = np.stack([d1, d2], axis=-1)
            W = min(np.sum((xi - SPEC.well_A) ** 2), np.sum((xi - SPEC.well_B) ** 2))
            w2 = np.sum(d11**2) + np.sum(d22**2) + 2 * np.sum(d12**2)
            total += h1 * h2 * (W / eps + eps * w2 + eps * min(lam**2, w2))
    assert energy_F(u, lam, eps, SPEC).total == pytest.approx(total, rel=1e-10)


def test_energy_F_rejects_positive_lambda():
    with pytest.raises(ValueError):
        energy_F(tanh_profile(grid()), 0.1, 0.1, SPEC)


def test_energy_E_rejects_grid_mismatch():
    u = tanh_profile(grid())
    with pytest.raises(ValueError):
        energy_E(u, DensityField.constant(grid(n_prime=4), 1.0), 0.1, SPEC)


def test_grad_F_zero_at_well_state():
    g = grid()
    np.testing.assert_allclose(grad_F(well_state(g), 0.0, 0.1, SPEC), 0.0, atol=1e-10)


def test_grad_F_zero_on_bands():
    g = grid()
    G = grad_F(random_field(g, 0), -0.5, 0.1, SPEC)
    assert np.all(G[g.band_mask()] == 0.0)


def test_grad_F_matches_finite_differences():
    g = grid(n_prime=6, n_last=16)
    u = random_field(g, 1, scale=0.2)
    lam, eps = -0.5, 0.1
    G = grad_F(u, lam, eps, SPEC)
    rng = np.random.default_rng(2)
    free = np.argwhere(~g.band_mask())
    rel = []
    for idx in free[rng.choice(len(free), 40, replace=False)]:
        for k in range(g.d):
            h = 1e-6
            up, dn = u.copy(), u.copy()
            up.values[tuple(idx) + (k,)] += h
            dn.values[tuple(idx) + (k,)] -= h
            fd = (energy_F(up, lam, eps, SPEC).total - energy_F(dn, lam, eps, SPEC).total) / (2 * h)
            rel.append(abs(fd - G[tuple(idx) + (k,)]) / max(abs(fd), 1e-8))
    assert np.mean(np.array(rel) < 1e-5) >= 0.99


@pytest.mark.parametrize("lam,w,expected", [(0.0, 3.0, 9.0), (-1.0, 2.0, 5.0), (-5.0, 2.0, 8.0)])
def test_density_identity_values(lam, w, expected):
    lhs, rhs = check_density_identity(lam, w)
    assert lhs == pytest.approx(expected) and rhs == pytest.approx(expected)


def test_density_identity_domain():
    with pytest.raises(ValueError):
        check_density_identity(0.5, 1.0)
    with pytest.raises(ValueError):
        check_density_identity(-0.5, -1.0)


@settings(max_examples=300)
@given(st.floats(-100, 0), st.floats(0, 100))
def test_density_identity_property(lam, w):
    lhs, rhs = check_density_identity(lam, w)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, lhs)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("lam", [0.0, -0.3, -3.0, -50.0])
def test_bridge_between_energies(seed, lam):
    g = grid()
    u = random_field(g, seed)
    eps = 0.05
    E = energy_E(u, optimal_density(u, lam), eps, SPEC).total
    F = energy_F(u, lam, eps, SPEC).total
    assert abs(E - F) <= 1e-13 * abs(F)


@pytest.mark.parametrize("seed", range(3))
def test_E_dominates_F_at_fixed_mass(seed):
    g = grid()
    u = random_field(g, seed)
    rng = np.random.default_rng(seed + 10)
    rho = DensityField(g, rng.uniform(0, 2, g.shape))
    gamma = float(np.sum(rho.values) * g.cell_volume)
    gvals = hessian_norm(u).values
    lam = solve_lambda(gvals, g.cell_volume, gamma).lam
    assert energy_E(u, rho, 0.1, SPEC).total >= energy_F(u, lam, 0.1, SPEC).total - 1e-12


def test_energies_shift_invariant():
    g = grid()
    u = random_field(g, 7)
    rho = DensityField(g, np.random.default_rng(7).uniform(0, 1, g.shape))
    us = GridField(g, np.roll(u.values, 3, axis=0))
    rs = DensityField(g, np.roll(rho.values, 3, axis=0))
    assert energy_E(us, rs, 0.1, SPEC).total == pytest.approx(energy_E(u, rho, 0.1, SPEC).total, rel=1e-12)
    assert energy_F(us, -0.4, 0.1, SPEC).total == pytest.approx(energy_F(u, -0.4, 0.1, SPEC).total, rel=1e-12)


def test_potential_term_uses_embedding_on_profile_grid():
    g = Grid.profile(32, 2)
    u = GridField(g, (0.5 * g.axis_coords(0))[:, None] * A_VEC)
    e = energy_F(u, 0.0, 1.0, SPEC)
    xi = np.zeros((2, 2))
    xi[:, 1] = 0.5 * A_VEC
    assert e.potential_term == pytest.approx(eval_W(SPEC, xi), rel=1e-12)
