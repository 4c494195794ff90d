"""Eigenpairs of the killed radial generator and its semigroup."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from edwards1d.airy import airy_zeros
from edwards1d.samplers import RngStream
from edwards1d.spectral import (SpectralBasis, build_basis, inner_nu,
                                semigroup_apply, semigroup_mc)

RHO0_FROZEN = 2.188757390906945


def _shooting_rho0(x_match: float = 4.0, x_max: float = 20.0) -> float:
    """Principal eigenvalue by two-sided shooting on the continuum ODE.

    2 g'' + 2 g'/x - x g = -rho g with a regular origin (series start) and
    decay at infinity (backward integration from x_max is the stable
    direction for the decaying solution).  The eigenvalue is the root of the
    Wronskian of the two branches at x_match.  Independent of the
    finite-difference eigensolver under test.
    """
    def rhs(x, y, rho):
        g, dg = y
        return [dg, -dg / x + 0.5 * (x - rho) * g]

    def wronskian(rho):
        x0 = 1e-6
        y0 = [1.0 - rho * x0 * x0 / 8.0 + x0 ** 3 / 18.0,
              -rho * x0 / 4.0 + x0 * x0 / 6.0]
        fwd = solve_ivp(rhs, (x0, x_match), y0, args=(rho,),
                        rtol=1e-11, atol=1e-14, dense_output=False)
        bwd = solve_ivp(rhs, (x_max, x_match),
                        [1.0, -math.sqrt(0.5 * (x_max - rho))], args=(rho,),
                        rtol=1e-11, atol=1e-14)
        gf, df = fwd.y[0, -1], fwd.y[1, -1]
        gb, db = bwd.y[0, -1], bwd.y[1, -1]
        nf, nb = math.hypot(gf, df), math.hypot(gb, db)
        return (df * gb - gf * db) / (nf * nb)

    lo, hi = 2.1, 2.3
    w_lo = wronskian(lo)
    assert w_lo * wronskian(hi) < 0.0, "bracket must straddle the eigenvalue"
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if wronskian(mid) * w_lo > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_principal_eigenvalue_value_and_interval(basis):
    assert 2.18 <= basis.rho <= 2.19
    assert abs(basis.rho - RHO0_FROZEN) < 1e-9


def test_principal_eigenvalue_matches_shooting_oracle(basis):
    rho_ode = _shooting_rho0()
    # the h = 1e-3 grid eigenvalue carries O(h^2) discretisation error
    assert abs(basis.rho - rho_ode) < 5e-6


def test_eigenvalue_below_dirichlet_comparison(basis):
    # the zero-flux origin relaxes the Dirichlet problem, whose ground level
    # is 2^(1/3) times the first Airy zero
    u1 = airy_zeros(1).zeros[0]
    assert 2.0 ** (1.0 / 3.0) * u1 > 2.91
    assert basis.rho < 2.0 ** (1.0 / 3.0) * u1


def test_spectrum_simple_and_positive(basis):
    assert basis.n_eig == 16
    assert basis.eigenvalues[0] > 0.0
    assert np.all(np.diff(basis.eigenvalues) > 0.0)


def test_orthonormality(basis):
    gram = (basis.funcs * basis.x) @ basis.funcs.T * basis.h
    assert np.abs(gram - np.eye(basis.n_eig)).max() < 1e-8


def test_discrete_residuals_vanish(basis):
    # eigenvectors of the discrete operator satisfy it to rounding
    res = basis.residual_norms()
    assert res.max() < 1e-8 * float(basis.eigenvalues[-1])


def test_ground_state_positive_and_decaying(basis):
    e0 = basis.funcs[0]
    assert np.all(e0 > 0.0)
    assert e0[-1] < 1e-12 * e0.max()
    # zero-derivative origin: the interpolant extends flat below the grid
    assert basis.e(0, 0.0) == e0[0]
    assert basis.e(0, basis.x_max + 1.0) == 0.0


def test_h_refinement_stability(basis):
    fine = build_basis(h=5e-4)
    assert abs(fine.rho - basis.rho) < 1e-3


def test_grid_too_coarse_or_short_raises():
    with pytest.raises(ValueError):
        build_basis(x_max=10.0)
    with pytest.raises(ValueError):
        build_basis(h=0.05)
    with pytest.raises(ValueError):
        build_basis(n_eig=0)


def test_inner_nu_validates_shapes(basis):
    with pytest.raises(ValueError):
        inner_nu(np.ones(3), np.ones(3), basis)
    v = basis.funcs[1]
    assert abs(inner_nu(v, v, basis) - 1.0) < 1e-10


def test_semigroup_identity_at_zero_time(basis):
    psi = basis.funcs[0] + 0.25 * basis.funcs[3]
    out, bound = semigroup_apply(basis, psi, 0.0)
    assert np.allclose(out, psi, atol=1e-10)
    assert bound < 1e-10


def test_semigroup_composition(basis):
    psi = np.exp(-0.5 * basis.x)
    one, _ = semigroup_apply(basis, psi, 1.2)
    half, _ = semigroup_apply(basis, psi, 0.5)
    two_step, _ = semigroup_apply(basis, half, 0.7)
    assert np.allclose(two_step, one, atol=1e-12)


def test_semigroup_eigenfunction_decay(basis):
    out, _ = semigroup_apply(basis, basis.funcs[0], 2.0)
    assert np.allclose(out, math.exp(-2.0 * basis.rho) * basis.funcs[0],
                       atol=1e-12)


def test_semigroup_spectral_matches_monte_carlo(basis):
    l, s = 1.0, 0.5

    def psi(v):
        return np.exp(-0.5 * np.asarray(v))

    mc = semigroup_mc(l, psi, s, 60_000, RngStream(1201, 4))
    grid, bound = semigroup_apply(basis, psi(basis.x), s)
    spectral = float(np.interp(l, basis.x, grid))
    assert abs(mc.mean - spectral) <= 4.0 * mc.stderr + bound + 1e-4


def test_semigroup_mc_validates_arguments():
    rng = RngStream(9, 9)
    with pytest.raises(ValueError):
        semigroup_mc(-1.0, np.exp, 1.0, 100, rng)
    with pytest.raises(ValueError):
        semigroup_mc(1.0, np.exp, 0.0, 100, rng)
    with pytest.raises(ValueError):
        semigroup_mc(1.0, np.exp, 1.0, 1, rng)


def test_semigroup_apply_validates(basis):
    with pytest.raises(ValueError):
        semigroup_apply(basis, basis.funcs[0], -1.0)
    with pytest.raises(ValueError):
        semigroup_apply(basis, np.ones(5), 1.0)
