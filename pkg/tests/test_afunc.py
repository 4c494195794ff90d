"""Limit functionals A_+, A, and the martingale density D_s."""

import math

import numpy as np
import pytest

from edwards1d.afunc import (ModelParams, a_plus, a_plus_sweep, a_total,
                             default_l_grid, density_Ds, profile_ratio_batch)
from edwards1d.kernels import kbar_airy_bound
from edwards1d.localtime import CompactProfile
from edwards1d.samplers import RngStream, sample_brownian


# ---------------------------------------------------------------------------
# parameters

def test_params_derive_alpha_and_scaled_rate():
    p = ModelParams(beta=8.0, rho=2.19, M=2.0)
    assert p.alpha == pytest.approx(2.0, rel=1e-12)
    assert p.rho_scaled == pytest.approx(2.19 * 4.0, rel=1e-12)


def test_params_validate():
    with pytest.raises(ValueError):
        ModelParams(beta=0.0, rho=2.19, M=1.0)
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, rho=2.19, M=-1.0)
    with pytest.raises(ValueError):
        ModelParams(beta=1.0, rho=2.19, M=1.0, s=-0.5)
    with pytest.raises(ValueError):
        ModelParams(beta=8.0, rho=2.19, M=1.0, alpha=1.5)


def test_params_from_basis(basis):
    p = ModelParams.from_basis(basis, beta=2.0, M=4.0)
    assert p.rho == basis.rho and p.M == 4.0


def test_mismatched_rho_is_rejected(basis):
    bad = ModelParams(beta=1.0, rho=basis.rho + 1e-3, M=1.0)
    with pytest.raises(ValueError):
        a_plus(bad, None, basis, 100, RngStream(50, 0))


def test_level_grid_shape_and_cutoff(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=2.0)
    grid = default_l_grid(p)
    assert grid[0] == 0.0
    assert np.all(np.diff(grid) > 0.0)
    assert kbar_airy_bound(p.alpha * grid[-1], basis.rho) < 2e-8
    # the cutoff level scales like beta^{-1/3}
    g8 = default_l_grid(ModelParams.from_basis(basis, beta=8.0, M=2.0))
    assert g8[-1] == pytest.approx(grid[-1] / 2.0, rel=1e-9)


# ---------------------------------------------------------------------------
# A functionals

def test_a_plus_rejects_wide_profile(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=1.0)
    wide = CompactProfile.bump(0.5, 3.0)
    with pytest.raises(ValueError):
        a_plus(p, wide, basis, 100, RngStream(51, 0))
    with pytest.raises(ValueError):
        a_plus_sweep(p, None, basis, 100, RngStream(51, 0), (0.5,))


def test_window_independence_under_shared_paths(basis):
    # A_+ must not depend on the right boundary once it covers the profile.
    # The extra window segment carries its own noise, so the coupled
    # difference is not collapsed below that, but it cannot exceed the
    # independent-run error
    p = ModelParams.from_basis(basis, beta=1.0, M=2.0)
    ests, diffs = a_plus_sweep(p, CompactProfile.bump(0.5, 1.0), basis,
                               3000, RngStream(52, 1), (2.0, 3.0), dy=1 / 64)
    assert len(ests) == 2 and len(diffs) == 1
    assert abs(diffs[0].mean) <= 3.0 * max(diffs[0].stderr, 1e-12)
    assert diffs[0].stderr <= math.hypot(ests[0].stderr, ests[1].stderr)


def test_a_positive_with_margin(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=1.0)
    est = a_total(p, None, basis, 2000, RngStream(53, 2), dy=1 / 64)
    assert est.mean > 3.0 * est.stderr


def test_scaling_collapse_to_unit_coupling(basis):
    # A_+^{beta,M}(f) = alpha^{-1} A_+^{1, alpha M}(alpha f(./alpha)) with
    # alpha = beta^(1/3); the level grids scale exactly, so shared node
    # substreams give a tightly coupled comparison
    beta, alpha = 8.0, 2.0
    f = CompactProfile.bump(0.5, 1.0, dy=1 / 64)
    p_b = ModelParams.from_basis(basis, beta=beta, M=1.5)
    p_1 = ModelParams.from_basis(basis, beta=1.0, M=3.0)
    lhs = a_plus(p_b, f, basis, 4000, RngStream(54, 3), dy=1 / 64)
    rhs = a_plus(p_1, f.scaled(alpha), basis, 4000, RngStream(54, 3),
                 dy=1 / 64)
    gap = abs(lhs.mean - rhs.mean / alpha)
    assert gap <= 4.0 * math.hypot(lhs.stderr, rhs.stderr / alpha)


def test_a_plus_deterministic_given_seed(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=1.0)
    a = a_plus(p, None, basis, 500, RngStream(55, 4), dy=1 / 64)
    b = a_plus(p, None, basis, 500, RngStream(55, 4), dy=1 / 64)
    assert a.mean == b.mean and a.stderr == b.stderr


# ---------------------------------------------------------------------------
# martingale density

def test_density_is_exactly_one_at_time_zero(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=1.0)
    path = sample_brownian(1.0, 1.0 / 64, RngStream(56, 5))
    est = density_Ds(path, 0.0, p, basis, 400, RngStream(56, 6), dy=1 / 64)
    assert est.mean == pytest.approx(1.0, abs=1e-12)
    assert est.stderr <= 1e-12


def test_density_positive_and_reproducible(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=1.0)
    path = sample_brownian(1.0, 1.0 / 64, RngStream(57, 0))
    a = density_Ds(path, 0.5, p, basis, 1500, RngStream(57, 1), dy=1 / 64)
    b = density_Ds(path, 0.5, p, basis, 1500, RngStream(57, 1), dy=1 / 64)
    assert a.mean == b.mean and a.stderr == b.stderr
    assert a.mean > 0.0 and a.stderr > 0.0


# ---------------------------------------------------------------------------
# batched profile ratios

def test_event_ratios_add_up_exactly(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=1.0)
    rng_paths = RngStream(58, 2)
    profiles = []
    from edwards1d.localtime import recentered_profile
    for i in range(6):
        path = sample_brownian(0.5, 1.0 / 64, rng_paths.substream(i))
        profiles.append(recentered_profile(path, 0.5, 1.0 / 64))
    split = np.zeros((2, 6))
    split[0, :3] = 1.0
    split[1, 3:] = 1.0
    whole = np.ones((1, 6))
    ests = profile_ratio_batch(profiles, np.vstack([whole, split]), 0.5, p,
                               basis, 80, RngStream(58, 3), dy=1 / 64)
    assert abs(ests[0].mean - ests[1].mean - ests[2].mean) \
        <= 1e-12 * max(1.0, ests[0].mean)


def test_batch_validates_multiplier_shape(basis):
    p = ModelParams.from_basis(basis, beta=1.0, M=1.0)
    prof = CompactProfile.zero(1.0 / 64)
    with pytest.raises(ValueError):
        profile_ratio_batch([prof, prof], np.ones((1, 3)), 0.0, p, basis,
                            10, RngStream(59, 0))
