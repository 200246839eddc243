import math

import numpy as np
import pytest

from radkernel.errors import ConditioningError, DomainError, NonContractingError
from radkernel.grid import RadialGrid, default_grid, radial_laplacian
from radkernel.harmonic import (HarmonicProfile, PartialProfile, extend_outward, f_of_u, fit_tail,
                                kelvin, ode_residual, picard_near_zero, positivity_scan,
                                power_profile, solve_harmonic)
from radkernel.potential import blended, exponents, pure, step_well, zero

MU_STAR = math.pi**2 / 4


def step_well_zero(mu):
    """First zero of ``U`` for the sharp unit-ball well in N=3, or None."""
    k = math.sqrt(mu)
    if math.cos(k) >= 0:
        return None
    return 1.0 - math.tan(k) / k


@pytest.mark.parametrize("lam,n_dim", [(-0.2, 3), (1.0, 3), (-1.0, 4), (0.0, 2)])
def test_picard_exact_for_pure(lam, n_dim):
    part = picard_near_zero(pure(lam, n_dim), 1e-2)
    a = exponents(n_dim, lam).a_plus
    assert part.iterations == 1
    assert np.allclose(part.values, part.r**a, rtol=1e-15)


def test_picard_zero_potential_is_constant():
    part = picard_near_zero(zero(3), 1e-2)
    assert np.all(part.values == 1.0)


def test_picard_correction_exponent_for_blend():
    prof = solve_harmonic(blended(-0.1, 0.5, theta=1.0))
    assert prof.correction_exponent is not None
    # near-zero correction exponent is only required to lie in (0, theta]; the blend reaches 2 theta
    assert prof.correction_exponent > 0.9


def test_picard_rejects_large_cutoff():
    with pytest.raises(NonContractingError):
        picard_near_zero(step_well(40.0, radius=1e3), 1e2, grid=RadialGrid(1e-6, 1e4, 64))


@pytest.mark.parametrize("lam", [-0.25, -0.2, 0.0, 0.5, 2.0])
def test_pure_profile_is_power(profiles, lam):
    prof = solve_harmonic(pure(lam, 3))
    a = exponents(3, lam).a_plus
    assert np.max(np.abs(prof.values / prof.r**a - 1)) < 1e-9


def test_zero_profile_constant_in_two_dimensions(profiles):
    assert np.max(np.abs(profiles("zero2").values - 1.0)) < 1e-10


def test_log_branch_from_minus_seed():
    # seed the Hardy-critical ODE with r^-1/2 |log r| instead of the regular branch
    spec = pure(-0.25, 3)
    grid = RadialGrid(1e-6, 1e2, 64)
    base = grid.upto(1e-2)
    r = base.nodes
    vals = -(r**-0.5) * np.log(r)
    ders = -(r**-1.5) * (1 - 0.5 * np.log(r))
    prof = extend_outward(PartialProfile(r, vals, ders, -0.5), spec, grid=grid)
    want = -(prof.r**-0.5) * np.log(prof.r)
    far = prof.r > 2.0
    assert np.max(np.abs(prof.values[far] / want[far] - 1)) < 1e-8
    tail = fit_tail(prof, spec)
    assert tail.log_branch and tail.c1 == pytest.approx(-1.0, rel=1e-8)


def test_kelvin_power_and_involution():
    grid = RadialGrid(1e-3, 1e3, 32)
    w = power_profile(grid, 0.3, 3)
    k = kelvin(w)
    s = k.r
    assert np.allclose(k.values, s ** (-1.3), rtol=1e-13)
    back = kelvin(k)
    assert np.allclose(back.values[1:-1], w.values[1:-1], rtol=1e-10)
    assert np.allclose(back.r, w.r, rtol=1e-13)


def test_kelvin_swaps_exponents(profiles):
    k = kelvin(profiles("pure2"))
    assert k.near_zero_exponent == pytest.approx(exponents(3, 2.0).a_minus, abs=1e-8)


def test_fit_tail_pure(profiles):
    tail = profiles("pure-0.2").tail
    assert tail.c1 == pytest.approx(1.0, abs=1e-9)
    assert abs(tail.c2) < 1e-9
    assert tail.residual < 1e-9


def test_fit_tail_two_dimensions_log_basis(profiles):
    tail = profiles("zero2").tail
    assert tail.log_branch
    assert abs(tail.c1) < 1e-9 and tail.c2 == pytest.approx(1.0, abs=1e-9)


def test_fit_tail_at_threshold_decays():
    grid = RadialGrid(1e-6, 1e3, 64)
    prof = solve_harmonic(step_well(MU_STAR, width=1e-3), grid)
    tail = fit_tail(prof, window=(10.0, 1e3))
    assert abs(tail.c1) < 1e-2 * abs(tail.c2)


def test_fit_tail_conditioning_error():
    # A+ and A- differ by 0.02 here, so a short window cannot separate them
    prof = solve_harmonic(pure(-0.2499, 3), RadialGrid(1e-6, 1e2, 64))
    with pytest.raises(ConditioningError, match="widen"):
        fit_tail(prof, window=(80.0, 100.0), cond_max=1e3)


@pytest.mark.parametrize("a", [-0.4, 0.0, 0.7, 2.0])
def test_f_of_u_power_closed_form(a):
    prof = power_profile(default_grid(), a, 3)
    F = f_of_u(prof)
    want = prof.r ** (a + 2) / (2 * (2 * a + 3))
    assert np.max(np.abs(F.values / want - 1)) < 1e-6


def test_f_of_u_solves_poisson(profiles):
    prof = profiles("blend")
    spec = blended(-0.1, 0.5, dimension=3)
    F = f_of_u(prof)
    r = prof.r
    sel = slice(64, -64)
    lap = radial_laplacian(F.values, r, 3)[sel]
    V = spec.r2v(r[1:-1]) / r[1:-1] ** 2
    res = lap - V[sel] * F.values[1:-1][sel] - prof.values[1:-1][sel]
    assert np.max(np.abs(res) / prof.values[1:-1][sel]) < 5e-3


def test_f_of_u_needs_positive_profile():
    grid = RadialGrid(0.1, 10, 16)
    bad = HarmonicProfile.from_function(grid, lambda r: 1 - r, lambda r: -np.ones_like(r), 3)
    with pytest.raises(DomainError):
        f_of_u(bad)


@pytest.mark.parametrize("factor", [0.9, 1.1])
def test_positivity_scan_step_wells(factor):
    mu = factor * MU_STAR
    prof = solve_harmonic(step_well(mu, width=1e-4))
    z = positivity_scan(prof)
    want = step_well_zero(mu)
    if want is None:
        assert z is None
    else:
        assert z.radius == pytest.approx(want, rel=1e-3)


def test_positivity_scan_pure(profiles):
    assert positivity_scan(profiles("pure1")) is None


def test_uniqueness_across_cutoffs_and_grids():
    spec = blended(-0.1, 0.5, theta=1.0)
    a = solve_harmonic(spec, RadialGrid(1e-6, 1e4, 64), r_cut=1e-2)
    b = solve_harmonic(spec, RadialGrid(1e-7, 1e4, 96), r_cut=1e-3)
    r = np.geomspace(1e-5, 1e3, 50)
    assert np.max(np.abs(a(r) / b(r) - 1)) < 1e-6


def test_ode_residual_second_order():
    spec = blended(-0.1, 0.5, theta=1.0)
    errs = []
    for ppd in (64, 128):
        prof = solve_harmonic(spec, RadialGrid(1e-4, 1e4, ppd))
        res = ode_residual(prof, spec)
        errs.append(np.max(np.abs(res)))
    assert math.log2(errs[0] / errs[1]) >= 1.9


def test_near_zero_exponent_blend(profiles):
    prof = profiles("blend")
    assert prof.near_zero_exponent == pytest.approx(exponents(3, -0.1).a_plus, abs=1e-4)


def test_profile_closure_below_grid(profiles):
    prof = profiles("pure-0.2")
    a = exponents(3, -0.2).a_plus
    assert prof(1e-8) == pytest.approx(1e-8**a, rel=1e-12)
    with pytest.raises(DomainError):
        prof(1e7)


def test_profile_csv(tmp_path, profiles):
    path = tmp_path / "u.csv"
    profiles("pure2").write_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape[1] == 3 and np.allclose(data[:, 1], data[:, 0], rtol=1e-9)
