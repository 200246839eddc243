import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radkernel.errors import AsymptoticsError, DomainError
from radkernel.grid import RadialGrid, default_grid, radial_laplacian
from radkernel.potential import (Bump, PotentialSpec, blended, eval_potential, exponents, hardy_floor,
                                 mode_potential, pure, residual, step_well, validate_asymptotics, zero)


def test_exponents_free_three_dimensions():
    ex = exponents(3, 0.0)
    assert ex.a_plus == 0.0 and ex.a_minus == -1.0


@pytest.mark.parametrize("n_dim", range(2, 11))
def test_exponents_double_root_at_hardy_constant(n_dim):
    ex = exponents(n_dim, -((n_dim - 2) ** 2) / 4)
    assert ex.a_plus == ex.a_minus == -(n_dim - 2) / 2
    assert ex.discriminant == 0.0


def test_exponents_integer_roots():
    ex = exponents(3, 2.0)
    assert ex.a_plus == pytest.approx(1.0, abs=1e-15)
    assert ex.a_minus == pytest.approx(-2.0, abs=1e-15)
    assert ex.sigma == -ex.a_plus


def test_exponents_below_hardy_constant():
    with pytest.raises(DomainError, match="supercritical inverse-square"):
        exponents(3, -0.3)


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 10), st.floats(0.0, 50.0))
def test_vieta(n_dim, excess):
    lam = -((n_dim - 2) ** 2) / 4 + excess
    ex = exponents(n_dim, lam)
    scale = 1.0 + abs(lam) + n_dim
    assert abs(ex.a_plus + ex.a_minus + (n_dim - 2)) <= 1e-12 * scale
    assert abs(ex.a_plus * ex.a_minus + lam) <= 1e-12 * scale
    assert ex.a_minus <= -(n_dim - 2) / 2 <= ex.a_plus


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 10), st.floats(0.0, 20.0), st.floats(1e-6, 5.0))
def test_a_plus_increasing(n_dim, excess, step):
    lam = -((n_dim - 2) ** 2) / 4 + excess
    assert exponents(n_dim, lam + step).a_plus > exponents(n_dim, lam).a_plus


def test_eval_and_residual():
    assert eval_potential(pure(-0.2, 3), 2.0) == pytest.approx(-0.05, rel=1e-15)
    assert eval_potential(zero(3), 3.7) == 0.0
    assert residual(zero(3), 1.0, 1.0) == -1.0
    r = np.geomspace(1e-3, 1e3, 13)
    assert np.all(residual(pure(0.7, 4), r, 0.7) == 0.0)
    with pytest.raises(DomainError):
        eval_potential(zero(3), 0.0)
    with pytest.raises(DomainError):
        residual(zero(3), -1.0, 0.0)


def test_blended_limits():
    spec = blended(1.0, 0.0, theta=1.0)
    assert spec.r2v(1e-9) == pytest.approx(1.0, abs=1e-12)
    r = np.geomspace(1e-8, 1e-4, 9)
    # the residual vanishes faster than r^theta
    assert np.all(r ** (2 - spec.theta) * np.abs(residual(spec, r, 1.0)) < r ** 0.5)
    big = np.geomspace(1e4, 1e8, 9)
    assert np.all(np.abs(big**2 * residual(spec, big, 0.0)) < big ** -1.0)


def test_validate_asymptotics():
    assert validate_asymptotics(pure(0.3, 3)).passed
    assert validate_asymptotics(blended(-0.1, 0.5, theta=1.0)).passed
    bad = PotentialSpec(3, "zero", 1.0, 0.0)
    rep = validate_asymptotics(bad)
    assert not rep.passed
    with pytest.raises(AsymptoticsError):
        rep.raise_for_status()


def test_hardy_floor():
    grid = default_grid()
    assert hardy_floor(pure(0.5, 3), grid)
    assert not hardy_floor(pure(-0.25, 3), grid)
    assert not hardy_floor(step_well(math.pi**2 / 4), grid)


def test_spec_rejects_supercritical_coefficient():
    with pytest.raises(DomainError):
        pure(-0.3, 3)
    with pytest.raises(DomainError):
        PotentialSpec(3, "pure", 0.1, 0.2)


def test_mode_potential():
    assert mode_potential(zero(3), 0) == zero(3)
    m = mode_potential(zero(3), 1)
    assert eval_potential(m, 1.5) == pytest.approx(2.0 / 1.5**2)
    k = 3
    shifted = mode_potential(pure(-0.2, 3), k)
    assert shifted.lambda1 == pytest.approx(-0.2 + k * (k + 1))
    assert exponents(3, shifted.lambda1).a_plus == pytest.approx(exponents(3, -0.2 + 12).a_plus)


def test_bump_mollified_step():
    b = Bump(coeff=2.0, outer=1.0, inner=0.0, width=1e-3)
    assert b(0.5) == 2.0 and b(1.01) == 0.0
    assert 0.0 < b(1.0) < 2.0
    assert b.scaled(-1.5).coeff == -3.0


def test_spec_round_trip():
    spec = blended(-0.1, 0.5, theta=0.7, dimension=4).with_bump(Bump(1.0, 2.0, 0.5, 1e-2))
    assert PotentialSpec.from_dict(spec.to_dict()) == spec


def test_grid_geometry():
    g = RadialGrid(1e-3, 1e3, 16)
    q = g.nodes[1:] / g.nodes[:-1]
    assert np.all(np.abs(q / q[0] - 1) < 1e-12)
    assert g.nodes[0] == 1e-3 and g.nodes[-1] == 1e3
    fine = g.refine(2)
    assert np.array_equal(fine.nodes[::2], g.nodes)
    assert np.array_equal(fine.coarsen(2).nodes, g.nodes)


def test_radial_laplacian_second_order():
    errs = []
    for ppd in (32, 64):
        g = RadialGrid(0.5, 2.0, ppd)
        r = g.nodes
        lap = radial_laplacian(r**3, r, 3)
        errs.append(np.max(np.abs(lap - 12 * r[1:-1])))
    assert math.log2(errs[0] / errs[1]) > 1.9
