import numpy as np
import pytest

from isosv.assembly import assemble_load, assemble_stokes
from isosv.errors import ConfigurationError
from isosv.solver import RESIDUAL_TOL, Factorization, nested_dissection, solve_saddle
from isosv.spaces import VariantTag
import scipy.sparse as sp


def source(x):
    return np.stack([np.sin(3 * x[..., 1]) + x[..., 0], np.cos(2 * x[..., 0]) * x[..., 1]], axis=-1)


@pytest.fixture(scope="module", params=[VariantTag.ISO_PIOLA, VariantTag.ISO_COMPOSITION])
def problem(request):
    from conftest import Disk

    d = Disk(24, request.param)
    s = assemble_stokes(d.mesh, d.maps, d.dofs, 0.3, d.variant)
    rhs = assemble_load(d.mesh, d.maps, d.dofs, source, d.variant)
    return d, s.with_rhs(rhs)


def test_zero_load_gives_zero(problem):
    d, s = problem
    sol = solve_saddle(s, np.zeros(d.dofs.n_velocity))
    assert not sol.u.any() and not sol.p.any()


def test_residual_certificate(problem):
    sol = solve_saddle(problem[1])
    assert sol.residual_norm <= RESIDUAL_TOL
    assert sol.method == "condensed"


def test_boundary_values_zero(problem):
    d, s = problem
    sol = solve_saddle(s)
    assert not sol.u[d.dofs.boundary_mask].any()


def test_pressure_satisfies_constraint(problem):
    d, s = problem
    sol = solve_saddle(s)
    assert abs(s.c @ sol.p) <= 1e-10 * np.abs(s.c).sum() * np.abs(sol.p).max()


def test_discrete_equations_hold(problem):
    d, s = problem
    sol = solve_saddle(s)
    free = s.free
    r = (s.A @ sol.u - s.B.T @ sol.p)[free] - s.rhs[free]
    assert np.linalg.norm(r) <= 1e-9 * np.linalg.norm(s.rhs)
    assert np.linalg.norm(s.B @ sol.u) <= 1e-9 * np.linalg.norm(s.rhs)


def test_viscosity_and_load_scaling(problem):
    d, s = problem
    base = solve_saddle(s)
    scaled = solve_saddle(assemble_stokes(d.mesh, d.maps, d.dofs, 0.6, d.variant).with_rhs(4.0 * s.rhs))
    # nu -> 2 nu, f -> 4 f: u doubles, p quadruples
    assert np.abs(scaled.u - 2 * base.u).max() <= 1e-9 * np.abs(base.u).max()
    assert np.abs(scaled.p - 4 * base.p).max() <= 1e-9 * np.abs(base.p).max()


def test_repeat_solves_bit_identical(problem):
    fac = Factorization(problem[1])
    a, b = fac.solve(), fac.solve()
    assert np.array_equal(a.u, b.u) and np.array_equal(a.p, b.p)


def test_condensed_and_full_routes_agree(problem):
    s = problem[1]
    a = Factorization(s, "condensed").solve()
    b = Factorization(s, "full").solve()
    assert b.method == "full"
    assert np.abs(a.u - b.u).max() <= 1e-8 * np.abs(b.u).max()
    assert np.abs(a.p - b.p).max() <= 1e-8 * np.abs(b.p).max()


def test_unknown_method_rejected(problem):
    with pytest.raises(ConfigurationError):
        Factorization(problem[1], "cholesky")
    with pytest.raises(ConfigurationError):
        Factorization(problem[1]).solve(np.zeros(3))


def test_nested_dissection_is_permutation(rng):
    n = 500
    xy = rng.uniform(size=(n, 2))
    g = sp.random(n, n, density=0.01, random_state=1, format="csr")
    g = g + g.T
    perm = nested_dissection(g, xy, last=[7])
    assert perm[-1] == 7
    assert np.array_equal(np.sort(perm), np.arange(n))
