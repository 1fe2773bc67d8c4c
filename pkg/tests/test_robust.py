import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import Disk, random_curved_control
from isosv.analysis import ManufacturedSolution
from isosv.errors import DegenerateCellError
from isosv.geometry import GeoMap, geometry_at
from isosv.quadrature import gauss_interval, quadrature_rule
from isosv.reference import EDGE_VERTICES, eval_pressure_basis, mean_zero_pressure_basis
from isosv.robust import (
    ROTATION,
    SigmaSpace,
    WSpace,
    commuting_mismatch,
    local_sigma_basis,
    local_w_basis,
    pi_sigma,
    pi_w,
    rot,
    rot_eval,
    sigma_dof_matrix,
    w_dof_matrix,
    w_local_to_global,
)

REF_VERTS = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
FD = 1e-6


def fd_physical_gradient(gmap, values_at, p, sub):
    """Gradient in x of fields given at reference points, by central
    differences in x_hat and the inverse Jacobian."""
    cols = []
    for e in np.eye(2) * FD:
        cols.append((values_at(p + e, sub) - values_at(p - e, sub)) / (2 * FD))
    d_ref = np.stack(cols, axis=-1)  # (Q, m, 2 comps, 2 ref dirs)
    Jinv = geometry_at(gmap.control_points[None], p).Jinv[0]
    return np.einsum("qmab,qbc->qmac", d_ref, Jinv)


def physical_w_dofs(gmap, values_at):
    """The 20 W(T) functionals of fields (m of them) computed from physical
    quantities only: point values, curve tangents, arc-length integrals and
    finite-difference rot."""
    cp = gmap.control_points[None]
    rows = []
    vals = values_at(REF_VERTS, np.array([1, 2, 0]))  # (3, m, 2)
    rows += [vals[i, :, c] for i in range(3) for c in range(2)]
    # outward normal from the tangent of the mapped edge curve
    for k, (a, b) in enumerate(EDGE_VERTICES):
        m = 0.5 * (REF_VERTS[a] + REF_VERTS[b])
        tau = geometry_at(cp, m[None]).DF[0, 0] @ (REF_VERTS[b] - REF_VERTS[a])
        n = np.array([tau[1], -tau[0]]) / np.linalg.norm(tau)
        rows.append(values_at(m[None] + 1e-12 * (0.5 - m[None]), np.array([k]))[0] @ n)
    s, w = gauss_interval(6)
    for k, (a, b) in enumerate(EDGE_VERTICES):
        pts = (1 - s)[:, None] * REF_VERTS[a] + s[:, None] * REF_VERTS[b]
        dxds = np.einsum("qab,b->qa", geometry_at(cp, pts).DF[0], REF_VERTS[b] - REF_VERTS[a])
        v = values_at(pts, np.full(len(s), k))
        rows.append(np.einsum("q,qma,qa->m", w, v, dxds))
    rule = quadrature_rule(6)
    pts, sub = rule.all_points, rule.sub
    det = geometry_at(cp, pts).det[0]
    r = rot(fd_physical_gradient(gmap, values_at, pts, sub))
    q = eval_pressure_basis(pts, sub) @ mean_zero_pressure_basis()
    rows += list(np.einsum("q,q,qm,qi->im", rule.all_weights, det, r, q))
    return np.array(rows)


def curved(rng):
    return GeoMap(random_curved_control(rng), True, 0.02)


def test_dual_basis_against_physical_functionals(rng):
    for _ in range(3):
        basis = local_w_basis(curved(rng))
        D = physical_w_dofs(basis.gmap, lambda p, sub: basis.evaluate(p, sub)[0])
        assert np.abs(D - np.eye(20)).max() <= 1e-6


def test_identity_cell_vertex_basis():
    v = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    cp = np.vstack([v, 0.5 * (v[[1, 2, 0]] + v[[2, 0, 1]])])
    basis = local_w_basis(GeoMap(cp, False, 0.0))
    vals, _ = basis.evaluate(REF_VERTS, np.array([1, 2, 0]))
    # vertex DOF fields 2i + c take e_c at vertex i and vanish at the others
    for i in range(3):
        for c in range(2):
            expected = np.zeros((3, 2))
            expected[i, c] = 1.0
            assert np.allclose(vals[:, 2 * i + c], expected, atol=1e-12)
    D = physical_w_dofs(basis.gmap, lambda p, sub: basis.evaluate(p, sub)[0])
    assert np.abs(D - np.eye(20)).max() <= 1e-6


def test_affine_cell_field_with_det_two():
    # F(x_hat) = diag(2, 1) x_hat, det DF = 2; w(x) = (0, x1 / 2) has rot 1/2
    v = np.array([[2.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    cp = np.vstack([v, 0.5 * (v[[1, 2, 0]] + v[[2, 0, 1]])])
    g = GeoMap(cp, False, 0.0)
    basis = local_w_basis(g)
    field = lambda p, sub: np.stack([np.zeros(len(p)), geometry_at(cp[None], p).x[0, :, 0] / 2], axis=-1)[:, None]
    coef = physical_w_dofs(g, field)[:, 0]
    p = np.array([[0.2, 0.3], [0.6, 0.1], [0.1, 0.1]])
    vals, r = basis.evaluate(p)
    assert np.allclose(np.einsum("qia,i->qa", vals, coef), field(p, None)[:, 0], atol=1e-9)
    assert np.allclose(r @ coef, 0.5, atol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_rot_identity_against_finite_differences(seed):
    rng = np.random.default_rng(seed)
    basis = local_w_basis(curved(rng))
    rule = quadrature_rule(4)
    pts, sub = rule.all_points, rule.sub
    fd = rot(fd_physical_gradient(basis.gmap, lambda p, s: basis.evaluate(p, s)[0], pts, sub))
    exact = rot_eval(basis, pts, sub)
    assert np.abs(fd - exact).max() <= 1e-6 * np.abs(exact).max()


def test_rot_of_sigma_gradients_vanishes(rng):
    s = local_sigma_basis(curved(rng))
    rule = quadrature_rule(4)
    pts, sub = rule.all_points, rule.sub
    hess = fd_physical_gradient(s.gmap, lambda p, q: s.evaluate(p, q)[1], pts, sub)
    assert np.abs(rot(hess)).max() <= 1e-6 * np.abs(hess).max()


def test_sigma_dual_basis(rng):
    s = local_sigma_basis(curved(rng))
    v, g = s.evaluate(REF_VERTS, np.array([1, 2, 0]))
    assert np.allclose(v[:, [0, 3, 6]], np.eye(3), atol=1e-12)
    for i in range(3):
        assert np.allclose(g[i][[3 * i + 1, 3 * i + 2]], np.eye(2), atol=1e-10)


def test_well_conditioned_on_random_curved_cells(rng):
    cps = np.stack([random_curved_control(rng) for _ in range(50)])
    assert np.linalg.cond(w_dof_matrix(cps)).max() < 1e6
    assert np.linalg.cond(sigma_dof_matrix(cps)).max() < 1e6
    # Vandermonde of the raw covariant fields at the velocity nodes
    from isosv.spaces import NODES

    R = geometry_at(cps, NODES).R
    V = np.einsum("njab,jk->njakb", R, np.eye(10)).reshape(50, 20, 20)
    assert np.linalg.cond(V).max() < 1e6


def test_degenerate_cell_rejected():
    cp = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1e-12], [0.5, 0.0], [1.5, 0.0], [1.0, 0.0]])
    with pytest.raises(DegenerateCellError):
        local_w_basis(GeoMap(cp, False, 0.0))


@given(arrays(np.float64, (5, 2, 2), elements=st.floats(-10, 10)))
@settings(max_examples=50)
def test_rotation_turns_div_into_rot(g):
    assert np.allclose(rot(ROTATION.apply_gradient(g)), np.trace(g, axis1=-2, axis2=-1), atol=1e-12)


def test_rotation_matrix():
    assert np.array_equal(ROTATION.apply(np.array([1.0, 0.0])), [0.0, 1.0])


# --- global projections -------------------------------------------------------------


@pytest.fixture(scope="module")
def iso20():
    return Disk(20)


def test_w_numbering_shared_edges(iso20):
    idx, sign = w_local_to_global(iso20.mesh)
    assert idx.max() + 1 == WSpace(iso20.mesh, iso20.maps, iso20.chart).dimension
    counts = np.bincount(idx[:, 6:9].ravel())
    interior = ~iso20.mesh.edge_boundary
    assert np.all(counts[2 * iso20.mesh.n_vertices :: 2][interior] == 2)


def test_pi_w_reproduces_constants(iso20):
    c = np.array([0.7, -1.3])
    w = pi_w(lambda x: np.broadcast_to(c, x.shape), lambda x: np.zeros(x.shape[:-1]), iso20.mesh, iso20.maps, iso20.chart)
    rule = quadrature_rule(4)
    vals, r, _ = w.values_and_rot(rule.all_points, rule.sub)
    assert np.abs(vals - c).max() <= 1e-11
    assert np.abs(r).max() <= 1e-9


def test_pi_w_reproduces_linears_on_affine_mesh():
    d = Disk(20, "affine")
    f = lambda x: np.stack([-x[..., 1] + 0.5 * x[..., 0], x[..., 0] + 2.0], axis=-1)
    w = pi_w(f, lambda x: np.full(x.shape[:-1], 2.0), d.mesh, d.maps, None)
    rule = quadrature_rule(4)
    vals, r, geom = w.values_and_rot(rule.all_points, rule.sub)
    assert np.abs(vals - f(geom.x)).max() <= 1e-11
    assert np.abs(r - 2.0).max() <= 1e-9


def test_tangential_moment_of_gradient(iso20):
    w = pi_w(lambda x: np.broadcast_to([1.0, 0.0], x.shape), None, iso20.mesh, iso20.maps, iso20.chart)
    mesh = iso20.mesh
    nv = mesh.n_vertices
    expected = mesh.vertices[mesh.edges[:, 1], 0] - mesh.vertices[mesh.edges[:, 0], 0]
    assert np.allclose(w.coefficients[2 * nv + 1 :: 2][: mesh.n_edges], expected, atol=1e-13)


def test_pi_w_approximation_rate():
    ms = ManufacturedSolution(0.1)
    rule = quadrature_rule(8)
    hs, errs = [], []
    for n in (16, 32, 64):
        d = Disk(n)
        w = pi_w(ms.f, ms.rot_f, d.mesh, d.maps, d.chart)
        vals, _, geom = w.values_and_rot(rule.all_points, rule.sub)
        errs.append(np.sqrt((rule.all_weights * geom.det * ((vals - ms.f(geom.x)) ** 2).sum(-1)).sum()))
        hs.append(d.mesh.h)
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 1.9


def test_pi_sigma_reproduces_one(iso20):
    s = pi_sigma(lambda x: np.ones(x.shape[:-1]), lambda x: np.zeros(x.shape), iso20.mesh, iso20.maps, iso20.chart)
    rule = quadrature_rule(4)
    vals, grads = s.values_and_gradients(rule.all_points, rule.sub)
    assert np.abs(vals - 1.0).max() <= 1e-12
    assert np.abs(grads).max() <= 1e-10


def test_pi_sigma_reproduces_affine_functions(iso20):
    p = lambda x: 0.3 + 2 * x[..., 0] - x[..., 1]
    gp = lambda x: np.broadcast_to([2.0, -1.0], x.shape)
    s = pi_sigma(p, gp, iso20.mesh, iso20.maps, iso20.chart)
    rule = quadrature_rule(4)
    vals, grads = s.values_and_gradients(rule.all_points, rule.sub)
    x = geometry_at(iso20.maps.control, rule.all_points, iso20.maps.hessian).x
    assert np.abs(vals - p(x)).max() <= 1e-11
    assert np.abs(grads - [2.0, -1.0]).max() <= 1e-10


def test_commuting_identity(iso20):
    p = lambda x: np.sin(x[..., 0]) * np.exp(x[..., 1])
    gp = lambda x: np.stack([np.cos(x[..., 0]) * np.exp(x[..., 1]), np.sin(x[..., 0]) * np.exp(x[..., 1])], axis=-1)
    ws, ss = WSpace(iso20.mesh, iso20.maps, iso20.chart), SigmaSpace(iso20.mesh, iso20.maps, iso20.chart)
    assert commuting_mismatch(p, gp, iso20.mesh, iso20.maps, iso20.chart, w_space=ws, sigma_space=ss) <= 1e-10
