import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isosv.errors import DomainError
from isosv.reference import (
    BARYCENTER,
    EDGE_NORMALS,
    VERTICES,
    build_reference_macro,
    ct_smoothness_matrix,
    edge_lagrange_integrals,
    eval_ct_cubic_basis,
    eval_pressure_basis,
    eval_velocity_scalar_basis,
    locate,
    mean_zero_pressure_basis,
    pressure_mass_matrix,
    reference_divergence_matrix,
)
from isosv.quadrature import quadrature_rule

REF = build_reference_macro()


def reference_points():
    return st.tuples(st.floats(0, 1), st.floats(0, 1)).map(
        lambda t: np.array([t[0] * (1 - t[1]), t[1] * (1 - t[0])]) if t[0] + t[1] <= 1 else np.array([1 - t[0], 1 - t[1]])
    )


def area(tri):
    a, b, c = tri
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def test_barycenter():
    assert np.allclose(REF.barycenter, [1 / 3, 1 / 3], atol=1e-16)


def test_subtriangle_areas_partition():
    areas = [area(t) for t in REF.subtriangles]
    assert np.allclose(areas, 1 / 6, atol=1e-15)
    assert sum(areas) == pytest.approx(0.5)


def test_interior_midpoint_towards_origin():
    assert np.allclose(REF.nodes[9], [1 / 6, 1 / 6], atol=1e-16)


def test_node_tags():
    tags = list(REF.node_tags)
    assert tags.count("outer-vertex") == 3
    assert tags.count("outer-edge-midpoint") == 3
    assert tags.count("barycenter") == 1
    assert tags.count("interior-edge-midpoint") == 3


def test_velocity_basis_kronecker():
    vals, _ = eval_velocity_scalar_basis(REF.nodes)
    assert np.allclose(vals, np.eye(10), atol=1e-14)


def test_barycenter_node_value():
    vals, _ = eval_velocity_scalar_basis(BARYCENTER)
    assert vals[0, 6] == pytest.approx(1.0)
    assert np.allclose(np.delete(vals[0], 6), 0.0, atol=1e-14)


@given(reference_points())
@settings(max_examples=60, deadline=None)
def test_partition_of_unity(p):
    vals, grads = eval_velocity_scalar_basis(p)
    assert vals.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-12)


def test_velocity_basis_continuous_across_split(rng):
    for j in range(3):
        ka, kb = (j + 1) % 3, (j + 2) % 3
        t = rng.uniform(0, 1, 20)
        pts = (1 - t)[:, None] * VERTICES[j] + t[:, None] * BARYCENTER
        va, _ = eval_velocity_scalar_basis(pts, np.full(20, ka))
        vb, _ = eval_velocity_scalar_basis(pts, np.full(20, kb))
        assert np.abs(va - vb).max() < 1e-12


def test_pressure_basis_support():
    p = np.array([[0.1, 0.1]])  # near v2, inside K_0 (lambda_0 smallest)
    assert locate(p)[0] == 0
    q = eval_pressure_basis(p)
    assert np.all(q[0, 3:] == 0.0)


def test_pressure_basis_vertex_value():
    for k, tri in enumerate(REF.subtriangles):
        q = eval_pressure_basis(tri, np.full(3, k))
        assert np.allclose(q[:, 3 * k : 3 * k + 3], np.eye(3), atol=1e-14)


def test_pressure_basis_integrals():
    rule = quadrature_rule(2)
    q = eval_pressure_basis(rule.all_points, rule.sub)
    assert np.allclose(rule.all_weights @ q, 1 / 18, atol=1e-15)


def test_outside_point_rejected():
    with pytest.raises(DomainError):
        eval_velocity_scalar_basis(np.array([0.8, 0.5]))
    with pytest.raises(DomainError):
        eval_pressure_basis(np.array([-0.1, 0.2]))
    with pytest.raises(DomainError):
        eval_ct_cubic_basis(np.array([1.1, 0.0]))


def test_tie_break_lowest_index():
    # the barycenter belongs to all three sub-triangles
    assert locate(BARYCENTER[None])[0] == 0
    # point on the edge between K_1 and K_2 (segment v0--b)
    p = 0.5 * (VERTICES[0] + BARYCENTER)
    assert locate(p[None])[0] == 1


def ct_dofs(vals_fn):
    """Apply the 12 DOFs to a function returning (values, gradients) at points."""
    out = []
    for i in range(3):
        v, g = vals_fn(VERTICES[i][None], min((i + 1) % 3, (i + 2) % 3))
        out.extend([v[0], g[0][..., 0], g[0][..., 1]])
    for k in range(3):
        _, g = vals_fn(REF.outer_midpoints[k][None], k)
        out.append(g[0] @ EDGE_NORMALS[k])
    return np.array(out)


def test_ct_duality():
    def basis(p, k):
        v, g = eval_ct_cubic_basis(p, np.array([k]))
        return v, g

    D = ct_dofs(basis)  # (12 dofs, 12 functions)
    assert np.allclose(D, np.eye(12), atol=1e-12)


def test_ct_vertex_value_function():
    v, g = eval_ct_cubic_basis(VERTICES[1][None], np.array([0]))
    assert v[0, 3] == pytest.approx(1.0)
    assert np.allclose(g[0, 3], 0.0, atol=1e-12)


def test_ct_constant_reproduced(rng):
    p = rng.dirichlet([1, 1, 1], 30)[:, :2]
    v, g = eval_ct_cubic_basis(p)
    assert np.allclose(v[:, [0, 3, 6]].sum(axis=1), 1.0, atol=1e-13)
    assert np.allclose(g[:, [0, 3, 6]].sum(axis=1), 0.0, atol=1e-12)


def test_ct_gradient_continuity(rng):
    for j in range(3):
        ka, kb = (j + 1) % 3, (j + 2) % 3
        t = rng.uniform(0, 1, 15)
        pts = (1 - t)[:, None] * VERTICES[j] + t[:, None] * BARYCENTER
        va, ga = eval_ct_cubic_basis(pts, np.full(15, ka))
        vb, gb = eval_ct_cubic_basis(pts, np.full(15, kb))
        assert np.abs(va - vb).max() < 1e-12
        assert np.abs(ga - gb).max() < 1e-10


def test_ct_reproduces_random_c1_field(rng):
    # independent oracle: a random null vector of the smoothness system
    S = ct_smoothness_matrix()
    _, sv, vt = np.linalg.svd(S)
    null = vt[np.sum(sv > 1e-10 * sv[0]):]
    coef = (rng.standard_normal(len(null)) @ null).reshape(3, 10)

    def field(p, k):
        x, y = np.atleast_2d(p).T
        mono = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]
        ks = np.broadcast_to(k, x.shape)
        v = sum(coef[ks, i] * x**a * y**b for i, (a, b) in enumerate(mono))
        gx = sum(coef[ks, i] * a * x ** max(a - 1, 0) * y**b for i, (a, b) in enumerate(mono))
        gy = sum(coef[ks, i] * b * x**a * y ** max(b - 1, 0) for i, (a, b) in enumerate(mono))
        return v, np.stack([gx, gy], axis=-1)

    dofs = ct_dofs(field)
    pts = rng.dirichlet([1, 1, 1], 40)[:, :2]
    sub = locate(pts)
    v, g = eval_ct_cubic_basis(pts, sub)
    fv, fg = field(pts, sub)
    assert np.abs(v @ dofs - fv).max() < 1e-10
    assert np.abs(np.einsum("prd,r->pd", g, dofs) - fg).max() < 1e-10


def test_mean_zero_pressure_basis():
    Z = mean_zero_pressure_basis()
    M = pressure_mass_matrix()
    assert np.allclose(Z.T @ M @ Z, np.eye(8), atol=1e-13)
    assert np.allclose(Z.T @ M @ np.ones(9), 0.0, atol=1e-14)


def test_reference_divergence_matrix_against_quadrature():
    rule = quadrature_rule(4)
    q = eval_pressure_basis(rule.all_points, rule.sub)
    _, g = eval_velocity_scalar_basis(rule.all_points, rule.sub)
    D = np.einsum("p,pk,pjd->kjd", rule.all_weights, q, g).reshape(9, 20)
    assert np.allclose(D, reference_divergence_matrix(), atol=1e-14)
    # constants are orthogonal to the divergence of fields vanishing on the boundary
    interior = [2 * j + c for j in (6, 7, 8, 9) for c in (0, 1)]
    assert np.allclose(np.ones(9) @ D[:, interior], 0.0, atol=1e-14)


def test_edge_lagrange_integrals():
    E = edge_lagrange_integrals()
    lengths = [1.0, 1.0, np.sqrt(2.0)]
    # Simpson: endpoints 1/6, midpoint 2/3 of the edge length
    for k, (i, j) in enumerate([[1, 2], [2, 0], [0, 1]]):
        assert E[k].sum() == pytest.approx(lengths[k])
        assert E[k, i] == pytest.approx(lengths[k] / 6)
        assert E[k, 3 + k] == pytest.approx(2 * lengths[k] / 3)
