"""Mesh construction and P1 assembly tests."""

import numpy as np
import pytest
from scipy.integrate import quad

from frostflow.meshing import (
    BoundaryData,
    MeshError,
    SpectralBasis1D,
    assemble_elasticity,
    assemble_scalar,
    build_mesh,
    div_load,
    elasticity_matrix,
    iso_matrix,
    korn_ratio,
    mass_matrix,
    robin_load,
    robin_matrix,
    stiffness_matrix,
    tensor_load,
    vector_mass_load,
)
from frostflow.plasticity import IsoPair


# ---------------------------------------------------------------------------
# meshes


def test_build_mesh_1d_counts():
    mesh = build_mesh(1, [0.0, 1.0], 4)
    assert mesh.n_nodes == 5
    assert mesh.n_elements == 4
    assert mesh.boundary_facets.shape == (2, 1)
    assert set(mesh.boundary_markers) == {1, 2}


def test_build_mesh_2d_counts():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 2)
    assert mesh.n_nodes == 9
    assert mesh.n_elements == 8
    assert set(mesh.boundary_markers) == {1, 2, 3, 4}
    assert mesh.boundary_facets.shape[0] == 8


def test_measure_partition():
    for mesh, total in ((build_mesh(1, [0.0, 2.0], 7), 2.0),
                        (build_mesh(2, [[0.0, 3.0], [0.0, 0.5]], (6, 3)), 1.5)):
        assert np.sum(mesh.element_measures()) == pytest.approx(total,
                                                                abs=1e-12)
        assert np.sum(mesh.node_volumes()) == pytest.approx(total, abs=1e-12)


def test_build_mesh_rejects_bad_input():
    with pytest.raises(MeshError):
        build_mesh(1, [1.0, 0.0], 4)
    with pytest.raises(MeshError):
        build_mesh(1, [0.0, 1.0], 1)
    with pytest.raises(MeshError):
        build_mesh(3, [[0, 1]] * 3, 2)


# ---------------------------------------------------------------------------
# scalar forms


def test_mass_matrix_row_sums_are_lumped_volumes():
    for mesh in (build_mesh(1, [0.0, 1.0], 9),
                 build_mesh(2, [[0.0, 1.0], [0.0, 2.0]], (3, 4))):
        m = mass_matrix(mesh)
        rows = np.asarray(m.sum(axis=1)).ravel()
        assert np.allclose(rows, mesh.node_volumes(), atol=1e-14)
        assert (abs(m - m.T) > 1e-12).nnz == 0


def test_stiffness_kernel_contains_constants():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 4)
    k = assemble_scalar(mesh)
    const = np.ones(mesh.n_nodes)
    assert np.max(np.abs(k @ const)) <= 1e-12


def test_linear_field_energy_1d():
    mesh = build_mesh(1, [0.0, 1.0], 8)
    k = stiffness_matrix(mesh)
    p = mesh.nodes[:, 0]
    assert 0.5 * p @ (k @ p) == pytest.approx(0.5, abs=1e-13)


def test_assembled_energy_matches_quadrature_oracle():
    # smooth field: P1 interpolation energy converges at second order
    errors = []
    exact = quad(lambda x: np.cos(2 * np.pi * x) ** 2 * (2 * np.pi) ** 2,
                 0, 1)[0]
    for n in (32, 64, 128):
        mesh = build_mesh(1, [0.0, 1.0], n)
        p = np.sin(2 * np.pi * mesh.nodes[:, 0])
        k = stiffness_matrix(mesh)
        errors.append(abs(p @ (k @ p) - exact))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.2)
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.2)


def test_stiffness_rejects_nonpositive_coefficient():
    mesh = build_mesh(1, [0.0, 1.0], 4)
    with pytest.raises(MeshError):
        stiffness_matrix(mesh, np.zeros(mesh.n_elements))


def test_matrices_symmetric():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 3)
    for mat in (mass_matrix(mesh), stiffness_matrix(mesh),
                robin_matrix(mesh, np.ones(mesh.boundary_facets.shape[0])),
                elasticity_matrix(mesh, IsoPair(1.0, 0.5))):
        assert np.max(np.abs((mat - mat.T).toarray())) <= 1e-12


# ---------------------------------------------------------------------------
# Robin terms


def test_robin_load_zero_alpha():
    mesh = build_mesh(1, [0.0, 1.0], 4)
    load = robin_load(mesh, np.zeros(2), lambda x, t: np.full(x.shape[0], 2.0),
                      0.0)
    assert np.array_equal(load, np.zeros(5))


def test_robin_load_1d_point_values():
    mesh = build_mesh(1, [0.0, 1.0], 4)
    load = robin_load(mesh, np.ones(2), lambda x, t: np.full(x.shape[0], 2.0),
                      0.0)
    expected = np.zeros(5)
    expected[0] = expected[-1] = 2.0
    assert np.array_equal(load, expected)


def test_robin_load_2d_constant_matches_boundary_quadrature():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 5)
    alpha = np.full(mesh.boundary_facets.shape[0], 1.5)
    load = robin_load(mesh, alpha, lambda x, t: np.full(x.shape[0], 2.0), 0.0)
    # total flux: sum of the load = alpha * p* * perimeter
    assert np.sum(load) == pytest.approx(1.5 * 2.0 * 4.0, abs=1e-10)
    # against the Robin matrix applied to the constant interior trace
    r = robin_matrix(mesh, alpha)
    assert np.allclose(load, r @ np.full(mesh.n_nodes, 2.0), atol=1e-10)


# ---------------------------------------------------------------------------
# elasticity


def test_elasticity_zero_field_energy():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 3)
    kc, interior = assemble_elasticity(mesh, IsoPair(1.0, 1.0))
    assert kc.shape == (interior.size, interior.size)
    u = np.zeros(interior.size)
    assert u @ (kc @ u) == 0.0


def test_elasticity_energy_1d_parabola():
    # u = x(1-x): energy 0.5 * int u'^2 = 1/6 in the limit, order-2 in h
    errors = []
    for n in (16, 32, 64):
        mesh = build_mesh(1, [0.0, 1.0], n)
        x = mesh.nodes[:, 0]
        u = x * (1 - x)
        k = elasticity_matrix(mesh, IsoPair.scalar(1.0))
        errors.append(abs(0.5 * u @ (k @ u) - 1.0 / 6.0))
    assert errors[-1] <= 2e-4
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.2)
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.2)


def test_korn_coercivity_positive_and_stable():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 4)
    c = korn_ratio(mesh, IsoPair(1.0, 1.0))
    assert c > 0.05
    rng = np.random.default_rng(0)
    kc, interior = assemble_elasticity(mesh, IsoPair(1.0, 1.0))
    h1_full = None
    from frostflow.meshing import vector_h1_matrix
    h1 = vector_h1_matrix(mesh)[interior][:, interior]
    for _ in range(100):
        u = rng.normal(size=interior.size)
        assert u @ (kc @ u) >= c * (u @ (h1 @ u)) - 1e-10


def test_unconstrained_mesh_detected():
    mesh = build_mesh(1, [0.0, 1.0], 2)
    # 3 nodes, 2 boundary -> one interior dof; fine
    kc, interior = assemble_elasticity(mesh, IsoPair.scalar(1.0))
    assert interior.size == 1
    tiny = build_mesh(1, [0.0, 1.0], 2)
    tiny.boundary_facets = np.array([[0], [1], [2]])
    with pytest.raises(MeshError):
        assemble_elasticity(tiny, IsoPair.scalar(1.0))


def test_div_load_against_direct_integral():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 4)
    w = np.ones(mesh.n_elements)
    b = div_load(mesh, w)
    # u = (x, 0): div u = 1, so b . u = int 1 * 1 = |Omega|
    u = np.zeros((mesh.n_nodes, 2))
    u[:, 0] = mesh.nodes[:, 0]
    assert b @ u.ravel() == pytest.approx(1.0, abs=1e-12)


def test_vector_mass_load_constant_force():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 3)
    g = np.tile(np.array([0.0, -2.0]), (mesh.n_elements, 1))
    b = vector_mass_load(mesh, g)
    u = np.zeros((mesh.n_nodes, 2))
    u[:, 1] = 1.0
    assert b @ u.ravel() == pytest.approx(-2.0, abs=1e-12)


def test_strain_of_linear_displacement():
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 3)
    u = np.zeros((mesh.n_nodes, 2))
    u[:, 0] = 0.5 * mesh.nodes[:, 0]          # eps_xx = 0.5
    u[:, 1] = -0.25 * mesh.nodes[:, 1]        # eps_yy = -0.25
    eps = mesh.element_strain(u.ravel())
    assert np.allclose(eps[:, 0], 0.5, atol=1e-13)
    assert np.allclose(eps[:, 1], -0.25, atol=1e-13)
    assert np.allclose(eps[:, 2], 0.0, atol=1e-13)


def test_iso_matrix_matches_pair_action():
    from frostflow.plasticity import IsoPair as IP
    rng = np.random.default_rng(2)
    for ncomp in (1, 3, 6):
        pair = IP(1.7, 0.6)
        mat = iso_matrix(pair, ncomp)
        t = rng.normal(size=ncomp)
        assert np.allclose(mat @ t, pair.apply(t), atol=1e-13)


# ---------------------------------------------------------------------------
# spectral basis


def test_spectral_orthonormality():
    mesh = build_mesh(1, [0.0, 1.0], 200)
    basis = SpectralBasis1D.build(mesh, 24)
    gram = basis.gram()
    assert np.max(np.abs(gram - np.eye(24))) <= 1e-10
    assert basis.eigenvalues[0] == 0.0
    assert np.all(np.diff(basis.eigenvalues) > 0)


def test_spectral_eigen_residual_shrinks_under_refinement():
    residuals = []
    for n in (50, 100, 200):
        mesh = build_mesh(1, [0.0, 1.0], n)
        basis = SpectralBasis1D.build(mesh, 6)
        h = 1.0 / n
        v = basis.vectors[3]
        lap = np.zeros_like(v)
        lap[1:-1] = (v[:-2] - 2 * v[1:-1] + v[2:]) / h ** 2
        # Neumann ghost values: mirrored
        lap[0] = (2 * v[1] - 2 * v[0]) / h ** 2
        lap[-1] = (2 * v[-2] - 2 * v[-1]) / h ** 2
        res = -lap - basis.eigenvalues[3] * v
        residuals.append(np.sqrt(np.dot(basis.weights, res * res)))
    assert residuals[0] > residuals[1] > residuals[2]
    assert residuals[0] / residuals[2] > 8.0


def test_mesh_text_round_trip():
    from frostflow.meshing import mesh_from_text, mesh_to_text
    for mesh in (build_mesh(1, [0.0, 2.0], 5),
                 build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 2)):
        back = mesh_from_text(mesh_to_text(mesh))
        assert back.dim == mesh.dim
        assert np.array_equal(back.nodes, mesh.nodes)
        assert np.array_equal(back.elements, mesh.elements)
        assert np.array_equal(back.boundary_facets, mesh.boundary_facets)
        assert np.array_equal(back.boundary_markers, mesh.boundary_markers)


def test_mesh_text_rejects_garbage():
    from frostflow.meshing import mesh_from_text
    with pytest.raises(MeshError):
        mesh_from_text("")
    with pytest.raises(MeshError):
        mesh_from_text("1 2 1 2\n0.0\n1.0\n0 1\n0 1\n")  # line count off


def test_mesh_from_config_file(tmp_path):
    from frostflow.meshing import mesh_to_text
    from frostflow.scenario import PRESETS, Scenario
    mesh = build_mesh(1, [0.0, 1.0], 12)
    path = tmp_path / "mesh.txt"
    path.write_text(mesh_to_text(mesh), encoding="utf-8")
    sc = Scenario.from_dict(PRESETS["zero_forcing"]())
    sc.data["mesh"] = {"path": str(path)}
    built = sc.build_mesh()
    assert built.n_nodes == 13
    assert np.array_equal(built.nodes, mesh.nodes)


def test_spectral_round_trip():
    mesh = build_mesh(1, [0.0, 1.0], 128)
    basis = SpectralBasis1D.build(mesh, 12)
    coeffs = np.zeros(12)
    coeffs[2] = 1.3
    nodal = basis.synthesize(coeffs)
    assert np.allclose(basis.project(nodal), coeffs, atol=1e-10)
