import math

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from pwmodes.assembly import (
    RefractiveIndexMap,
    SingularElementError,
    TRI_DEGREE4,
    TRI_DEGREE6,
    assemble_forms,
    assemble_h1_gram,
    garding_probe,
    structure_report,
    write_matrix_market,
)
from pwmodes.geometry import Mesh, build_dof_map, build_structured_mesh, DomainSpec
from pwmodes.pml import PmlProfile

FREE_SPACE = RefractiveIndexMap()
UNIT_S = PmlProfile(H=10.0, delta=1.0, strength=0.0)


def exact_bary_integral(a, b, c):
    # int over T of l1^a l2^b l3^c = 2*Area * a! b! c! / (a+b+c+2)!
    return 2 * math.factorial(a) * math.factorial(b) * math.factorial(c) \
        / math.factorial(a + b + c + 2)


@pytest.mark.parametrize("rule", [TRI_DEGREE4, TRI_DEGREE6])
def test_quadrature_exactness(rule):
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for a in range(rule.degree + 1):
        for b in range(rule.degree + 1 - a):
            for c in range(rule.degree + 1 - a - b):
                if a + b + c > rule.degree:
                    continue
                val = np.sum(
                    rule.weights
                    * rule.points[:, 0] ** a
                    * rule.points[:, 1] ** b
                    * rule.points[:, 2] ** c
                )
                assert val == pytest.approx(exact_bary_integral(a, b, c),
                                            rel=1e-12), (a, b, c)


def unit_triangle_mesh():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    false = np.zeros(3, dtype=bool)
    return Mesh(nodes=nodes, triangles=tris,
                element_region=np.zeros(1, dtype=np.int8),
                left_edge=false.copy(), right_edge=false.copy(),
                dirichlet=false.copy())


def test_unit_triangle_stiffness_and_mass():
    mesh = unit_triangle_mesh()
    dofs = build_dof_map(mesh)
    sys = assemble_forms(mesh, dofs, UNIT_S, FREE_SPACE, k=0.0)
    stiff = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    mass = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0
    assert np.allclose(sys.A.toarray(), stiff, atol=1e-14)
    assert np.allclose(sys.C.toarray(), mass, atol=1e-15)
    assert np.allclose(sys.P.toarray(), stiff + mass, atol=1e-14)


def test_interior_stiffness_rows_annihilate_constants(exp1_domain):
    mesh = build_structured_mesh(exp1_domain, nx=10, ny_per_unit=4)
    dofs = build_dof_map(mesh)
    sys = assemble_forms(mesh, dofs, PmlProfile(H=1.0, delta=0.5, strength=0.0),
                         FREE_SPACE, k=0.0)
    ones = np.ones(sys.n_dofs)
    rows = sys.A @ ones
    # nodes two rows away from the Dirichlet boundary see a full stencil
    inner = np.abs(mesh.nodes[:, 1]) <= 0.75
    dof_inner = dofs.node_to_dof[inner & (dofs.node_to_dof >= 0)]
    scale = np.abs(sys.A.data).max()
    assert np.max(np.abs(rows[dof_inner])) < 1e-12 * scale


def test_pencil_structure(small_system):
    rep = structure_report(small_system)
    assert rep["A_asym_rel"] < 1e-12
    assert rep["C_asym_rel"] < 1e-12
    assert rep["B_skew_defect_rel"] < 1e-12
    assert rep["P_herm_defect_rel"] < 1e-12


def test_re_c_positive_definite(small_system):
    np.linalg.cholesky(small_system.C.toarray().real)


def test_gram_positive_definite(small_system):
    np.linalg.cholesky(small_system.P.toarray())


def test_assembly_element_order_independent(small_mesh, exp1_pml, exp1_index):
    mesh, dofs = small_mesh
    sys1 = assemble_forms(mesh, dofs, exp1_pml, exp1_index, k=1.6)
    rng = np.random.default_rng(3)
    perm = rng.permutation(mesh.n_triangles)
    shuffled = Mesh(nodes=mesh.nodes, triangles=mesh.triangles[perm],
                    element_region=mesh.element_region[perm],
                    left_edge=mesh.left_edge, right_edge=mesh.right_edge,
                    dirichlet=mesh.dirichlet, grid_x=mesh.grid_x,
                    grid_y=mesh.grid_y)
    sys2 = assemble_forms(shuffled, dofs, exp1_pml, exp1_index, k=1.6)
    for m1, m2 in ((sys1.A, sys2.A), (sys1.B, sys2.B), (sys1.C, sys2.C)):
        diff = np.abs((m1 - m2).data)
        scale = np.abs(m1.data).max()
        assert (diff.max() if diff.size else 0.0) < 1e-14 * scale


def test_quadrature_consistency_between_degrees(exp1_domain, exp1_pml, exp1_index):
    from pwmodes.experiments import mesh_for_hmax

    mesh, dofs = mesh_for_hmax(exp1_domain, 0.0625)
    s4 = assemble_forms(mesh, dofs, exp1_pml, exp1_index, k=1.6, quad=TRI_DEGREE4)
    s6 = assemble_forms(mesh, dofs, exp1_pml, exp1_index, k=1.6, quad=TRI_DEGREE6)
    for m4, m6 in ((s4.A, s6.A), (s4.B, s6.B), (s4.C, s6.C)):
        rel = np.abs((m4 - m6).data).max() / np.abs(m4.data).max()
        assert rel < 1e-3


def test_zero_strength_gives_real_helmholtz_pencil(small_mesh, exp1_index):
    mesh, dofs = small_mesh
    sys = assemble_forms(mesh, dofs, PmlProfile(H=1.0, delta=0.5, strength=0.0),
                         exp1_index, k=1.6)
    assert np.abs(sys.A.data.imag).max() == 0.0
    assert np.abs(sys.C.data.imag).max() == 0.0
    assert np.abs(sys.B.data.real).max() == 0.0


def test_singular_element_rejected():
    mesh = unit_triangle_mesh()
    mesh.nodes = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1e-16]])
    dofs = build_dof_map(mesh)
    with pytest.raises(SingularElementError):
        assemble_forms(mesh, dofs, UNIT_S, FREE_SPACE, k=1.0)


def test_index_map_validation():
    with pytest.raises(ValueError):
        RefractiveIndexMap(regions=(((0, 1, -1.0, 1.0), 2.0),),
                           medium_half_height=0.5)
    with pytest.raises(ValueError):
        RefractiveIndexMap(regions=(((0, 1, 0, 1), 2.0), ((0.5, 1.5, 0, 1), 3.0)))
    with pytest.raises(ValueError):
        RefractiveIndexMap(regions=(((0, 1, 0, 1), 0.5),))


def test_index_lookup():
    imap = RefractiveIndexMap(regions=(((-1, 0, -0.5, 0.5), 6.0),
                                       ((0, 1, -0.5, 0.5), 10.0)))
    x1 = np.array([-0.5, 0.5, -0.5, 2.0])
    x2 = np.array([0.0, 0.0, 0.8, 0.0])
    assert np.array_equal(imap.gamma_at(x1, x2), [6.0, 10.0, 1.0, 1.0])


def test_garding_probe(small_system, small_mesh, exp1_index):
    mesh, dofs = small_mesh
    # pure stiffness: nonnegative quotient
    sys0 = assemble_forms(mesh, dofs, PmlProfile(H=1.0, delta=0.5, strength=0.0),
                          FREE_SPACE, k=0.0)
    assert garding_probe(sys0, trials=8, seed=1) >= 0.0
    # large k: the mass term dominates and the quotient dips negative
    sysk = assemble_forms(mesh, dofs, PmlProfile(H=1.0, delta=0.5, strength=0.0),
                          exp1_index, k=50.0)
    assert garding_probe(sysk, trials=8, seed=1) < 0.0
    # deterministic for a fixed seed
    assert garding_probe(small_system, trials=4, seed=9) == \
        garding_probe(small_system, trials=4, seed=9)


def test_matrix_market_roundtrip(small_system, tmp_path):
    path = tmp_path / "B.mtx"
    write_matrix_market(path, small_system.B)
    back = scipy.io.mmread(path).tocsr()
    diff = (back - small_system.B)
    assert np.abs(diff.data).max() if diff.nnz else 0.0 < 1e-15
    assert back.dtype.kind == "c"
