import cmath
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from pwmodes.eigensolver import EigenPair, nodal_values
from pwmodes.geometry import build_dof_map, build_structured_mesh
from pwmodes.slab import (
    AnalyticMode,
    DegenerateFieldError,
    NoGuidedModeError,
    SlabModeSpec,
    analytic_mode,
    dispersion_solve,
    eval_analytic_mode,
    gauge_invariant_distance,
    interior_quadrature,
    l2_mode_error,
)

SPEC1 = SlabModeSpec(k=1.6, gamma_core=9.0, shift=-3, parity="antisymmetric")
SPEC2 = SlabModeSpec(k=1.6, gamma_core=9.0, shift=4, parity="symmetric")


def test_dispersion_reproduces_slab_values():
    t0 = time.perf_counter()
    a1 = dispersion_solve(SPEC1)
    a2 = dispersion_solve(SPEC2)
    elapsed = time.perf_counter() - t0
    assert abs(a1 - 0.4368) < 5e-5
    assert abs(a2 - 0.2911) < 5e-5
    assert elapsed < 1.0


def test_no_guided_mode_homogeneous():
    with pytest.raises(NoGuidedModeError):
        dispersion_solve(SlabModeSpec(k=1.6, gamma_core=1.0, shift=-3,
                                      parity="antisymmetric"))


@pytest.mark.parametrize("spec", [SPEC1, SPEC2])
def test_single_sign_change_on_fine_scan(spec):
    from pwmodes.slab import _dispersion

    alphas = np.linspace(0.0, 0.5, 100_000)
    vals = np.array([_dispersion(spec, a) for a in alphas])
    changes = np.sum(np.sign(vals[:-1]) != np.sign(vals[1:]))
    assert changes == 1


@pytest.mark.parametrize("spec", [SPEC1, SPEC2])
def test_mode_interface_continuity(spec):
    mode = analytic_mode(spec)
    x1 = 0.37
    for x2 in (0.5, -0.5):
        lo = eval_analytic_mode(mode, x1, x2 - 1e-12)
        hi = eval_analytic_mode(mode, x1, x2 + 1e-12)
        assert abs(lo - hi) < 1e-9 * abs(hi) + 1e-12


@pytest.mark.parametrize("spec", [SPEC1, SPEC2])
def test_mode_derivative_continuity(spec):
    # second-order one-sided differences across the core boundary
    mode = analytic_mode(spec)
    h = 1e-5
    x1 = 0.0
    for y0 in (0.5, -0.5):
        f = lambda y: eval_analytic_mode(mode, x1, y)
        d_up = (-3 * f(y0) + 4 * f(y0 + h) - f(y0 + 2 * h)) / (2 * h)
        d_dn = (3 * f(y0) - 4 * f(y0 - h) + f(y0 - 2 * h)) / (2 * h)
        assert abs(d_up - d_dn) < 1e-8


def test_mode_parity_and_zero():
    m1 = analytic_mode(SPEC1)
    assert eval_analytic_mode(m1, 0.3, 0.0) == 0.0
    assert eval_analytic_mode(m1, 0.3, 0.4) == pytest.approx(
        -eval_analytic_mode(m1, 0.3, -0.4), rel=1e-14)
    m2 = analytic_mode(SPEC2)
    assert eval_analytic_mode(m2, 0.3, 0.4) == pytest.approx(
        eval_analytic_mode(m2, 0.3, -0.4), rel=1e-14)


@pytest.mark.parametrize("spec", [SPEC1, SPEC2])
def test_unit_l2_normalization(spec):
    # independent check of the closed-form normalization constant
    mode = analytic_mode(spec)
    profile_sq = lambda y: abs(eval_analytic_mode(mode, 0.0, y)) ** 2
    val, _ = quad(profile_sq, -1.0, 1.0, points=[-0.5, 0.5], limit=200)
    assert 2 * math.pi * val == pytest.approx(1.0, rel=1e-10)


def test_gauge_invariance():
    rng = np.random.default_rng(5)
    w = rng.uniform(0.5, 1.0, 64)
    u = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert gauge_invariant_distance(u, u, w) < 1e-14
    for theta, scale in ((0.3, 2.0), (-1.2, 0.01), (2.9, 37.0)):
        v = scale * cmath.exp(1j * theta) * u
        assert gauge_invariant_distance(v, u, w) < 1e-7


def test_degenerate_field_rejected():
    w = np.ones(8)
    with pytest.raises(DegenerateFieldError):
        gauge_invariant_distance(np.zeros(8, dtype=complex),
                                 np.ones(8, dtype=complex), w)


def test_l2_mode_error_of_interpolated_mode(exp1_domain):
    # a pair manufactured from the analytic mode itself must sit at the
    # P1 interpolation error level, far below order one
    mesh = build_structured_mesh(exp1_domain, nx=64, ny_per_unit=16)
    dofs = build_dof_map(mesh)
    mode = analytic_mode(SPEC1)
    vals = eval_analytic_mode(mode, mesh.nodes[:, 0], mesh.nodes[:, 1])
    phi_nodes = vals * np.exp(-1j * mode.alpha * mesh.nodes[:, 0])
    phi = np.zeros(dofs.n_dofs, dtype=complex)
    mask = dofs.node_to_dof >= 0
    phi[dofs.node_to_dof[mask]] = phi_nodes[mask]
    pair = EigenPair(alpha=mode.alpha, phi=phi, residual=0.0, shift=0.0,
                     eta_gap=0.0)
    err = l2_mode_error(mesh, dofs, pair, mode)
    assert 0.0 < err < 0.02


def test_interior_quadrature_covers_physical_region(small_mesh):
    mesh, _ = small_mesh
    pts, w = interior_quadrature(mesh)
    assert np.all(np.abs(pts[:, 1]) <= 1.0 + 1e-12)
    # weights integrate the physical cell area |x2| <= H exactly
    assert w.sum() == pytest.approx(2 * math.pi * 2.0, rel=1e-12)
