"""Closed-form slab-waveguide reference for the homogeneous-layer experiment.

For a uniform core of index ``gamma_core`` in ``|x2| < 1/2`` surrounded
by vacuum, guided modes at transverse frequency ``q = sqrt(gamma k^2 - beta^2)``
and exterior decay rate ``p = sqrt(beta^2 - k^2)`` satisfy the usual
derivative-continuity conditions across ``x2 = +-1/2``:

    antisymmetric (sin):  q cot(q/2) = -p
    symmetric     (cos):  q tan(q/2) =  p

The longitudinal wavenumber is folded into the first Brillouin zone of a
2*pi-periodic cell as ``beta = alpha + shift`` with an integer shift, so
the solver returns the propagating value ``alpha`` directly.  Modes are
scaled to unit L2 norm over one period of the physical region
``|x2| <= 1`` (the error domain excludes the absorbing layers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import TRI_DEGREE4, QuadratureRule
from .eigensolver import interp_p1, nodal_values
from .geometry import REGION_INTERIOR, DofMap, Mesh, triangle_areas

_HALF_WIDTH = 0.5  # core occupies |x2| < 1/2
_ERROR_HALF_HEIGHT = 1.0  # L2 errors are taken over |x2| <= 1
_SCAN_POINTS = 4096
_BISECT_TOL = 1e-12


class SlabError(ValueError):
    pass


class NoGuidedModeError(SlabError):
    """The dispersion function has no sign change in the admissible band."""


class DegenerateFieldError(SlabError):
    """Numerical field has (near) zero norm."""


@dataclass(frozen=True)
class SlabModeSpec:
    k: float
    gamma_core: float
    shift: int
    parity: str  # "antisymmetric" (sin) or "symmetric" (cos)

    def __post_init__(self):
        if self.parity not in ("antisymmetric", "symmetric"):
            raise ValueError("parity must be 'antisymmetric' or 'symmetric'")
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")


def _qp(spec: SlabModeSpec, beta: float) -> tuple:
    q = math.sqrt(max(spec.gamma_core * spec.k ** 2 - beta ** 2, 0.0))
    p = math.sqrt(max(beta ** 2 - spec.k ** 2, 0.0))
    return q, p


def _dispersion(spec: SlabModeSpec, alpha: float) -> float:
    # continuous form: multiplied through by sin(q/2) resp. cos(q/2),
    # which vanish nowhere a root can hide
    q, p = _qp(spec, alpha + spec.shift)
    if spec.parity == "antisymmetric":
        return q * math.cos(q / 2) + p * math.sin(q / 2)
    return q * math.sin(q / 2) - p * math.cos(q / 2)


def dispersion_solve(spec: SlabModeSpec) -> float:
    """Locate the propagating value in [0, 1/2] by scan plus bisection.

    The admissible band requires k < |beta| < sqrt(gamma_core)*k with
    beta = alpha + shift; raises NoGuidedModeError when the dispersion
    function does not change sign there.
    """
    alphas = np.linspace(0.0, 0.5, _SCAN_POINTS)
    betas = np.abs(alphas + spec.shift)
    admissible = (betas > spec.k) & (betas < math.sqrt(spec.gamma_core) * spec.k)
    if not np.any(admissible):
        raise NoGuidedModeError("no admissible alpha in [0, 1/2]")
    vals = np.array([
        _dispersion(spec, a) if ok else np.nan
        for a, ok in zip(alphas, admissible)
    ])
    bracket = None
    for i in range(len(alphas) - 1):
        if admissible[i] and admissible[i + 1] and vals[i] * vals[i + 1] <= 0:
            bracket = (alphas[i], alphas[i + 1])
            break
    if bracket is None:
        raise NoGuidedModeError("dispersion function has no sign change")

    lo, hi = bracket
    flo = _dispersion(spec, lo)
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        fmid = _dispersion(spec, mid)
        if flo * fmid <= 0:
            hi = mid
        else:
            lo = mid
            flo = fmid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class AnalyticMode:
    """Solved propagating value with its unit-L2 normalization constant."""

    spec: SlabModeSpec
    alpha: float
    normalization: float

    @property
    def beta(self) -> float:
        return self.alpha + self.spec.shift


def analytic_mode(spec: SlabModeSpec) -> AnalyticMode:
    alpha = dispersion_solve(spec)
    q, p = _qp(spec, alpha + spec.shift)
    if spec.parity == "antisymmetric":
        core = 0.5 - math.sin(q) / (2 * q)
        amp = math.sin(q / 2)
    else:
        core = 0.5 + math.sin(q) / (2 * q)
        amp = math.cos(q / 2)
    outer_depth = _ERROR_HALF_HEIGHT - _HALF_WIDTH
    outer = amp ** 2 * (1 - math.exp(-2 * p * outer_depth)) / (2 * p)
    norm_sq = 2 * math.pi * (core + 2 * outer)
    return AnalyticMode(spec=spec, alpha=alpha, normalization=1.0 / math.sqrt(norm_sq))


def eval_analytic_mode(mode: AnalyticMode, x1, x2):
    """Evaluate the normalized mode u(x1, x2) for |x2| <= 1."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    q, p = _qp(mode.spec, mode.beta)
    ax = np.abs(x2)
    if mode.spec.parity == "antisymmetric":
        inner = np.sin(q * x2)
        outer = np.sign(x2) * math.sin(q / 2) * np.exp(-p * (ax - _HALF_WIDTH))
    else:
        inner = np.cos(q * x2)
        outer = math.cos(q / 2) * np.exp(-p * (ax - _HALF_WIDTH))
    profile = np.where(ax <= _HALF_WIDTH, inner, outer)
    return mode.normalization * profile * np.exp(1j * mode.beta * x1)


def interior_quadrature(mesh: Mesh, quad: QuadratureRule = TRI_DEGREE4) -> tuple:
    """Quadrature points and weights covering the physical region |x2| <= H."""
    sel = mesh.element_region == REGION_INTERIOR
    tris = mesh.triangles[sel]
    pts = mesh.nodes[tris]
    area = triangle_areas(mesh)[sel]
    xq = np.einsum("qi,mid->mqd", quad.points, pts)
    wq = area[:, None] * quad.weights[None, :]
    return xq.reshape(-1, 2), wq.ravel()


def gauge_invariant_distance(u_num: np.ndarray, u_ref: np.ndarray,
                             weights: np.ndarray) -> float:
    """L2 distance after unit normalization and optimal global phase."""
    nn = math.sqrt(float(np.sum(weights * np.abs(u_num) ** 2)))
    nr = math.sqrt(float(np.sum(weights * np.abs(u_ref) ** 2)))
    if nn < 1e-14:
        raise DegenerateFieldError("numerical field has near-zero L2 norm")
    if nr < 1e-14:
        raise DegenerateFieldError("reference field has near-zero L2 norm")
    inner = np.sum(weights * u_num * np.conj(u_ref)) / (nn * nr)
    # align the global phase and norm the difference directly; this stays
    # accurate when the fields nearly coincide
    phase = inner / abs(inner) if abs(inner) > 0 else 1.0
    diff = u_num / nn - phase * (u_ref / nr)
    return math.sqrt(float(np.sum(weights * np.abs(diff) ** 2)))


def l2_field_error(mesh: Mesh, dofs: DofMap, pair, reference,
                   quad: QuadratureRule = TRI_DEGREE4) -> float:
    """Phase-aligned L2 error of a computed pair against a reference field.

    ``reference`` is any callable (x1, x2) -> complex values; the error
    is evaluated with the assembly quadrature rule over |x2| <= H.
    """
    xq, wq = interior_quadrature(mesh, quad)
    nodal = nodal_values(dofs, pair.phi)
    u_num = interp_p1(mesh, nodal, xq[:, 0], xq[:, 1])
    u_num = u_num * np.exp(1j * pair.alpha * xq[:, 0])
    u_ref = reference(xq[:, 0], xq[:, 1])
    return gauge_invariant_distance(u_num, u_ref, wq)


def l2_mode_error(mesh: Mesh, dofs: DofMap, pair, mode: AnalyticMode,
                  quad: QuadratureRule = TRI_DEGREE4) -> float:
    """L2 mode error against the analytic slab mode."""
    return l2_field_error(
        mesh, dofs, pair, lambda x1, x2: eval_analytic_mode(mode, x1, x2), quad
    )
