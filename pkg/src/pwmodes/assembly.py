"""P1 finite element assembly of the stretched quadratic pencil.

Builds the three sparse complex matrices of the eigenvalue pencil
``A + alpha*B + alpha**2*C`` from the weak forms

    A[i,j] = int s dPj/dx1 dPi/dx1 + (1/s) dPj/dx2 dPi/dx2 - k^2 g s Pj Pi
    B[i,j] = -2i int s dPj/dx1 Pi
    C[i,j] = int s Pj Pi

together with the H1 Gram matrix P (unit coefficients).  The index g is
piecewise constant and sampled at element centroids, which is exact
because elements never straddle interfaces; the stretching s varies in
x2 and is integrated with a fixed symmetric triangle rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .geometry import DofMap, Mesh, triangle_areas
from .pml import PmlProfile, eval_s


class AssemblyError(ValueError):
    pass


class SingularElementError(AssemblyError):
    """A triangle with (near) zero area was encountered."""


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric triangle rule in barycentric coordinates.

    Weights sum to one and are scaled by the triangle area on use.
    """

    name: str
    points: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,)
    degree: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("quadrature weights must sum to 1")
        if self.degree < 4:
            raise ValueError("polynomial exactness degree must be >= 4")


def _orbit3(a):
    return [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]


def _orbit6(b, c):
    d = 1 - b - c
    return [(b, c, d), (c, d, b), (d, b, c), (c, b, d), (b, d, c), (d, c, b)]


TRI_DEGREE4 = QuadratureRule(
    name="dunavant4",
    points=np.array(
        _orbit3(0.445948490915965) + _orbit3(0.091576213509771)
    ),
    weights=np.array(
        [0.223381589678011] * 3 + [0.109951743655322] * 3
    ),
    degree=4,
)

TRI_DEGREE6 = QuadratureRule(
    name="dunavant6",
    points=np.array(
        _orbit3(0.249286745170910)
        + _orbit3(0.063089014491502)
        + _orbit6(0.310352451033785, 0.636502499121399)
    ),
    weights=np.array(
        [0.116786275726379] * 3
        + [0.050844906370207] * 3
        + [0.082851075618374] * 6
    ),
    degree=6,
)


@dataclass(frozen=True)
class RefractiveIndexMap:
    """Piecewise-constant index: axis-aligned rectangles over a unit background.

    Each region is ((x1min, x1max, x2min, x2max), gamma) with gamma >= 1.
    When ``medium_half_height`` is given, rectangles must stay inside
    |x2| <= medium_half_height (the index is 1 beyond the medium).
    """

    regions: tuple = ()
    medium_half_height: float = None

    def __post_init__(self):
        regions = tuple(
            ((float(r[0][0]), float(r[0][1]), float(r[0][2]), float(r[0][3])),
             float(r[1]))
            for r in self.regions
        )
        object.__setattr__(self, "regions", regions)
        for (x1a, x1b, x2a, x2b), g in regions:
            if g < 1:
                raise ValueError("gamma must be >= 1")
            if x1b <= x1a or x2b <= x2a:
                raise ValueError("degenerate index rectangle")
            if self.medium_half_height is not None:
                h0 = self.medium_half_height
                if x2a < -h0 - 1e-12 or x2b > h0 + 1e-12:
                    raise ValueError(
                        "index rectangle extends beyond the medium layer"
                    )
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                (a1, b1, c1, d1), _ = regions[i]
                (a2, b2, c2, d2), _ = regions[j]
                if a1 < b2 and a2 < b1 and c1 < d2 and c2 < d1:
                    raise ValueError("index rectangles overlap")

    def gamma_at(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.ones(np.broadcast(x1, x2).shape)
        for (x1a, x1b, x2a, x2b), g in self.regions:
            mask = (x1 >= x1a) & (x1 <= x1b) & (x2 >= x2a) & (x2 <= x2b)
            out[mask] = g
        return out


@dataclass(frozen=True)
class AssembledSystem:
    """Sparse matrices of the discrete pencil on the identified DOFs."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    P: sp.csr_matrix
    n_dofs: int


def _p1_geometry(mesh: Mesh):
    pts = mesh.nodes[mesh.triangles]  # (m, 3, 2)
    area = triangle_areas(mesh)
    if np.any(area < 1e-14):
        raise SingularElementError("triangle area below 1e-14")
    # grad lambda_i = (y_{i+1} - y_{i+2}, x_{i+2} - x_{i+1}) / (2 area)
    y = pts[:, :, 1]
    x = pts[:, :, 0]
    gx = (y[:, [1, 2, 0]] - y[:, [2, 0, 1]]) / (2 * area[:, None])
    gy = (x[:, [2, 0, 1]] - x[:, [1, 2, 0]]) / (2 * area[:, None])
    return pts, area, gx, gy


def _scatter(mesh: Mesh, dofs: DofMap, elem: np.ndarray, n: int, dtype):
    d = dofs.node_to_dof[mesh.triangles]  # (m, 3)
    rows = np.repeat(d[:, :, None], 3, axis=2)
    cols = np.repeat(d[:, None, :], 3, axis=1)
    mask = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix(
        (elem[mask].astype(dtype), (rows[mask], cols[mask])), shape=(n, n)
    ).tocsr()
    mat.sum_duplicates()
    return mat


def assemble_forms(
    mesh: Mesh,
    dofs: DofMap,
    pml: PmlProfile,
    index: RefractiveIndexMap,
    k: float,
    quad: QuadratureRule = TRI_DEGREE4,
) -> AssembledSystem:
    """Assemble A, B, C and the H1 Gram matrix on the identified DOFs."""
    if k < 0:
        raise ValueError("wavenumber must be nonnegative")
    pts, area, gx, gy = _p1_geometry(mesh)
    n = dofs.n_dofs

    bar = quad.points  # (nq, 3)
    w = quad.weights
    xq = np.einsum("qi,mid->mqd", bar, pts)  # (m, nq, 2)
    s_q = eval_s(pml, xq[:, :, 1])  # (m, nq) complex
    centroid = pts.mean(axis=1)
    gamma_e = index.gamma_at(centroid[:, 0], centroid[:, 1])

    w_s = s_q @ w  # int s / area
    w_inv = (1.0 / s_q) @ w
    # mass-type blocks: int s Pi Pj / area and int s Pi / area
    mass_s = np.einsum("mq,q,qi,qj->mij", s_q, w, bar, bar)
    vec_s = np.einsum("mq,q,qi->mi", s_q, w, bar)

    gxx = gx[:, :, None] * gx[:, None, :]
    gyy = gy[:, :, None] * gy[:, None, :]
    a_e = area[:, None, None] * (
        w_s[:, None, None] * gxx + w_inv[:, None, None] * gyy
    )
    a_e -= (k ** 2 * gamma_e * area)[:, None, None] * mass_s
    b_e = -2j * area[:, None, None] * vec_s[:, :, None] * gx[:, None, :]
    c_e = area[:, None, None] * mass_s

    A = _scatter(mesh, dofs, a_e, n, np.complex128)
    B = _scatter(mesh, dofs, b_e, n, np.complex128)
    C = _scatter(mesh, dofs, c_e, n, np.complex128)
    P = assemble_h1_gram(mesh, dofs, quad)
    return AssembledSystem(A=A, B=B, C=C, P=P, n_dofs=n)


def assemble_h1_gram(mesh: Mesh, dofs: DofMap,
                     quad: QuadratureRule = TRI_DEGREE4) -> sp.csr_matrix:
    """Stiffness plus mass with unit coefficients (Hermitian positive definite)."""
    pts, area, gx, gy = _p1_geometry(mesh)
    bar = quad.points
    w = quad.weights
    mass1 = np.einsum("q,qi,qj->ij", w, bar, bar)  # exact P1 mass / area
    g_e = area[:, None, None] * (
        gx[:, :, None] * gx[:, None, :]
        + gy[:, :, None] * gy[:, None, :]
        + mass1[None, :, :]
    )
    return _scatter(mesh, dofs, g_e, dofs.n_dofs, np.float64)


def garding_probe(sys: AssembledSystem, trials: int = 16, seed: int = 0) -> float:
    """Empirical lower bound on Re(x*Ax)/(x*Px) over random probe vectors.

    White-noise coefficient vectors put most of their energy in the
    highest mesh frequencies; this is a sanity report, not a proof.
    """
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(trials):
        x = rng.standard_normal(sys.n_dofs) + 1j * rng.standard_normal(sys.n_dofs)
        num = np.vdot(x, sys.A @ x).real
        den = np.vdot(x, sys.P @ x).real
        best = min(best, num / den)
    return float(best)


def structure_report(sys: AssembledSystem) -> dict:
    """Relative symmetry defects of the assembled pencil."""
    def relmax(m):
        return float(np.max(np.abs(m.data)) if m.nnz else 0.0)

    a_sym = relmax(sys.A - sys.A.T) / max(relmax(sys.A), 1e-300)
    c_sym = relmax(sys.C - sys.C.T) / max(relmax(sys.C), 1e-300)
    b_skew = relmax(sys.B + sys.B.T) / max(relmax(sys.B), 1e-300)
    p_herm = relmax((sys.P - sys.P.T).tocsr()) / max(relmax(sys.P), 1e-300)
    return {
        "A_asym_rel": a_sym,
        "C_asym_rel": c_sym,
        "B_skew_defect_rel": b_skew,
        "P_herm_defect_rel": p_herm,
    }


def write_matrix_market(path, matrix) -> None:
    """Dump a sparse matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), matrix.tocoo())
