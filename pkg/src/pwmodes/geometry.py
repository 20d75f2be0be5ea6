"""Structured triangulation of the PML-extended periodic cell.

The computational domain is one period of the waveguide, extended by an
absorbing layer of thickness ``delta`` above and below:
``(-period/2, period/2) x (-(H+delta), H+delta)``.  The grid is axis
aligned, every material interface must fall on a grid line, and each
rectangular cell is split into two triangles along the same diagonal
(lower-left to upper-right) so that meshes are fully deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

REGION_INTERIOR = 0
REGION_PML_PLUS = 1
REGION_PML_MINUS = 2

REGION_NAMES = {
    REGION_INTERIOR: "interior",
    REGION_PML_PLUS: "pml_plus",
    REGION_PML_MINUS: "pml_minus",
}

# absolute slack used when snapping interface coordinates to grid lines
_ALIGN_TOL = 1e-9


class MeshError(ValueError):
    pass


class InterfaceMisalignedError(MeshError):
    """Requested resolution cannot place every interface on a grid line."""


class NonmatchingEdgesError(MeshError):
    """Left/right edge node sets differ in their x2 coordinates."""


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the periodic cell and its absorbing extension.

    ``interface_x1``/``interface_x2`` list the abscissae/ordinates of
    material jumps that the grid must resolve exactly.  The medium
    occupies ``|x2| <= medium_half_height``; outside it the refractive
    index is 1.
    """

    period: float
    half_height: float
    pml_thickness: float
    medium_half_height: float
    interface_x1: tuple = ()
    interface_x2: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "interface_x1", tuple(self.interface_x1))
        object.__setattr__(self, "interface_x2", tuple(self.interface_x2))
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.pml_thickness <= 0:
            raise ValueError("pml_thickness must be positive")
        if not 0 < self.medium_half_height <= self.half_height:
            raise ValueError("need 0 < medium_half_height <= half_height")
        top = self.half_height + self.pml_thickness
        for x1 in self.interface_x1:
            if abs(x1) > self.period / 2 + _ALIGN_TOL:
                raise ValueError(f"interface abscissa {x1} outside the cell")
        for x2 in self.interface_x2:
            if abs(x2) > top + _ALIGN_TOL:
                raise ValueError(f"interface ordinate {x2} outside the domain")

    @property
    def total_half_height(self) -> float:
        return self.half_height + self.pml_thickness


@dataclass
class Mesh:
    """Triangulation with region tags and boundary/periodicity flags.

    ``nodes`` is (n_nodes, 2); ``triangles`` is (n_triangles, 3) with
    counter-clockwise vertex order; ``element_region`` holds one of the
    REGION_* constants per triangle.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    element_region: np.ndarray
    left_edge: np.ndarray
    right_edge: np.ndarray
    dirichlet: np.ndarray
    # structured-grid metadata, kept for fast point location
    grid_x: np.ndarray = field(default=None, repr=False)
    grid_y: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class DofMap:
    """Global numbering after periodic identification and Dirichlet drop.

    ``node_to_dof[i]`` is the DOF index of node ``i`` or -1 when the
    node was eliminated (Dirichlet).  Right-edge nodes share the DOF of
    the left-edge node with the same x2.
    """

    node_to_dof: np.ndarray
    n_dofs: int


def build_structured_mesh(spec: DomainSpec, nx: int, ny_per_unit: int) -> Mesh:
    """Triangulate the PML-extended cell on a uniform grid.

    ``nx`` cells span one period in x1; ``ny_per_unit`` cells per unit
    length in x2.  Raises InterfaceMisalignedError when a material
    interface, the medium boundary, or the PML boundary cannot be
    placed on a grid line at this resolution.
    """
    if nx < 2:
        raise ValueError("nx must be at least 2")
    if ny_per_unit < 1:
        raise ValueError("ny_per_unit must be at least 1")

    top = spec.total_half_height
    hy = 1.0 / ny_per_unit
    ny_f = 2.0 * top * ny_per_unit
    ny = int(round(ny_f))
    if abs(ny_f - ny) > _ALIGN_TOL or ny < 2:
        raise InterfaceMisalignedError(
            f"domain height {2 * top} is not a multiple of spacing {hy}"
        )

    grid_x = -spec.period / 2 + (spec.period / nx) * np.arange(nx + 1)
    grid_y = -top + hy * np.arange(ny + 1)

    must_align_y = set(spec.interface_x2)
    must_align_y.update(
        (spec.medium_half_height, -spec.medium_half_height,
         spec.half_height, -spec.half_height)
    )
    for y in must_align_y:
        if np.min(np.abs(grid_y - y)) > _ALIGN_TOL:
            raise InterfaceMisalignedError(
                f"ordinate {y} does not lie on a grid line (spacing {hy})"
            )
    for x in spec.interface_x1:
        if np.min(np.abs(grid_x - x)) > _ALIGN_TOL:
            raise InterfaceMisalignedError(
                f"abscissa {x} does not lie on a grid line (nx={nx})"
            )

    # nodes in row-major order: index = j*(nx+1) + i; rows reuse the same
    # grid_x values so periodic partners match in x2 bit-for-bit
    xs, ys = np.meshgrid(grid_x, grid_y)
    nodes = np.column_stack([xs.ravel(), ys.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii = ii.ravel()
    jj = jj.ravel()
    ll = jj * (nx + 1) + ii
    lr = ll + 1
    ul = ll + (nx + 1)
    ur = ul + 1
    # same diagonal (lower-left to upper-right) in every cell
    tri_lower = np.column_stack([ll, lr, ur])
    tri_upper = np.column_stack([ll, ur, ul])
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = tri_lower
    triangles[1::2] = tri_upper

    centroid_y = nodes[triangles, 1].mean(axis=1)
    element_region = np.full(triangles.shape[0], REGION_INTERIOR, dtype=np.int8)
    element_region[centroid_y > spec.half_height] = REGION_PML_PLUS
    element_region[centroid_y < -spec.half_height] = REGION_PML_MINUS

    n_nodes = nodes.shape[0]
    col = np.tile(np.arange(nx + 1), ny + 1)
    row = np.repeat(np.arange(ny + 1), nx + 1)
    left = col == 0
    right = col == nx
    dirichlet = (row == 0) | (row == ny)
    assert n_nodes == (nx + 1) * (ny + 1)

    return Mesh(
        nodes=nodes,
        triangles=triangles,
        element_region=element_region,
        left_edge=left,
        right_edge=right,
        dirichlet=dirichlet,
        grid_x=grid_x,
        grid_y=grid_y,
    )


def build_dof_map(mesh: Mesh) -> DofMap:
    """Number the unknowns: identify right with left edge, drop Dirichlet."""
    n = mesh.n_nodes
    canonical = np.arange(n)

    left_idx = np.flatnonzero(mesh.left_edge)
    right_idx = np.flatnonzero(mesh.right_edge)
    if left_idx.size or right_idx.size:
        ly = mesh.nodes[left_idx, 1]
        ry = mesh.nodes[right_idx, 1]
        lorder = np.argsort(ly, kind="stable")
        rorder = np.argsort(ry, kind="stable")
        if ly.size != ry.size or not np.array_equal(ly[lorder], ry[rorder]):
            raise NonmatchingEdgesError(
                "left/right edge nodes do not match in x2"
            )
        canonical[right_idx[rorder]] = left_idx[lorder]

    node_to_dof = np.full(n, -1, dtype=np.int64)
    is_owner = (canonical == np.arange(n)) & ~mesh.dirichlet
    owners = np.flatnonzero(is_owner)
    node_to_dof[owners] = np.arange(owners.size)
    # followers inherit the owner's dof; Dirichlet owners stay -1
    follower = canonical != np.arange(n)
    node_to_dof[follower] = node_to_dof[canonical[follower]]
    node_to_dof[mesh.dirichlet] = -1

    return DofMap(node_to_dof=node_to_dof, n_dofs=int(owners.size))


def mesh_statistics(mesh: Mesh) -> dict:
    """hmax (longest edge), counts, and the minimal triangle angle."""
    p = mesh.nodes[mesh.triangles]  # (m, 3, 2)
    e = p[:, [1, 2, 0], :] - p  # edge i: from vertex i to vertex i+1
    lengths = np.linalg.norm(e, axis=2)
    hmax = float(lengths.max())

    # angle at vertex i between edges (i -> i+1) and (i -> i+2)
    f = p[:, [2, 0, 1], :] - p
    dot = np.einsum("mij,mij->mi", e, f)
    cosang = dot / (lengths * np.linalg.norm(f, axis=2))
    min_angle = float(np.degrees(np.arccos(np.clip(cosang, -1, 1)).min()))

    return {
        "hmax": hmax,
        "n_nodes": mesh.n_nodes,
        "n_triangles": mesh.n_triangles,
        "min_angle": min_angle,
    }


def triangle_areas(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def write_mesh_csv(mesh: Mesh, nodes_path, triangles_path) -> None:
    """Dump node and element tables for external inspection."""
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x1", "x2", "tags"])
        for i in range(mesh.n_nodes):
            tags = []
            if mesh.left_edge[i]:
                tags.append("left_edge")
            if mesh.right_edge[i]:
                tags.append("right_edge")
            if mesh.dirichlet[i]:
                tags.append("dirichlet")
            w.writerow([i, repr(mesh.nodes[i, 0]), repr(mesh.nodes[i, 1]),
                        ";".join(tags)])
    with open(triangles_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "n0", "n1", "n2", "region"])
        for t in range(mesh.n_triangles):
            a, b, c = mesh.triangles[t]
            w.writerow([t, a, b, c, REGION_NAMES[int(mesh.element_region[t])]])
