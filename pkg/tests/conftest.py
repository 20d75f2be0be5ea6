import math

import numpy as np
import pytest

from pwmodes.assembly import RefractiveIndexMap, assemble_forms
from pwmodes.geometry import DomainSpec, build_dof_map, build_structured_mesh
from pwmodes.pml import PmlProfile

PERIOD = 2 * math.pi


@pytest.fixture(scope="session")
def exp1_domain():
    return DomainSpec(
        period=PERIOD,
        half_height=1.0,
        pml_thickness=0.5,
        medium_half_height=0.5,
        interface_x2=(-0.5, 0.5),
    )


@pytest.fixture(scope="session")
def exp1_index():
    return RefractiveIndexMap(
        regions=(((-PERIOD / 2, PERIOD / 2, -0.5, 0.5), 9.0),),
        medium_half_height=0.5,
    )


@pytest.fixture(scope="session")
def exp1_pml():
    return PmlProfile(H=1.0, delta=0.5, strength=40.0)


@pytest.fixture(scope="session")
def small_mesh(exp1_domain):
    # 340 unknowns: big enough to carry the guided modes, small enough
    # for dense reference solves
    mesh = build_structured_mesh(exp1_domain, nx=20, ny_per_unit=6)
    return mesh, build_dof_map(mesh)


@pytest.fixture(scope="session")
def small_system(small_mesh, exp1_pml, exp1_index):
    mesh, dofs = small_mesh
    return assemble_forms(mesh, dofs, exp1_pml, exp1_index, k=1.6)
