"""Propagating values and modes of open periodic waveguides.

The pipeline: triangulate the PML-extended periodic cell, assemble the
stretched quadratic pencil with P1 elements, linearize to a generalized
eigenvalue problem, solve near real shifts by shift-invert Arnoldi, and
filter the small-argument eigenvalues in the first Brillouin zone.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    DomainSpec,
    DofMap,
    Mesh,
    build_dof_map,
    build_structured_mesh,
    mesh_statistics,
)
from .pml import (  # noqa: F401
    ModeExponents,
    PmlProfile,
    dtn_coth_deviation,
    eval_s,
    hz_lower_bound_check,
    sigma_integral,
)
from .assembly import (  # noqa: F401
    AssembledSystem,
    QuadratureRule,
    RefractiveIndexMap,
    TRI_DEGREE4,
    TRI_DEGREE6,
    assemble_forms,
    assemble_h1_gram,
    garding_probe,
)
from .eigensolver import (  # noqa: F401
    EigenPair,
    LinearizedPencil,
    PropagatingValue,
    SolverConfig,
    check_pair_symmetry,
    filter_propagating,
    linearize,
    mode_field,
    solve_shift_invert,
)
from .slab import (  # noqa: F401
    AnalyticMode,
    SlabModeSpec,
    analytic_mode,
    dispersion_solve,
    eval_analytic_mode,
    l2_mode_error,
)
from .experiments import (  # noqa: F401
    ConvergenceReport,
    ExperimentConfig,
    convergence_orders,
    load_config,
    pml_robustness_sweep,
    run_experiment,
)
