"""Branching-process toolkit for the collaboration random graph.

Edges of the graph form a Crump-Mode-Jagers population; the degree of a
vertex is again a CMJ process.  The modules cover sampling single lives
(:mod:`~cmjlab.point_process`), simulating genealogies
(:mod:`~cmjlab.cmj_engine`) and whole graphs (:mod:`~cmjlab.collab_graph`),
the scalar equations of the model (:mod:`~cmjlab.malthus_solver`), moment
estimates and bounds (:mod:`~cmjlab.moment_lab`), and the tree coupling used
to bound moments (:mod:`~cmjlab.coupling_lab`).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CMJError,
    ConsistencyError,
    HorizonTooShortError,
    NumericalError,
    OutOfRangeError,
    ParameterError,
    PreconditionError,
    QuadratureError,
    ReliabilityError,
)
from .point_process import (  # noqa: E402
    Characteristic,
    DegreeMarks,
    EdgeLife,
    Kind,
    ModelParams,
    eta_at,
    eval_characteristic,
    pi_at,
    sample_degree_marks,
    sample_edge_life,
    xi_at,
)
from .cmj_engine import PopulationPath, decompose_check, run_cmj, total_born, z_phi  # noqa: E402
from .malthus_solver import (  # noqa: E402
    DEGREE_NOT_SUPERCRITICAL,
    NO_ROOT_IN_UNIT,
    NOT_SUPERCRITICAL,
    Regime,
    SolveReport,
    degree_mean,
    discount_m,
    extinction_probability,
    laplace_mu,
    mc_discounted_reproduction,
    solve_alpha,
    solve_beta,
    solve_extinction_z,
    solve_report,
)
from .collab_graph import (  # noqa: E402
    GraphPath,
    degree_cmj_crosscheck,
    degree_of,
    isolation_frequency,
    max_degree_series,
    run_collab,
)
from .moment_lab import (  # noqa: E402
    BoundReport,
    MomentSeries,
    bound_report,
    ck_bound,
    corollary_conditions,
    delta_report,
    lk_series,
    renewal_iterate,
)
from .coupling_lab import (  # noqa: E402
    CAP_HIT,
    FamilyTree,
    OffspringLaw,
    advance_births,
    births_up_to,
    gw_norm_check,
    gw_total_progeny,
    relabel_tree,
)

__all__ = [
    "__version__",
    "CMJError",
    "ConsistencyError",
    "HorizonTooShortError",
    "NumericalError",
    "OutOfRangeError",
    "ParameterError",
    "PreconditionError",
    "QuadratureError",
    "ReliabilityError",
    "Characteristic",
    "DegreeMarks",
    "EdgeLife",
    "Kind",
    "ModelParams",
    "eta_at",
    "eval_characteristic",
    "pi_at",
    "sample_degree_marks",
    "sample_edge_life",
    "xi_at",
    "PopulationPath",
    "decompose_check",
    "run_cmj",
    "total_born",
    "z_phi",
    "DEGREE_NOT_SUPERCRITICAL",
    "NO_ROOT_IN_UNIT",
    "NOT_SUPERCRITICAL",
    "Regime",
    "SolveReport",
    "degree_mean",
    "discount_m",
    "extinction_probability",
    "laplace_mu",
    "mc_discounted_reproduction",
    "solve_alpha",
    "solve_beta",
    "solve_extinction_z",
    "solve_report",
    "GraphPath",
    "degree_cmj_crosscheck",
    "degree_of",
    "isolation_frequency",
    "max_degree_series",
    "run_collab",
    "BoundReport",
    "MomentSeries",
    "bound_report",
    "ck_bound",
    "corollary_conditions",
    "delta_report",
    "lk_series",
    "renewal_iterate",
    "CAP_HIT",
    "FamilyTree",
    "OffspringLaw",
    "advance_births",
    "births_up_to",
    "gw_norm_check",
    "gw_total_progeny",
    "relabel_tree",
]
