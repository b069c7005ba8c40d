"""Gauge-distance multifacility location and clustering with a fusion penalty.

Core pieces: gauge abstractions over compact convex sets (`gauges`), exact
and smoothed objective evaluation (`model`), smoothed DC solvers
(`solvers`), the deletion loop and warm-started parameter path (`ldca`), a
scikit-learn style estimator (`estimator`), independent correctness oracles
(`verify`), and dataset utilities (`data`).
"""

from .data import ari, gen_gauss4, gen_laplace3, gen_laplace4, load_csv, standardize
from .estimator import GaugeFusionClustering
from .gauges import (
    GaugeError,
    L1Ball,
    L2Ball,
    LinfBall,
    PolytopeVertices,
    WeightedL2Ball,
    make_gauge,
)
from .ldca import PathSchedule, geomspace, kmeanspp_init, ldca_k, run_path
from .model import (
    DataSet,
    assign,
    center_spread,
    effective_clusters,
    objective,
    smoothed_objective,
)
from .solvers import (
    SolverConfig,
    bdca_solve,
    constants,
    dca_solve,
    dca_update,
    grad_g,
    midca_solve,
    subgradient_h,
)
from .verify import (
    brute_force_global,
    check_center_optimality,
    descent_audit,
    value_stability_probe,
)

__version__ = "0.1.0"
