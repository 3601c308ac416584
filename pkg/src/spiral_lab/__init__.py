"""Multiple and set-indexed random sums in growing dimension, compared with Wiener spirals."""
from .increments import GeneratorSpec, SeedSpec, derive_seed, parse_generator, sample_increment, sample_increments, validate_conditions
from .metricspace import (
    Correspondence,
    FiniteMetricSpace,
    PointCloud,
    cloud_to_space,
    distortion,
    gh_exact,
    gh_upper_bound,
)
from .multisum import (
    IncrementTensor,
    PrefixTensor,
    deviation_sup_exact,
    ms_cloud,
    ms_gh_report,
    prefix_sums,
    q_second_moment_closed_form,
    q_stat,
)
from .setsum import MarkedSample, sample_marked, set_sum, si_cross_term, si_deviation_sup, si_gh_report
from .spiral import Dirac, Discrete, LebesgueCube, RectSet, lattice_net, rect, rho_classic, rho_mu, rho_ws_m, spiral_net
from .vcfam import (
    AxisRects,
    FiniteFamily,
    HalfPlanes,
    Intervals,
    LowerLeftRects,
    bracket_net_rects,
    covering_number_L1,
    shatters,
    traces,
    vc_dim,
)

__version__ = "0.1.0"
