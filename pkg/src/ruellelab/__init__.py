"""Numerical lab for the Ruelle (push-forward) and Beltrami (pull-back) operators of rational maps."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .rational_map import (  # noqa: F401
    INFINITY,
    RationalMap,
    critical_points,
    critical_values,
    derivative,
    evaluate,
    postcritical_set,
    preimages,
)
from .quadrature import Region, integrate, integrate_l1, pairing, teich_lower_bound  # noqa: F401
from .transfer import (  # noqa: F401
    CesaroSeries,
    LineField,
    QuadDifferential,
    beltrami_pullback,
    cesaro_average,
    cesaro_beltrami,
    duality_residual,
    pushforward,
    ruelle_apply,
    ruelle_power,
)
from .lattes import (  # noqa: F401
    canonical_quad_diff,
    flexible_lattes,
    invariant_line_field,
    lattes_residual,
    q_basis,
)
from .hyperbolic import MetricModel, bcond_ratio, density, hyperbolic_area  # noqa: F401
from .bergman import (  # noqa: F401
    Exhaustion,
    KernelContext,
    exhaustion_apply,
    exhaustion_defect,
    kernel,
    project,
    w_function,
)
from .ergodic import (  # noqa: F401
    Experiment,
    RayPoint,
    cesaro_decay,
    hk_family,
    isometry_ray_audit,
    ray_distance_curves,
    ray_point,
)
