"""Regularity of functions and functionals from their eigenfunction expansions.

Modules: ``weights`` (weight sequences, associated function), ``spectrum``
(model Laplacians), ``transform`` (coefficients and spectral operators),
``synth`` (fixtures), ``classify`` (decision procedures) and ``cli``.
"""

from ._accel import backend_name
from .classify import (
    ClassificationReport,
    DecayFit,
    classify,
    definition_membership,
    dual_growth,
    fit_decay,
    gevrey_order,
    komatsu_membership,
    pairing_converges,
    smoothness_class,
)
from .spectrum import Manifold, ModelOperator, basis_eval, enumerate_levels, level_table, weyl_checks
from .synth import DecayProfile, delta_at, from_profile, poisson_kernel
from .transform import (
    Grid,
    SampledFunction,
    SpectralVector,
    apply_derivative,
    apply_power,
    forward,
    inverse,
    log_power_norm,
    plancherel_residual,
)
from .weights import (
    AssociatedFunction,
    WeightSequence,
    assoc_fn,
    check_conditions,
    gevrey_bounds_check,
    log_convex_regularize,
    make_weights,
)

__version__ = "0.1.0"
