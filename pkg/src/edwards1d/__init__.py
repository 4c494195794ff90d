"""One-dimensional Edwards polymer model: samplers, spectral tools, kernels, suites.

The package builds the infinite-length polymer measure numerically: exact
samplers for the underlying Bessel-type processes, a spectral solver for the
killed generator, evaluators for the kernel functions and the limit density,
and verification suites that test the construction's identities at desk scale.
"""

__version__ = "0.1.0"

from .samplers import (
    AbsorptionCapError,
    Path,
    RngStream,
    TwoSidedPath,
    sample_besq,
    sample_bessel3_bridge,
    sample_brownian,
    sample_Y,
    sample_Y_la,
)
from .localtime import (
    CompactProfile,
    LocalTimeField,
    local_time_field,
    occupation_counts,
    recentered_profile,
)
from .airy import AiryTable, airy, airy_deriv, airy_zeros
from .estimates import MCEstimate, combined_se, within_se
from .spectral import (
    SpectralBasis,
    build_basis,
    inner_nu,
    semigroup_apply,
    semigroup_mc,
)
from .kernels import (
    ChiCache,
    ConsistencyError,
    J_t,
    J_uv,
    K_constant,
    alpha_density,
    chi,
    default_w_grid,
    density_D1,
    density_DM,
    j_t_parts,
    kbar_airy_bound,
    kbar_rho,
    kernel_K,
)
from .afunc import (
    ModelParams,
    a_plus,
    a_total,
    default_l_grid,
    density_Ds,
    profile_ratio_batch,
)
from .experiments import (
    CheckResult,
    SuiteReport,
    excursion_area_series,
    verify_excursion_area,
    verify_kernel_shape,
    verify_limit_measure,
    verify_occupation_identity,
    verify_tilted_limit,
    verify_window_decay,
)

__all__ = [
    "__version__",
    "AbsorptionCapError",
    "Path",
    "RngStream",
    "TwoSidedPath",
    "sample_besq",
    "sample_bessel3_bridge",
    "sample_brownian",
    "sample_Y",
    "sample_Y_la",
    "AiryTable",
    "airy",
    "airy_deriv",
    "airy_zeros",
    "MCEstimate",
    "combined_se",
    "within_se",
    "CompactProfile",
    "LocalTimeField",
    "local_time_field",
    "occupation_counts",
    "recentered_profile",
    "SpectralBasis",
    "build_basis",
    "inner_nu",
    "semigroup_apply",
    "semigroup_mc",
    "ChiCache",
    "ConsistencyError",
    "J_t",
    "J_uv",
    "K_constant",
    "alpha_density",
    "chi",
    "default_w_grid",
    "density_D1",
    "density_DM",
    "excursion_area_series",
    "j_t_parts",
    "kbar_airy_bound",
    "kbar_rho",
    "kernel_K",
    "ModelParams",
    "a_plus",
    "a_total",
    "default_l_grid",
    "density_Ds",
    "profile_ratio_batch",
    "CheckResult",
    "SuiteReport",
    "verify_excursion_area",
    "verify_kernel_shape",
    "verify_limit_measure",
    "verify_occupation_identity",
    "verify_tilted_limit",
    "verify_window_decay",
]
