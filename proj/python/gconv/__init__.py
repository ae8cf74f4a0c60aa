"""Monotone X-elliptic and X-parabolic operators, sweeps and G-convergence checks."""

from ._gconv import (
    ClassParams,
    GconvError,
    Grid,
    MonotoneMap,
    VectorFieldFamily,
    __version__,
    beta_prime,
    extract_effective_coefficient_1d,
    homogenized_weight_1d,
    make_family,
    oscillating,
    p_laplacian,
    run_config,
    shifted,
    solve_elliptic,
    solve_parabolic,
    verify_structure,
)

__all__ = [
    "ClassParams",
    "GconvError",
    "Grid",
    "MonotoneMap",
    "VectorFieldFamily",
    "__version__",
    "beta_prime",
    "extract_effective_coefficient_1d",
    "homogenized_weight_1d",
    "make_family",
    "oscillating",
    "p_laplacian",
    "run_config",
    "shifted",
    "solve_elliptic",
    "solve_parabolic",
    "verify_structure",
]
