"""Pauli-crystal evidence from shot samples: alignment, post-selection, shells, histograms."""
from .alignment import (
    AlignmentResult,
    align_batch_2d,
    align_rigid,
    match_permutation_2d,
    match_permutation_exhaustive,
    optimal_rotation_angle,
    recenter,
    recover_pattern,
)
from .histogram import HistogramGrid, cartesian_edges, histogram, mollweide_edges, sphere_edges
from .mollweide import angles_to_unit, mollweide_inverse, mollweide_project, unit_to_angles, wrap_angle
from .postselection import (
    BandLimitedFit,
    EmptyPostselectionError,
    PostselectState,
    acceptance_probability,
    band_limit_for,
    cap_density_ratio,
    find_modes,
    fit_band_limited,
    locate_maximum,
    locate_maximum_band_limited,
    postselect_step,
    real_harmonics,
    remaining_points,
    run_postselection,
    start_postselection,
)
from .shells import angular_gaps, detect_shells, shell_counts, shell_membership

__all__ = [
    "AlignmentResult", "align_batch_2d", "align_rigid", "match_permutation_2d",
    "match_permutation_exhaustive", "optimal_rotation_angle", "recenter", "recover_pattern",
    "HistogramGrid", "cartesian_edges", "histogram", "mollweide_edges", "sphere_edges",
    "angles_to_unit", "mollweide_inverse", "mollweide_project", "unit_to_angles", "wrap_angle",
    "EmptyPostselectionError", "PostselectState", "acceptance_probability", "cap_density_ratio",
    "find_modes", "locate_maximum", "postselect_step", "remaining_points", "run_postselection",
    "start_postselection", "BandLimitedFit", "band_limit_for", "fit_band_limited",
    "locate_maximum_band_limited", "real_harmonics", "angular_gaps", "detect_shells", "shell_counts", "shell_membership",
]
