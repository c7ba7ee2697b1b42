"""Non-Hermitian 1D band structures, exceptional points and bi-orthogonal
tight-binding models."""

from .model import ModelConfig, PotentialSpec, fold_to_zone, gauge_reduce
from .spectra import (BandSet, BlochMatrix, EigenSystem, build_bloch_matrix,
                      dispersion, free_folded_bands, order_and_track, solve_k,
                      solve_k_adjoint_pair)
from .perturbation import (GapReport, ep_response_gap, first_order_gap,
                           measure_gaps, second_order_gap,
                           second_order_gap_leading)
from .ep_analysis import (EpCandidate, EpReport, band_centroid, detect_eps,
                          point_gap_winding, pt_check, threshold_scan)
from .wannier import (PhaseConvention, TrialFunctions, UnitaryMixing,
                      WannierSet, build_wannier, default_trials,
                      diagonal_gauge, fix_phases, make_trials,
                      projection_unitary, region_decompose,
                      trials_from_wannier)
from .tightbinding import (ComparisonReport, HoppingTable, RelationReport,
                           TbModel, compare, hopping_decay_scan,
                           hoppings_from_bands, hoppings_real_space,
                           load_table, save_table, verify_relations)

__version__ = "0.1.0"

__all__ = [
    "ModelConfig", "PotentialSpec", "fold_to_zone", "gauge_reduce",
    "BandSet", "BlochMatrix", "EigenSystem", "build_bloch_matrix",
    "dispersion", "free_folded_bands", "order_and_track", "solve_k",
    "solve_k_adjoint_pair",
    "GapReport", "ep_response_gap", "first_order_gap", "measure_gaps",
    "second_order_gap", "second_order_gap_leading",
    "EpCandidate", "EpReport", "band_centroid", "detect_eps",
    "point_gap_winding", "pt_check", "threshold_scan",
    "PhaseConvention", "TrialFunctions", "UnitaryMixing", "WannierSet",
    "build_wannier", "default_trials", "diagonal_gauge", "fix_phases",
    "make_trials", "projection_unitary", "region_decompose",
    "trials_from_wannier",
    "ComparisonReport", "HoppingTable", "RelationReport", "TbModel",
    "compare", "hopping_decay_scan", "hoppings_from_bands",
    "hoppings_real_space", "load_table", "save_table", "verify_relations",
    "__version__",
]
