"""Blind subspace deconvolution of undercomplete convolutive mixtures.

The main entry points are :func:`lpa_deconvolve` (AR prediction followed
by independent subspace analysis) and :func:`tcc_deconvolve` (the
temporal-concatenation baseline), evaluated with :func:`amari_index`.
"""

from .arfit import ArModel, fit_ar, innovation
from .core import (DimensionError, FirFilter, LinearMap, ModelDims, Partition, TimeSeries,
                   apply_fir, apply_linear, compose_demixer)
from .datagen import (Scene, SourceSpec, gen_geom3d, gen_image_density, gen_letters,
                      gen_mixing, load_audio, make_scene)
from .isa import IsaResult, group_components, ica, pca_whiten, solve_isa
from .metrics import GlobalMatrix, amari_index, global_matrix, is_block_permutation
from .pipelines import DeconvResult, lpa_deconvolve, run_method, tcc_deconvolve

__version__ = "0.1.0"

__all__ = [
    "ArModel", "fit_ar", "innovation",
    "DimensionError", "FirFilter", "LinearMap", "ModelDims", "Partition", "TimeSeries",
    "apply_fir", "apply_linear", "compose_demixer",
    "Scene", "SourceSpec", "gen_geom3d", "gen_image_density", "gen_letters", "gen_mixing",
    "load_audio", "make_scene",
    "IsaResult", "group_components", "ica", "pca_whiten", "solve_isa",
    "GlobalMatrix", "amari_index", "global_matrix", "is_block_permutation",
    "DeconvResult", "lpa_deconvolve", "run_method", "tcc_deconvolve",
]
