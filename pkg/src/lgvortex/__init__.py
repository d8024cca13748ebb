"""Vortex backgrounds, zero-mode operators and their supersymmetric index."""
__version__ = "0.1.0"

from .background import (Background2D, RadialProfile, VortexParams, constant_background,
                         energy, field_strength, flux, sample_background, solve_profile)
from .bosons import (FluctuationPair, boson_to_fermion, bosonic_residual, fermion_to_boson,
                     subspace_overlap, translation_mode_overlap, translation_modes)
from .channels import ChannelCount, cross_check, radial_channel_oracle, total_kernel
from .config import RunConfig, parse_config
from .errors import *  # noqa: F401,F403
from .operators import (Layout, SparseOperator, StateVector, assemble_D, assemble_D_adjoint,
                        assemble_D_boson, assemble_bosonic_equations)
from .pipeline import RunManifest, emit_plot_data, run
from .spectral import IndexReport, SpectralReport, compute_index, smallest_singulars
from .susy import SusyBlocks, build_susy, grade_state, verify_algebra, verify_unbroken
