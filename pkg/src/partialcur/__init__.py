"""CUR-type low-rank approximation of partially observed matrices."""

from .baselines import CurBaselineResult, cur_e, cur_f, unbiased_estimate
from .curplus import CurPlusConfig, SolveReport, UnderdeterminedError, build_bases, cur_plus, solve_z
from .diagnostics import (
    ErrorMetrics,
    IncoherenceReport,
    error_metrics,
    hessian_min_eig,
    incoherence_mu,
    incoherence_mu_eta,
    incoherence_mu_hat,
    numerical_rank,
)
from .matcore import FactoredLowRank, ObservationSet, SampleSelection, apply_mask, as_dense, residual_on_mask
from .sampling import sample_entries, sample_rows_cols
from .spectra import (
    RankDeficientSampleError,
    pseudoinverse,
    spectral_norm_diff,
    top_r_left_eigvecs,
    truncated_svd,
)
from .synth import SpectrumSpec, gen_low_rank, gen_skewed

__version__ = "0.1.0"
