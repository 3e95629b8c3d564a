"""Joint deconvolution and blind source separation.

Estimates a mixing matrix A and sparse sources S from multichannel data
degraded per channel by a Fourier-domain mask or beam, via an alternating
sparsity-regularized solver, an optional primal-dual refinement stage,
reference baselines, a synthetic-data generator, alignment-aware metrics,
and a Monte-Carlo benchmark harness.
"""

from .bench import (
    SweepResult,
    SweepSpec,
    default_solver_config,
    evaluate_instance,
    realize_instance,
    report,
    run_sweep,
)
from .baselines import (
    forward_deconvolve,
    gmca,
    pipeline_forward_gmca,
    pipeline_mc_gmca,
    svt_complete,
)
from .metrics import (
    AlignmentResult,
    align,
    mixing_criterion,
    relative_error,
    scale_fit,
    sdr,
)
from .model import (
    KernelSet,
    MixingMatrix,
    SourceSet,
    SpectralData,
    SpectralSourceSet,
    add_noise,
    forward_observe,
)
from .refinement import (
    CondatVuParams,
    condat_vu_refine,
    default_params,
    fidelity_gradient,
    fidelity_objective,
    operator_lipschitz,
)
from .simulation import (
    ExperimentSpec,
    KernelSpec,
    gen_kernel,
    gen_mask,
    gen_masked_psf,
    gen_mixing,
    gen_psf,
    gen_sources,
    load_dataset,
    save_dataset,
)
from .solver import (
    SolverConfig,
    decgmca,
    eps_schedule,
    init_mixing,
    normalize_columns,
    threshold_sources,
    update_mixing,
    update_sources,
)
from .transforms import (
    WaveletCoeffs,
    dft_forward,
    dft_inverse,
    mad_sigma,
    starlet_decompose,
    starlet_reconstruct,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "WaveletCoeffs",
    "dft_forward",
    "dft_inverse",
    "starlet_decompose",
    "starlet_reconstruct",
    "mad_sigma",
    "SourceSet",
    "SpectralSourceSet",
    "MixingMatrix",
    "KernelSet",
    "SpectralData",
    "forward_observe",
    "add_noise",
    "SolverConfig",
    "decgmca",
    "update_sources",
    "update_mixing",
    "threshold_sources",
    "normalize_columns",
    "init_mixing",
    "eps_schedule",
    "CondatVuParams",
    "condat_vu_refine",
    "default_params",
    "fidelity_gradient",
    "fidelity_objective",
    "operator_lipschitz",
    "gmca",
    "svt_complete",
    "forward_deconvolve",
    "pipeline_mc_gmca",
    "pipeline_forward_gmca",
    "ExperimentSpec",
    "KernelSpec",
    "gen_sources",
    "gen_mixing",
    "gen_mask",
    "gen_psf",
    "gen_masked_psf",
    "gen_kernel",
    "save_dataset",
    "load_dataset",
    "AlignmentResult",
    "align",
    "mixing_criterion",
    "sdr",
    "scale_fit",
    "relative_error",
    "SweepSpec",
    "SweepResult",
    "run_sweep",
    "report",
    "evaluate_instance",
    "realize_instance",
    "default_solver_config",
]
