"""Least-squares vs back-projection fidelity terms for ill-posed linear
inverse problems: operators, priors, solvers, rate estimation, benchmarks."""

from .errors import InvLabError
from .fidelity import FidelityTerm, default_step_size, fidelity_gradient, fidelity_value
from .linops import DenseOperator, SpectralSummary, apply, build_operator, spectral_summary
from .metrics import NoiseSpec, add_noise_for_snr, psnr, sparsify_top_k
from .priors import (
    L1Ball,
    OraclePrior,
    SoftThresholdProx,
    TikhonovProx,
    contraction_delta,
    oracle_project,
    project_l1_ball,
    soft_threshold,
    tikhonov_prox,
)
from .rate_lab import (
    EmpiricalRate,
    RateEstimate,
    empirical_rate,
    estimate_restricted_rates,
    monte_carlo_rho,
    monte_carlo_xi,
    rho_pair_value,
    sample_supports,
    theorem2_bound,
    warmup_rates,
)
from .rng import SeededRng
from .solvers import (
    AlistaWeights,
    IterateTrace,
    SolverConfig,
    alista_run,
    alista_weights,
    fista,
    pgd,
    proximal_gradient,
)
from .transforms import (
    HaarBasis,
    column_normalize,
    compose_with_basis,
    gaussian_sensing,
    haar_transform,
    sr_operator,
)

__version__ = "0.1.0"
