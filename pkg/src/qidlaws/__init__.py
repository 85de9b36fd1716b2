"""Quasi-infinitely divisible laws: spectral-function arithmetic, Levy-Khinchine
characteristic functions, recovery of spectral pairs and convergence diagnostics."""

__version__ = "0.1.0"

from .bv import (
    Atom,
    JordanPair,
    PiecewiseBV,
    Segment,
    combine,
    eval_bv,
    hahn_jordan,
    limit_at_infinity,
    stieltjes_integral,
    total_variation,
    variation_function,
)
from .fourier import (
    GridTooCoarseError,
    InconclusiveError,
    TransformSamples,
    VanishingCFError,
    distinguished_log,
    fs_transform,
    gil_pelaez_cdf,
)
from .levy_khinchine import (
    LemmaKernelParts,
    SpectralPair,
    cf,
    cf_evaluator,
    chi_identity_rhs,
    kernel,
    kernel_via_W,
    khinchine_functional,
    lemma_parts,
    log_cf,
    psi,
    recover_gamma,
    recover_spectral_transform,
    sinc_kernel_bounds,
)
from .quadrature import DEFAULT_QUADRATURE, QuadratureError, QuadratureSettings
from .scenarios import ScenarioSpec, limit_pair, realize
from .convergence import (
    ConvergenceReport,
    check_difference_convergence,
    diagnose_basic,
    diagnose_qid_weak_limit,
    diagnose_weak_bv,
    tightness_check,
    verify_criterion,
)

__all__ = [
    "Atom",
    "ConvergenceReport",
    "DEFAULT_QUADRATURE",
    "GridTooCoarseError",
    "InconclusiveError",
    "JordanPair",
    "LemmaKernelParts",
    "PiecewiseBV",
    "QuadratureError",
    "QuadratureSettings",
    "ScenarioSpec",
    "Segment",
    "SpectralPair",
    "TransformSamples",
    "VanishingCFError",
    "cf",
    "cf_evaluator",
    "check_difference_convergence",
    "chi_identity_rhs",
    "combine",
    "diagnose_basic",
    "diagnose_qid_weak_limit",
    "diagnose_weak_bv",
    "distinguished_log",
    "eval_bv",
    "fs_transform",
    "gil_pelaez_cdf",
    "hahn_jordan",
    "kernel",
    "kernel_via_W",
    "khinchine_functional",
    "lemma_parts",
    "limit_at_infinity",
    "limit_pair",
    "log_cf",
    "psi",
    "realize",
    "recover_gamma",
    "recover_spectral_transform",
    "sinc_kernel_bounds",
    "stieltjes_integral",
    "tightness_check",
    "total_variation",
    "variation_function",
    "verify_criterion",
]
