"""Constant-step SGD on regularized depth-2 nets, with confinement
diagnostics, Langevin SDE simulation, and Gibbs-measure quantities."""

from .activations import ActivationProfile, activation_profile, parse_activation
from .bounds import (
    UnboundedActivationError,
    VillaniReport,
    glip_bound,
    grad_lower_bound,
    lambda_c,
    laplacian_upper_bound,
    v_s,
    verify_villani,
)
from .data import (
    IdxFile,
    SyntheticSpec,
    binary_pair,
    dataset_from_csv,
    dataset_to_csv,
    gen_synthetic,
    load_idx,
    parse_idx,
    save_idx,
)
from .gibbs import (
    GibbsLab,
    c_constant,
    c_restricted,
    epsilon_r,
    gibbs_lab_from_potential,
    gibbs_lab_from_spec,
    global_min_scan,
    lab_report,
    lambda_s_formula,
    partition_function,
    poincare_check,
    spectral_gap,
)
from .net_loss import (
    LabeledDataset,
    LossSpec,
    NetState,
    accuracy,
    exact_laplacian,
    forward,
    full_grad,
    risk,
)
from .sde import EnsembleSeries, SdeConfig, em_step, fit_rate, run_ensemble
from .sgd import DivergenceError, InitSpec, SgdConfig, Trajectory, run_sgd, sgd_step

__version__ = "0.1.0"

__all__ = [
    "ActivationProfile",
    "activation_profile",
    "parse_activation",
    "UnboundedActivationError",
    "VillaniReport",
    "glip_bound",
    "grad_lower_bound",
    "lambda_c",
    "laplacian_upper_bound",
    "v_s",
    "verify_villani",
    "IdxFile",
    "SyntheticSpec",
    "binary_pair",
    "dataset_from_csv",
    "dataset_to_csv",
    "gen_synthetic",
    "load_idx",
    "parse_idx",
    "save_idx",
    "GibbsLab",
    "c_constant",
    "c_restricted",
    "epsilon_r",
    "gibbs_lab_from_potential",
    "gibbs_lab_from_spec",
    "global_min_scan",
    "lab_report",
    "lambda_s_formula",
    "partition_function",
    "poincare_check",
    "spectral_gap",
    "LabeledDataset",
    "LossSpec",
    "NetState",
    "accuracy",
    "exact_laplacian",
    "forward",
    "full_grad",
    "risk",
    "EnsembleSeries",
    "SdeConfig",
    "em_step",
    "fit_rate",
    "run_ensemble",
    "DivergenceError",
    "InitSpec",
    "SgdConfig",
    "Trajectory",
    "run_sgd",
    "sgd_step",
]
