"""Spectral inference for sample covariance matrices with divergent spikes."""
from .covmodel import (FactorModelSpec, PopulationCovariance, build_factor_model,
                       build_intraclass, build_spiked_diagonal, gamma_matrix,
                       load_model, model_from_spec)
from .sampler import (EntryDistribution, SampleSpectrum, draw_data,
                      sample_covariance, spectrum)
from .asymptotics import (CltVariance, SpikeLimit, clt_variance,
                          quadratic_form_statistic, spike_ci,
                          spike_limit_closed_form, stieltjes_fixed_point,
                          taylor_terms)
from .twlaw import BulkLaw, bulk_edge, edge_statistic, tw1_cdf, tw1_quantile
from .spikecount import (SpikeInference, count_factors, estimate_k, f_hat,
                         initial_bound, sigma_hat)
from .eigcheck import (AlignmentReport, alignment, alignment_report,
                       fourth_moment_functional, sigma_sq_plugin,
                       subspace_alignment)
from .harness import ExperimentConfig, ExperimentResult, canned_config, emit, run

__version__ = "0.1.0"

__all__ = [
    "AlignmentReport", "BulkLaw", "CltVariance", "EntryDistribution",
    "ExperimentConfig", "ExperimentResult", "FactorModelSpec",
    "PopulationCovariance", "SampleSpectrum", "SpikeInference", "SpikeLimit",
    "alignment", "alignment_report", "build_factor_model", "build_intraclass",
    "build_spiked_diagonal", "bulk_edge", "canned_config", "clt_variance",
    "count_factors", "draw_data", "edge_statistic", "emit", "estimate_k",
    "f_hat", "fourth_moment_functional", "gamma_matrix", "initial_bound",
    "load_model", "model_from_spec", "quadratic_form_statistic", "run",
    "sample_covariance", "sigma_hat", "sigma_sq_plugin", "spectrum",
    "spike_ci", "spike_limit_closed_form", "stieltjes_fixed_point",
    "subspace_alignment", "taylor_terms", "tw1_cdf", "tw1_quantile",
]
