"""Spike-count estimation: edge-scale estimator, threshold iteration, K-hat.

The pipeline estimates the Tracy-Widom scale from the lower spectrum, forms
an initial upper bound for the largest non-spiked eigenvalue, grows it in
steps of quantile * log(n) * sigma_hat * n^{-2/3} while each step's window
still contains an eigenvalue, and counts the eigenvalues left above the
final threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import eigcheck
from .errors import (DegenerateSpectrumError, DomainError, IterationCapError,
                     NumericalError)
from .sampler import SampleSpectrum, covariance_from_observations, spectrum
from .asymptotics import spike_ci

ITERATION_CAP = 10 ** 6
DEFAULT_QUANTILE_VALUE = 2.02  # 99% point of the GOE Tracy-Widom law


def ceil_root(n: int, k: int) -> int:
    """Exact ceil(n ** (1/k)) without floating-point boundary surprises."""
    if n < 1 or k < 1:
        raise DomainError("ceil_root needs n, k >= 1")
    r = 1
    while r ** k < n:
        r += 1
    return r


@dataclass(frozen=True)
class SpikeInference:
    """Result of the spike-count pipeline."""

    k_hat: int
    p_end: float
    sigma_hat: float
    p0: float
    iterations: int
    theta_hats: list = field(default_factory=list)
    f_hat: float = float("nan")


def sigma_hat(eigenvalues, n: int, index_cut: int):
    """Edge-scale estimate from the spectrum below the ``index_cut`` anchor.

    With z0 = lam_{index_cut} + n^{-4/9}, returns
    ((-mean 1/(lam_i - z0)^3) / (mean 1/(lam_i - z0)^2)^3)^{1/3} over the
    retained indices i in [index_cut, min(p, n)] together with z0. Structural
    zeros beyond min(p, n) never enter the sums. All retained eigenvalues
    sit below z0, which keeps the ratio positive.
    """
    eigs = np.asarray(eigenvalues, dtype=float).ravel()
    if index_cut < 1:
        raise DomainError("index_cut must be >= 1")
    if eigs.size < index_cut + 1:
        raise DomainError(f"need at least {index_cut + 1} eigenvalues, got {eigs.size}")
    z0 = eigs[index_cut - 1] + float(n) ** (-4.0 / 9.0)
    last = min(eigs.size, n)
    retained = eigs[index_cut - 1:last]
    if retained.size == 0:
        raise DomainError("no eigenvalues retained below the cut")
    if np.any(retained >= z0):
        raise DomainError("retained eigenvalues must lie below z0 (input not descending?)")
    diff = retained - z0
    a = float(np.mean(1.0 / diff ** 3))
    b = float(np.mean(1.0 / diff ** 2))
    if b == 0.0:
        raise NumericalError("second-order sum vanished")
    return float((-a / b ** 3) ** (1.0 / 3.0)), float(z0)


def initial_bound(eigenvalues, n: int, index_multiplier: int = 15) -> float:
    """Initial threshold lam_{m * ceil(n^{1/6})} + log(n) * n^{-5/9}.

    ``index_multiplier`` = 1 gives the theoretical anchor; 15 is the
    practical default that starts the iteration lower in the spectrum and
    saves update steps.
    """
    eigs = np.asarray(eigenvalues, dtype=float).ravel()
    if index_multiplier < 1:
        raise DomainError("index_multiplier must be >= 1")
    index = index_multiplier * ceil_root(n, 6)
    if index > eigs.size:
        raise DomainError(f"anchor index {index} exceeds spectrum length {eigs.size}")
    return float(eigs[index - 1] + np.log(n) * float(n) ** (-5.0 / 9.0))


def _growth_factor(growth, n):
    if growth == "log_n":
        return float(np.log(n))
    value = float(growth)
    if value <= 0.0:
        raise DomainError("growth factor must be positive")
    return value


def estimate_k(spec: SampleSpectrum, index_multiplier: int = 15,
               quantile_value: float = DEFAULT_QUANTILE_VALUE, growth="log_n",
               sigma_cut: int | None = None, gamma4: float | None = None,
               ci_level: float = 0.95) -> SpikeInference:
    """Run the full threshold iteration on a sample spectrum.

    The window [p_m, p_m + increment] is closed on both ends; boundary ties
    count as inside. ``sigma_cut`` defaults to ceil(n^{1/6}). When ``gamma4``
    is given, per-spike variances use the eigenvector fourth-moment plug-in;
    otherwise the Gaussian floor sigma^2 = 2 is used for the intervals.
    """
    n, p = spec.n, spec.p
    if n < 8 or p < 8:
        raise DomainError("estimate_k needs n, p >= 8")
    eigs = spec.eigenvalues
    if eigs[0] <= 1e-12:
        raise DegenerateSpectrumError("sample spectrum is numerically zero")
    cut = sigma_cut if sigma_cut is not None else ceil_root(n, 6)
    sigma, _ = sigma_hat(eigs, n, cut)
    p0 = initial_bound(eigs, n, index_multiplier)
    increment = quantile_value * _growth_factor(growth, n) * sigma * float(n) ** (-2.0 / 3.0)

    ascending = np.sort(eigs)
    p_end = p0
    iterations = 0
    while True:
        lo = np.searchsorted(ascending, p_end, side="left")
        hi = np.searchsorted(ascending, p_end + increment, side="right")
        if hi - lo < 1:
            break
        p_end += increment
        iterations += 1
        if iterations >= ITERATION_CAP:
            raise IterationCapError(f"threshold iteration exceeded {ITERATION_CAP} steps")
    k_hat = int(np.sum(eigs > p_end))

    theta_hats = []
    for i in range(1, k_hat + 1):
        lam = float(eigs[i - 1])
        if gamma4 is not None:
            s_sq = eigcheck.sigma_sq_plugin(spec, i, gamma4)
        else:
            s_sq = 2.0
        lo_ci, hi_ci = spike_ci(lam, float(np.sqrt(s_sq)), n, ci_level)
        theta_hats.append({"index": i, "lambda": lam, "sigma_sq": float(s_sq),
                           "ci_low": lo_ci, "ci_high": hi_ci})

    denom = p - k_hat - p * k_hat / n
    fh = f_hat(spec, spec.trace, k_hat) if denom > 0.0 else float("nan")
    return SpikeInference(k_hat=k_hat, p_end=float(p_end), sigma_hat=float(sigma),
                          p0=float(p0), iterations=iterations,
                          theta_hats=theta_hats, f_hat=fh)


def f_hat(spec: SampleSpectrum, trace_total: float, k: int) -> float:
    """Bulk-mean estimator (trace - sum of the k spike eigenvalues) / (p - k - pk/n)."""
    n, p = spec.n, spec.p
    denom = p - k - p * k / n
    if denom <= 0.0:
        raise DomainError(f"p - k - pk/n = {denom} must be positive")
    spike_sum = float(spec.eigenvalues[:k].sum()) if k > 0 else 0.0
    return float((trace_total - spike_sum) / denom)


def count_factors(data: np.ndarray, centered: bool = False, **opts) -> SpikeInference:
    """Estimate the factor count of observed data (rows = variables).

    Forms the (optionally centered) sample covariance, decomposes it, and
    runs :func:`estimate_k`; keyword options are forwarded.
    """
    data = np.asarray(data, dtype=float)
    cov = covariance_from_observations(data, centered=centered)
    spec = spectrum(cov, n=data.shape[1], centered=centered)
    return estimate_k(spec, **opts)
