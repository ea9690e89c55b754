"""Eigenvector consistency diagnostics.

Squared alignments between population and sample spike eigenvectors,
subspace alignments for tied spikes, and the eigenvector fourth-moment
functional that feeds the variance plug-in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covmodel import PopulationCovariance
from .errors import DomainError
from .sampler import SampleSpectrum


@dataclass(frozen=True)
class AlignmentReport:
    """Per-spike and per-group alignment diagnostics for one spectrum."""

    per_spike: list
    subspaces: list
    fourth_moments: list
    plugin_outside_stated_conditions: bool = False


def _check_spike_index(model, i):
    if not 1 <= i <= model.n_spikes:
        raise DomainError(f"spike index {i} outside 1..{model.n_spikes}")


def alignment(model: PopulationCovariance, spec: SampleSpectrum, i: int) -> float:
    """Squared inner product (v_i^T xi_i)^2; sign-free by construction."""
    _check_spike_index(model, i)
    v = model.v_factor[:, i - 1]
    xi = spec.eigenvectors[:, i - 1]
    return float((v @ xi) ** 2)


def subspace_alignment(model: PopulationCovariance, spec: SampleSpectrum, group) -> float:
    """Worst-case projection of group population vectors onto the sample span.

    ``group`` is an iterable of 1-based spike indices (a multiplicity block).
    Returns min over k in the group of ||Xi_group^T v_k||^2, which equals
    :func:`alignment` for singletons and is exactly 1 for the full index set.
    """
    indices = [int(g) for g in group]
    if not indices:
        raise DomainError("group must be nonempty")
    if min(indices) < 1 or max(indices) > spec.p:
        raise DomainError(f"group indices must lie in 1..{spec.p}")
    xi = spec.eigenvectors[:, [g - 1 for g in indices]]
    best = np.inf
    for k in indices:
        v = model.v_factor[:, k - 1]
        best = min(best, float(np.sum((xi.T @ v) ** 2)))
    return best


def fourth_moment_functional(spec: SampleSpectrum, i: int) -> float:
    """sum_j xi_ij^4 of the i-th sample eigenvector (1-based)."""
    if not 1 <= i <= spec.p:
        raise DomainError(f"eigenvector index {i} outside 1..{spec.p}")
    return float(np.sum(spec.eigenvectors[:, i - 1] ** 4))


def sigma_sq_plugin(spec: SampleSpectrum, i: int, gamma4: float) -> float:
    """Spike-variance plug-in (gamma4 - 3) sum_j xi_ij^4 + 2.

    Stated for models whose right factor is the transpose of the eigenvector
    matrix with a common fourth moment; callers outside those conditions get
    the same arithmetic, flagged by :func:`alignment_report`.
    """
    if not np.isfinite(gamma4):
        raise DomainError("gamma4 must be finite")
    return float((gamma4 - 3.0) * fourth_moment_functional(spec, i) + 2.0)


def completeness(model: PopulationCovariance, spec: SampleSpectrum, i: int) -> float:
    """sum_j (v_j^T xi_i)^2, equal to 1 since V is an orthonormal basis."""
    if not 1 <= i <= spec.p:
        raise DomainError(f"eigenvector index {i} outside 1..{spec.p}")
    xi = spec.eigenvectors[:, i - 1]
    return float(np.sum((model.v_factor.T @ xi) ** 2))


def tied_spike_groups(model: PopulationCovariance, rel_tol: float = 1e-12) -> list:
    """Maximal runs of equal spikes as lists of 1-based indices."""
    groups = []
    current = []
    for i, value in enumerate(model.spikes, start=1):
        if current and not np.isclose(value, model.spikes[current[-1] - 1],
                                      rtol=rel_tol, atol=0.0):
            groups.append(current)
            current = []
        current.append(i)
    if current:
        groups.append(current)
    return groups


def alignment_report(model: PopulationCovariance, spec: SampleSpectrum,
                     gamma4: float | None = None) -> AlignmentReport:
    """Alignment, subspace, and fourth-moment diagnostics for all spikes."""
    per_spike = [(i, alignment(model, spec, i)) for i in range(1, model.n_spikes + 1)]
    groups = tied_spike_groups(model)
    subspaces = [(tuple(g), subspace_alignment(model, spec, g)) for g in groups]
    fourth = [fourth_moment_functional(spec, i) for i in range(1, model.n_spikes + 1)]
    outside = model.l != 0 or not np.allclose(
        model.u_factor, model.v_factor.T, atol=1e-10)
    return AlignmentReport(per_spike=per_spike, subspaces=subspaces,
                           fourth_moments=fourth,
                           plugin_outside_stated_conditions=bool(outside))
