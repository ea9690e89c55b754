"""Bulk-edge law: rightmost support endpoint, TW scale, and the GOE
Tracy-Widom distribution from an embedded high-resolution table.

The edge is found from the inverse Stieltjes parametrization
z(t) = 1/t + (1/n) sum_j mu_j / (1 - mu_j t) on t in (0, 1/max(bulk));
its unique stationary point t = d gives gamma_plus = z(d) and the cubic
scale sigma_n^3 = (1 + (1/n) sum_j (mu_j d / (1 - mu_j d))^3) / d^3.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, EdgeError

TW_TABLE_ENV = "SPIKE_SPECTRA_TW_TABLE"


@dataclass(frozen=True)
class BulkLaw:
    """Deterministic edge data of the non-spiked spectrum.

    ``gamma_plus`` is the rightmost endpoint of the limiting bulk spectrum,
    ``d`` the negated Stieltjes transform at the edge, ``sigma_n`` the
    Tracy-Widom scale, and ``ratio`` the dimension ratio (p-K)/n used.
    """

    gamma_plus: float
    d: float
    sigma_n: float
    ratio: float


def bulk_edge(bulk, n: int) -> BulkLaw:
    """Locate the bulk edge for the given bulk eigenvalues and sample size.

    The stationarity equation z'(t) = 0 is solved by a bracketed scalar
    root-find on (0, 1/max(bulk)); z' is strictly increasing there, so the
    root is unique. Note d * max(bulk) < 1 holds by construction.
    """
    bulk = np.asarray(bulk, dtype=float).ravel()
    if bulk.size == 0:
        raise DomainError("bulk must be nonempty")
    if np.any(bulk <= 0.0):
        raise DomainError("bulk eigenvalues must be positive")
    if n < 1:
        raise DomainError("n must be >= 1")
    mmax = float(bulk.max())

    def zprime(t):
        return -1.0 / t ** 2 + float(np.sum((bulk / (1.0 - bulk * t)) ** 2)) / n

    lo = 1e-8 / mmax
    hi = (1.0 - 1e-8) / mmax
    if zprime(lo) >= 0.0 or zprime(hi) <= 0.0:
        raise EdgeError("no stationary point in the admissible bracket")
    d = brentq(zprime, lo, hi, xtol=1e-14, rtol=8.9e-16)
    gamma_plus = 1.0 / d + float(np.sum(bulk / (1.0 - bulk * d))) / n
    ratio = bulk.size / n
    sigma_cubed = (1.0 + float(np.sum((bulk * d / (1.0 - bulk * d)) ** 3)) / n) / d ** 3
    return BulkLaw(gamma_plus=float(gamma_plus), d=float(d),
                   sigma_n=float(sigma_cubed ** (1.0 / 3.0)), ratio=float(ratio))


def edge_statistic(lambda_k1: float, law: BulkLaw, n: int) -> float:
    """Standardized largest non-spiked eigenvalue n^{2/3}(lam - gamma_+)/sigma."""
    return float(n ** (2.0 / 3.0) * (lambda_k1 - law.gamma_plus) / law.sigma_n)


class _TwTable:
    """Monotone-cubic interpolant over the embedded (x, CDF) table."""

    def __init__(self, x, cdf):
        order = np.argsort(x)
        x = np.asarray(x, dtype=float)[order]
        cdf = np.maximum.accumulate(np.clip(np.asarray(cdf, dtype=float)[order], 0.0, 1.0))
        self.x = x
        self.cdf_values = cdf
        self._interp = PchipInterpolator(x, cdf, extrapolate=False)

    def cdf(self, value):
        value = np.asarray(value, dtype=float)
        out = self._interp(np.clip(value, self.x[0], self.x[-1]))
        out = np.where(value < self.x[0], 0.0, out)
        out = np.where(value > self.x[-1], 1.0, out)
        return np.clip(out, 0.0, 1.0)

    def quantile(self, q):
        if not 0.0 < q < 1.0:
            raise DomainError("quantile level must lie in (0, 1)")
        if q < self.cdf_values[0] or q > self.cdf_values[-1]:
            raise DomainError(f"quantile level {q} outside the table range "
                              f"[{self.cdf_values[0]:.3e}, {self.cdf_values[-1]:.9f}]")
        lo, hi = self.x[0], self.x[-1]
        while hi - lo > 1e-9:
            mid = 0.5 * (lo + hi)
            if float(self._interp(mid)) < q:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


_TABLE = None


def _load_table() -> _TwTable:
    global _TABLE
    if _TABLE is None:
        path = os.environ.get(TW_TABLE_ENV)
        if path:
            data = np.loadtxt(path)
        else:
            ref = resources.files("spike_spectra").joinpath("data/tw1_cdf.txt")
            with resources.as_file(ref) as p:
                data = np.loadtxt(p)
        _TABLE = _TwTable(data[:, 0], data[:, 1])
    return _TABLE


def tw1_cdf(x):
    """GOE Tracy-Widom CDF (vectorized), table-interpolated."""
    result = _load_table().cdf(x)
    return float(result) if np.isscalar(x) else result


def tw1_quantile(q: float) -> float:
    """Inverse GOE Tracy-Widom CDF by bisection to 1e-9."""
    return float(_load_table().quantile(float(q)))
