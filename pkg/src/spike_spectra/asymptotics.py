"""Deterministic limit objects for spiked sample eigenvalues.

Covers the Stieltjes-transform fixed point of the non-spiked part, the
refined spike location theta solving m(1) + theta/mu = 0, its first-order
expansion, the CLT variances driven by the right singular vectors, and the
standardized random quadratic form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from .errors import DomainError, FixedPointError, NumericalError, OrthogonalityError

FP_DAMPING = 0.5
FP_MAX_ITER = 10_000
FP_STEP_TOL = 1e-12
FP_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SpikeLimit:
    """Refined limit of a spiked sample eigenvalue.

    ``theta`` solves the fixed-point relation for the given spike ``mu`` and
    bulk; ``correction`` is the first-order term of theta/mu - 1; ``residual``
    is |m_theta(1) + theta/mu| evaluated through the fixed-point solver.
    """

    theta: float
    mu: float
    correction: float
    residual: float


@dataclass(frozen=True)
class CltVariance:
    """Per-spike CLT variances and their cross terms.

    ``sigma_sq`` holds the K diagonal variances; ``cross`` is the full K x K
    limit covariance (diagonal = sigma_sq).
    """

    sigma_sq: np.ndarray
    cross: np.ndarray


def _bulk_array(bulk):
    return np.asarray(bulk, dtype=float).ravel()


def stieltjes_fixed_point(bulk, n: int, theta: float, z: float = 1.0) -> float:
    """Solve m = -1 / (z - (1/n) sum_j (mu_j/theta) / (1 + m mu_j/theta)).

    Damped fixed-point iteration from m0 = -1/z; converges when the iterate
    moves less than 1e-12 and the defining-equation residual is below 1e-10.
    Valid for theta well above the bulk scale p/n (the map is then a
    contraction near -1).
    """
    if theta <= 0.0:
        raise DomainError("theta must be positive")
    bulk = _bulk_array(bulk)
    scaled = bulk / theta
    m = -1.0 / z
    for _ in range(FP_MAX_ITER):
        denom = 1.0 + m * scaled
        if np.any(np.abs(denom) < 1e-300):
            raise FixedPointError("fixed-point iterate hit a pole of the trace term")
        trace = float(np.sum(scaled / denom)) / n
        m_next = -1.0 / (z - trace)
        step = abs(m_next - m)
        m = FP_DAMPING * m_next + (1.0 - FP_DAMPING) * m
        if step <= FP_STEP_TOL:
            denom = 1.0 + m * scaled
            trace = float(np.sum(scaled / denom)) / n
            residual = abs(m + 1.0 / (z - trace))
            if residual <= FP_RESIDUAL_TOL:
                return float(m)
    raise FixedPointError(
        f"no convergence after {FP_MAX_ITER} iterations (theta={theta}, z={z})")


def spike_limit_closed_form(mu_i: float, bulk, n: int) -> SpikeLimit:
    """theta = mu (1 + (1/n) sum_j mu_j / (mu - mu_j)) with residual check.

    Requires the spike to sit strictly above the bulk. The residual field
    re-derives theta's defining equation through the fixed-point solver.
    """
    bulk = _bulk_array(bulk)
    if mu_i <= 0.0:
        raise DomainError("mu must be positive")
    if bulk.size == 0:
        return SpikeLimit(theta=float(mu_i), mu=float(mu_i), correction=0.0, residual=0.0)
    if mu_i <= bulk.max():
        raise DomainError(f"spike {mu_i} is not separated from the bulk (max {bulk.max()})")
    theta = mu_i * (1.0 + float(np.sum(bulk / (mu_i - bulk))) / n)
    m = stieltjes_fixed_point(bulk, n, theta, z=1.0)
    residual = abs(m + theta / mu_i)
    f, f_i, _ = taylor_terms(mu_i, bulk, n)
    return SpikeLimit(theta=float(theta), mu=float(mu_i),
                      correction=float(f * f_i), residual=float(residual))


def taylor_terms(mu_i: float, bulk, n: int):
    """First-order expansion pieces: (f, f_i, mu (1 + f f_i)).

    f is the bulk mean, f_i = (p-K)/(n mu); the product approximates
    theta/mu - 1 with error O(p / (n mu^2)).
    """
    bulk = _bulk_array(bulk)
    if bulk.size == 0:
        raise DomainError("taylor_terms needs a nonempty bulk")
    if mu_i <= 0.0:
        raise DomainError("mu must be positive")
    f = float(bulk.mean())
    f_i = bulk.size / (n * mu_i)
    return f, f_i, float(mu_i * (1.0 + f * f_i))


def clt_variance(u_rows: np.ndarray, gamma4) -> CltVariance:
    """Spike CLT covariance from the right singular-vector rows.

    sigma_i^2 = sum_j (gamma4_j - 3) u_ij^4 + 2 on the diagonal and
    sigma_ij = sum_j (gamma4_j - 3) u_ij^2 u_jj'^2 off it; finite-p plug-in
    values (the limits are what the CLT states). ``gamma4`` is a scalar or a
    per-column vector.
    """
    u = np.atleast_2d(np.asarray(u_rows, dtype=float))
    norms = np.linalg.norm(u, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise OrthogonalityError("rows of u must be unit vectors")
    g4 = np.broadcast_to(np.asarray(gamma4, dtype=float), (u.shape[1],))
    weights = g4 - 3.0
    sq = u ** 2
    cross = (sq * weights) @ sq.T
    np.fill_diagonal(cross, cross.diagonal() + 2.0)
    cross = (cross + cross.T) / 2.0
    return CltVariance(sigma_sq=cross.diagonal().copy(), cross=cross)


def spike_ci(lambda_i: float, sigma_i: float, n: int, level: float = 0.95):
    """Confidence interval for theta from the pivot sqrt(n)(lam-theta)/theta.

    Inverting the pivot exactly keeps the interval positive:
    [lam / (1 + z s / sqrt(n)), lam / (1 - z s / sqrt(n))], with the upper end
    clamped to +inf when the denominator is not positive.
    """
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    if sigma_i < 0.0:
        raise DomainError("sigma must be nonnegative")
    if sigma_i == 0.0:
        return float(lambda_i), float(lambda_i)
    z = norm.ppf(0.5 + level / 2.0)
    half = z * sigma_i / np.sqrt(n)
    lower = lambda_i / (1.0 + half)
    upper = lambda_i / (1.0 - half) if half < 1.0 else np.inf
    return float(lower), float(upper)


def quadratic_form_statistic(w1, data, sigma1, theta: float, gamma4,
                             w2=None, *, sigma1_eigs=None, m_tilde=None):
    """Standardized quadratic form of X through the resolvent of Sigma_1.

    Computes sqrt(n)/s * (w1^T X (nI - X^T Sigma_1 X / theta)^{-1} X^T w1
    + m_theta(1)) for the one-vector form, or the cross form
    sqrt(n)/s12 * w1^T X (...)^{-1} X^T w2 when ``w2`` is given. ``sigma1``
    is the (p+l) x (p+l) non-spiked matrix, a 1-d array holding its diagonal,
    or None for the zero matrix. The resolvent is applied through one
    Cholesky factorization, never an explicit inverse.

    ``sigma1_eigs``/``m_tilde`` let Monte Carlo callers reuse the spectral
    data of a fixed sigma1 across replications.
    """
    w1 = np.asarray(w1, dtype=float).ravel()
    x = np.asarray(data, dtype=float)
    n = x.shape[1]
    if x.shape[0] != w1.size:
        raise DomainError(f"w1 length {w1.size} does not match data rows {x.shape[0]}")
    if abs(np.linalg.norm(w1) - 1.0) > 1e-8:
        raise OrthogonalityError("w1 must be a unit vector")
    g4 = np.broadcast_to(np.asarray(gamma4, dtype=float), (w1.size,))

    diagonal = None
    if sigma1 is not None:
        sigma1 = np.asarray(sigma1, dtype=float)
        if sigma1.ndim == 1:
            diagonal = sigma1
        if sigma1_eigs is None:
            sigma1_eigs = np.sort(diagonal) if diagonal is not None \
                else np.linalg.eigvalsh(sigma1)
        sigma1_eigs = np.asarray(sigma1_eigs, dtype=float)
        scale = float(np.max(np.abs(sigma1_eigs))) if sigma1_eigs.size else 0.0
        bulk_eigs = sigma1_eigs[sigma1_eigs > 1e-12 * max(scale, 1.0)]
    else:
        bulk_eigs = np.empty(0)
        scale = 0.0

    def apply_sigma1(vecs):
        if diagonal is not None:
            return diagonal[:, None] * vecs if vecs.ndim == 2 else diagonal * vecs
        return sigma1 @ vecs

    def check_in_kernel(w, name):
        if sigma1 is None or scale == 0.0:
            return
        err = np.linalg.norm(apply_sigma1(w)) / scale
        if err > 1e-8:
            raise OrthogonalityError(f"{name} is not in the kernel of sigma1 (residual {err:.2e})")

    check_in_kernel(w1, "w1")

    factor = None
    if sigma1 is not None and scale > 0.0:
        mat = n * np.eye(n) - x.T @ apply_sigma1(x) / theta
        try:
            factor = cho_factor(mat, lower=True, overwrite_a=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"resolvent matrix is not positive definite: {exc}") from exc

    def resolvent(rhs):
        # factor is None when sigma1 vanishes and the matrix is n * I
        return cho_solve(factor, rhs, check_finite=False) if factor is not None else rhs / n

    xw1 = x.T @ w1
    if w2 is None:
        if m_tilde is None:
            m_tilde = stieltjes_fixed_point(bulk_eigs, n, theta, z=1.0) if bulk_eigs.size \
                else -1.0
        s_sq = float(np.sum((g4 - 3.0) * w1 ** 4) + 2.0)
        q = float(xw1 @ resolvent(xw1))
        return np.sqrt(n) * (q + m_tilde) / np.sqrt(s_sq)

    w2 = np.asarray(w2, dtype=float).ravel()
    if abs(np.linalg.norm(w2) - 1.0) > 1e-8:
        raise OrthogonalityError("w2 must be a unit vector")
    if abs(w1 @ w2) > 1e-8:
        raise OrthogonalityError("w1 and w2 must be orthogonal")
    check_in_kernel(w2, "w2")
    s12_sq = float(np.sum((g4 - 3.0) * w1 ** 2 * w2 ** 2) + 1.0)
    q = float((x.T @ w2) @ resolvent(xw1))
    return np.sqrt(n) * q / np.sqrt(s12_sq)
