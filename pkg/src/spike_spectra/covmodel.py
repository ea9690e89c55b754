"""Population covariance models in factored form Gamma = V diag(sqrt(eigs)) U.

A model is stored through its spike eigenvalues (the few large ones), its
bulk eigenvalues (bounded, otherwise arbitrary), a p x p orthogonal left
factor V and a p x (p+l) row-orthonormal right factor U, so that
Sigma = Gamma Gamma^T has exactly the stored eigenvalues with eigenvector
matrix V.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, OrderingError, OrthogonalityError, RankError

ORTHO_TOL = 1e-10


def _as_descending(values, name):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size and np.any(arr <= 0.0):
        raise DomainError(f"{name} eigenvalues must be positive")
    if np.any(np.diff(arr) > 0.0):
        raise OrderingError(f"{name} eigenvalues must be non-increasing")
    return arr


def _check_row_orthonormal(mat, name, tol=ORTHO_TOL):
    gram = mat @ mat.T
    err = np.max(np.abs(gram - np.eye(mat.shape[0])))
    if err > tol:
        raise OrthogonalityError(f"{name}: max |MM^T - I| = {err:.3e} exceeds {tol:g}")


@dataclass(frozen=True)
class PopulationCovariance:
    """Validated spiked covariance model.

    Attributes
    ----------
    spikes : (K,) ndarray
        Spike eigenvalues, non-increasing.
    bulk : (p-K,) ndarray
        Bulk eigenvalues, non-increasing.
    u_factor : (p, p+l) ndarray
        Right factor with orthonormal rows.
    v_factor : (p, p) ndarray
        Orthogonal eigenvector matrix of Sigma.
    """

    spikes: np.ndarray
    bulk: np.ndarray
    u_factor: np.ndarray
    v_factor: np.ndarray

    def __post_init__(self):
        spikes = _as_descending(self.spikes, "spike")
        bulk = _as_descending(self.bulk, "bulk")
        object.__setattr__(self, "spikes", spikes)
        object.__setattr__(self, "bulk", bulk)
        u = np.asarray(self.u_factor, dtype=float)
        v = np.asarray(self.v_factor, dtype=float)
        object.__setattr__(self, "u_factor", u)
        object.__setattr__(self, "v_factor", v)
        p = spikes.size + bulk.size
        if p == 0:
            raise DomainError("model needs at least one eigenvalue")
        if spikes.size and bulk.size and spikes.min() < bulk.max():
            raise OrderingError("smallest spike is below the largest bulk eigenvalue")
        if u.shape[0] != p or u.shape[1] < p:
            raise DomainError(f"u_factor must be p x (p+l) with l >= 0, got {u.shape}")
        if v.shape != (p, p):
            raise DomainError(f"v_factor must be {p} x {p}, got {v.shape}")
        _check_row_orthonormal(u, "u_factor")
        _check_row_orthonormal(v, "v_factor")
        # arrays are shared, not copied; freeze them against accidental writes
        u.setflags(write=False)
        v.setflags(write=False)
        spikes.setflags(write=False)
        bulk.setflags(write=False)

    @property
    def p(self) -> int:
        return self.spikes.size + self.bulk.size

    @property
    def l(self) -> int:
        return self.u_factor.shape[1] - self.p

    @property
    def n_spikes(self) -> int:
        return self.spikes.size

    @property
    def eigenvalues(self) -> np.ndarray:
        """All population eigenvalues, descending."""
        return np.concatenate([self.spikes, self.bulk])


@dataclass(frozen=True)
class FactorModelSpec:
    """Loading matrix and noise transform of a linear factor model."""

    loadings: np.ndarray
    noise_transform: np.ndarray = field(default=None)

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.loadings, dtype=float))
        object.__setattr__(self, "loadings", lam)
        t = self.noise_transform
        t = np.eye(lam.shape[0]) if t is None else np.asarray(t, dtype=float)
        if t.shape != (lam.shape[0], lam.shape[0]):
            raise DomainError(f"noise_transform must be {lam.shape[0]} x {lam.shape[0]}")
        object.__setattr__(self, "noise_transform", t)


def _resolve_factor(factor, p, cols, name):
    if isinstance(factor, str):
        if factor != "identity":
            raise ConfigError(f"unknown {name} factor spec: {factor!r}")
        return np.eye(p, cols)
    return np.asarray(factor, dtype=float)


def build_spiked_diagonal(spikes, bulk, u="identity", v="identity") -> PopulationCovariance:
    """Assemble a model from explicit spike/bulk lists and optional factors.

    ``u`` may be a p x (p+l) row-orthonormal matrix or ``"identity"``;
    ``v`` may be a p x p orthogonal matrix or ``"identity"``.
    """
    spikes = _as_descending(spikes, "spike")
    bulk = _as_descending(bulk, "bulk")
    p = spikes.size + bulk.size
    if p == 0:
        raise DomainError("spike/bulk vectors must be nonempty in total")
    u_mat = _resolve_factor(u, p, p, "u")
    v_mat = _resolve_factor(v, p, p, "v")
    return PopulationCovariance(spikes=spikes, bulk=bulk, u_factor=u_mat, v_factor=v_mat)


def build_intraclass(p: int, rho: float) -> PopulationCovariance:
    """Model with Sigma = (1-rho) I + rho * ones, one spike p*rho + (1-rho).

    The leading eigenvector is e/sqrt(p); the orthogonal complement is filled
    deterministically by the Householder reflection mapping e_1 to e/sqrt(p),
    and U = V^T so Gamma is the symmetric square root of Sigma.
    """
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    if p < 2:
        raise DomainError("intraclass model needs p >= 2")
    spike = np.array([p * rho + (1.0 - rho)])
    bulk = np.full(p - 1, 1.0 - rho)
    target = np.full(p, 1.0 / np.sqrt(p))
    w = target - np.eye(p)[:, 0]
    h = np.eye(p) - 2.0 * np.outer(w, w) / (w @ w)  # symmetric, H e_1 = e/sqrt(p)
    return PopulationCovariance(spikes=spike, bulk=bulk, u_factor=h.T, v_factor=h)


def _sign_fix(v, u):
    """Flip paired signs so each column of v has its largest-|.| entry positive."""
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[idx, np.arange(v.shape[1])] < 0.0, -1.0, 1.0)
    return v * signs, u * signs[:, None]


def build_factor_model(spec: FactorModelSpec) -> PopulationCovariance:
    """Orthogonalize Gamma = (loadings | noise_transform) into factored form.

    The number of loading columns determines the spike count; the remaining
    eigenvalues of loadings @ loadings^T + T @ T^T form the bulk.
    """
    lam, t = spec.loadings, spec.noise_transform
    p, k = lam.shape
    sv = np.linalg.svd(lam, compute_uv=False)
    if k == 0 or sv.min() <= sv.max() * 1e-12:
        raise RankError("loadings must have full column rank")
    gamma = np.concatenate([lam, t], axis=1)
    v, s, u = np.linalg.svd(gamma, full_matrices=False)
    if s.min() <= s.max() * 1e-12:
        raise RankError("(loadings | noise_transform) must have full row rank")
    v, u = _sign_fix(v, u)
    eigs = s ** 2
    return PopulationCovariance(spikes=eigs[:k], bulk=eigs[k:], u_factor=u, v_factor=v)


def gamma_matrix(model: PopulationCovariance) -> np.ndarray:
    """The p x (p+l) factor Gamma with Gamma Gamma^T = Sigma."""
    return (model.v_factor * np.sqrt(model.eigenvalues)) @ model.u_factor


def sigma_matrix(model: PopulationCovariance) -> np.ndarray:
    """Dense population covariance Sigma = V diag(eigs) V^T."""
    return (model.v_factor * model.eigenvalues) @ model.v_factor.T


def bulk_projector_matrix(model: PopulationCovariance) -> np.ndarray:
    """The (p+l) x (p+l) non-spiked part U_2^T diag(bulk) U_2."""
    u2 = model.u_factor[model.n_spikes:]
    return (u2.T * model.bulk) @ u2


def _eigenvalues_from_spec(spec, name):
    if isinstance(spec, dict):
        if spec.get("distribution") != "uniform":
            raise ConfigError(f"{name}: only the uniform eigenvalue distribution is supported")
        rng = np.random.default_rng(spec["seed"])
        draws = rng.uniform(spec["low"], spec["high"], int(spec["count"]))
        return np.sort(draws)[::-1]
    return np.asarray(spec, dtype=float)


def _factor_from_spec(spec, p, name):
    if spec is None or spec == "identity":
        return "identity"
    if isinstance(spec, dict) and "top_block" in spec:
        block = np.asarray(spec["top_block"], dtype=float)
        mat = np.eye(p)
        mat[: block.shape[0], : block.shape[1]] = block
        return mat
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    raise ConfigError(f"unsupported {name} factor spec: {spec!r}")


def model_from_spec(spec: dict) -> PopulationCovariance:
    """Build a model from a JSON-style specification dict.

    Kinds: ``spiked`` (spikes, bulk, optional u/v), ``intraclass`` (p, rho),
    ``factor`` (loadings, optional noise_transform, both inline matrices or
    {"diagonal": [...], "p": P} shorthands). Eigenvalue lists may be inline
    or {"distribution": "uniform", "low": .., "high": .., "count": .., "seed": ..}.
    """
    try:
        kind = spec["kind"]
    except (TypeError, KeyError):
        raise ConfigError("model spec must be a dict with a 'kind' key")
    if kind == "spiked":
        spikes = _eigenvalues_from_spec(spec["spikes"], "spikes")
        bulk = _eigenvalues_from_spec(spec["bulk"], "bulk")
        p = len(spikes) + len(bulk)
        v = _factor_from_spec(spec.get("v"), p, "v")
        u_spec = spec.get("u")
        if u_spec == "transpose_of_v":
            u = np.eye(p) if isinstance(v, str) else v.T
        else:
            u = _factor_from_spec(u_spec, p, "u")
        return build_spiked_diagonal(spikes, bulk, u=u, v=v)
    if kind == "intraclass":
        return build_intraclass(int(spec["p"]), float(spec["rho"]))
    if kind == "factor":
        loadings = spec["loadings"]
        if isinstance(loadings, dict):
            diag = np.asarray(loadings["diagonal"], dtype=float)
            lam = np.zeros((int(loadings["p"]), diag.size))
            lam[np.arange(diag.size), np.arange(diag.size)] = diag
        else:
            lam = np.asarray(loadings, dtype=float)
        noise = spec.get("noise_transform")
        if isinstance(noise, dict):
            noise = np.diag(np.asarray(noise["diagonal"], dtype=float))
        elif noise is not None:
            noise = np.asarray(noise, dtype=float)
        return build_factor_model(FactorModelSpec(loadings=lam, noise_transform=noise))
    raise ConfigError(f"unknown model kind {kind!r}")


def load_model(path) -> PopulationCovariance:
    """Read a model spec JSON file and build the model."""
    with open(path) as fh:
        return model_from_spec(json.load(fh))
