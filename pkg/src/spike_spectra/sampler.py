"""Data generation and sample covariance spectra.

Entries are i.i.d. standardized draws from a configurable law; the sample
covariance is S = (1/n) (Gamma X)(Gamma X)^T, optionally with column
centering applied between the X factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .covmodel import PopulationCovariance, gamma_matrix
from .errors import DomainError, NumericalError, ShapeError

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class EntryDistribution:
    """Standardized entry law: mean 0, variance 1, finite fourth moment.

    ``custom_table`` draws from a finite table of values/probabilities, which
    must itself be standardized; its fourth moment is derived from the table.
    """

    kind: str = "standard_normal"
    values: np.ndarray = field(default=None)
    probabilities: np.ndarray = field(default=None)

    _BUILTIN_GAMMA4 = {"standard_normal": 3.0, "uniform_sym": 9.0 / 5.0, "rademacher": 1.0}

    def __post_init__(self):
        if self.kind in self._BUILTIN_GAMMA4:
            return
        if self.kind != "custom_table":
            raise DomainError(f"unknown entry distribution {self.kind!r}")
        vals = np.asarray(self.values, dtype=float).ravel()
        probs = np.asarray(self.probabilities, dtype=float).ravel()
        if vals.shape != probs.shape or vals.size == 0:
            raise DomainError("custom_table needs matching values/probabilities")
        if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > 1e-12:
            raise DomainError("custom_table probabilities must sum to 1")
        mean = probs @ vals
        var = probs @ vals ** 2 - mean ** 2
        if abs(mean) > 1e-8 or abs(var - 1.0) > 1e-8:
            raise DomainError(f"custom_table must be standardized (mean {mean:.2e}, var {var:.6f})")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probabilities", probs)

    @property
    def gamma4(self) -> float:
        """Fourth moment E x^4 of the standardized law."""
        if self.kind == "custom_table":
            return float(self.probabilities @ self.values ** 4)
        return self._BUILTIN_GAMMA4[self.kind]


@dataclass(frozen=True)
class SampleSpectrum:
    """Full eigendecomposition of a sample covariance matrix.

    Eigenvalues are descending; eigenvector columns follow the deterministic
    sign convention (largest-magnitude component positive, first index wins
    ties). ``n`` is the sample size behind the covariance, ``p`` its dimension.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n: int
    p: int
    centered: bool = False

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())


def rep_seed(master_seed: int, rep_index: int) -> int:
    """Derived per-replication seed: SeedSequence((master_seed, rep_index)).

    Documented splitting rule for parallel replication loops; distinct
    rep indices yield statistically independent streams.
    """
    ss = np.random.SeedSequence((int(master_seed), int(rep_index)))
    return int(ss.generate_state(1, np.uint64)[0])


def draw_data(rows: int, cols: int, dist: EntryDistribution, seed: int) -> np.ndarray:
    """rows x cols matrix of i.i.d. draws from ``dist``, deterministic in seed."""
    if rows < 1 or cols < 1:
        raise DomainError("draw_data needs rows, cols >= 1")
    rng = np.random.default_rng(seed)
    shape = (rows, cols)
    if dist.kind == "standard_normal":
        return rng.standard_normal(shape)
    if dist.kind == "uniform_sym":
        return rng.uniform(-SQRT3, SQRT3, shape)
    if dist.kind == "rademacher":
        return rng.integers(0, 2, shape).astype(float) * 2.0 - 1.0
    return rng.choice(dist.values, size=shape, p=dist.probabilities)


def draw_data_grouped(row_groups, cols: int, seed: int) -> np.ndarray:
    """Stack row blocks drawn from distinct laws (two-group fourth moments).

    ``row_groups`` is a sequence of (row_count, EntryDistribution); blocks are
    drawn from one stream in order, so the result is deterministic in seed.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    for rows, dist in row_groups:
        sub = int(rng.integers(0, 2 ** 63 - 1))
        blocks.append(draw_data(rows, cols, dist, sub))
    return np.concatenate(blocks, axis=0)


def sample_covariance(model: PopulationCovariance, data: np.ndarray,
                      centered: bool = False) -> np.ndarray:
    """S = (1/n) Gamma X X^T Gamma^T, with optional column centering of X.

    ``data`` must have p+l rows. Centering inserts I - (1/n) 11^T between the
    X factors, i.e. subtracts the row means of Gamma X.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] != model.p + model.l:
        raise ShapeError(f"data must be {(model.p + model.l)} x n, got {data.shape}")
    y = gamma_matrix(model) @ data
    return covariance_from_observations(y, centered=centered)


def covariance_from_observations(y: np.ndarray, centered: bool = False) -> np.ndarray:
    """Sample covariance (1/n) Y Y^T of an observed p x n matrix."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ShapeError("observations must be a 2-d array (rows = variables)")
    n = y.shape[1]
    if centered:
        y = y - y.mean(axis=1, keepdims=True)
    s = y @ y.T / n
    return (s + s.T) / 2.0


def spectrum(cov: np.ndarray, n: int | None = None, centered: bool = False) -> SampleSpectrum:
    """Eigendecomposition service: descending eigenvalues, fixed-sign vectors.

    ``n`` defaults to p when the sample size behind the matrix is unknown.
    Eigenvalues in [-tol, 0) are clamped to zero so that p > n structural
    zeros never surface as -1e-16 artifacts.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ShapeError(f"covariance must be square, got {cov.shape}")
    scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
    asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    if asym > 1e-10 * scale:
        raise ShapeError(f"matrix is not symmetric: max asymmetry {asym:.3e}")
    try:
        vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1]
    clamp = 1e-8 * max(1.0, abs(vals[0])) if vals.size else 0.0
    vals[(vals < 0.0) & (vals >= -clamp)] = 0.0
    # sign convention: largest-|.| component positive; argmax takes the first
    # occurrence, which breaks ties by lowest index
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[idx, np.arange(vecs.shape[1])] < 0.0, -1.0, 1.0)
    vecs = vecs * signs
    p = cov.shape[0]
    return SampleSpectrum(eigenvalues=vals, eigenvectors=vecs,
                          n=int(n) if n is not None else p, p=p, centered=centered)


def load_csv_matrix(path) -> np.ndarray:
    """Read an observed p x n matrix from CSV (rows = variables)."""
    mat = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(mat, dtype=float)
