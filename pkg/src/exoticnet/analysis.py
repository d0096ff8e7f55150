"""Per-feature summary statistics and principal component analysis.

feature_stats runs over the raw column values, sentinels included, so
minima of -999 and sentinel-dragged means are reported as such -- the
opposite convention from the feature scaler, which excludes sentinels
before standardizing.  Both use the population standard deviation
(see dataset.STD_DDOF).

The eigensolver is a cyclic Jacobi rotation scheme: adequate and simple
for symmetric 30x30 covariance problems, and backend-accelerated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import STD_DDOF, Dataset, apply_standardizer, fit_standardizer
from .kernels import jacobi_kernel

JACOBI_TOL = 1e-12  # off-diagonal Frobenius norm
JACOBI_MAX_SWEEPS = 100


@dataclass
class FeatureStatsRow:
    name: str
    minimum: float
    maximum: float
    mean: float
    std: float
    unique_count: int


def feature_stats(d: Dataset) -> list[FeatureStatsRow]:
    if len(d) == 0:
        raise ValueError("feature_stats needs a nonempty dataset")
    rows = []
    for j, name in enumerate(d.feature_names):
        col = d.features[:, j]
        rows.append(
            FeatureStatsRow(
                name=name,
                minimum=float(col.min()),
                maximum=float(col.max()),
                mean=float(col.mean()),
                std=float(col.std(ddof=STD_DDOF)),
                unique_count=int(np.unique(col).size),
            )
        )
    return rows


def stats_table(rows: list[FeatureStatsRow]) -> str:
    """Tab-separated table in dataset column order."""
    lines = ["feature\tminimum\tmaximum\tmean\tstd\tunique_values"]
    for r in rows:
        lines.append(
            f"{r.name}\t{r.minimum:.12g}\t{r.maximum:.12g}\t"
            f"{r.mean:.12g}\t{r.std:.12g}\t{r.unique_count}"
        )
    return "\n".join(lines) + "\n"


def jacobi_eigh(sym: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as columns), each
    vector's largest-magnitude entry made positive.
    """
    sym = np.asarray(sym, dtype=np.float64)
    if sym.ndim != 2 or sym.shape[0] != sym.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {sym.shape}")
    if not np.allclose(sym, sym.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(sym).max())):
        raise ValueError("matrix is not symmetric")
    a = np.ascontiguousarray((sym + sym.T) / 2.0)
    v = np.eye(sym.shape[0])
    jacobi_kernel(a, v, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            vectors[:, j] = -col
    return values, vectors


@dataclass
class PcaResult:
    eigenvalues: np.ndarray  # top-k, descending, clamped at 0
    components: np.ndarray  # (k, n_features), unit-norm rows
    explained_fractions: np.ndarray  # eigenvalue / trace of covariance
    standardized: bool
    k: int


def pca(d: Dataset, k: int, standardized: bool = False) -> PcaResult:
    """Top-k eigenpairs of the feature covariance (population convention).

    ``standardized=True`` standardizes through the feature scaler first;
    the flag is recorded on the result either way.
    """
    if k > d.n_features:
        raise ValueError(f"k={k} exceeds feature count {d.n_features}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    data = d
    if standardized:
        data = apply_standardizer(fit_standardizer(d), d)
    x = data.features
    centered = x - x.mean(axis=0)
    cov = np.dot(centered.T, centered) / x.shape[0]
    values, vectors = jacobi_eigh(cov)
    trace = float(np.trace(cov))
    values = np.maximum(values, 0.0)
    return PcaResult(
        eigenvalues=values[:k],
        components=vectors[:, :k].T.copy(),
        explained_fractions=values[:k] / trace if trace > 0.0 else values[:k],
        standardized=standardized,
        k=k,
    )
