"""Kernel-view diagnostics: empirical kernel matrices, spectral-density sampling,
feature-map approximation error, the composed-RBF closed form, kernel PCA, and
frequency histograms.

These tools read raw cos/sin features (before batch normalization): only those
carry the unit-diagonal kernel interpretation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .numerics import Rng, as_matrix, sym_eig_topk
from .rff_layer import RffLayer

DENSITY_KINDS = ("rbf", "laplacian", "cauchy")


@dataclass
class SpectralDensity:
    """Frequency distribution of a shift-invariant kernel.

    kind 'rbf': Gaussian frequencies <-> kernel exp(-||z||^2 / (2 b^2));
    'laplacian': Cauchy frequencies <-> kernel exp(-||z||_1 / b);
    'cauchy': Laplace frequencies <-> kernel prod_j 1 / (1 + (z_j/b)^2).
    """

    kind: str
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in DENSITY_KINDS:
            raise ParameterError(f"unknown density kind {self.kind!r}, expected one of {DENSITY_KINDS}")
        if self.bandwidth <= 0:
            raise ParameterError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass
class KernelMatrix:
    values: np.ndarray
    layer_index: int = 0

    def validate(self, sym_tol: float = 1e-10, psd_tol: float = -1e-8,
                 diag_tol: float = 1e-10, check_diag: bool = True) -> None:
        """Assert symmetry, positive semi-definiteness, and (optionally) a unit diagonal."""
        K = self.values
        n = K.shape[0]
        sym_err = float(np.abs(K - K.T).max())
        if sym_err > sym_tol:
            raise DataError(f"kernel matrix asymmetric by {sym_err:.3g}")
        if check_diag:
            diag_err = float(np.abs(np.diag(K) - 1.0).max())
            if diag_err > diag_tol:
                raise DataError(f"kernel diagonal deviates from 1 by {diag_err:.3g}")
        vals, _ = sym_eig_topk(K, n)
        if float(vals[-1]) < psd_tol:
            raise DataError(f"kernel matrix not PSD: min eigenvalue {vals[-1]:.3g}")


def empirical_kernel(features, layer_index: int = 0) -> KernelMatrix:
    """K = S S^T over raw layer features; rows of S are unit norm, so diag(K) = 1."""
    S = as_matrix(features, "features")
    if S.shape[0] == 0:
        raise DataError("cannot build a kernel matrix from an empty feature set")
    return KernelMatrix(values=S @ S.T, layer_index=layer_index)


def sample_frequencies(density: SpectralDensity, D: int, d: int, rng: Rng) -> np.ndarray:
    """Draw a (D x d) frequency matrix from the density of the named kernel."""
    if D < 1 or d < 1:
        raise ParameterError(f"D and d must be positive, got D={D}, d={d}")
    b = density.bandwidth
    if density.kind == "rbf":
        return rng.normal((D, d), 0.0, 1.0 / b)
    if density.kind == "laplacian":
        u = rng.uniform_open(D * d)
        return (np.tan(np.pi * (u - 0.5)) / b).reshape(D, d)
    # cauchy kernel <-> Laplace-distributed frequencies (inverse CDF)
    u = rng.uniform_open(D * d)
    v = u - 0.5
    return (-np.sign(v) * np.log(1.0 - 2.0 * np.abs(v)) / b).reshape(D, d)


def closed_form_kernel(density: SpectralDensity, U, V) -> np.ndarray:
    """Exact kernel values k(u_i - v_i) for paired rows of U and V."""
    U = as_matrix(U, "U")
    V = as_matrix(V, "V")
    if U.shape != V.shape:
        raise ParameterError(f"point sets must have equal shapes, got {U.shape} and {V.shape}")
    z = U - V
    b = density.bandwidth
    if density.kind == "rbf":
        return np.exp(-np.sum(z * z, axis=1) / (2.0 * b * b))
    if density.kind == "laplacian":
        return np.exp(-np.sum(np.abs(z), axis=1) / b)
    return np.prod(1.0 / (1.0 + (z / b) ** 2), axis=1)


def feature_map(omega: np.ndarray, X) -> np.ndarray:
    """sqrt(1/D) [cos(X omega^T) | sin(X omega^T)] - the raw randomized map."""
    X = as_matrix(X, "points")
    f = X @ omega.T
    return np.sqrt(1.0 / omega.shape[0]) * np.concatenate([np.cos(f), np.sin(f)], axis=1)


@dataclass
class ApproxError:
    mean_error: float
    max_error: float


def rff_approx_error(density: SpectralDensity, D: int, U, V, rng: Rng) -> ApproxError:
    """|<psi(u), psi(v)> - k(u - v)| statistics over paired points, for a fresh
    D-frequency draw from the density."""
    U = as_matrix(U, "U")
    V = as_matrix(V, "V")
    if U.shape[0] == 0:
        raise ParameterError("need at least one point pair")
    omega = sample_frequencies(density, D, U.shape[1], rng)
    est = np.sum(feature_map(omega, U) * feature_map(omega, V), axis=1)
    exact = closed_form_kernel(density, U, V)
    err = np.abs(est - exact)
    return ApproxError(mean_error=float(err.mean()), max_error=float(err.max()))


def composed_rbf_oracle(k_inner: float, lam: float) -> float:
    """Two stacked RBF maps: the outer kernel exp(-lam ||a - b||^2) evaluated on
    unit-norm inner features reduces to exp(-2 lam (1 - k_inner))."""
    if not 0.0 <= k_inner <= 1.0:
        raise ParameterError(f"k_inner must lie in [0, 1], got {k_inner}")
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    return float(np.exp(-2.0 * lam * (1.0 - k_inner)))


@dataclass
class KpcaResult:
    coordinates: np.ndarray  # (n, k), columns ordered by descending eigenvalue
    eigenvalues: np.ndarray
    degenerate: bool


def kpca_project(K: KernelMatrix, k: int) -> KpcaResult:
    """Kernel PCA: double-center K, eigendecompose, scale projections by sqrt(eigenvalue).

    Sign convention: the largest-magnitude coordinate of each component is made
    positive, so outputs are reproducible. Near-zero or negative eigenvalues
    (numerical noise on a centered PSD matrix) yield zero columns.
    """
    Kv = K.values
    n = Kv.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    row_mean = Kv.mean(axis=1, keepdims=True)
    col_mean = Kv.mean(axis=0, keepdims=True)
    Kc = Kv - row_mean - col_mean + Kv.mean()
    Kc = (Kc + Kc.T) / 2.0
    if float(np.abs(Kc).max()) < 1e-12 * max(1.0, float(np.abs(Kv).max())):
        return KpcaResult(coordinates=np.zeros((n, k)), eigenvalues=np.zeros(k), degenerate=True)
    vals, vecs = sym_eig_topk(Kc, k)
    coords = vecs * np.sqrt(np.maximum(vals, 0.0))
    for j in range(k):
        i = int(np.argmax(np.abs(coords[:, j])))
        if coords[i, j] < 0:
            coords[:, j] = -coords[:, j]
    return KpcaResult(coordinates=coords, eigenvalues=vals, degenerate=False)


def omega_histogram(layer: RffLayer, dim_index: int, bins: int):
    """Histogram of one input-dimension column of omega over equal-width bins."""
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    if not 0 <= dim_index < layer.d_in:
        raise ParameterError(f"dim_index must be in [0, {layer.d_in}), got {dim_index}")
    counts, edges = np.histogram(layer.omega[:, dim_index], bins=bins)
    return edges, counts


# --- CSV export ------------------------------------------------------------


def kernel_to_csv_text(K: KernelMatrix) -> str:
    n = K.values.shape[0]
    lines = [",".join(f"s{j}" for j in range(n))]
    for row in K.values:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def kernel_from_csv_text(text: str, layer_index: int = 0) -> KernelMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    values = np.array([[float(tok) for tok in ln.split(",")] for ln in lines[1:]])
    return KernelMatrix(values=values, layer_index=layer_index)


def kpca_to_csv_text(result: KpcaResult, labels=None) -> str:
    k = result.coordinates.shape[1]
    header = ",".join(f"pc{j + 1}" for j in range(k))
    if labels is not None:
        header += ",label"
    lines = [header]
    for i, row in enumerate(result.coordinates):
        line = ",".join(repr(float(v)) for v in row)
        if labels is not None:
            line += f",{int(labels[i])}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def histogram_to_csv_text(edges: np.ndarray, counts: np.ndarray) -> str:
    lines = ["bin_left,bin_right,count"]
    for j in range(len(counts)):
        lines.append(f"{float(edges[j])!r},{float(edges[j + 1])!r},{int(counts[j])}")
    return "\n".join(lines) + "\n"
