"""Dense float64 helpers: shape-checked matmul, a portable PRNG, and a Jacobi eigensolver.

All matrices are plain 2-D float64 numpy arrays in row-major order. The PRNG is a
counter-based splitmix64 stream defined here (not the platform default) so that a
seed produces the same draws everywhere, independent of numpy's generator choices.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ParameterError, ShapeError, SymmetryError

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float64 array, copying only if needed."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def check_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains NaN or Inf")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check naming both operands."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    return a @ b


def _mix64_int(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


class Rng:
    """Deterministic counter-based generator (splitmix64 output function).

    The i-th 64-bit word of the stream is ``mix(seed + i * gamma)``, so draws are
    a pure function of (seed, position): identical seeds give identical streams.
    Instances are single-owner; never share one across threads.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._count = 0

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw uint64 words."""
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        return _mix64(np.uint64(self.seed) + idx * np.uint64(_GAMMA))

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on [0, 1)."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform_open(self, n: int) -> np.ndarray:
        """``n`` doubles uniform on (0, 1); safe to feed to log/tan inverses."""
        return ((self.raw(n) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, shape, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Gaussian draws via Box-Muller on the uniform stream."""
        size = int(np.prod(shape)) if not np.isscalar(shape) else int(shape)
        half = (size + 1) // 2
        u1 = self.uniform_open(half)
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:size]
        out = mean + std * z
        return out if np.isscalar(shape) else out.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n)."""
        return np.argsort(self.uniform(n), kind="stable")

    def derive(self, *tags) -> "Rng":
        """Child generator whose seed is a hash of this seed and the tags.

        Tags may be ints or strings; strings are hashed with FNV-1a, never with
        Python's salted ``hash``.
        """
        s = self.seed
        for tag in tags:
            t = _fnv1a64(tag) if isinstance(tag, str) else int(tag) & _MASK64
            s = _mix64_int((s ^ t) + _GAMMA)
        return Rng(s)


def gaussian_matrix(rows: int, cols: int, mean: float, stddev: float, rng: Rng) -> np.ndarray:
    """(rows x cols) matrix of i.i.d. N(mean, stddev^2) entries."""
    if rows < 1 or cols < 1:
        raise ParameterError(f"matrix dimensions must be positive, got {rows}x{cols}")
    if stddev < 0:
        raise ParameterError(f"stddev must be non-negative, got {stddev}")
    return rng.normal((rows, cols), mean, stddev)


def _jacobi_eigh(a: np.ndarray, tol: float = 1e-13, max_sweeps: int = 64):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as columns). Adequate for the
    diagnostic sizes used here (n up to a few thousand); not a BLAS replacement.
    """
    A = np.array((a + a.T) / 2.0, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    if n > 1:
        scale = max(1.0, float(np.abs(A).max()))
        skip = tol * scale
        for _ in range(max_sweeps):
            off = np.sqrt(np.sum(np.tril(A, -1) ** 2) * 2.0)
            if off <= tol * scale * n:
                break
            for p in range(n - 1):
                row_p = A[p]
                for q in range(p + 1, n):
                    apq = row_p[q]
                    if abs(apq) <= skip:
                        continue
                    tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                    if tau >= 0:
                        t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                    else:
                        t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    ap = A[p].copy()
                    aq = A[q].copy()
                    A[p] = c * ap - s * aq
                    A[q] = s * ap + c * aq
                    ap = A[:, p].copy()
                    aq = A[:, q].copy()
                    A[:, p] = c * ap - s * aq
                    A[:, q] = s * ap + c * aq
                    vp = V[:, p].copy()
                    vq = V[:, q].copy()
                    V[:, p] = c * vp - s * vq
                    V[:, q] = s * vp + c * vq
                    row_p = A[p]
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], V[:, order]


def sym_eig_topk(a, k: int):
    """Top-k eigenpairs of a symmetric matrix, eigenvalues descending.

    Eigenvectors are returned as unit-norm columns of an (n x k) matrix.
    """
    a = as_matrix(a, "eigensolver input")
    n, m = a.shape
    if n != m:
        raise ShapeError(f"eigensolver needs a square matrix, got {a.shape}")
    sym_tol = 1e-9 * max(1.0, float(np.abs(a).max())) if n else 0.0
    if n and float(np.abs(a - a.T).max()) > sym_tol:
        raise SymmetryError(f"matrix is not symmetric within {sym_tol:.3g}")
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    vals, vecs = _jacobi_eigh(a)
    return vals[:k], vecs[:, :k]
