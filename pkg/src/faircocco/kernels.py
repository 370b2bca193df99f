"""Gaussian RBF kernels, bandwidth selection, and Gram matrix algebra.

All dependence statistics downstream consume centered Gram matrices
``Gbar = H G H`` with ``H = I - (1/N) 11^T``.  Bandwidths come from the
median of pairwise Euclidean distances; an all-constant input has median
distance 0, in which case we fall back to bandwidth 1 and mark the kernel
degenerate instead of failing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DataError

__all__ = [
    "KernelConfig",
    "GramMatrix",
    "median_heuristic",
    "kernel_config_for",
    "rbf_kernel",
    "gram",
    "center",
    "extended_gram",
]


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian RBF kernel with a fixed bandwidth.

    ``degenerate`` records that the bandwidth came from the constant-input
    fallback rather than the median heuristic.
    """

    bandwidth: float
    family: str = "gaussian_rbf"
    degenerate: bool = False

    def __post_init__(self) -> None:
        if self.family != "gaussian_rbf":
            raise DataError(f"unsupported kernel family: {self.family!r}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise DataError(f"bandwidth must be a positive real, got {self.bandwidth!r}")


@dataclass
class GramMatrix:
    """N x N kernel matrix plus provenance.

    ``source_kernel`` is the :class:`KernelConfig` used to build the matrix,
    or a tuple of configs for a product (extended-variable) kernel.
    """

    entries: np.ndarray
    centered: bool
    source_kernel: KernelConfig | tuple[KernelConfig, ...] = field(repr=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def degenerate(self) -> bool:
        ks = self.source_kernel if isinstance(self.source_kernel, tuple) else (self.source_kernel,)
        return any(k.degenerate for k in ks)

    def validate(self, sym_tol: float = 1e-12, center_tol: float = 1e-8) -> None:
        """Check the structural invariants (symmetry, zero row sums if centered)."""
        g = self.entries
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DataError(f"Gram matrix must be square, got shape {g.shape}")
        asym = np.max(np.abs(g - g.T)) if g.size else 0.0
        if asym > sym_tol:
            raise DataError(f"Gram matrix asymmetric by {asym:.3e}")
        if self.centered and g.size:
            rowsum = np.max(np.abs(g.sum(axis=1)))
            if rowsum > center_tol * max(1.0, np.abs(g).max()):
                raise DataError(f"centered Gram matrix has row sums up to {rowsum:.3e}")


def _as_matrix(data: np.ndarray) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"expected 1-D or 2-D data, got ndim={arr.ndim}")
    return arr


def median_heuristic(data: np.ndarray) -> float:
    """Median of pairwise Euclidean distances over all i < j.

    Returns the fallback bandwidth 1.0 (with a warning) when the median
    distance is zero, which happens for constant input.
    """
    arr = _as_matrix(data)
    n = arr.shape[0]
    if n < 2:
        raise DataError(f"median heuristic needs at least 2 samples, got {n}")
    dists = pdist(arr, metric="euclidean")
    sigma = float(np.median(dists))
    if sigma <= 0.0:
        warnings.warn(
            "median pairwise distance is 0 (constant input); falling back to bandwidth 1",
            RuntimeWarning,
            stacklevel=2,
        )
        return 1.0
    return sigma


def kernel_config_for(data: np.ndarray) -> KernelConfig:
    """Fit a Gaussian kernel to ``data`` via the median heuristic.

    The degenerate-fallback case is recorded on the returned config so that
    downstream reports can flag it.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sigma = median_heuristic(data)
        degenerate = any(issubclass(w.category, RuntimeWarning) for w in caught)
    return KernelConfig(bandwidth=sigma, degenerate=degenerate)


def rbf_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """exp(-||x - y||^2 / (2 sigma^2)) for a single pair of points."""
    if sigma <= 0:
        raise DataError(f"bandwidth must be positive, got {sigma!r}")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    d2 = float(np.sum((x - y) ** 2))
    return float(np.exp(-d2 / (2.0 * sigma * sigma)))


def gram(data: np.ndarray, config: KernelConfig) -> GramMatrix:
    """Uncentered Gram matrix of the Gaussian kernel; unit diagonal."""
    arr = _as_matrix(data)
    d2 = squareform(pdist(arr, metric="sqeuclidean"), checks=False)
    entries = np.exp(-d2 / (2.0 * config.bandwidth**2))
    np.fill_diagonal(entries, 1.0)
    return GramMatrix(entries=entries, centered=False, source_kernel=config)


def _double_center(g: np.ndarray) -> np.ndarray:
    # H G H without materializing H
    row = g.mean(axis=1, keepdims=True)
    col = g.mean(axis=0, keepdims=True)
    grand = g.mean()
    return g - row - col + grand


def center(g: GramMatrix) -> GramMatrix:
    """Centered Gram matrix Gbar = H G H."""
    if g.centered:
        raise DataError("Gram matrix is already centered")
    return GramMatrix(
        entries=_double_center(g.entries),
        centered=True,
        source_kernel=g.source_kernel,
    )


def extended_gram(g_a_raw: GramMatrix, g_y_raw: GramMatrix) -> GramMatrix:
    """Centered Gram matrix of the product kernel on the paired variable.

    The product of two kernels is the kernel of the pair, so the Gram matrix
    is the elementwise (Hadamard) product of the two raw Gram matrices; the
    result is centered afterwards.
    """
    if g_a_raw.centered or g_y_raw.centered:
        raise DataError("extended_gram expects uncentered inputs")
    if g_a_raw.n != g_y_raw.n:
        raise DataError(f"size mismatch: {g_a_raw.n} vs {g_y_raw.n}")
    ka = g_a_raw.source_kernel if isinstance(g_a_raw.source_kernel, tuple) else (g_a_raw.source_kernel,)
    ky = g_y_raw.source_kernel if isinstance(g_y_raw.source_kernel, tuple) else (g_y_raw.source_kernel,)
    return GramMatrix(
        entries=_double_center(g_a_raw.entries * g_y_raw.entries),
        centered=True,
        source_kernel=ka + ky,
    )
