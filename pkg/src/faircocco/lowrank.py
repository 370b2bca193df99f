"""Low-rank Gram factorization and the fast proxy/statistic path.

A greedy pivoted incomplete Cholesky factorization builds G ~= L L^T with
kernel columns evaluated on demand, never materializing the N x N Gram
matrix.  The proxy of the centered approximation Lbar Lbar^T (Lbar = H L)
is represented implicitly through the push-through identity

    Lbar Lbar^T (Lbar Lbar^T + eps N I_N)^{-1}
        = Lbar (Lbar^T Lbar + eps N I_r)^{-1} Lbar^T

so every trace of a product of proxies reduces to r x r arithmetic after
O(r^2 N) cross products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DataError, NumericalError
from .kernels import KernelConfig
from .operators import DEGENERATE_NORM_TOL, FairnessStatistic, _clip_tiny_negative

__all__ = [
    "CholeskyFactor",
    "LowRankProxy",
    "incomplete_cholesky",
    "incomplete_cholesky_product",
    "proxy_lowrank",
    "trace_product",
    "score_lowrank",
]

DEFAULT_TOL = 1e-6
DEFAULT_R_MAX = 256

# pivot values below this magnitude are numerically zero; anything more
# negative means the kernel column oracle is inconsistent
_BREAKDOWN_TOL = -1e-10


@dataclass
class CholeskyFactor:
    """Partial factorization G ~= L L^T with Tr[G - L L^T] = residual_trace."""

    l: np.ndarray
    pivots: np.ndarray
    residual_trace: float
    tolerance: float

    @property
    def n(self) -> int:
        return self.l.shape[0]

    @property
    def rank(self) -> int:
        return self.l.shape[1]


def _rbf_column(data: np.ndarray, config: KernelConfig) -> Callable[[int], np.ndarray]:
    denom = 2.0 * config.bandwidth**2

    def column(i: int) -> np.ndarray:
        d2 = np.sum((data - data[i]) ** 2, axis=1)
        return np.exp(-d2 / denom)

    return column


def _icd(
    column: Callable[[int], np.ndarray],
    n: int,
    tol: float,
    r_max: int,
) -> CholeskyFactor:
    if tol <= 0:
        raise DataError(f"tolerance must be positive, got {tol!r}")
    if not 1 <= r_max <= n:
        raise DataError(f"r_max must be in [1, {n}], got {r_max}")
    # RBF diagonal is identically 1, so Tr[G] = n and the stopping rule
    # residual <= tol * Tr[G] reads residual <= tol * n
    d = np.ones(n)
    l = np.zeros((n, r_max))
    pivots: list[int] = []
    residual = float(n)
    rank = 0
    for j in range(r_max):
        if residual <= tol * n:
            break
        i = int(np.argmax(d))
        pivot = d[i]
        if pivot < _BREAKDOWN_TOL:
            raise NumericalError(f"negative pivot {pivot:.3e} at index {i}")
        if pivot <= 0.0:
            break
        k = column(i)
        if j:
            k = k - l[:, :j] @ l[i, :j]
        new = k / np.sqrt(pivot)
        l[:, j] = new
        pivots.append(i)
        rank = j + 1
        d = d - new**2
        d[i] = 0.0
        residual = float(max(d.sum(), 0.0))
    return CholeskyFactor(
        l=l[:, :rank].copy(),
        pivots=np.asarray(pivots, dtype=np.intp),
        residual_trace=residual,
        tolerance=tol,
    )


def incomplete_cholesky(
    data: np.ndarray,
    config: KernelConfig,
    tol: float = DEFAULT_TOL,
    r_max: int | None = None,
) -> CholeskyFactor:
    """Greedy pivoted factorization of the Gaussian Gram matrix of ``data``."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    n = arr.shape[0]
    if n < 1:
        raise DataError("need at least one sample")
    r = min(n, DEFAULT_R_MAX) if r_max is None else r_max
    return _icd(_rbf_column(arr, config), n, tol, r)


def incomplete_cholesky_product(
    a_data: np.ndarray,
    a_config: KernelConfig,
    y_data: np.ndarray,
    y_config: KernelConfig,
    tol: float = DEFAULT_TOL,
    r_max: int | None = None,
) -> CholeskyFactor:
    """Factorize the product kernel k_A * k_Y of the paired variable directly.

    Evaluating product-kernel columns on demand keeps the rank bounded by
    ``r_max`` instead of the rank product of two separate factorizations.
    """
    a = np.asarray(a_data, dtype=np.float64)
    y = np.asarray(y_data, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if a.shape[0] != y.shape[0]:
        raise DataError(f"size mismatch: {a.shape[0]} vs {y.shape[0]}")
    col_a = _rbf_column(a, a_config)
    col_y = _rbf_column(y, y_config)

    def column(i: int) -> np.ndarray:
        return col_a(i) * col_y(i)

    n = a.shape[0]
    r = min(n, DEFAULT_R_MAX) if r_max is None else r_max
    return _icd(column, n, tol, r)


@dataclass
class LowRankProxy:
    """Implicit proxy R = U W U^T with U = H L and W = (U^T U + eps N I_r)^{-1}."""

    u: np.ndarray
    w: np.ndarray
    epsilon: float
    n: int

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    def dense(self) -> np.ndarray:
        """Materialize R (testing and small-N use only)."""
        return self.u @ self.w @ self.u.T

    @property
    def hs_norm(self) -> float:
        return float(np.sqrt(max(trace_product([self, self]), 0.0)))


def proxy_lowrank(factor: CholeskyFactor, epsilon: float) -> LowRankProxy:
    """Implicit proxy of the centered reconstruction of ``factor``."""
    if epsilon <= 0:
        raise DataError(f"epsilon must be positive, got {epsilon!r}")
    n, r = factor.l.shape
    u = factor.l - factor.l.mean(axis=0, keepdims=True)
    if r == 0:
        return LowRankProxy(u=u, w=np.zeros((0, 0)), epsilon=epsilon, n=n)
    core = u.T @ u + epsilon * n * np.eye(r)
    try:
        w = cho_solve(cho_factor(core, lower=True, check_finite=False), np.eye(r))
    except LinAlgError as exc:  # cannot occur for epsilon > 0 and finite u
        raise NumericalError(f"low-rank core solve failed: {exc}") from exc
    w = 0.5 * (w + w.T)
    return LowRankProxy(u=u, w=w, epsilon=epsilon, n=n)


def trace_product(proxies: Sequence[LowRankProxy]) -> float:
    """Tr[R_1 R_2 ... R_m] for implicit proxies, in O(r^2 N + r^3) per factor."""
    if not proxies:
        raise DataError("trace_product needs at least one proxy")
    ns = {p.n for p in proxies}
    if len(ns) != 1:
        raise DataError(f"proxy sizes differ: {sorted(ns)}")
    if any(p.rank == 0 for p in proxies):
        return 0.0
    first = proxies[0]
    acc = first.w
    prev = first
    for p in proxies[1:]:
        acc = acc @ (prev.u.T @ p.u) @ p.w
        prev = p
    closing = prev.u.T @ first.u
    return float(np.sum(acc * closing.T))


def score_lowrank(
    notion: str,
    primary: LowRankProxy,
    secondary: LowRankProxy,
    conditioning: LowRankProxy | None = None,
) -> FairnessStatistic:
    """Normalized dependence score computed entirely through trace queries.

    Mirrors the dense score: for the conditional notions the numerator is the
    four-term expansion of Tr[(R_p - R_p R_c)(R_s - R_s R_c)] and each
    denominator factor is the residualized HS norm.
    """
    notion = notion.lower()
    if notion == "dp":
        if conditioning is not None:
            raise DataError("dp takes no conditioning proxy")
        value = trace_product([primary, secondary])
        den1 = primary.hs_norm
        den2 = secondary.hs_norm
    elif notion in ("eo", "cal"):
        if conditioning is None:
            raise DataError(f"{notion} requires a conditioning proxy")
        p, s, c = primary, secondary, conditioning
        value = (
            trace_product([p, s])
            - trace_product([p, s, c])
            - trace_product([p, c, s])
            + trace_product([p, c, s, c])
        )
        den1 = np.sqrt(
            max(
                trace_product([p, p])
                - 2.0 * trace_product([p, p, c])
                + trace_product([p, p, c, c]),
                0.0,
            )
        )
        den2 = np.sqrt(
            max(
                trace_product([s, s])
                - 2.0 * trace_product([s, s, c])
                + trace_product([s, s, c, c]),
                0.0,
            )
        )
    else:
        raise DataError(f"unknown notion {notion!r}")
    if den1 <= DEGENERATE_NORM_TOL or den2 <= DEGENERATE_NORM_TOL:
        return FairnessStatistic(
            value=_clip_tiny_negative(value, "statistic"),
            notion=notion,
            normalized_score=0.0,
            degenerate=True,
        )
    return FairnessStatistic(
        value=_clip_tiny_negative(value, "statistic"),
        notion=notion,
        normalized_score=_clip_tiny_negative(value / (den1 * den2), "normalized score"),
        degenerate=False,
    )
