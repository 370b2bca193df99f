"""Proxy operator matrices and the normalized dependence statistics.

Given a centered Gram matrix ``Gbar``, the regularized proxy is

    R = Gbar (Gbar + eps N I)^{-1}

computed with a symmetric positive-definite solve (``Gbar`` and the shifted
matrix commute, so the solve yields R directly; no inverse is formed).  The
unconditional dependence statistic between two variables is ``Tr[R_1 R_2]``;
the conditional statistic residualizes both sides against the conditioning
proxy first:

    Tr[(R_1 - R_1 R_c)(R_2 - R_2 R_c)]

Scores normalize these traces by the Hilbert-Schmidt (Frobenius) norms of
the factors, so Cauchy-Schwarz pins them to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DataError, NumericalError
from .kernels import GramMatrix

__all__ = [
    "DEFAULT_EPSILON",
    "NOTIONS",
    "ProxyMatrix",
    "FairnessStatistic",
    "proxy",
    "stat_unconditional",
    "stat_conditional",
    "hs_norm",
    "faircocco_score",
]

# Regularization constant for the proxy solve.
DEFAULT_EPSILON = 1e-4

# Supported fairness notions: unconditional dependence of predictions on the
# attributes (dp), dependence conditioned on the outcome (eo), and outcome
# dependence conditioned on the predictions (cal).
NOTIONS = ("dp", "eo", "cal")

# Below this Frobenius norm a proxy is treated as the zero operator (constant
# variable); the exact-zero case is produced by centering a constant column.
DEGENERATE_NORM_TOL = 1e-10

_JITTER_RETRIES = 3


@dataclass
class ProxyMatrix:
    """Regularized normalized operator estimate R = Gbar(Gbar + eps N I)^-1."""

    r: np.ndarray
    epsilon: float
    n: int

    @property
    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.r, "fro"))

    @property
    def degenerate(self) -> bool:
        return self.hs_norm <= DEGENERATE_NORM_TOL


@dataclass
class FairnessStatistic:
    """Raw squared-HS-norm statistic plus its Cauchy-Schwarz-normalized score."""

    value: float
    notion: str
    normalized_score: float
    degenerate: bool = False


def proxy(gbar: GramMatrix, epsilon: float = DEFAULT_EPSILON) -> ProxyMatrix:
    """Proxy matrix of a centered Gram matrix via an SPD solve.

    Retries with a small diagonal jitter if the Cholesky factorization
    breaks down (which signals an upstream PSD violation).
    """
    if not gbar.centered:
        raise DataError("proxy expects a centered Gram matrix")
    if epsilon <= 0:
        raise DataError(f"epsilon must be positive, got {epsilon!r}")
    g = gbar.entries
    n = g.shape[0]
    shift = epsilon * n
    jitter = 0.0
    base_jitter = 1e-12 * max(np.trace(g) / max(n, 1), 1.0)
    for attempt in range(_JITTER_RETRIES + 1):
        b = g + (shift + jitter) * np.eye(n)
        try:
            factor = cho_factor(b, lower=True, check_finite=False)
            r = cho_solve(factor, g, check_finite=False)
            break
        except LinAlgError:
            jitter = base_jitter * (10.0**attempt)
    else:
        raise NumericalError(
            f"SPD solve failed after {_JITTER_RETRIES} jitter retries; "
            "input Gram matrix is not numerically PSD"
        )
    r = 0.5 * (r + r.T)
    return ProxyMatrix(r=r, epsilon=epsilon, n=n)


def _check_same_n(*proxies: ProxyMatrix) -> int:
    ns = {p.n for p in proxies}
    if len(ns) != 1:
        raise DataError(f"proxy matrices have mismatched sizes: {sorted(ns)}")
    return ns.pop()


def stat_unconditional(r_a: ProxyMatrix, r_b: ProxyMatrix) -> float:
    """Tr[R_a R_b], the squared-HS-norm unconditional dependence statistic."""
    _check_same_n(r_a, r_b)
    # both symmetric, so Tr[A B] = sum(A * B)
    return float(np.sum(r_a.r * r_b.r))


def _residual(r: ProxyMatrix, r_cond: ProxyMatrix) -> np.ndarray:
    return r.r - r.r @ r_cond.r


def stat_conditional(r_first: ProxyMatrix, r_ext: ProxyMatrix, r_cond: ProxyMatrix) -> float:
    """Conditional dependence statistic via the residualized factorization.

    Equals Tr[R_1 R_e - 2 R_1 R_e R_c + R_1 R_c R_e R_c]; ``r_ext`` must be
    the proxy of the extended (attribute, conditioning) product kernel.
    """
    _check_same_n(r_first, r_ext, r_cond)
    s1 = _residual(r_first, r_cond)
    s2 = _residual(r_ext, r_cond)
    return float(np.sum(s1 * s2.T))


def hs_norm(m: np.ndarray) -> float:
    """Hilbert-Schmidt (Frobenius) norm sqrt(Tr[M^T M])."""
    return float(np.linalg.norm(m, "fro"))


def _normalize(num: float, den1: float, den2: float) -> tuple[float, bool]:
    if den1 <= DEGENERATE_NORM_TOL or den2 <= DEGENERATE_NORM_TOL:
        return 0.0, True
    return num / (den1 * den2), False


def faircocco_score(
    notion: str,
    primary: ProxyMatrix,
    secondary: ProxyMatrix,
    conditioning: ProxyMatrix | None = None,
) -> FairnessStatistic:
    """Normalized dependence score for one fairness notion.

    dp:  primary = predictions proxy, secondary = attributes proxy.
    eo:  primary = predictions proxy, secondary = extended (A, Y) proxy,
         conditioning = outcome proxy.
    cal: primary = outcome proxy, secondary = extended (A, Yhat) proxy,
         conditioning = predictions proxy.

    A constant variable yields a zero proxy; its score is defined as 0 with
    the degenerate flag set (a constant carries no unfairness).
    """
    notion = notion.lower()
    if notion not in NOTIONS:
        raise DataError(f"unknown notion {notion!r}, expected one of {NOTIONS}")
    if notion == "dp":
        if conditioning is not None:
            raise DataError("dp takes no conditioning proxy")
        value = stat_unconditional(primary, secondary)
        score, degenerate = _normalize(value, primary.hs_norm, secondary.hs_norm)
    else:
        if conditioning is None:
            raise DataError(f"{notion} requires a conditioning proxy")
        _check_same_n(primary, secondary, conditioning)
        s1 = _residual(primary, conditioning)
        s2 = _residual(secondary, conditioning)
        value = float(np.sum(s1 * s2.T))
        score, degenerate = _normalize(value, hs_norm(s1), hs_norm(s2))
    value = _clip_tiny_negative(value, "statistic")
    score = _clip_tiny_negative(score, "normalized score")
    return FairnessStatistic(
        value=value, notion=notion, normalized_score=score, degenerate=degenerate
    )


def _clip_tiny_negative(x: float, what: str, tol: float = 1e-8) -> float:
    # the statistics are nonnegative in exact arithmetic; round-off may dip
    # a hair below zero, anything further signals a bug upstream
    if x < -tol:
        raise NumericalError(f"{what} is negative beyond round-off: {x!r}")
    return max(x, 0.0)
