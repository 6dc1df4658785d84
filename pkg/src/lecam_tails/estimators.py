"""Tail-index estimators for laws with ``P(X <= x) ~ C * x**alpha`` as x -> 0+.

Both estimators look at the smallest observations.  ``hill`` is the Hill
estimator applied to ``Z = 1/X``; ``truncated_mle`` is the maximum
likelihood estimator of the pure power law ``(x/t)**alpha`` on ``(0, t]``
fitted to the observations below a threshold ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import DegenerateDataError, InsufficientDataError, InvalidParameterError


def default_k_exponent(rho: float) -> float:
    """Exponent ``2*rho/(2*rho+1)`` giving ``k = floor(n**exponent)``."""
    return 2.0 * rho / (2.0 * rho + 1.0)


@dataclass(frozen=True)
class EstimatorSpec:
    kind: Literal["hill", "truncated_mle"] = "hill"
    k_fraction_exponent: Optional[float] = None
    threshold_quantile: Optional[float] = None
    # absolute threshold for truncated_mle; overrides threshold_quantile
    threshold: Optional[float] = None
    # fixed order-statistic count for hill; overrides k_fraction_exponent
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("hill", "truncated_mle"):
            raise InvalidParameterError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "hill":
            if self.k is None:
                e = self.k_fraction_exponent
                if e is None or not 0.0 < e < 1.0:
                    raise InvalidParameterError("hill needs k_fraction_exponent in (0, 1) or k")
            elif int(self.k) != self.k or self.k < 1:
                raise InvalidParameterError("k must be a positive integer")
        else:
            if self.threshold is None:
                q = self.threshold_quantile
                if q is None or not 0.0 < q < 1.0:
                    raise InvalidParameterError(
                        "truncated_mle needs threshold_quantile in (0, 1) or threshold"
                    )
            elif not self.threshold > 0.0:
                raise InvalidParameterError("threshold must be positive")

    @classmethod
    def hill_default(cls, rho: float) -> "EstimatorSpec":
        return cls(kind="hill", k_fraction_exponent=default_k_exponent(rho))

    def order_count(self, n: int) -> int:
        if self.k is not None:
            return int(self.k)
        # nudge guards floor() against n**e landing just below an integer
        return int(math.floor(n ** self.k_fraction_exponent * (1.0 + 1e-12)))


def _clean(data):
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise InsufficientDataError("no data")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise InvalidParameterError("data must be finite and strictly positive")
    return x


def hill(data, k: int) -> float:
    """Hill estimate of alpha from the ``k`` smallest observations.

    On ``Z = 1/X`` this is ``k / sum_{i<=k} log(Z_(n-i+1) / Z_(n-k))``;
    written on X it uses the ``k+1`` smallest order statistics.
    """
    x = _clean(data)
    n = x.size
    if not 1 <= k < n:
        raise InsufficientDataError(f"k={k} must satisfy 1 <= k < n={n}")
    # ties are broken by index through the stable sort
    smallest = np.sort(x, kind="stable")[: k + 1]
    spacings = np.log(smallest[k]) - np.log(smallest[:k])
    total = math.fsum(spacings)
    if not total > 0.0:
        raise DegenerateDataError("log-spacings sum to zero (tied order statistics)")
    return k / total


def truncated_mle(data, *, threshold: float | None = None, threshold_quantile: float | None = None) -> float:
    x = _clean(data)
    if threshold is not None:
        t = float(threshold)
        below = x[x <= t]
    else:
        if threshold_quantile is None:
            raise InvalidParameterError("threshold or threshold_quantile required")
        # t is the j-th order statistic; the j-1 points before it enter the fit
        j = int(math.ceil(threshold_quantile * x.size))
        j = min(max(j, 1), x.size)
        srt = np.sort(x, kind="stable")
        t = float(srt[j - 1])
        below = srt[: j - 1]
    m = below.size
    if m == 0:
        raise InsufficientDataError("no observations below the threshold")
    total = math.fsum(np.log(t) - np.log(below))
    if not total > 0.0:
        raise DegenerateDataError("all observations equal the threshold")
    return m / total


def estimate(spec: EstimatorSpec, data) -> float:
    if spec.kind == "hill":
        n = np.asarray(data).size
        return hill(data, spec.order_count(n))
    return truncated_mle(data, threshold=spec.threshold, threshold_quantile=spec.threshold_quantile)
