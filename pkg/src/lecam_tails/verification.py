"""Numerical checks of the two analytic claims about the pair (f0, f1).

* :func:`chi_square` integrates ``(f1 - f0)**2 / f0`` over the support.
* :func:`membership_certificate` computes the smallest remainder constant
  ``A`` for which f1, written as ``C1*alpha1*x**(alpha1-1)*(1 + r(x))``,
  satisfies ``|r(x)| <= A*x**beta1`` on its whole support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .densities import (
    BaseDensity,
    ClassParams,
    DensityPair,
    PerturbedDensity,
    build_schedule,
    bump,
    validate_pair,
)
from .errors import InvalidParameterError, LecamTailsError, QuadratureError
from .quadrature import DEFAULT_MAX_EVAL, integrate

CHI2_RTOL = 1e-10
# requested from the integrator, leaving a margin below CHI2_RTOL
_INTERNAL_RTOL = 1e-11

SUP_GRID_POINTS = 10_000
SUP_TOP_CANDIDATES = 5
_SUP_XTOL = 1e-14
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ChiSquareReport:
    n: int
    chi2: float
    n_times_chi2: float
    quadrature_error_estimate: float
    n_eval: int = 0

    @property
    def relative_error(self) -> float:
        if self.chi2 == 0.0:
            return 0.0 if self.quadrature_error_estimate == 0.0 else math.inf
        return self.quadrature_error_estimate / self.chi2


def chi2_integrand_u(pair: DensityPair):
    """Integrand of the chi-square divergence after ``u = x**alpha0``.

    Returns ``(g, u_points)`` where ``g`` is vectorised in ``u`` and bounded
    near 0, and ``u_points`` are the images of the bump breakpoints, the knot
    and the support ends.
    """
    f1 = pair.f1
    a0, C0 = pair.params.alpha0, pair.params.C0
    g = pair.schedule.gamma_tilde
    d = f1.delta_tilde
    scale = 1.0 / (C0 * a0 * a0)
    outer_value = pair.c2_gap**2 / C0
    c1a1 = f1.C1 * f1.alpha1
    c0a0 = C0 * a0

    def integrand(u):
        x = u ** (1.0 / a0)
        inner = x <= d
        # (f1 - f0) * x**(1 - alpha0), bounded as x -> 0
        w = c1a1 * x**g - c0a0
        if f1.has_bump:
            w = w + bump(np.minimum(x, d), d, f1.k) * x ** (1.0 - a0)
        return np.where(inner, scale * w * w, outer_value)

    x_points = [0.0, *f1.breakpoints, f1.x_max]
    u_points = [x**a0 for x in x_points]
    u_points[-1] = 1.0 / C0
    return integrand, u_points


def chi_square(pair: DensityPair, *, max_eval: int = DEFAULT_MAX_EVAL) -> ChiSquareReport:
    n = pair.schedule.n
    if not pair.schedule.perturbed:
        return ChiSquareReport(n=n, chi2=0.0, n_times_chi2=0.0, quadrature_error_estimate=0.0)
    integrand, u_points = chi2_integrand_u(pair)
    res = integrate(integrand, u_points, rtol=_INTERNAL_RTOL, max_eval=max_eval)
    if res.value < 0.0 or res.error > CHI2_RTOL * res.value:
        raise QuadratureError(
            f"chi-square at n={n}: error estimate {res.error:.3e} above tolerance"
        )
    return ChiSquareReport(
        n=n, chi2=res.value, n_times_chi2=n * res.value,
        quadrature_error_estimate=res.error, n_eval=res.n_eval,
    )


@dataclass(frozen=True)
class OrderScan:
    reports: list
    slope: float
    ratio: float
    """``max(n*chi2) / min(n*chi2)`` over the grid (nan when chi2 vanishes)."""


def _fit_slope(ns, values):
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ns) < 2 or np.any(values <= 0.0):
        return math.nan
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])


def _ratio(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0 or np.any(values <= 0.0):
        return math.nan
    return float(values.max() / values.min())


def _check_grid(n_grid):
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise InvalidParameterError("n_grid must be a non-empty increasing list of integers")
    return n_grid


class ScanError(LecamTailsError):
    def __init__(self, n, cause):
        super().__init__(f"n={n}: {cause}")
        self.n = n
        self.cause = cause


def _tagged(fn, n):
    try:
        return fn(n)
    except LecamTailsError as exc:
        raise ScanError(n, exc) from exc


def chi_square_order_scan(params: ClassParams, lam: float, nu: float, n_grid,
                          *, max_eval: int = DEFAULT_MAX_EVAL) -> OrderScan:
    n_grid = _check_grid(n_grid)

    def one(n):
        pair = validate_pair(build_schedule(params, n, lam, nu, warn_below_critical=False), params)
        return chi_square(pair, max_eval=max_eval)

    reports = parallel_map(lambda n: _tagged(one, n), n_grid)
    return OrderScan(
        reports=reports,
        slope=_fit_slope(n_grid, [r.chi2 for r in reports]),
        ratio=_ratio([r.n_times_chi2 for r in reports]),
    )


# --- membership -----------------------------------------------------------


@dataclass(frozen=True)
class MembershipCertificate:
    n: int
    A_min: float
    witness_x: float
    region: str
    epsilon_ok: bool
    C_gap: float
    A_ok: bool
    inner_sup: float
    outer_sup: float
    beta1: float


def _golden_max(h, a, b, xtol):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    hc, hd = h(c), h(d)
    while b - a > xtol:
        if hc >= hd:
            b, d, hd = d, c, hc
            c = b - _INVPHI * (b - a)
            hc = h(c)
        else:
            a, c, hc = c, d, hd
            d = a + _INVPHI * (b - a)
            hd = h(d)
    x = 0.5 * (a + b)
    return h(x), x


def sup_search(h, lo, hi, *, n_grid=SUP_GRID_POINTS, top=SUP_TOP_CANDIDATES, xtol=None):
    """Deterministic supremum of a vectorised ``h`` on ``[lo, hi]``.

    Log-spaced grid, then golden-section refinement around the ``top``
    largest local grid maxima.  Returns ``(value, x)``.
    """
    if xtol is None:
        xtol = _SUP_XTOL * hi
    xs = np.geomspace(lo, hi, n_grid) if lo > 0.0 else np.linspace(lo, hi, n_grid)
    xs[0], xs[-1] = lo, hi
    vals = np.asarray(h(xs), dtype=float)
    interior = (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])
    peaks = np.flatnonzero(interior) + 1
    peaks = peaks[np.argsort(-vals[peaks], kind="stable")][:top]

    best = int(np.argmax(vals))
    best_v, best_x = float(vals[best]), float(xs[best])

    def scalar_h(t):
        return float(h(np.array([t]))[0])

    for i in peaks:
        v, x = _golden_max(scalar_h, xs[i - 1], xs[i + 1], xtol)
        if v > best_v:
            best_v, best_x = v, x
    return best_v, best_x


def _inner_ratio(f1: PerturbedDensity, beta1):
    """``|r(x)| * x**(-beta1)`` below the knot, where r = bump / power part."""
    c = f1.C1 * f1.alpha1

    def h(x):
        x = np.asarray(x, dtype=float)
        if not f1.has_bump:
            return np.zeros_like(x)
        return np.abs(bump(x, f1.delta_tilde, f1.k)) * x ** (1.0 - f1.alpha1 - beta1) / c
    return h


def _outer_ratio(f1: PerturbedDensity, beta1):
    """``|r(x)| * x**(-beta1)`` above the knot."""
    log_ratio = math.log((f1.C2 * f1.alpha0) / (f1.C1 * f1.alpha1))
    shift = f1.alpha1 - f1.alpha0

    def h(x):
        x = np.asarray(x, dtype=float)
        r = np.expm1(log_ratio - shift * np.log(x))
        return np.abs(r) * x ** (-beta1)
    return h


def remainder(f1: PerturbedDensity, x):
    """Relative remainder ``r(x) = f1(x) / (C1*alpha1*x**(alpha1-1)) - 1``."""
    x = np.asarray(x, dtype=float)
    d = f1.delta_tilde
    xi = np.minimum(x, d)
    inner = bump(xi, d, f1.k) / f1.power_part(xi) if f1.has_bump else np.zeros_like(x)
    log_ratio = math.log((f1.C2 * f1.alpha0) / (f1.C1 * f1.alpha1))
    outer = np.expm1(log_ratio - (f1.alpha1 - f1.alpha0) * np.log(np.maximum(x, d)))
    return np.where(x <= d, inner, outer)


def remainder_ratio(f1: PerturbedDensity, beta1, x):
    """Pointwise ``|r(x)| * x**(-beta1)`` on ``(0, x_max]``."""
    x = np.asarray(x, dtype=float)
    d = f1.delta_tilde
    return np.where(x <= d, _inner_ratio(f1, beta1)(np.minimum(x, d)),
                    _outer_ratio(f1, beta1)(np.maximum(x, d)))


def certify(f1: PerturbedDensity, params: ClassParams, beta1: float, gamma: float, n: int,
            *, n_grid: int = SUP_GRID_POINTS) -> MembershipCertificate:
    d, x_max = f1.delta_tilde, f1.x_max
    if f1.has_bump:
        # first bump piece equals x**(alpha1+beta1-1): the ratio is 1/(C1*alpha1)
        q1 = 0.25 * d
        first = 1.0 / (f1.C1 * f1.alpha1)
        rest, rest_x = sup_search(_inner_ratio(f1, beta1), q1, d, n_grid=n_grid)
        inner_sup, inner_x = (first, q1) if first >= rest else (rest, rest_x)
    else:
        inner_sup, inner_x = 0.0, d
    if d < x_max:
        outer_sup, outer_x = sup_search(_outer_ratio(f1, beta1), d, x_max, n_grid=n_grid)
    else:
        outer_sup, outer_x = 0.0, x_max
    if outer_sup > inner_sup:
        A_min, witness, region = outer_sup, outer_x, "outer"
    else:
        A_min, witness, region = inner_sup, inner_x, "inner"
    return MembershipCertificate(
        n=n, A_min=A_min, witness_x=witness, region=region,
        epsilon_ok=gamma <= params.epsilon, C_gap=abs(f1.C1 - params.C0),
        A_ok=A_min <= params.A, inner_sup=inner_sup, outer_sup=outer_sup, beta1=beta1,
    )


def membership_certificate(pair: DensityPair, params: ClassParams | None = None,
                           *, n_grid: int = SUP_GRID_POINTS) -> MembershipCertificate:
    params = params or pair.params
    s = pair.schedule
    return certify(pair.f1, params, s.beta1, s.gamma_tilde, s.n, n_grid=n_grid)


def base_certificate(f0: BaseDensity, params: ClassParams, n: int = 0) -> MembershipCertificate:
    """Certificate of f0 in its own parameterisation; the remainder is identically 0."""
    as_f1 = PerturbedDensity(
        alpha0=f0.alpha0, alpha1=f0.alpha0, C1=f0.C0, C2=f0.C0,
        delta_tilde=f0.x_max, k=params.beta0 + f0.alpha0 - 1.0, x_max=f0.x_max,
        has_bump=False,
    )
    return certify(as_f1, params, params.beta0, 0.0, n)


@dataclass(frozen=True)
class MembershipScan:
    certificates: list
    ratio: float
    """``max(A_min) / min(A_min)`` over the grid; reported, never asserted."""


def membership_scan(params: ClassParams, lam: float, nu: float, n_grid,
                    *, n_grid_points: int = SUP_GRID_POINTS) -> MembershipScan:
    n_grid = _check_grid(n_grid)

    def one(n):
        pair = validate_pair(build_schedule(params, n, lam, nu, warn_below_critical=False), params)
        return membership_certificate(pair, params, n_grid=n_grid_points)

    certs = parallel_map(lambda n: _tagged(one, n), n_grid)
    return MembershipScan(certificates=certs, ratio=_ratio([c.A_min for c in certs]))


def first_epsilon_ok_n(lam: float, nu: float, epsilon: float) -> int:
    """Smallest n with ``lam * n**(-nu) <= epsilon``."""
    if lam <= epsilon:
        return 1
    n = max(1, math.ceil((lam / epsilon) ** (1.0 / nu)))
    # guard the float rounding of the closed form
    while n > 1 and lam * (n - 1) ** (-nu) <= epsilon:
        n -= 1
    while lam * n ** (-nu) > epsilon:
        n += 1
    return n
