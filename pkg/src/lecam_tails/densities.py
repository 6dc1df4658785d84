"""Base density f0 and its adversarial perturbation f1.

The base density is the pure power law ``f0(x) = C0*alpha0*x**(alpha0-1)`` on
``(0, C0**(-1/alpha0)]``.  The perturbed density shifts the exponent to
``alpha1 = alpha0 + gamma`` below a knot ``delta`` and adds a zero-mass
four-piece bump there; above the knot it is a rescaled copy of f0.  The two
constants ``C1`` and ``C2`` are fixed by continuity at the knot and unit mass.

All densities are immutable and their methods are vectorised over numpy
arrays; scalars in give floats out.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DegenerateSystemError,
    DomainError,
    InvalidParameterError,
    NotADensityError,
)

__all__ = [
    "ClassParams",
    "PerturbationSchedule",
    "BaseDensity",
    "PerturbedDensity",
    "DensityPair",
    "build_schedule",
    "solve_constants",
    "delta_fn",
    "bump",
    "bump_antiderivative",
    "pdf",
    "cdf",
    "quantile",
    "validate_pair",
    "check_pair",
]

# absolute cdf tolerance of the root finder
QUANTILE_TOL = 1e-13
_MAX_ROOT_ITER = 200
_GRID_POINTS = 4097
# doubling search for the smallest valid n stops here
_MAX_SEARCH_N = 2**52


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidParameterError(f"{name} must be a positive finite real, got {value!r}")
    return value


@dataclass(frozen=True)
class ClassParams:
    """Parameters of the neighbourhood class D(alpha0, C0, epsilon, rho, A)."""

    alpha0: float
    C0: float
    epsilon: float
    rho: float
    A: float

    def __post_init__(self):
        for name in ("alpha0", "C0", "epsilon", "rho", "A"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        if self.epsilon >= self.alpha0:
            raise InvalidParameterError(
                f"epsilon ({self.epsilon}) must be smaller than alpha0 ({self.alpha0})"
            )

    @property
    def beta0(self) -> float:
        return self.rho * self.alpha0

    @property
    def x_max(self) -> float:
        return self.C0 ** (-1.0 / self.alpha0)

    @property
    def critical_nu(self) -> float:
        """Smallest rate exponent covered by the lower bound: beta0/(2*beta0+alpha0)."""
        return self.beta0 / (2.0 * self.beta0 + self.alpha0)


@dataclass(frozen=True)
class PerturbationSchedule:
    """Sample-size dependent quantities of the perturbation.

    Built by :func:`build_schedule`; ``lam`` is the separation scale (the
    JSON key is ``lambda``).
    """

    n: int
    lam: float
    nu: float
    alpha0: float
    rho: float
    gamma_tilde: float
    alpha1: float
    beta1: float
    delta_tilde: float
    k: float

    @property
    def perturbed(self) -> bool:
        return self.lam > 0.0


def build_schedule(params: ClassParams, n: int, lam: float, nu: float,
                   *, warn_below_critical: bool = True) -> PerturbationSchedule:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0.0:
        raise InvalidParameterError(f"lambda must be a finite real >= 0, got {lam!r}")
    nu = _positive("nu", nu)
    if warn_below_critical and nu < params.critical_nu:
        warnings.warn(
            f"nu={nu} is below the critical exponent {params.critical_nu}",
            RuntimeWarning,
            stacklevel=2,
        )
    gamma = lam * n ** (-nu)
    alpha1 = params.alpha0 + gamma
    beta1 = params.rho * alpha1
    delta = n ** (-nu / beta1)
    k = alpha1 + beta1 - 1.0
    for name, v in (("delta_tilde", delta), ("k", k)):
        if not math.isfinite(v) or v <= 0.0:
            raise InvalidParameterError(f"derived {name}={v!r} is not a positive finite real")
    return PerturbationSchedule(
        n=n, lam=lam, nu=nu, alpha0=params.alpha0, rho=params.rho,
        gamma_tilde=gamma, alpha1=alpha1, beta1=beta1, delta_tilde=delta, k=k,
    )


def solve_constants(schedule: PerturbationSchedule, params: ClassParams) -> tuple[float, float]:
    """Return ``(C1, C2)`` making f1 continuous at the knot and of unit mass.

    Closed-form solution of the 2x2 system

        C1*alpha1*d**alpha1 - C2*alpha0*d**alpha0 = 0
        C1*d**alpha1 + C2*(1/C0 - d**alpha0)     = 1

    with ``d = delta_tilde``.
    """
    a0, C0 = params.alpha0, params.C0
    a1, g, d = schedule.alpha1, schedule.gamma_tilde, schedule.delta_tilde
    if not d < params.x_max:
        raise DomainError(f"knot delta_tilde={d} must lie below x_max={params.x_max}")
    # eliminating C1 leaves C2*(1/C0 - d**a0 * g/a1) = 1
    denom = 1.0 / C0 - d**a0 * (g / a1)
    if not math.isfinite(denom) or denom <= 0.0:
        raise DegenerateSystemError(
            f"normalisation system is singular or has no positive solution (pivot={denom!r})"
        )
    C2 = 1.0 / denom
    C1 = C2 * (a0 / a1) * d ** (-g)
    if not (math.isfinite(C1) and math.isfinite(C2)):
        raise DegenerateSystemError("constants overflowed")
    return C1, C2


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def bump(x, delta, k):
    """Four-piece zero-mass bump on ``(0, delta]``; no domain check."""
    x = np.asarray(x, dtype=float)
    q1, q2, q3 = 0.25 * delta, 0.5 * delta, 0.75 * delta
    # each branch is a power of the distance to its anchor; the subtractions
    # are exact for x within a factor 2 of the anchor
    return np.select(
        [x <= q1, x <= q2, x <= q3],
        [
            np.abs(x) ** k,
            np.abs(q2 - x) ** k,
            -np.abs(x - q2) ** k,
        ],
        default=-np.abs(delta - x) ** k,
    )


def bump_antiderivative(x, delta, k):
    """Antiderivative of :func:`bump` vanishing at 0 (and at ``delta``)."""
    x = np.asarray(x, dtype=float)
    q1, q2, q3 = 0.25 * delta, 0.5 * delta, 0.75 * delta
    a = 1.0 / (k + 1.0)
    peak = q1 ** (k + 1.0)
    return a * np.select(
        [x <= q1, x <= q2, x <= q3],
        [
            np.abs(x) ** (k + 1.0),
            2.0 * peak - np.abs(q2 - x) ** (k + 1.0),
            2.0 * peak - np.abs(x - q2) ** (k + 1.0),
        ],
        default=np.abs(delta - x) ** (k + 1.0),
    )


def delta_fn(x, schedule: PerturbationSchedule):
    """Bump value at ``x`` in ``(0, delta_tilde]`` for the given schedule."""
    arr, scalar = _as_array(x)
    d = schedule.delta_tilde
    if np.any(~(arr > 0.0)) or np.any(arr > d):
        raise DomainError(f"bump is defined on (0, {d}]")
    return _out(bump(arr, d, schedule.k), scalar)


@dataclass(frozen=True)
class BaseDensity:
    alpha0: float
    C0: float
    x_max: float = field(init=False)

    def __post_init__(self):
        _positive("alpha0", self.alpha0)
        _positive("C0", self.C0)
        object.__setattr__(self, "x_max", self.C0 ** (-1.0 / self.alpha0))

    def pdf(self, x):
        arr, scalar = _as_array(x)
        _check_open_support(arr, self.x_max)
        return _out(self.C0 * self.alpha0 * arr ** (self.alpha0 - 1.0), scalar)

    def cdf(self, x):
        arr, scalar = _as_array(x)
        _check_closed_support(arr, self.x_max)
        return _out(np.minimum(self.C0 * arr**self.alpha0, 1.0), scalar)

    def quantile(self, u):
        arr, scalar = _as_array(u)
        _check_unit(arr)
        x = np.minimum((arr / self.C0) ** (1.0 / self.alpha0), self.x_max)
        x = np.where(arr == 1.0, self.x_max, x)
        return _out(x, scalar)


@dataclass(frozen=True)
class PerturbedDensity:
    """Perturbed density f1.

    With ``has_bump=False`` the bump term is dropped; this is the collapsed
    configuration used for ``lambda == 0``.
    """

    alpha0: float
    alpha1: float
    C1: float
    C2: float
    delta_tilde: float
    k: float
    x_max: float
    has_bump: bool = True

    @property
    def knot_mass(self) -> float:
        return self.C1 * self.delta_tilde**self.alpha1

    @property
    def breakpoints(self) -> tuple[float, ...]:
        d = self.delta_tilde
        return (0.25 * d, 0.5 * d, 0.75 * d, d)

    def _bump(self, x):
        if not self.has_bump:
            return np.zeros_like(x)
        return bump(x, self.delta_tilde, self.k)

    def power_part(self, x):
        """The smooth part of f1 below the knot, ``C1*alpha1*x**(alpha1-1)``."""
        return self.C1 * self.alpha1 * np.asarray(x, dtype=float) ** (self.alpha1 - 1.0)

    def outer_part(self, x):
        return self.C2 * self.alpha0 * np.asarray(x, dtype=float) ** (self.alpha0 - 1.0)

    def pdf(self, x):
        arr, scalar = _as_array(x)
        _check_open_support(arr, self.x_max)
        inner = arr <= self.delta_tilde
        xi = np.where(inner, arr, self.delta_tilde)
        xo = np.where(inner, self.x_max, arr)
        val = np.where(inner, self.power_part(xi) + self._bump(xi), self.outer_part(xo))
        return _out(val, scalar)

    def cdf(self, x):
        arr, scalar = _as_array(x)
        _check_closed_support(arr, self.x_max)
        d = self.delta_tilde
        inner = arr <= d
        xi = np.where(inner, arr, d)
        xo = np.where(inner, d, arr)
        lower = self.C1 * xi**self.alpha1
        if self.has_bump:
            lower = lower + bump_antiderivative(xi, d, self.k)
        upper = self.knot_mass + self.C2 * (xo**self.alpha0 - d**self.alpha0)
        val = np.clip(np.where(inner, lower, upper), 0.0, 1.0)
        return _out(val, scalar)

    def quantile(self, u):
        arr, scalar = _as_array(u)
        _check_unit(arr)
        arr = np.atleast_1d(arr)
        d = self.delta_tilde
        u_knot = self.knot_mass
        x = np.empty_like(arr)

        outer = arr > u_knot
        uo = arr[outer]
        xo = (d**self.alpha0 + (uo - u_knot) / self.C2) ** (1.0 / self.alpha0)
        x[outer] = np.minimum(xo, self.x_max)

        ui = arr[~outer]
        if self.has_bump:
            x[~outer] = self._invert_inner(ui)
        else:
            x[~outer] = np.minimum((ui / self.C1) ** (1.0 / self.alpha1), d)
        x[arr == 1.0] = self.x_max
        x[arr == 0.0] = 0.0
        return float(x[0]) if scalar else x

    def _invert_inner(self, u):
        """Safeguarded Newton on ``[0, delta]`` with branch-aware brackets."""
        if u.size == 0:
            return u.copy()
        d = self.delta_tilde
        knots = np.array([0.0, *self.breakpoints])
        cdf_knots = np.asarray(self.cdf(knots))
        idx = np.clip(np.searchsorted(cdf_knots, u, side="left"), 1, 4)
        lo = knots[idx - 1].copy()
        hi = knots[idx].copy()
        x = np.clip((u / self.C1) ** (1.0 / self.alpha1), lo, hi)
        active = np.ones(u.shape, dtype=bool)
        for _ in range(_MAX_ROOT_ITER):
            if not active.any():
                break
            xa = x[active]
            resid = np.asarray(self.cdf(xa)) - u[active]
            done = np.abs(resid) <= QUANTILE_TOL
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(resid < 0.0, xa, lo_a)
            hi_a = np.where(resid > 0.0, xa, hi_a)
            with np.errstate(divide="ignore", invalid="ignore"):
                dens = np.asarray(self.pdf(np.clip(xa, np.finfo(float).tiny, d)))
                step = xa - resid / dens
            mid = 0.5 * (lo_a + hi_a)
            ok = np.isfinite(step) & (step > lo_a) & (step < hi_a)
            new = np.where(ok, step, mid)
            # bracket collapsed to float resolution
            tiny = (hi_a - lo_a) <= 4.0 * np.spacing(np.maximum(hi_a, np.finfo(float).tiny))
            done |= tiny
            new = np.where(done, xa, new)
            lo[active], hi[active], x[active] = lo_a, hi_a, new
            idx_active = np.flatnonzero(active)
            active[idx_active[done]] = False
        return x


def _check_open_support(arr, x_max):
    if np.any(~(arr > 0.0)) or np.any(arr > x_max):
        raise DomainError(f"pdf is defined on (0, {x_max}]")


def _check_closed_support(arr, x_max):
    if np.any(~(arr >= 0.0)) or np.any(arr > x_max):
        raise DomainError(f"cdf is defined on [0, {x_max}]")


def _check_unit(arr):
    if np.any(~(arr >= 0.0)) or np.any(arr > 1.0):
        raise DomainError("quantile level must lie in [0, 1]")


def pdf(density, x):
    return density.pdf(x)


def cdf(density, x):
    return density.cdf(x)


def quantile(density, u):
    return density.quantile(u)


@dataclass(frozen=True)
class DensityPair:
    params: ClassParams
    schedule: PerturbationSchedule
    f0: BaseDensity
    f1: PerturbedDensity
    epsilon_ok: bool
    # minimum of f1 over the negative bump pieces; None without a bump
    min_pdf: float | None
    min_pdf_x: float | None

    @property
    def c2_gap(self) -> float:
        """``C2 - C0`` evaluated without cancellation."""
        s = self.schedule
        if not s.perturbed:
            return 0.0
        return (self.params.C0 * self.f1.C2 * self.schedule.delta_tilde**self.params.alpha0
                * (s.gamma_tilde / s.alpha1))

    @property
    def c1_gap(self) -> float:
        return abs(self.f1.C1 - self.params.C0)


def _build_f1(schedule, params):
    if not schedule.perturbed:
        # lambda == 0: no exponent shift and no bump, f1 coincides with f0
        if not schedule.delta_tilde < params.x_max:
            raise DomainError(
                f"knot delta_tilde={schedule.delta_tilde} must lie below x_max={params.x_max}"
            )
        C1 = C2 = params.C0
        has_bump = False
    else:
        C1, C2 = solve_constants(schedule, params)
        has_bump = True
    return PerturbedDensity(
        alpha0=params.alpha0, alpha1=schedule.alpha1, C1=C1, C2=C2,
        delta_tilde=schedule.delta_tilde, k=schedule.k, x_max=params.x_max,
        has_bump=has_bump,
    )


def _branch_minimum(g, lo, hi):
    """Minimum of ``g`` on ``[lo, hi]``: dense grid then bounded refinement."""
    xs = np.linspace(lo, hi, _GRID_POINTS)
    vals = g(xs)
    i = int(np.argmin(vals))
    best_x, best_v = float(xs[i]), float(vals[i])
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    if b > a:
        res = minimize_scalar(lambda t: float(g(np.array(t))), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-15 * hi})
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return best_v, best_x


def _negative_branch_minimum(f1: PerturbedDensity):
    """Minimum of f1 over the two branches where the bump is negative.

    Returns ``(value, x, (lo, hi))``.
    """
    d, k = f1.delta_tilde, f1.k
    q2, q3 = 0.5 * d, 0.75 * d
    c, a1 = f1.C1 * f1.alpha1, f1.alpha1

    def g3(x):
        return c * x ** (a1 - 1.0) - np.abs(x - q2) ** k

    def g4(x):
        return c * x ** (a1 - 1.0) - np.abs(d - x) ** k

    out = []
    # third piece: the bump term decreases; with alpha1 <= 1 so does the power
    if a1 <= 1.0:
        out.append((float(g3(np.array(q3))), q3, (q2, q3)))
    else:
        v, x = _branch_minimum(g3, q2, q3)
        out.append((v, x, (q2, q3)))
    # fourth piece: the bump term increases; with alpha1 >= 1 so does the power
    if a1 >= 1.0:
        out.append((float(g4(np.array(q3))), q3, (q3, d)))
    else:
        v, x = _branch_minimum(g4, q3, d)
        out.append((v, x, (q3, d)))
    return min(out, key=lambda t: t[0])


def check_pair(schedule: PerturbationSchedule, params: ClassParams):
    """Build f1 and report ``(f1 or None, min_value, min_x, region, reason)``."""
    if not schedule.delta_tilde < params.x_max:
        return None, None, None, None, "knot at or beyond the support endpoint"
    try:
        f1 = _build_f1(schedule, params)
    except DegenerateSystemError as exc:
        return None, None, None, None, str(exc)
    if not f1.has_bump:
        return f1, None, None, None, None
    if f1.C1 <= 0.0 or f1.C2 <= 0.0:
        return None, None, None, None, "non-positive normalising constant"
    v, x, region = _negative_branch_minimum(f1)
    if v < 0.0:
        return None, v, x, region, "density is negative on the bump"
    return f1, v, x, region, None


def _is_valid(params, lam, nu, n):
    try:
        sched = build_schedule(params, n, lam, nu, warn_below_critical=False)
    except InvalidParameterError:
        return False
    return check_pair(sched, params)[0] is not None


def _minimal_valid_n(params, lam, nu, n_start):
    """Doubling search from ``n_start`` then bisection for the first valid n."""
    lo, hi = n_start, n_start * 2
    while not _is_valid(params, lam, nu, hi):
        lo, hi = hi, hi * 2
        if hi > _MAX_SEARCH_N:
            return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _is_valid(params, lam, nu, mid):
            hi = mid
        else:
            lo = mid
    return hi


def validate_pair(schedule: PerturbationSchedule, params: ClassParams) -> DensityPair:
    """Return the pair (f0, f1) or raise :class:`NotADensityError`."""
    f1, vmin, xmin, region, reason = check_pair(schedule, params)
    if f1 is None:
        n_ok = _minimal_valid_n(params, schedule.lam, schedule.nu, schedule.n)
        where = f" on {region}" if region else ""
        raise NotADensityError(
            f"f1 is not a proper density at n={schedule.n}: {reason}{where}; "
            f"smallest valid n is {n_ok}",
            region=region, min_value=vmin, minimal_valid_n=n_ok,
        )
    return DensityPair(
        params=params,
        schedule=schedule,
        f0=BaseDensity(params.alpha0, params.C0),
        f1=f1,
        epsilon_ok=schedule.gamma_tilde <= params.epsilon,
        min_pdf=vmin,
        min_pdf_x=xmin,
    )
