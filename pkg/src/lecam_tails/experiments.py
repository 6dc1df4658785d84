"""Monte Carlo version of the two-point argument.

For one sample size ``n`` the experiment draws ``M`` samples from f0 and
``M`` from f1, runs the estimator on each and records how often it lands
within ``a_n`` of alpha1 (under both laws) and of alpha0 (under f0).  The
coverage under f1 is then compared with the Cauchy-Schwarz bound
``sqrt(P_f0(event)) * (1 + chi2)**(n/2)``.

Every replication draws its uniforms from its own derived seed, and results
are assembled in replication order, so the output does not depend on the
number of worker threads.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .densities import ClassParams, DensityPair, build_schedule, validate_pair
from .errors import ExperimentAbortedError, InvalidParameterError, LecamTailsError
from .estimators import EstimatorSpec, estimate
from .sampling import SeedSpec, derive_replication_seed, uniforms
from .verification import chi_square

log = logging.getLogger(__name__)

# fraction of failed replications that aborts an experiment
MAX_FAILURE_RATE = 0.001
# replications handed to one worker at a time
BLOCK_SIZE = 50
# replications per uniform stream in likelihood_ratio_moment
MOMENT_CHUNK = 100_000


@dataclass(frozen=True)
class AccuracySequence:
    """``a_n = c * n**(-nu_prime)``."""

    c: float
    nu_prime: float

    def __post_init__(self):
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise InvalidParameterError("accuracy c must be positive")
        if not (self.nu_prime > 0.0 and math.isfinite(self.nu_prime)):
            raise InvalidParameterError("accuracy nu_prime must be positive")

    def __call__(self, n: int) -> float:
        return self.c * n ** (-self.nu_prime)


@dataclass(frozen=True)
class ExperimentConfig:
    params: ClassParams
    lam: float
    nu: float
    accuracy: AccuracySequence
    estimator: EstimatorSpec
    n: int
    replications: int
    seed: SeedSpec
    joint_threshold: float = 0.05
    common_random_numbers: bool = True

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise InvalidParameterError("replications must be a positive integer")
        if not 0.0 < self.joint_threshold <= 1.0:
            raise InvalidParameterError("joint_threshold must lie in (0, 1]")

    def pair(self) -> DensityPair:
        sched = build_schedule(self.params, self.n, self.lam, self.nu)
        return validate_pair(sched, self.params)


@dataclass(frozen=True)
class ExperimentResult:
    n: int
    replications: int
    p0_hat: float
    p0_own: float
    p1_hat: float
    joint_hat: float
    se_p0: float
    se_p0_own: float
    se_p1: float
    se_joint: float
    chi2: float
    bound_factor: float
    bound_rhs: float
    se_bound: float
    bound_ok: bool
    gamma_tilde: float
    a_n: float
    two_an: float
    separated: bool
    flagged: bool
    mean_estimate_f0: float
    mean_estimate_f1: float
    failures: int
    common_random_numbers: bool = True

    @property
    def arm(self) -> str:
        return "crn" if self.common_random_numbers else "independent"


def _se(p, m):
    return math.sqrt(max(p * (1.0 - p), 0.0) / m)


def _replicate(config: ExperimentConfig, pair: DensityPair, index: int):
    """Estimates ``(alpha_hat under f0, alpha_hat under f1)`` for one replication."""
    s0 = derive_replication_seed(config.seed, index)
    u0 = uniforms(s0, config.n)
    u1 = u0 if config.common_random_numbers else uniforms(derive_replication_seed(s0, 0), config.n)
    try:
        a0 = estimate(config.estimator, pair.f0.quantile(u0))
        a1 = estimate(config.estimator, pair.f1.quantile(u1))
    except LecamTailsError as exc:
        log.debug("replication %d failed: %s", index, exc)
        return math.nan, math.nan
    return a0, a1


def _run_block(config, pair, start, stop):
    return [_replicate(config, pair, i) for i in range(start, stop)]


def simulate_estimates(config: ExperimentConfig, pair: DensityPair | None = None) -> np.ndarray:
    """``(M, 2)`` array of estimates under f0 and f1 (nan marks a failure)."""
    pair = pair or config.pair()
    m = config.replications
    blocks = [(s, min(s + BLOCK_SIZE, m)) for s in range(0, m, BLOCK_SIZE)]
    parts = parallel_map(lambda b: _run_block(config, pair, *b), blocks)
    return np.array([row for part in parts for row in part], dtype=float).reshape(m, 2)


def summarize(config: ExperimentConfig, pair: DensityPair, estimates: np.ndarray,
              chi2: float) -> ExperimentResult:
    n, m = config.n, config.replications
    ok = np.all(np.isfinite(estimates), axis=1)
    failures = int(m - ok.sum())
    if failures > MAX_FAILURE_RATE * m:
        raise ExperimentAbortedError(f"{failures} of {m} replications failed at n={n}")
    est0, est1 = estimates[ok, 0], estimates[ok, 1]
    used = int(ok.sum())

    s = pair.schedule
    a_n = config.accuracy(n)
    ev0 = np.abs(est0 - s.alpha1) <= a_n
    own = np.abs(est0 - s.alpha0) <= a_n
    ev1 = np.abs(est1 - s.alpha1) <= a_n
    p0 = int(ev0.sum()) / used
    p0_own = int(own.sum()) / used
    p1 = int(ev1.sum()) / used
    joint = int((ev0 & own).sum()) / used
    se0, se1 = _se(p0, used), _se(p1, used)

    factor = (1.0 + chi2) ** (n / 2.0)
    rhs = math.sqrt(p0) * factor
    # delta method on sqrt(p0); at p0 = 0 fall back to the one-success scale
    se_bound = factor * (se0 / (2.0 * math.sqrt(p0)) if p0 > 0.0 else math.sqrt(1.0 / used))
    se_check = math.hypot(se1, se_bound)

    separated = s.gamma_tilde > 2.0 * a_n
    return ExperimentResult(
        n=n, replications=m, p0_hat=p0, p0_own=p0_own, p1_hat=p1, joint_hat=joint,
        se_p0=se0, se_p0_own=_se(p0_own, used), se_p1=se1, se_joint=_se(joint, used),
        chi2=chi2, bound_factor=factor, bound_rhs=rhs, se_bound=se_bound,
        bound_ok=p1 <= rhs + 3.0 * se_check,
        gamma_tilde=s.gamma_tilde, a_n=a_n, two_an=2.0 * a_n,
        separated=separated, flagged=separated and joint >= config.joint_threshold,
        mean_estimate_f0=math.fsum(est0) / used, mean_estimate_f1=math.fsum(est1) / used,
        failures=failures, common_random_numbers=config.common_random_numbers,
    )


def run_two_point(config: ExperimentConfig, *, chi2: float | None = None) -> ExperimentResult:
    pair = config.pair()
    if chi2 is None:
        chi2 = chi_square(pair).chi2
    result = summarize(config, pair, simulate_estimates(config, pair), chi2)
    if result.flagged:
        log.warning(
            "n=%d: joint coverage %.4f >= %.2f while gamma_tilde=%.4g > 2*a_n=%.4g",
            config.n, result.joint_hat, config.joint_threshold, result.gamma_tilde, result.two_an,
        )
    return result


@dataclass(frozen=True)
class SeparationScan:
    results: list
    table: list = field(default_factory=list)
    """Rows ``(n, gamma_tilde, two_an, joint_hat, flagged)``."""

    @property
    def any_flagged(self) -> bool:
        return any(r.flagged for r in self.results)


def run_separation_scan(config: ExperimentConfig, n_grid) -> SeparationScan:
    """Run :func:`run_two_point` at every ``n``; ``config.n`` is ignored."""
    results = []
    for n in n_grid:
        results.append(run_two_point(dataclasses.replace(config, n=int(n))))
    table = [(r.n, r.gamma_tilde, r.two_an, r.joint_hat, r.flagged) for r in results]
    return SeparationScan(results=results, table=table)


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    se: float
    n: int
    replications: int


def likelihood_ratio_moment(pair: DensityPair, n: int, M: int, seed: SeedSpec,
                            *, enforce_limits: bool = True) -> MomentEstimate:
    """Monte Carlo estimate of ``E_f0[prod_{i<=n} (f1(X_i)/f0(X_i))**2]``."""
    n, M = int(n), int(M)
    if n < 1 or M < 1:
        raise InvalidParameterError("n and M must be positive")
    if enforce_limits and (n > 20 or M < 100_000):
        raise InvalidParameterError("need n <= 20 and M >= 1e5 for a usable estimate")
    if not pair.schedule.perturbed:
        return MomentEstimate(1.0, 0.0, n, M)

    def chunk(c):
        rows = min(MOMENT_CHUNK, M - c * MOMENT_CHUNK)
        u = uniforms(derive_replication_seed(seed, c), rows * n).reshape(rows, n)
        x = pair.f0.quantile(u)
        ratio = pair.f1.pdf(x) / pair.f0.pdf(x)
        return np.prod(ratio * ratio, axis=1)

    n_chunks = -(-M // MOMENT_CHUNK)
    values = np.concatenate(parallel_map(chunk, range(n_chunks)))
    mean = math.fsum(values) / M
    var = math.fsum((values - mean) ** 2) / (M - 1) if M > 1 else 0.0
    return MomentEstimate(mean, math.sqrt(var / M), n, M)
