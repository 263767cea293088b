"""Analytic and Monte Carlo moments of a linear-head logit.

The logit under study is y = sum_k w_k z_k + bias for feature vector z
of width m. Two weight regimes are supported:

    frozen  weights are drawn once (seeded) and reused for every trial;
            the analytic variance is the quadratic form w' Cov(z) w.
    random  weights are redrawn i.i.d. every trial; the analytic view is
            E[y] = m E[w] E[z] + bias, V[y] = m (E[w^2]E[z^2] - (E[w]E[z])^2).

Correlated features are supported in the frozen regime only and are
sampled as multivariate normals through a symmetric eigendecomposition
square root of the correlation matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import _rand
from .coefficients import TemperatureCoefficients
from .errors import InputError, NumericError
from .tables import Table

_FAMILIES = ("normal", "uniform")
_WEIGHT_MODES = ("frozen", "random")

# Correlation matrices may carry tiny negative eigenvalues from rounding;
# anything below this is rejected as genuinely non-PSD.
PSD_TOLERANCE = 1e-10

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class DistributionSpec:
    """A scalar distribution given by family, mean and variance."""

    family: str = "normal"
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise InputError(
                f"unknown distribution family {self.family!r}; "
                f"expected one of {', '.join(_FAMILIES)}"
            )
        for name in ("mean", "variance"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InputError(f"{name} must be a real number")
            if not math.isfinite(value):
                raise InputError(f"{name} must be finite, got {value!r}")
        if self.variance < 0:
            raise InputError(f"variance must be >= 0, got {self.variance}")

    @property
    def second_moment(self) -> float:
        return self.variance + self.mean**2

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.variance == 0.0:
            return np.full(shape, float(self.mean))
        if self.family == "normal":
            return self.mean + math.sqrt(self.variance) * rng.standard_normal(shape)
        halfwidth = math.sqrt(3.0 * self.variance)
        return rng.uniform(self.mean - halfwidth, self.mean + halfwidth, shape)


def uniform_correlation(m: int, rho: float) -> np.ndarray:
    """Equicorrelation matrix: ones on the diagonal, rho off it."""
    if m < 1:
        raise InputError(f"m must be >= 1, got {m}")
    rho = float(rho)
    if not -1.0 <= rho <= 1.0:
        raise InputError(f"rho must lie in [-1, 1], got {rho}")
    mat = np.full((m, m), rho, dtype=float)
    np.fill_diagonal(mat, 1.0)
    return mat


def _validate_correlation(corr: np.ndarray, m: int) -> np.ndarray:
    arr = np.asarray(corr, dtype=float)
    if arr.shape != (m, m):
        raise InputError(
            f"feature_correlation must have shape ({m}, {m}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InputError("feature_correlation must be finite")
    if np.abs(arr - arr.T).max(initial=0.0) > _SYM_TOL:
        raise InputError("feature_correlation must be symmetric")
    if np.abs(np.diag(arr) - 1.0).max(initial=0.0) > _SYM_TOL:
        raise InputError("feature_correlation must have a unit diagonal")
    smallest = float(np.linalg.eigvalsh(arr).min())
    if smallest < -PSD_TOLERANCE:
        raise InputError(
            f"feature_correlation is not positive semidefinite "
            f"(smallest eigenvalue {smallest:.3e})"
        )
    return arr


def correlation_factor(corr: np.ndarray) -> np.ndarray:
    """Symmetric square root of a correlation matrix via eigendecomposition."""
    evals, evecs = np.linalg.eigh(np.asarray(corr, dtype=float))
    if evals.min() < -PSD_TOLERANCE:
        raise InputError(
            f"correlation matrix is not positive semidefinite "
            f"(smallest eigenvalue {evals.min():.3e})"
        )
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


@dataclass(frozen=True)
class LinearHeadScenario:
    """Sampling scenario for one linear-head logit."""

    m: int
    weight_dist: DistributionSpec = DistributionSpec()
    feature_dist: DistributionSpec = DistributionSpec()
    feature_correlation: np.ndarray | None = None
    bias: float = 0.0
    normalized_features: bool = False
    weight_mode: str = "frozen"
    weight_seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.m, int) or isinstance(self.m, bool) or self.m < 1:
            raise InputError(f"m must be an int >= 1, got {self.m!r}")
        if self.weight_mode not in _WEIGHT_MODES:
            raise InputError(
                f"weight_mode must be one of {', '.join(_WEIGHT_MODES)}, "
                f"got {self.weight_mode!r}"
            )
        if not math.isfinite(float(self.bias)):
            raise InputError(f"bias must be finite, got {self.bias!r}")
        if self.feature_correlation is not None:
            corr = _validate_correlation(self.feature_correlation, self.m)
            object.__setattr__(self, "feature_correlation", corr)
            if self.weight_mode != "frozen":
                raise InputError(
                    "correlated features require the frozen weight mode"
                )
            if self.feature_dist.family != "normal":
                raise InputError(
                    "correlated features are sampled as multivariate normals; "
                    "the feature family must be 'normal'"
                )
        if self.normalized_features:
            if self.feature_dist.mean != 0.0 or self.feature_dist.variance != 1.0:
                raise InputError(
                    "normalized_features requires feature mean 0 and variance 1"
                )


def frozen_weights(scenario: LinearHeadScenario) -> np.ndarray:
    """The (seeded) weight draw reused across trials in frozen mode."""
    if scenario.weight_mode != "frozen":
        raise InputError("frozen_weights is only defined for frozen weight mode")
    rng = _rand.spawn_rng(_rand.norm_seed(scenario.weight_seed))
    return scenario.weight_dist.sample(rng, scenario.m)


def logit_variance_terms(scenario: LinearHeadScenario) -> dict:
    """Expansion of the frozen-weight logit variance into its three sums.

    second_moment_term: sum_k w_k^2 E[z^2]
    cross_term:         sum_{k != l} w_k w_l E[z_k z_l]
    mean_product_term:  sum_{k,l} w_k w_l E[z_k] E[z_l]
    variance = second_moment_term + cross_term - mean_product_term.

    Under normalization (feature mean 0, variance 1) the mean-product
    term vanishes and the second-moment sum collapses to sum_k w_k^2.
    """
    if scenario.weight_mode != "frozen":
        raise InputError("the variance expansion applies to frozen weights only")
    w = frozen_weights(scenario)
    mu = scenario.feature_dist.mean
    sig2 = scenario.feature_dist.variance
    sq = float((w * w).sum())
    total = float(w.sum())
    second = sq * (sig2 + mu * mu)
    if scenario.feature_correlation is None:
        off = total * total - sq
        cross = off * mu * mu
    else:
        corr = scenario.feature_correlation
        quad = float(w @ corr @ w)
        cross = sig2 * (quad - sq) + (total * total - sq) * mu * mu
    mean_product = (total * mu) ** 2
    return {
        "second_moment_term": second,
        "cross_term": cross,
        "mean_product_term": mean_product,
        "variance": second + cross - mean_product,
    }


def analytic_logit_moments(scenario: LinearHeadScenario) -> tuple[float, float]:
    """(mean, variance) of the logit, evaluated in closed form."""
    wd, fd = scenario.weight_dist, scenario.feature_dist
    if scenario.weight_mode == "random":
        per_term = wd.second_moment * fd.second_moment - (wd.mean * fd.mean) ** 2
        return (scenario.m * wd.mean * fd.mean + scenario.bias,
                scenario.m * per_term)
    w = frozen_weights(scenario)
    mean = fd.mean * float(w.sum()) + scenario.bias
    if scenario.feature_correlation is None:
        var = fd.variance * float((w * w).sum())
    else:
        var = fd.variance * float(w @ scenario.feature_correlation @ w)
    return mean, var


def scaled_variance(scenario: LinearHeadScenario,
                    coeffs: TemperatureCoefficients) -> float:
    """Logit variance divided by (alpha sqrt(m) + beta)^2; bias plays no role."""
    denom = coeffs.alpha * math.sqrt(scenario.m) + coeffs.beta
    if denom <= 0:
        raise InputError(
            f"alpha*sqrt(m) + beta must be positive to scale by it, got {denom}"
        )
    _, var = analytic_logit_moments(scenario)
    return var / (denom * denom)


@dataclass(frozen=True)
class RunningMoments:
    """Count, mean and central moment sums M2..M4, mergeable across shards."""

    count: int
    mean: float
    m2: float
    m3: float
    m4: float

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "RunningMoments":
        x = np.asarray(x, dtype=float)
        n = int(x.size)
        if n == 0:
            return cls(0, 0.0, 0.0, 0.0, 0.0)
        if x.max() == x.min():
            # Identical samples: the mean is exact, every central sum is 0.
            return cls(n, float(x[0]), 0.0, 0.0, 0.0)
        mean = float(x.mean())
        d = x - mean
        d2 = d * d
        return cls(n, mean, float(d2.sum()), float((d2 * d).sum()),
                   float((d2 * d2).sum()))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        na, nb = self.count, other.count
        if na == 0:
            return other
        if nb == 0:
            return self
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + other.m2 + delta**2 * na * nb / n
        m3 = (self.m3 + other.m3
              + delta**3 * na * nb * (na - nb) / n**2
              + 3.0 * delta * (na * other.m2 - nb * self.m2) / n)
        m4 = (self.m4 + other.m4
              + delta**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
              + 6.0 * delta**2 * (na * na * other.m2 + nb * nb * self.m2) / n**2
              + 4.0 * delta * (na * other.m3 - nb * self.m3) / n)
        return RunningMoments(n, mean, m2, m3, m4)

    @property
    def sample_variance(self) -> float:
        if self.count < 2:
            raise NumericError("sample variance needs at least 2 samples")
        return self.m2 / (self.count - 1)

    @property
    def variance_stderr(self) -> float:
        """Standard error of the sample variance from the fourth moment."""
        n = self.count
        if n < 2:
            raise NumericError("variance stderr needs at least 2 samples")
        mu4 = self.m4 / n
        mu2 = self.m2 / n
        var_of_var = (mu4 - (n - 3) / (n - 1) * mu2 * mu2) / n
        return math.sqrt(max(var_of_var, 0.0))


@dataclass(frozen=True)
class VarianceReport:
    analytic_mean: float
    analytic_variance: float
    mc_mean: float
    mc_variance: float
    mc_stderr: float
    trials: int


def variance_report_to_document(report: VarianceReport) -> dict:
    return {
        "analytic_mean": report.analytic_mean,
        "analytic_variance": report.analytic_variance,
        "mc_mean": report.mc_mean,
        "mc_variance": report.mc_variance,
        "mc_stderr": report.mc_stderr,
        "trials": report.trials,
    }


def mc_logit_moments(scenario: LinearHeadScenario, trials: int,
                     seed: int = 0, threads: int = 1) -> VarianceReport:
    """Monte Carlo check of analytic_logit_moments.

    mc_stderr is the standard error of the variance estimate, derived
    from the accumulated fourth moment. Shards merge by the pairwise
    moment-combination rules, so results are identical for any thread
    count given the same seed.
    """
    trials = int(trials)
    if trials < 2:
        raise InputError(f"trials must be >= 2, got {trials}")
    a_mean, a_var = analytic_logit_moments(scenario)
    fd = scenario.feature_dist
    weights = None
    if scenario.weight_mode == "frozen":
        weights = frozen_weights(scenario)
    factor = None
    if scenario.feature_correlation is not None:
        factor = correlation_factor(scenario.feature_correlation)
    base = _rand.norm_seed(seed)

    def run_shard(spec: tuple[int, int]) -> RunningMoments:
        index, rows = spec
        rng = _rand.spawn_rng(base, index)
        if factor is not None:
            gauss = rng.standard_normal((rows, scenario.m))
            z = fd.mean + math.sqrt(fd.variance) * (gauss @ factor)
        else:
            z = fd.sample(rng, (rows, scenario.m))
        if scenario.weight_mode == "random":
            w = scenario.weight_dist.sample(rng, (rows, scenario.m))
            y = (w * z).sum(axis=1) + scenario.bias
        else:
            y = z @ weights + scenario.bias
        return RunningMoments.from_samples(y)

    sizes = _rand.shard_counts(trials, _rand.rows_per_shard(scenario.m))
    shards = list(enumerate(sizes))
    parts = _rand.run_sharded(run_shard, shards, threads)
    total = reduce(RunningMoments.merge, parts)
    return VarianceReport(
        analytic_mean=float(a_mean),
        analytic_variance=float(a_var),
        mc_mean=float(total.mean),
        mc_variance=float(total.sample_variance),
        mc_stderr=float(total.variance_stderr),
        trials=trials,
    )


def correlation_vs_difficulty_probe(overlap_levels, m: int, trials: int,
                                    seed: int = 0, threads: int = 1):
    """Cross-term magnitude of (sum z)^2 - sum z^2 under equicorrelation.

    For each overlap level rho, features are m-dimensional equicorrelated
    standard normals. The per-trial statistic x = (sum_k z_k)^2 - sum_k z_k^2
    collects exactly the off-diagonal products, with expectation
    rho * (m^2 - m). Returns a table (overlap, cross_term, stderr, analytic).
    """
    levels = [float(v) for v in np.atleast_1d(overlap_levels)]
    if not levels:
        raise InputError("overlap_levels must be non-empty")
    for rho in levels:
        if not 0.0 <= rho < 1.0:
            raise InputError(f"overlap levels must lie in [0, 1), got {rho}")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise InputError(f"m must be an int >= 1, got {m!r}")
    trials = int(trials)
    if trials < 2:
        raise InputError(f"trials must be >= 2, got {trials}")
    base = _rand.norm_seed(seed)
    rows = []
    for level_idx, rho in enumerate(levels):
        factor = correlation_factor(uniform_correlation(m, rho))

        def run_shard(spec: tuple[int, int], _factor=factor,
                      _level=level_idx) -> RunningMoments:
            index, count = spec
            rng = _rand.spawn_rng(base, _level, index)
            gauss = rng.standard_normal((count, m))
            z = gauss @ _factor
            x = z.sum(axis=1) ** 2 - (z * z).sum(axis=1)
            return RunningMoments.from_samples(x)

        sizes = _rand.shard_counts(trials, _rand.rows_per_shard(m))
        parts = _rand.run_sharded(run_shard, list(enumerate(sizes)), threads)
        total = reduce(RunningMoments.merge, parts)
        if total.m2 == 0.0:
            stderr = 0.0
        else:
            stderr = math.sqrt(total.sample_variance / trials)
        rows.append((rho, float(total.mean), stderr, rho * (m * m - m)))
    return Table(columns=("overlap", "cross_term", "stderr", "analytic"),
                 rows=tuple(rows))
