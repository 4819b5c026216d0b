"""Rate exponents, L^p errors and Monte Carlo campaigns for the estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .errors import ConfigError, GridMismatch, SmoothnessTooLow
from .estimator import EstimatorConfig, estimate, estimate_level, preaverage
from .kernels import PreAveragingKernel
from .simulate import DEFAULT_REFINEMENT, NoiseModel, VolatilityScenario, simulate_observations
from .wavelets import WaveletBasis

__all__ = [
    "RateQuery",
    "CampaignResult",
    "DeviationTable",
    "rate_exponent",
    "lp_error",
    "eval_stride",
    "run_campaign",
    "coefficient_errors",
    "deviation_tail_study",
    "wilson_interval",
]

REGIONS = {"full": (0.0, 1.0), "interior": (0.05, 0.95)}


@dataclass(frozen=True)
class RateQuery:
    s: Any
    p: Any
    pi: Any

    def __post_init__(self):
        if not self.pi > 0:
            raise ConfigError("integrability pi must be positive")
        inv_pi = Fraction(1) / self.pi if isinstance(self.pi, Rational) else 1.0 / self.pi
        # s = 1/pi is admitted: it is the dense/sparse boundary of the formula
        if not self.s >= inv_pi:
            raise SmoothnessTooLow(f"need s >= 1/pi, got s={self.s}, pi={self.pi}")
        if not self.p >= 1:
            raise ConfigError("loss exponent p must be >= 1")


def rate_exponent(s, p=None, pi=None):
    """``alpha(s, p, pi) = min{s/(2s+1), (s + 1/p - 1/pi)/(1 + 2s - 2/pi)}``.

    Accepts a :class:`RateQuery` or three numbers. Integer and ``Fraction``
    inputs give an exact ``Fraction``; anything else gives a float. The
    achievable L^p rate is ``n^(-alpha/2)``.
    """
    q = s if isinstance(s, RateQuery) else RateQuery(s, p, pi)
    s, p, pi = q.s, q.p, q.pi
    if all(isinstance(v, Rational) for v in (s, p, pi)):
        s, p, pi = Fraction(s), Fraction(p), Fraction(pi)
        one = Fraction(1)
    else:
        s, p, pi = float(s), float(p), float(pi)
        one = 1.0
    dense = s / (2 * s + one)
    sparse = (s + one / p - one / pi) / (one + 2 * s - 2 * one / pi)
    return min(dense, sparse)


def lp_error(estimate_values, truth, p: float = 2.0, region=(0.0, 1.0), grid=None) -> float:
    """``(int_region |estimate - truth|^p)^(1/p)`` by the trapezoid rule.

    ``grid`` defaults to the uniform grid on ``[0, 1]`` with as many points as
    the inputs. Region endpoints that fall between grid points are handled by
    linear interpolation of the difference.
    """
    est = np.asarray(estimate_values, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape or est.ndim != 1:
        raise GridMismatch(f"shapes differ: {est.shape} vs {tru.shape}")
    g = np.linspace(0.0, 1.0, est.size) if grid is None else np.asarray(grid, dtype=float)
    if g.shape != est.shape:
        raise GridMismatch("grid does not match the values")
    if p < 1:
        raise ConfigError("p must be >= 1")
    a, b = region
    diff = np.abs(est - tru)
    inner = (g > a) & (g < b)
    x = np.concatenate([[a], g[inner], [b]])
    y = np.concatenate([[np.interp(a, g, diff)], diff[inner], [np.interp(b, g, diff)]])
    return float(np.trapezoid(y**p, x) ** (1.0 / p))


def eval_stride(n: int, target: int = 2048) -> int:
    """Largest divisor of ``n`` not above ``n // target`` (at least 1)."""
    stride = max(1, n // target)
    while n % stride:
        stride -= 1
    return stride


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        return float("nan"), float("nan")
    fit = stats.linregress(x, y)
    se = float(fit.stderr) if x.size > 2 else float("nan")
    return float(fit.slope), se


@dataclass
class CampaignResult:
    """Per-replicate L^p errors over an ``n`` grid and the fitted log-log slope.

    ``errors[region]`` has shape ``(len(n_grid), replicates)``; regions are
    ``"full"`` (``[0, 1]``) and ``"interior"`` (``[0.05, 0.95]``). Slopes are
    OLS fits of log median error on log ``n``.
    """

    n_grid: list[int]
    replicates: int
    p: float
    errors: dict[str, np.ndarray]
    config: dict = field(default_factory=dict)

    def summary(self, region: str = "interior") -> dict[str, np.ndarray]:
        e = self.errors[region]
        return {
            "mean": e.mean(axis=1),
            "median": np.median(e, axis=1),
            "q25": np.quantile(e, 0.25, axis=1),
            "q75": np.quantile(e, 0.75, axis=1),
            "se": e.std(axis=1, ddof=1) / math.sqrt(e.shape[1]) if e.shape[1] > 1 else np.full(len(e), np.nan),
        }

    def slope(self, region: str = "interior") -> tuple[float, float]:
        med = self.summary(region)["median"]
        return _ols(np.log(np.asarray(self.n_grid, dtype=float)), np.log(med))

    def to_dict(self) -> dict:
        out = {"n_grid": self.n_grid, "replicates": self.replicates, "p": self.p, "config": self.config}
        for region in self.errors:
            summ = self.summary(region)
            slope, se = self.slope(region)
            out[region] = {
                "region": list(REGIONS[region]),
                "slope": slope,
                "slope_se": se,
                **{k: v.tolist() for k, v in summ.items()},
                "errors": self.errors[region].tolist(),
            }
        return out


def _campaign_cell(scenario, noise, kernel, basis, config, n, r, seed_base, p, refinement):
    obs = simulate_observations(scenario, noise, n, seed=(seed_base, n, r), refinement=refinement)
    stride = eval_stride(n)
    grid = obs.t[::stride]
    est = estimate(obs, config, basis=basis, out_grid=grid, kernel=kernel)
    truth = obs.truth.sigma2[::stride]
    return tuple(lp_error(est.values, truth, p, REGIONS[name], grid) for name in REGIONS)


def run_campaign(
    scenario: VolatilityScenario,
    noise: NoiseModel,
    kernel: PreAveragingKernel,
    basis: WaveletBasis,
    n_grid: Sequence[int],
    replicates: int,
    seed_base: int,
    p: float = 2.0,
    config: EstimatorConfig | None = None,
    refinement: int = DEFAULT_REFINEMENT,
    jobs: int = 1,
) -> CampaignResult:
    """Simulate, estimate and score ``replicates`` paths for each ``n``.

    Replicate ``r`` at size ``n`` is seeded by ``(seed_base, n, r)``, so the
    result does not depend on ``jobs``.
    """
    config = config or EstimatorConfig()
    n_grid = [int(n) for n in n_grid]
    if replicates < 1:
        raise ConfigError("need at least one replicate")
    for n in n_grid:
        if math.isqrt(n) < 4:
            raise ConfigError(f"n = {n} gives fewer than 4 blocks")
    cells = [(n, r) for n in n_grid for r in range(replicates)]
    results = Parallel(n_jobs=jobs)(
        delayed(_campaign_cell)(scenario, noise, kernel, basis, config, n, r, seed_base, p, refinement)
        for n, r in cells
    )
    errors = {name: np.zeros((len(n_grid), replicates)) for name in REGIONS}
    for (n, r), res in zip(cells, results):
        for name, val in zip(REGIONS, res):
            errors[name][n_grid.index(n), r] = val
    provenance = {
        "scenario": scenario.describe(),
        "noise": noise.describe(),
        "kernel": dict(kernel.descriptor),
        "basis": basis.to_dict(),
        "estimator": {k: v for k, v in vars(config).items()},
        "seed_base": seed_base,
        "refinement": refinement,
    }
    return CampaignResult(n_grid=n_grid, replicates=replicates, p=float(p), errors=errors, config=provenance)


def _true_coefficient(obs, basis: WaveletBasis, level: int, k: int, which: str) -> float:
    # rectangle rule on the sampling grid; periodic, so trapezoid = mean
    t = obs.t[:-1]
    return float(np.mean(obs.truth.sigma2[:-1] * basis.evaluate(level, k, t, which)))


def _coefficient_cell(scenario, noise, kernel, basis, n, ms, targets, seed, refinement):
    obs = simulate_observations(scenario, noise, n, seed=seed, refinement=refinement)
    out = []
    for m in ms:
        data = preaverage(obs, kernel, m)
        row = []
        for level, k, which in targets:
            est = float(estimate_level(data, basis, level, which)[k])
            row.append((est, _true_coefficient(obs, basis, level, k, which)))
        out.append(row)
    return out


def coefficient_errors(
    scenario: VolatilityScenario,
    noise: NoiseModel,
    kernel: PreAveragingKernel,
    basis: WaveletBasis,
    n: int,
    ms: Sequence[int],
    targets: Sequence[tuple[int, int, str]],
    replicates: int,
    seed_base: int,
    refinement: int = DEFAULT_REFINEMENT,
    jobs: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo draws of ``E_m(h_lk)`` and the matching true coefficients.

    ``targets`` lists ``(level, k, which)``. Both returned arrays have shape
    ``(replicates, len(ms), len(targets))``; every ``m`` reuses the same
    simulated path.
    """
    rows = Parallel(n_jobs=jobs)(
        delayed(_coefficient_cell)(scenario, noise, kernel, basis, n, list(ms), list(targets), (seed_base, n, r), refinement)
        for r in range(replicates)
    )
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0], arr[..., 1]


@dataclass
class DeviationTable:
    """Exceedance frequencies of ``|E_m - <sigma^2, psi>| >= kappa sqrt(log m / m)``."""

    m: int
    level: int
    k: int
    kappas: np.ndarray
    exceed: np.ndarray
    replicates: int
    deviations: np.ndarray

    @property
    def frequency(self) -> np.ndarray:
        return self.exceed / self.replicates

    def wilson(self, level: float = 0.95) -> np.ndarray:
        return np.array([wilson_interval(e, self.replicates, level) for e in self.exceed])

    def rows(self) -> list[dict]:
        ci = self.wilson()
        return [
            {"kappa": float(kp), "exceed": int(e), "frequency": float(e / self.replicates), "wilson_low": lo, "wilson_high": hi}
            for kp, e, (lo, hi) in zip(self.kappas, self.exceed, ci)
        ]


def deviation_tail_study(
    scenario: VolatilityScenario,
    noise: NoiseModel,
    kernel: PreAveragingKernel,
    basis: WaveletBasis,
    n: int,
    m: int,
    level: int,
    k: int,
    kappas: Sequence[float],
    replicates: int,
    seed_base: int = 0,
    refinement: int = DEFAULT_REFINEMENT,
    jobs: int = 1,
) -> DeviationTable:
    """Empirical tail of the detail-coefficient error at thresholds ``kappa sqrt(log m / m)``."""
    est, truth = coefficient_errors(
        scenario, noise, kernel, basis, n, [m], [(level, k, "detail")], replicates, seed_base, refinement, jobs
    )
    dev = np.abs(est[:, 0, 0] - truth[:, 0, 0])
    kappas = np.asarray(kappas, dtype=float)
    scale = math.sqrt(math.log(m) / m)
    exceed = np.array([int(np.sum(dev >= kp * scale)) for kp in kappas])
    return DeviationTable(m=m, level=level, k=k, kappas=kappas, exceed=exceed, replicates=replicates, deviations=dev)
