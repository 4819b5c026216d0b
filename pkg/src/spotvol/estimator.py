"""Pre-averaged wavelet threshold estimator of the spot variance.

Pipeline: pre-average the observations over ``m`` overlapping blocks,
subtract the noise bias from the squared block averages, weigh the result
with wavelets to estimate the coefficients of ``sigma^2``, hard-threshold
the detail coefficients and synthesize.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from .errors import ConfigInconsistent, LevelExceedsBlocks, NegativeThreshold
from .kernels import PreAveragingKernel, make_kernel, weight_table
from .simulate import ObservationSet
from .wavelets import CoefficientSet, WaveletBasis, make_basis, synthesize

__all__ = [
    "EstimatorConfig",
    "ResolvedConfig",
    "PreAveraged",
    "VolatilityEstimate",
    "pre_average",
    "bias_correction",
    "preaverage",
    "estimate_coefficient",
    "estimate_level",
    "estimate_noise_variance",
    "default_kappa",
    "hard_threshold",
    "estimate",
]

DEFAULT_KERNEL = "step"
DEFAULT_ALPHA0 = 0.25
PILOT_GRID = np.arange(1024) / 1024
_EPS = 1e-9


def _z(obs) -> np.ndarray:
    return obs.z if isinstance(obs, ObservationSet) else np.asarray(obs, dtype=float)


def pre_average(obs, kernel: PreAveragingKernel, m: int) -> np.ndarray:
    """``Zbar_{i,m}`` for ``i = 2..m`` (entry ``i - 2``)."""
    z = _z(obs)
    wt = weight_table(kernel, z.size - 1, m)
    return np.bincount(wt.block - 2, weights=wt.weight * z[wt.index], minlength=m - 1)


def bias_correction(obs, kernel: PreAveragingKernel, m: int) -> np.ndarray:
    """``b_{i,m} = (m^2 / 2n^2) sum lam~^2 (Z_j - Z_{j-1})^2`` for ``i = 2..m``."""
    z = _z(obs)
    wt = weight_table(kernel, z.size - 1, m)
    # windows start at j >= 1, so Z_{j-1} always exists
    dz2 = np.diff(z) ** 2
    return np.bincount(wt.block - 2, weights=wt.sq_weight * dz2[wt.index - 1], minlength=m - 1)


@dataclass(frozen=True)
class PreAveraged:
    """Bias-corrected squared block averages, shared by all coefficient estimates."""

    m: int
    zbar: np.ndarray
    bias: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        """``Zbar_i^2 - b_i`` for ``i = 2..m``."""
        return self.zbar**2 - self.bias

    @property
    def points(self) -> np.ndarray:
        """Evaluation points ``(i - 1) / m`` for ``i = 2..m``."""
        return np.arange(1, self.m) / self.m


def preaverage(obs, kernel: PreAveragingKernel, m: int) -> PreAveraged:
    return PreAveraged(m=int(m), zbar=pre_average(obs, kernel, m), bias=bias_correction(obs, kernel, m))


@lru_cache(maxsize=64)
def _design(basis: WaveletBasis, level: int, m: int, which: str) -> np.ndarray:
    mat = basis.level_matrix(level, np.arange(1, m) / m, which)
    mat.setflags(write=False)
    return mat


def estimate_level(data: PreAveraged, basis: WaveletBasis, level: int, which: str = "detail") -> np.ndarray:
    """``E_m(h_{level,k})`` for every ``k`` at one level."""
    if 2**level > data.m:
        raise LevelExceedsBlocks(f"2^{level} exceeds m = {data.m}")
    return _design(basis, level, data.m, which) @ data.increments


def estimate_coefficient(
    obs,
    kernel: PreAveragingKernel,
    m: int,
    basis: WaveletBasis,
    level: int,
    k: int,
    which: str = "detail",
    data: PreAveraged | None = None,
) -> float:
    """``E_m(h_lk) = sum_{i=2}^m h_lk((i-1)/m) [Zbar_i^2 - b_i]``.

    Pass ``data`` to reuse block averages across many coefficients.
    """
    if 2**level > m:
        raise LevelExceedsBlocks(f"2^{level} exceeds m = {m}")
    if data is None:
        data = preaverage(obs, kernel, m)
    h = basis.evaluate(level, k, data.points, which)
    return float(h @ data.increments)


def estimate_noise_variance(obs) -> float:
    """``(2n)^-1 sum_j (Z_j - Z_{j-1})^2``."""
    z = _z(obs)
    n = z.size - 1
    return float(np.sum(np.diff(z) ** 2) / (2 * n))


def default_kappa(
    kernel: PreAveragingKernel,
    noise_var_hat: float,
    cbar: float,
    rho_ratio: float = 1.0,
) -> float:
    """Threshold constant from the deviation bound.

    ``4 sqrt(rho_ratio) (cbar + sqrt(2 cbar) a r + a^2 r^2)`` with
    ``a = sqrt(noise_var_hat)`` standing in for the noise sup-norm and
    ``r = ||lam||_2 / bar_lambda``.
    """
    if cbar < 0 or noise_var_hat < 0:
        raise ConfigInconsistent("cbar and the noise variance must be nonnegative")
    a = math.sqrt(noise_var_hat)
    r = kernel.l2_norm / kernel.bar_lambda
    return 4.0 * math.sqrt(rho_ratio) * (cbar + math.sqrt(2.0 * cbar) * a * r + a * a * r * r)


def hard_threshold(value, tau: float):
    """``x * 1{|x| >= tau}``."""
    if tau < 0:
        raise NegativeThreshold(f"threshold must be nonnegative, got {tau}")
    value = np.asarray(value, dtype=float)
    out = np.where(np.abs(value) >= tau, value, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning knobs; ``None`` fields are filled in from ``n`` by :meth:`resolve`.

    Defaults: ``m = floor(sqrt(n))``, ``ell0 = floor((1 - 2 alpha0) log2 m)``,
    ``ell1 = floor(log2 m / (1 + 2 alpha0))`` and the threshold constant from
    :func:`default_kappa` with a pilot ``cbar``.
    """

    m: int | None = None
    alpha0: float = DEFAULT_ALPHA0
    ell0: int | None = None
    ell1: int | None = None
    kappa_tilde: float | None = None
    q: float | None = None
    kernel: str | dict = DEFAULT_KERNEL
    basis: str = "daubechies-4"
    cbar: float | None = None
    clip_nonneg: bool = False

    def resolve(self, n: int) -> "ResolvedConfig":
        if not 0.0 < self.alpha0 < 0.5:
            raise ConfigInconsistent(f"alpha0 must lie in (0, 1/2), got {self.alpha0}")
        root = math.isqrt(int(n))
        m = root if self.m is None else int(self.m)
        if m < 2 or m > root:
            raise ConfigInconsistent(f"need 2 <= m <= floor(sqrt(n)) = {root}, got m = {m}")
        log2m = math.log2(m)
        ell0 = math.floor((1 - 2 * self.alpha0) * log2m + _EPS) if self.ell0 is None else int(self.ell0)
        ell1 = math.floor(log2m / (1 + 2 * self.alpha0) + _EPS) if self.ell1 is None else int(self.ell1)
        q = 1.0 - 1.0 / (1.0 + 2.0 * self.alpha0) if self.q is None else float(self.q)
        if ell0 < 0 or ell0 > ell1:
            raise ConfigInconsistent(f"need 0 <= ell0 <= ell1, got ell0 = {ell0}, ell1 = {ell1}")
        if 2**ell1 > m:
            raise ConfigInconsistent(f"2^ell1 = {2**ell1} exceeds m = {m}")
        if not q > 0 or m * 2.0**-ell1 < m**q * (1 - _EPS):
            raise ConfigInconsistent(f"m 2^-ell1 = {m * 2.0**-ell1:g} is below m^q = {m**q:g}")
        if self.kappa_tilde is not None and self.kappa_tilde < 0:
            raise NegativeThreshold("kappa_tilde must be nonnegative")
        return ResolvedConfig(
            n=int(n),
            m=m,
            alpha0=self.alpha0,
            ell0=ell0,
            ell1=ell1,
            q=q,
            kappa_tilde=self.kappa_tilde,
            kernel=self.kernel,
            basis=self.basis,
            cbar=self.cbar,
            clip_nonneg=self.clip_nonneg,
        )


@dataclass(frozen=True)
class ResolvedConfig:
    n: int
    m: int
    alpha0: float
    ell0: int
    ell1: int
    q: float
    kappa_tilde: float | None
    kernel: str | dict
    basis: str
    cbar: float | None
    clip_nonneg: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VolatilityEstimate:
    """Reconstructed ``sigma^2`` on ``grid`` with its full tuning record."""

    grid: np.ndarray
    values: np.ndarray
    coefficients: CoefficientSet
    config: ResolvedConfig
    kappa_tilde: float
    tau: float
    noise_var_hat: float
    cbar: float
    extra: dict = field(default_factory=dict)

    def manifest(self) -> dict[str, Any]:
        return {
            "n": self.config.n,
            "m": self.config.m,
            "ell0": self.config.ell0,
            "ell1": self.config.ell1,
            "alpha0": self.config.alpha0,
            "q": self.config.q,
            "tau": self.tau,
            "kappa_tilde": self.kappa_tilde,
            "noise_var_hat": self.noise_var_hat,
            "cbar": self.cbar,
            "kernel": self.config.kernel,
            "basis": self.config.basis,
            "clip_nonneg": self.config.clip_nonneg,
            "kept_detail": self.coefficients.kept_count(),
            **self.extra,
        }


def _resolve_kernel(kernel) -> PreAveragingKernel:
    if isinstance(kernel, PreAveragingKernel):
        return kernel
    return _kernel_cached(kernel) if isinstance(kernel, str) else make_kernel(kernel)


@lru_cache(maxsize=8)
def _kernel_cached(name: str) -> PreAveragingKernel:
    return make_kernel(name)


def estimate(
    obs,
    config: EstimatorConfig | None = None,
    basis: WaveletBasis | None = None,
    out_grid=None,
    kernel: PreAveragingKernel | None = None,
) -> VolatilityEstimate:
    """Wavelet threshold estimate of ``t -> sigma^2_t`` on ``out_grid``.

    Scaling coefficients at ``ell0`` are kept as estimated; details at levels
    ``ell0..ell1`` are hard-thresholded at ``tau = kappa~ sqrt(log m / m)``.
    Unless ``config.kappa_tilde`` is set, ``kappa~`` comes from
    :func:`default_kappa` with ``cbar`` taken as the maximum of the linear
    (scaling-only) pilot estimate.
    """
    config = config or EstimatorConfig()
    z = _z(obs)
    cfg = config.resolve(z.size - 1)
    kernel = kernel or _resolve_kernel(cfg.kernel)
    basis = basis or make_basis(cfg.basis)
    grid = np.linspace(0.0, 1.0, 1025) if out_grid is None else np.asarray(out_grid, dtype=float)

    data = preaverage(z, kernel, cfg.m)
    scaling = estimate_level(data, basis, cfg.ell0, "scaling")
    detail = {lev: estimate_level(data, basis, lev, "detail") for lev in range(cfg.ell0, cfg.ell1 + 1)}
    noise_var_hat = estimate_noise_variance(z)

    if cfg.cbar is not None:
        cbar = float(cfg.cbar)
    else:
        pilot = CoefficientSet(cfg.ell0, cfg.ell0, scaling, {cfg.ell0: np.zeros(2**cfg.ell0)}, tau=np.inf)
        cbar = max(float(np.max(synthesize(pilot, basis, PILOT_GRID))), 0.0)
    if cfg.kappa_tilde is not None:
        kappa = float(cfg.kappa_tilde)
    else:
        kappa = default_kappa(kernel, noise_var_hat, cbar)
    tau = kappa * math.sqrt(math.log(cfg.m) / cfg.m)

    coeffs = CoefficientSet(cfg.ell0, cfg.ell1, scaling, detail, tau=tau)
    values = synthesize(coeffs, basis, grid)
    if cfg.clip_nonneg:
        values = np.maximum(values, 0.0)
    return VolatilityEstimate(
        grid=grid,
        values=values,
        coefficients=coeffs,
        config=cfg,
        kappa_tilde=kappa,
        tau=tau,
        noise_var_hat=noise_var_hat,
        cbar=cbar,
        extra={"kernel_bar_lambda": kernel.bar_lambda},
    )
