"""Synthetic data: latent Ito paths, volatility scenarios, microstructure noise.

All randomness is drawn from ``numpy.random.Generator`` instances seeded by
``SeedSequence([*seed, stream])`` so the latent path and the noise use
independent streams of the same user seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import BadRefinement, ConfigError, NonPositiveVol, NumericalError

__all__ = [
    "VolatilityScenario",
    "NoiseModel",
    "LatentPath",
    "ObservationSet",
    "make_scenario",
    "simulate_path",
    "add_noise",
    "simulate_observations",
    "rng_for",
]

Seed = int | Sequence[int]

STREAM_PATH = 0
STREAM_NOISE = 1
DEFAULT_REFINEMENT = 16


def rng_for(seed: Seed, stream: int) -> np.random.Generator:
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    return np.random.default_rng(np.random.SeedSequence(entropy + [stream]))


# deterministic variance profiles, keyed by name so scenarios stay picklable
def _constant(t, level=1.0):
    return np.full_like(np.asarray(t, dtype=float), level)


def _sine(t, base=1.0, amplitude=0.5, frequency=1.0):
    return base + amplitude * np.sin(2.0 * np.pi * frequency * np.asarray(t, dtype=float))


_PROFILES: dict[str, Callable[..., np.ndarray]] = {"constant": _constant, "sine": _sine}


@dataclass(frozen=True)
class VolatilityScenario:
    """How the spot variance ``sigma^2_t`` is generated.

    ``kind`` is ``"deterministic"`` (a named profile or a callable ``t ->
    sigma^2(t)``), ``"ito"`` (``sigma^2 = exp(v)`` with ``v`` an
    Ornstein-Uhlenbeck process driven by a Brownian motion correlated with
    the price) or ``"fbm"`` (``sigma^2 = base * exp(gamma * B^H)``).
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    profile: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def describe(self) -> dict:
        out = {"kind": self.kind, "name": self.name or self.kind}
        out.update({k: v for k, v in self.params.items()})
        return out

    def deterministic_sigma2(self, t) -> np.ndarray:
        if self.kind != "deterministic":
            raise ConfigError(f"{self.kind} scenario has no deterministic profile")
        if self.profile is not None:
            return np.asarray(self.profile(np.asarray(t, dtype=float)), dtype=float)
        return _PROFILES[self.name](t, **self.params)

    @classmethod
    def constant(cls, level: float = 1.0) -> "VolatilityScenario":
        return cls("deterministic", {"level": float(level)}, name="constant")

    @classmethod
    def sine(cls, base: float = 1.0, amplitude: float = 0.5, frequency: float = 1.0) -> "VolatilityScenario":
        params = {"base": float(base), "amplitude": float(amplitude), "frequency": float(frequency)}
        return cls("deterministic", params, name="sine")

    @classmethod
    def function(cls, sigma2: Callable[[np.ndarray], np.ndarray], name: str = "function") -> "VolatilityScenario":
        return cls("deterministic", {}, profile=sigma2, name=name)

    @classmethod
    def ito(
        cls,
        kappa: float = 5.0,
        theta: float = 0.0,
        xi: float = 0.5,
        rho: float = -0.5,
        v0: float | None = None,
    ) -> "VolatilityScenario":
        if not -1.0 <= rho <= 1.0:
            raise ConfigError("leverage correlation must lie in [-1, 1]")
        params = {"kappa": kappa, "theta": theta, "xi": xi, "rho": rho, "v0": theta if v0 is None else v0}
        return cls("ito", params, name="ito")

    @classmethod
    def fbm(cls, hurst: float = 0.3, gamma: float = 0.5, base: float = 1.0) -> "VolatilityScenario":
        if not 0.0 < hurst < 1.0:
            raise ConfigError("Hurst index must lie in (0, 1)")
        return cls("fbm", {"hurst": hurst, "gamma": gamma, "base": base}, name="fbm")


def make_scenario(desc: str | Mapping[str, Any]) -> VolatilityScenario:
    """Scenario from a name or a JSON-style dict such as ``{"scenario": "sine", "amplitude": 0.3}``."""
    if isinstance(desc, str):
        desc = {"scenario": desc}
    desc = dict(desc)
    name = desc.pop("scenario", None) or desc.pop("name", None) or desc.pop("kind", None)
    builders = {
        "constant": VolatilityScenario.constant,
        "sine": VolatilityScenario.sine,
        "ito": VolatilityScenario.ito,
        "fbm": VolatilityScenario.fbm,
    }
    if name not in builders:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(builders)}")
    try:
        return builders[name](**desc)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for scenario {name!r}: {exc}") from None


_ETA_LAWS = ("gaussian", "uniform", "rademacher")


@dataclass(frozen=True)
class NoiseModel:
    """Microstructure noise ``eps_j = a(j/n, X_{j/n}) * eta_j``.

    ``a`` is a nonnegative constant or a callable ``(t, x) -> a``; ``eta`` is
    i.i.d. with zero mean and unit variance.
    """

    a: float | Callable[[np.ndarray, np.ndarray], np.ndarray] = 0.0
    eta_law: str = "gaussian"

    def __post_init__(self):
        if self.eta_law not in _ETA_LAWS:
            raise ConfigError(f"unknown eta law {self.eta_law!r}; choose from {_ETA_LAWS}")
        if not callable(self.a) and not (self.a >= 0 and math.isfinite(self.a)):
            raise ConfigError("noise intensity must be finite and nonnegative")

    def intensity(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        if callable(self.a):
            a = np.asarray(self.a(t, x), dtype=float)
            a = np.broadcast_to(a, np.shape(x)).astype(float)
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise NumericalError("noise intensity must be finite and nonnegative")
            return a
        return np.full(np.shape(x), float(self.a))

    def draw_eta(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.eta_law == "gaussian":
            return rng.standard_normal(size)
        if self.eta_law == "uniform":
            return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
        return rng.choice(np.array([-1.0, 1.0]), size)

    def describe(self) -> dict:
        return {"a": "callable" if callable(self.a) else float(self.a), "eta_law": self.eta_law}


@dataclass(frozen=True)
class LatentPath:
    """Latent price and spot variance on ``t_j = j/n``."""

    x: np.ndarray
    sigma2: np.ndarray
    scenario: dict
    seed: Any
    refinement: int

    @property
    def n(self) -> int:
        return self.x.size - 1


@dataclass(frozen=True)
class ObservationSet:
    """Noisy observations ``Z_0..Z_n`` on the uniform grid ``j/n`` of ``[0, 1]``.

    ``truth`` keeps the latent path for simulated data and is ``None`` for
    real data.
    """

    z: np.ndarray
    truth: LatentPath | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or z.size < 2:
            raise ConfigError("need at least two observations")
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.size - 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n


def _check_sigma2(sigma2: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(sigma2)) or np.any(sigma2 < 0):
        raise NonPositiveVol("scenario produced a negative or non-finite variance")
    return sigma2


def _fbm(hurst: float, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Fractional Brownian motion on ``k / steps``, ``k = 0..steps`` (Davies-Harte)."""
    k = np.arange(steps + 1, dtype=float)
    gamma = 0.5 * (np.abs(k + 1) ** (2 * hurst) - 2 * k ** (2 * hurst) + np.abs(k - 1) ** (2 * hurst))
    row = np.concatenate([gamma[:steps], gamma[steps:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-8 * eig.max():
        raise NumericalError("circulant embedding is not nonnegative definite")
    eig = np.clip(eig, 0.0, None)
    size = row.size
    w = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    fgn = np.fft.fft(np.sqrt(eig / size) * w)[:steps].real
    path = np.concatenate([[0.0], np.cumsum(fgn)])
    return path * steps ** (-hurst)


def simulate_path(
    scenario: VolatilityScenario,
    drift: Callable[[float, np.ndarray], np.ndarray] | None = None,
    n: int = 1024,
    refinement: int = DEFAULT_REFINEMENT,
    seed: Seed = 0,
) -> LatentPath:
    """Euler-Maruyama path of ``dX = b(t, X) dt + sigma_t dW`` with ``X_0 = 0``.

    The scheme runs on ``n * refinement`` steps and is subsampled to
    ``{j/n}``. ``drift=None`` means ``b = 0`` and is fully vectorised; a drift
    callable forces a step-by-step loop.
    """
    if not isinstance(refinement, (int, np.integer)) or refinement < 1:
        raise BadRefinement(f"refinement must be a positive integer, got {refinement!r}")
    n = int(n)
    if n < 1:
        raise ConfigError("n must be positive")
    rng = rng_for(seed, STREAM_PATH)
    steps = n * refinement
    dt = 1.0 / steps
    t = np.arange(steps + 1) * dt
    dW = rng.standard_normal(steps) * math.sqrt(dt)

    if scenario.kind == "deterministic":
        sigma2 = scenario.deterministic_sigma2(t)
    elif scenario.kind == "ito":
        p = scenario.params
        dB = p["rho"] * dW + math.sqrt(1.0 - p["rho"] ** 2) * rng.standard_normal(steps) * math.sqrt(dt)
        decay = 1.0 - p["kappa"] * dt
        forcing = p["kappa"] * p["theta"] * dt + p["xi"] * dB
        v_rest, _ = lfilter([1.0], [1.0, -decay], forcing, zi=[decay * p["v0"]])
        sigma2 = np.exp(np.concatenate([[p["v0"]], v_rest]))
    elif scenario.kind == "fbm":
        p = scenario.params
        sigma2 = p["base"] * np.exp(p["gamma"] * _fbm(p["hurst"], steps, rng))
    else:
        raise ConfigError(f"unknown scenario kind {scenario.kind!r}")
    sigma2 = _check_sigma2(np.asarray(sigma2, dtype=float))

    diffusion = np.sqrt(sigma2[:-1]) * dW
    if drift is None:
        x = np.concatenate([[0.0], np.cumsum(diffusion)])
    else:
        x = np.empty(steps + 1)
        x[0] = 0.0
        for i in range(steps):
            x[i + 1] = x[i] + float(drift(t[i], x[i])) * dt + diffusion[i]

    return LatentPath(
        x=x[::refinement].copy(),
        sigma2=sigma2[::refinement].copy(),
        scenario=scenario.describe(),
        seed=seed if np.isscalar(seed) else list(seed),
        refinement=int(refinement),
    )


def add_noise(
    x_on_grid: LatentPath | np.ndarray,
    model: NoiseModel,
    seed: Seed = 0,
) -> ObservationSet:
    """``z_j = x_j + a(j/n, x_j) * eta_j``; keeps the latent path as truth when given one."""
    truth = x_on_grid if isinstance(x_on_grid, LatentPath) else None
    x = truth.x if truth is not None else np.asarray(x_on_grid, dtype=float)
    n = x.size - 1
    t = np.arange(n + 1) / n
    a = model.intensity(t, x)
    if np.any(a):
        eta = model.draw_eta(n + 1, rng_for(seed, STREAM_NOISE))
        z = x + a * eta
    else:
        z = x.copy()
    meta = {"noise": model.describe(), "seed": seed if np.isscalar(seed) else list(seed)}
    return ObservationSet(z=z, truth=truth, metadata=meta)


def simulate_observations(
    scenario: VolatilityScenario,
    noise: NoiseModel,
    n: int,
    seed: Seed,
    refinement: int = DEFAULT_REFINEMENT,
    drift: Callable[[float, np.ndarray], np.ndarray] | None = None,
) -> ObservationSet:
    """Latent path plus noise from one seed."""
    path = simulate_path(scenario, drift=drift, n=n, refinement=refinement, seed=seed)
    obs = add_noise(path, noise, seed=seed)
    obs.metadata.update({"scenario": path.scenario, "n": n, "refinement": refinement})
    return obs
