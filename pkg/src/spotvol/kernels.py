"""Pre-averaging functions.

A pre-averaging function is a piecewise Lipschitz map ``lam`` on ``[0, 2)``
with ``lam(t) = -lam(2 - t)`` that is not identically zero. It is normalized
by

    bar_lambda = (2 * int_0^1 (int_0^s lam(u) du)^2 ds)^(1/2)

and ``lam / bar_lambda`` is the weight profile used to average the noisy
observations over blocks of length ``2/m``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import BadBlockCount, DegenerateKernel, InvalidDomain, NotAntisymmetric

__all__ = [
    "PreAveragingKernel",
    "KernelProfiles",
    "WeightTable",
    "make_kernel",
    "kernel_from_function",
    "weight_table",
    "piecewise_integrate",
]

GL_NODES = 64
ANTISYMMETRY_TOL = 1e-12
ANTISYMMETRY_SAMPLES = 1024
QUAD_RTOL = 1e-10

_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_NODES)


def _gauss_legendre(f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> float:
    half = 0.5 * (b - a)
    x = a + half * (_gl_x + 1.0)
    return float(half * np.dot(_gl_w, f(x)))


def piecewise_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float],
    rtol: float = QUAD_RTOL,
    max_depth: int = 12,
) -> float:
    """Integrate ``f`` over ``[edges[0], edges[-1]]`` piece by piece.

    Each piece gets a 64-node Gauss-Legendre rule. A piece is bisected until
    the halves agree with the whole to ``rtol`` (relative to the running
    total), so kinks that were not declared as edges still converge.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    total = 0.0
    pieces = [
        (float(a), float(b), 0, _gauss_legendre(f, float(a), float(b)))
        for a, b in zip(edges[:-1], edges[1:])
    ]
    scale = max(abs(sum(p[3] for p in pieces)), 1e-300)
    while pieces:
        a, b, depth, whole = pieces.pop()
        mid = 0.5 * (a + b)
        left = _gauss_legendre(f, a, mid)
        right = _gauss_legendre(f, mid, b)
        if depth >= max_depth or abs(left + right - whole) <= rtol * scale * (b - a):
            total += left + right
        else:
            pieces.append((a, mid, depth + 1, left))
            pieces.append((mid, b, depth + 1, right))
    return total


class _Antiderivative:
    """Vectorised ``s -> int_0^s f(u) du`` on ``[0, 2]``."""

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], edges: np.ndarray):
        self._f = f
        self.edges = edges
        cum = [0.0]
        for a, b in zip(edges[:-1], edges[1:]):
            cum.append(cum[-1] + piecewise_integrate(f, [a, b]))
        self.cum = np.asarray(cum)

    def __call__(self, s: np.ndarray | float) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=float), self.edges[0], self.edges[-1])
        flat = s.reshape(-1)
        idx = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, len(self.edges) - 2)
        a = self.edges[idx]
        half = 0.5 * (flat - a)
        x = a[:, None] + half[:, None] * (_gl_x[None, :] + 1.0)
        partial = half * (self._f(x.reshape(-1)).reshape(x.shape) @ _gl_w)
        return (self.cum[idx] + partial).reshape(s.shape)


@dataclass(frozen=True, eq=False)
class KernelProfiles:
    """Antiderivative profiles of a normalized pre-averaging function.

    ``Lambda(s) = int_s^2 lam~(u) du`` on ``[0, 2]`` and
    ``LambdaBar(s) = ((int_0^s lam~)^2 + (int_0^{1-s} lam~)^2)^(1/2)`` on
    ``[0, 1]``; both vanish outside their domains.
    """

    kernel: "PreAveragingKernel"

    def Lambda(self, s):
        s = np.asarray(s, dtype=float)
        F = self.kernel.antiderivative
        inside = (s >= 0.0) & (s <= 2.0)
        return np.where(inside, F(2.0) - F(s), 0.0)

    def LambdaBar(self, s):
        s = np.asarray(s, dtype=float)
        F = self.kernel.antiderivative
        inside = (s >= 0.0) & (s <= 1.0)
        return np.where(inside, np.sqrt(F(s) ** 2 + F(1.0 - s) ** 2), 0.0)

    def Lambda_l2(self) -> float:
        edges = self.kernel.quadrature_edges
        return math.sqrt(piecewise_integrate(lambda u: self.Lambda(u) ** 2, edges))

    def LambdaBar_l2(self) -> float:
        edges = [e for e in self.kernel.quadrature_edges if e <= 1.0]
        edges += [1.0 - e for e in edges]
        return math.sqrt(piecewise_integrate(lambda u: self.LambdaBar(u) ** 2, edges))


@dataclass(frozen=True, eq=False)
class PreAveragingKernel:
    """A validated pre-averaging function.

    Build instances with :func:`make_kernel` or :func:`kernel_from_function`;
    the constructor performs no validation.
    """

    func: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple[float, ...]
    bar_lambda: float
    name: str = "custom"
    descriptor: Mapping[str, Any] = field(default_factory=dict)

    def evaluate(self, t):
        """Raw ``lam(t)``, zero outside ``[0, 2)``."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t < 2.0)
        out = np.zeros_like(t)
        if np.any(inside):
            out[inside] = self.func(t[inside])
        return out

    __call__ = evaluate

    def normalized(self, t):
        """``lam~(t) = lam(t) / bar_lambda``."""
        return self.evaluate(t) / self.bar_lambda

    @functools.cached_property
    def quadrature_edges(self) -> list[float]:
        pts = {0.0, 1.0, 2.0}
        for b in self.breakpoints:
            pts.add(float(b))
            pts.add(2.0 - float(b))
        return sorted(p for p in pts if 0.0 <= p <= 2.0)

    @functools.cached_property
    def antiderivative(self) -> _Antiderivative:
        """``s -> int_0^s lam~(u) du``."""
        return _Antiderivative(self.normalized, np.asarray(self.quadrature_edges))

    @functools.cached_property
    def l2_norm(self) -> float:
        return math.sqrt(piecewise_integrate(lambda u: self.evaluate(u) ** 2, self.quadrature_edges))

    @property
    def normalized_l2_norm(self) -> float:
        return self.l2_norm / self.bar_lambda

    @functools.cached_property
    def sup_norm(self) -> float:
        grid = np.linspace(0.0, 2.0, 4097)[:-1]
        return float(np.max(np.abs(self.evaluate(grid))))

    def profiles(self) -> KernelProfiles:
        return KernelProfiles(self)

    def renormalized(self) -> "PreAveragingKernel":
        """The kernel built from ``lam~`` itself; its ``bar_lambda`` is 1."""
        return kernel_from_function(self.normalized, self.breakpoints, name=f"{self.name}~")


def _step(t):
    return np.where(t < 1.0, 1.0, -1.0)


def _sine(t):
    return np.sin(np.pi * t)


_FAMILIES: dict[str, tuple[Callable, tuple[float, ...]]] = {
    "step": (_step, (0.0, 1.0)),
    "sine": (_sine, (0.0,)),
}


def _tabulated(breakpoints: Sequence[float], values: Sequence[float]):
    """Piecewise-linear function through ``(breakpoints, values)``.

    A repeated breakpoint encodes a jump; the function is right-continuous
    there.
    """
    b = np.asarray(breakpoints, dtype=float)
    v = np.asarray(values, dtype=float)
    if b.ndim != 1 or b.shape != v.shape or len(b) < 2:
        raise InvalidDomain("tabulated kernel needs matching 1-d breakpoints and values (at least 2)")
    if np.any(np.diff(b) < 0):
        raise InvalidDomain("breakpoints must be non-decreasing")
    if b[0] != 0.0 or b[-1] != 2.0:
        raise InvalidDomain("tabulated breakpoints must start at 0 and end at 2")
    keep = np.nonzero(np.diff(b) > 0)[0]
    starts, ends = b[keep], b[keep + 1]
    v0, v1 = v[keep], v[keep + 1]

    def func(t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
        frac = (t - starts[idx]) / (ends[idx] - starts[idx])
        return v0[idx] + frac * (v1[idx] - v0[idx])

    return func, tuple(float(x) for x in np.unique(b[:-1]))


def _check_antisymmetry(func, breakpoints: Sequence[float]) -> None:
    t = (np.arange(ANTISYMMETRY_SAMPLES) + 0.5) * (2.0 / ANTISYMMETRY_SAMPLES)
    bad = np.zeros_like(t, dtype=bool)
    for b in breakpoints:
        bad |= np.isclose(t, b, rtol=0, atol=1e-12) | np.isclose(t, 2.0 - b, rtol=0, atol=1e-12)
    t = t[~bad]
    vals = np.asarray(func(t), dtype=float)
    mirror = np.asarray(func(2.0 - t), dtype=float)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(mirror))):
        raise InvalidDomain("kernel produced non-finite values on [0, 2)")
    scale = max(1.0, float(np.max(np.abs(vals))))
    err = float(np.max(np.abs(vals + mirror)))
    if err > ANTISYMMETRY_TOL * scale:
        raise NotAntisymmetric(f"lam(t) + lam(2 - t) reaches {err:.3e}")


def _check_lipschitz(func, breakpoints: Sequence[float]) -> None:
    edges = sorted(set(breakpoints) | {2.0})
    for a, b in zip(edges[:-1], edges[1:]):
        x = np.linspace(a, b, 257)[:-1]
        y = np.asarray(func(x), dtype=float)
        slopes = np.diff(y) / np.diff(x)
        if not np.all(np.isfinite(slopes)):
            raise InvalidDomain(f"kernel is not Lipschitz on piece [{a}, {b})")


def kernel_from_function(
    func: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float] = (0.0,),
    name: str = "custom",
    descriptor: Mapping[str, Any] | None = None,
) -> PreAveragingKernel:
    """Validate ``func`` as a pre-averaging function and compute ``bar_lambda``.

    ``breakpoints`` lists the left ends of the Lipschitz pieces of ``func`` on
    ``[0, 2)``.
    """
    bps = tuple(sorted(float(b) for b in breakpoints))
    if not bps or bps[0] != 0.0 or any(b < 0.0 or b >= 2.0 for b in bps):
        raise InvalidDomain("breakpoints must lie in [0, 2) and include 0")
    _check_lipschitz(func, bps)
    _check_antisymmetry(func, bps)

    edges = sorted({0.0, 1.0} | {b for b in bps if b < 1.0} | {2.0 - b for b in bps if 2.0 - b < 1.0})
    F = _Antiderivative(lambda u: np.asarray(func(u), dtype=float), np.asarray(edges))
    bar_sq = 2.0 * piecewise_integrate(lambda s: F(s) ** 2, edges)
    if not bar_sq > 0.0:
        raise DegenerateKernel("bar_lambda vanishes: the kernel is identically zero")
    return PreAveragingKernel(
        func=func,
        breakpoints=bps,
        bar_lambda=math.sqrt(bar_sq),
        name=name,
        descriptor=dict(descriptor or {"family": name}),
    )


def make_kernel(desc: str | Mapping[str, Any]) -> PreAveragingKernel:
    """Build a kernel from a family name or a JSON-style descriptor.

    Accepted descriptors are ``{"family": "step"}``, ``{"family": "sine"}``
    and ``{"family": "tabulated", "breakpoints": [...], "values": [...]}``.

    >>> round(make_kernel("step").bar_lambda, 7)
    0.8164966
    """
    if isinstance(desc, str):
        desc = {"family": desc}
    family = desc.get("family")
    if family in _FAMILIES:
        func, bps = _FAMILIES[family]
        return kernel_from_function(func, bps, name=family, descriptor={"family": family})
    if family == "tabulated":
        func, bps = _tabulated(desc.get("breakpoints", []), desc.get("values", []))
        desc = {
            "family": "tabulated",
            "breakpoints": [float(x) for x in desc["breakpoints"]],
            "values": [float(x) for x in desc["values"]],
        }
        return kernel_from_function(func, bps, name="tabulated", descriptor=desc)
    raise InvalidDomain(f"unknown kernel family {family!r}")


@dataclass(frozen=True, eq=False)
class WeightTable:
    """Flattened per-block weights for pre-averaging at scale ``m``.

    Entry ``e`` says that observation ``index[e]`` enters block ``block[e]``
    (``2 <= block <= m``) with weight ``weight[e] = (m/n) lam~(m j/n - (i-2))``
    and bias-correction weight ``sq_weight[e] = (m^2 / 2n^2) lam~(...)^2``.
    Entries are sorted by block, then by observation index.
    """

    n: int
    m: int
    block: np.ndarray
    index: np.ndarray
    weight: np.ndarray
    sq_weight: np.ndarray

    def block_weights(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(index, weight, sq_weight)`` for block ``i``; empty if the window holds no sample."""
        lo, hi = np.searchsorted(self.block, [i, i + 1])
        return self.index[lo:hi], self.weight[lo:hi], self.sq_weight[lo:hi]


def _block_bounds(n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blocks ``i = 2..m`` and the index range of ``j/n in ((i-2)/m, i/m]``."""
    blocks = np.arange(2, m + 1, dtype=np.int64)
    lo = (blocks - 2) * n // m + 1
    hi = blocks * n // m
    return blocks, lo, hi


@functools.lru_cache(maxsize=32)
def _cached_weight_table(kernel: PreAveragingKernel, n: int, m: int) -> WeightTable:
    blocks, lo, hi = _block_bounds(n, m)
    counts = np.maximum(hi - lo + 1, 0)
    block = np.repeat(blocks, counts)
    starts = np.repeat(lo - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    index = starts + np.arange(block.size, dtype=np.int64)
    # integer numerator keeps m j/n - (i-2) exact at block boundaries
    arg = (m * index - (block - 2) * n) / n
    lt = kernel.normalized(arg)
    weight = (m / n) * lt
    sq_weight = (m * m / (2.0 * n * n)) * lt * lt
    for arr in (block, index, weight, sq_weight):
        arr.setflags(write=False)
    return WeightTable(n=n, m=m, block=block, index=index, weight=weight, sq_weight=sq_weight)


def weight_table(kernel: PreAveragingKernel, n: int, m: int) -> WeightTable:
    """Pre-averaging weights for ``n`` increments and ``m`` blocks."""
    n, m = int(n), int(m)
    if m < 2 or m > n:
        raise BadBlockCount(f"need 2 <= m <= n, got m={m}, n={n}")
    return _cached_weight_table(kernel, n, m)
