"""Periodized orthonormal wavelets on [0, 1].

Scaling function and mother wavelet are tabulated once by the cascade
algorithm on a dyadic grid (exact at dyadic rationals up to the table
resolution) and evaluated elsewhere by interpolation. Dilates and translates
are periodized, ``h_lk(t) = 2^(l/2) sum_r h(2^l (t + r) - k)``, which gives an
orthonormal basis of L^2[0, 1] for every coarse level ``l0 >= 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.special import comb

from .errors import BadExponent, GridTooCoarse, LevelTooFine

__all__ = [
    "WaveletBasis",
    "CoefficientSet",
    "daubechies_filter",
    "make_basis",
    "evaluate",
    "synthesize",
    "analyze",
    "gram_matrix",
    "besov_norm",
]

TABLE_LEVEL = 14
FAMILIES = ("haar", "daubechies-4", "daubechies-6", "daubechies-8")

Which = Literal["scaling", "detail"]


@lru_cache(maxsize=None)
def daubechies_filter(taps: int) -> np.ndarray:
    """Minimum-phase Daubechies low-pass filter with ``taps`` coefficients.

    Normalized so that ``sum(h) = sqrt(2)``; ``taps = 2`` is Haar.
    """
    if taps < 2 or taps % 2:
        raise ValueError("taps must be an even integer >= 2")
    p = taps // 2
    # P(y) = sum_k C(p-1+k, k) y^k with y = (2 - z - 1/z)/4; multiply by z^(p-1)
    poly = np.zeros(2 * p - 1)
    base = np.array([-0.25, 0.5, -0.25])
    power = np.array([1.0])
    for k in range(p):
        term = comb(p - 1 + k, k) * power
        pad = (len(poly) - len(term)) // 2
        poly[pad : pad + len(term)] += term
        power = np.convolve(power, base)
    roots = np.roots(poly) if p > 1 else np.array([])
    inside = roots[np.abs(roots) < 1.0]
    q = np.real(np.poly(inside)) if inside.size else np.array([1.0])
    h = q
    for _ in range(p):
        h = np.convolve(h, [1.0, 1.0])
    h = h * (math.sqrt(2.0) / h.sum())
    if h[0] < 0:
        h = -h
    return h


def _cascade(h: np.ndarray, level: int) -> tuple[np.ndarray, np.ndarray]:
    """phi and psi on ``k / 2^level`` for ``0 <= k <= (N-1) 2^level``."""
    N = len(h)
    L = N - 1
    if N == 2:
        x = np.arange(L * 2**level + 1) / 2**level
        phi = np.where(x < 1.0, 1.0, 0.0)
        psi = np.where(x < 0.5, 1.0, np.where(x < 1.0, -1.0, 0.0))
        return phi, psi
    # phi at integers: eigenvector of M[i, j] = sqrt(2) h[2i - j] for eigenvalue 1
    M = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            if 0 <= 2 * i - j < N:
                M[i, j] = math.sqrt(2.0) * h[2 * i - j]
    w, v = np.linalg.eig(M)
    vec = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    vec = vec / vec.sum()
    vals = vec  # on the integer grid 0..L
    for lev in range(1, level + 1):
        size = L * 2**lev + 1
        new = np.zeros(size)
        new[::2] = vals
        odd = np.arange(1, size, 2)
        # phi(x) = sqrt2 sum_k h_k phi(2x - k); for x = i/2^lev, 2x - k has
        # index i - k 2^(lev-1) on the previous grid
        for k in range(N):
            idx = odd - k * 2 ** (lev - 1)
            ok = (idx >= 0) & (idx < vals.size)
            new[odd[ok]] += math.sqrt(2.0) * h[k] * vals[idx[ok]]
        vals = new
    phi = vals
    # psi(x) = sqrt2 sum_k g_k phi(2x - k), g_k = (-1)^k h[N-1-k]
    g = np.array([(-1) ** k * h[N - 1 - k] for k in range(N)])
    size = L * 2**level + 1
    psi = np.zeros(size)
    pts = np.arange(size)
    for k in range(N):
        idx = 2 * pts - k * 2**level
        ok = (idx >= 0) & (idx < size)
        psi[ok] += math.sqrt(2.0) * g[k] * phi[idx[ok]]
    return phi, psi


@dataclass(frozen=True, eq=False)
class WaveletBasis:
    """Tabulated periodized wavelet system.

    ``n0`` is the number of vanishing moments of ``psi``; for Daubechies-N it
    is ``N // 2``.
    """

    family: str
    filter: np.ndarray
    n0: int
    table_level: int
    phi_table: np.ndarray
    psi_table: np.ndarray
    boundary: str = "periodic"

    @property
    def support(self) -> int:
        return len(self.filter) - 1

    @property
    def table_x(self) -> np.ndarray:
        return np.arange(self.phi_table.size) / 2**self.table_level

    def mother(self, x, which: Which = "detail") -> np.ndarray:
        """Unscaled ``phi`` or ``psi`` at ``x``; zero outside ``[0, N-1)``."""
        table = self.phi_table if which == "scaling" else self.psi_table
        x = np.asarray(x, dtype=float)
        scaled = x * 2**self.table_level
        out = np.zeros_like(scaled)
        inside = (x >= 0.0) & (x < self.support)
        s = scaled[inside]
        if self.family == "haar":
            # right-continuous piecewise constant; snap float noise onto nodes
            idx = np.floor(s + 1e-9).astype(np.int64)
            out[inside] = table[np.clip(idx, 0, table.size - 1)]
        else:
            idx = np.clip(np.floor(s).astype(np.int64), 0, table.size - 2)
            frac = s - idx
            out[inside] = (1.0 - frac) * table[idx] + frac * table[idx + 1]
        return out

    def check_level(self, level: int) -> None:
        if level < 0 or level > self.table_level:
            raise LevelTooFine(f"level {level} outside 0..{self.table_level}")

    def _periodized(self, level: int, base: np.ndarray, which: Which) -> np.ndarray:
        size = 2**level
        out = np.zeros_like(base)
        for r in range(-(-self.support // size)):
            out += self.mother(base + r * size, which)
        return out * 2 ** (level / 2)

    def level_matrix(self, level: int, points, which: Which = "detail") -> np.ndarray:
        """Values of ``h_{level,k}`` at ``points`` for all ``k``; shape ``(2^level, len(points))``."""
        self.check_level(level)
        t = np.asarray(points, dtype=float).reshape(-1)
        size = 2**level
        base = np.mod(size * t[None, :] - np.arange(size)[:, None], size)
        return self._periodized(level, base, which)

    def evaluate(self, level: int, k: int, points, which: Which = "detail") -> np.ndarray:
        self.check_level(level)
        size = 2**level
        return self._periodized(level, np.mod(size * np.asarray(points, dtype=float) - k, size), which)

    def to_dict(self) -> dict:
        return {"family": self.family, "boundary": self.boundary, "table_level": self.table_level}


@lru_cache(maxsize=None)
def make_basis(family: str = "daubechies-4", table_level: int = TABLE_LEVEL) -> WaveletBasis:
    """Build (and cache) a basis by family name: ``haar`` or ``daubechies-N``."""
    if family == "haar":
        taps = 2
    elif family in FAMILIES:
        taps = int(family.split("-")[1])
    else:
        raise ValueError(f"unknown wavelet family {family!r}; choose from {FAMILIES}")
    h = daubechies_filter(taps)
    phi, psi = _cascade(h, table_level)
    phi.setflags(write=False)
    psi.setflags(write=False)
    return WaveletBasis(
        family=family,
        filter=h,
        n0=taps // 2,
        table_level=table_level,
        phi_table=phi,
        psi_table=psi,
    )


def evaluate(basis: WaveletBasis, level: int, k: int, points, which: Which = "detail") -> np.ndarray:
    """``h_lk(t) = 2^(l/2) h(2^l t - k)`` (periodized) with ``h = psi`` or ``phi``."""
    return basis.evaluate(level, k, points, which)


@dataclass
class CoefficientSet:
    """Scaling coefficients at ``ell0`` and detail coefficients for ``ell0 <= l <= ell1``.

    ``detail[l]`` has length ``2^l``; ``kept[l]`` flags the coefficients that
    survive thresholding at ``tau``.
    """

    ell0: int
    ell1: int
    scaling: np.ndarray
    detail: dict[int, np.ndarray] = field(default_factory=dict)
    kept: dict[int, np.ndarray] = field(default_factory=dict)
    tau: float = 0.0

    def __post_init__(self):
        self.scaling = np.asarray(self.scaling, dtype=float)
        if self.scaling.shape != (2**self.ell0,):
            raise ValueError(f"scaling must have {2**self.ell0} entries")
        for lev in range(self.ell0, self.ell1 + 1):
            d = np.asarray(self.detail.get(lev, np.zeros(2**lev)), dtype=float)
            if d.shape != (2**lev,):
                raise ValueError(f"level {lev} must have {2**lev} entries")
            self.detail[lev] = d
            if lev not in self.kept:
                self.kept[lev] = np.abs(d) >= self.tau
            self.kept[lev] = np.asarray(self.kept[lev], dtype=bool)

    @property
    def levels(self) -> range:
        return range(self.ell0, self.ell1 + 1)

    def thresholded(self, tau: float) -> "CoefficientSet":
        """Copy with hard-threshold flags ``|d| >= tau``."""
        return CoefficientSet(
            ell0=self.ell0,
            ell1=self.ell1,
            scaling=self.scaling.copy(),
            detail={lev: d.copy() for lev, d in self.detail.items()},
            tau=float(tau),
        )

    def kept_count(self) -> int:
        return int(sum(int(self.kept[lev].sum()) for lev in self.levels))

    def to_json(self) -> str:
        payload = {
            "ell0": self.ell0,
            "ell1": self.ell1,
            "tau": self.tau,
            "scaling": [[k, float(v)] for k, v in enumerate(self.scaling)],
            "detail": [
                [lev, k, float(v), bool(self.kept[lev][k])]
                for lev in self.levels
                for k, v in enumerate(self.detail[lev])
            ],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "CoefficientSet":
        data = json.loads(text)
        ell0, ell1 = int(data["ell0"]), int(data["ell1"])
        scaling = np.zeros(2**ell0)
        for k, v in data["scaling"]:
            scaling[int(k)] = v
        detail = {lev: np.zeros(2**lev) for lev in range(ell0, ell1 + 1)}
        kept = {lev: np.zeros(2**lev, dtype=bool) for lev in range(ell0, ell1 + 1)}
        for lev, k, v, flag in data["detail"]:
            detail[int(lev)][int(k)] = v
            kept[int(lev)][int(k)] = flag
        return cls(ell0, ell1, scaling, detail, kept, tau=float(data["tau"]))


def gram_matrix(basis: WaveletBasis, ell0: int, ell1: int, chunk: int = 2**15) -> np.ndarray:
    """Gram matrix of ``{phi_{ell0 k}} + {psi_lk : ell0 <= l <= ell1}``.

    Rectangle-rule quadrature on ``i / 2^(ell1 + table_level)``. The coarse
    levels are read from a cascade table deepened by ``ell1`` levels, so every
    sample is an exact dyadic value and no interpolation enters.
    """
    fine = make_basis(basis.family, basis.table_level + ell1)
    N = 2 ** (ell1 + basis.table_level)
    size = 2**ell0 + sum(2**lev for lev in range(ell0, ell1 + 1))
    G = np.zeros((size, size))
    for start in range(0, N, chunk):
        t = np.arange(start, min(start + chunk, N)) / N
        A = np.vstack(
            [fine.level_matrix(ell0, t, "scaling")]
            + [fine.level_matrix(lev, t) for lev in range(ell0, ell1 + 1)]
        )
        G += A @ A.T
    return G / N


def synthesize(coeffs: CoefficientSet, basis: WaveletBasis, grid) -> np.ndarray:
    """Evaluate ``sum c phi_{l0 k} + sum kept * d * psi_lk`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    out = coeffs.scaling @ basis.level_matrix(coeffs.ell0, grid, "scaling")
    for lev in coeffs.levels:
        d = np.where(coeffs.kept[lev], coeffs.detail[lev], 0.0)
        if np.any(d):
            out = out + d @ basis.level_matrix(lev, grid, "detail")
    return out.reshape(grid.shape)


def analyze(f, basis: WaveletBasis, ell0: int, ell1: int) -> CoefficientSet:
    """Inner products of ``f`` with the basis, by quadrature on a periodic grid.

    ``f`` holds samples on ``t_i = i / N``, ``i = 0..N-1`` with ``N`` a power
    of two and ``N >= 2^(ell1 + 4)``. On this grid the composite trapezoid rule
    for a 1-periodic integrand is the plain mean.
    """
    f = np.asarray(f, dtype=float)
    N = f.size
    if N & (N - 1) or N < 2 ** (ell1 + 4):
        raise GridTooCoarse(f"need a power-of-two grid with at least {2 ** (ell1 + 4)} points, got {N}")
    t = np.arange(N) / N
    scaling = basis.level_matrix(ell0, t, "scaling") @ f / N
    detail = {lev: basis.level_matrix(lev, t, "detail") @ f / N for lev in range(ell0, ell1 + 1)}
    return CoefficientSet(ell0, ell1, scaling, detail, tau=0.0)


def besov_norm(coeffs: CoefficientSet, s: float, pi: float) -> float:
    """Besov ``B^s_{pi,infty}`` norm from wavelet coefficients, truncated at ``ell1``.

    The supremum over levels only runs over the levels stored in ``coeffs``
    (scaling block counted at level ``ell0``), so this is a lower bound for
    the norm of the underlying function. ``pi = inf`` uses the max norm per
    level.
    """
    if not pi > 0:
        raise BadExponent(f"pi must be positive, got {pi}")
    inv_pi = 0.0 if math.isinf(pi) else 1.0 / pi

    def level_norm(v: np.ndarray) -> float:
        a = np.abs(v)
        if math.isinf(pi):
            return float(a.max(initial=0.0))
        return float(np.sum(a**pi) ** inv_pi)

    blocks = [(coeffs.ell0, coeffs.scaling)]
    blocks += [(lev, coeffs.detail[lev]) for lev in coeffs.levels]
    return max(2.0 ** (lev * (s + 0.5 - inv_pi)) * level_norm(v) for lev, v in blocks)
