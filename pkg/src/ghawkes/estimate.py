"""Nonparametric estimators computed from a single realization.

All pairwise sums are restricted to partner events inside the support of the
weight function, located by binary search in the sorted event times, so the
cost is linear in the number of contributing pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from . import _backend
from .errors import ModelError, UnsupportedConfigurationError
from .model import EventStream

_PAIR_CHUNK = 2_000_000


@dataclass(frozen=True)
class SmoothingKernel:
    """Epanechnikov smoothing kernel ``K(x) = 0.75 (1 - x^2)`` on ``[-1, 1]``.

    ``K`` integrates to one, so ``K(t / h)`` integrates to ``h``.
    """

    bandwidth: float
    kind: str = "epanechnikov"

    def __post_init__(self):
        if self.kind != "epanechnikov":
            raise ModelError(f"unsupported smoothing kernel {self.kind!r}")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ModelError(f"bandwidth must be positive and finite, got {self.bandwidth}")

    @staticmethod
    def profile(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) < 1.0, 0.75 * (1.0 - x * x), 0.0)

    def __call__(self, t):
        return self.profile(np.asarray(t, dtype=float) / self.bandwidth)


@dataclass(frozen=True)
class BoundedFunctionSpec:
    """A weight function ``f`` with support ``[b1, b2]`` and ``|f| <= sup_bound``.

    ``evaluator`` must accept a float array and return an array of the same
    shape. Values outside the support are forced to zero.
    """

    support: tuple
    evaluator: Callable
    sup_bound: float

    def __post_init__(self):
        b1, b2 = (float(v) for v in self.support)
        if not (math.isfinite(b1) and math.isfinite(b2)):
            raise UnsupportedConfigurationError("weight function must have bounded support")
        if b1 > b2:
            raise ModelError(f"empty support [{b1}, {b2}]")
        object.__setattr__(self, "support", (b1, b2))
        if not self.sup_bound >= 0:
            raise ModelError("sup_bound must be nonnegative")

    @property
    def radius(self) -> float:
        return max(abs(self.support[0]), abs(self.support[1]))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        b1, b2 = self.support
        inside = (x >= b1) & (x <= b2)
        out = np.zeros(x.shape)
        if inside.any():
            out[inside] = np.asarray(self.evaluator(x[inside]), dtype=float)
        return out

    def validate(self, n: int = 1001) -> bool:
        """Check ``|f| <= sup_bound`` on an even sample of the support."""
        xs = np.linspace(self.support[0], self.support[1], n)
        return bool(np.all(np.abs(self(xs)) <= self.sup_bound * (1 + 1e-12)))

    @classmethod
    def indicator(cls, b1: float, b2: float, scale: float = 1.0) -> "BoundedFunctionSpec":
        return cls((b1, b2), lambda x: np.full(np.shape(x), float(scale)), abs(scale))

    @classmethod
    def zero(cls) -> "BoundedFunctionSpec":
        return cls((0.0, 0.0), lambda x: np.zeros(np.shape(x)), 0.0)


def mean_intensity_hat(stream: EventStream) -> np.ndarray:
    """``N_j([0, T]) / T`` per component."""
    if not stream.horizon > 0:
        raise ModelError("horizon must be positive")
    return stream.counts() / stream.horizon


def _per_partner_sums(f: BoundedFunctionSpec, tk, tj, drop_self: bool) -> np.ndarray:
    """For each ``t'`` in ``tj``: ``sum over t in tk of f(t - t')``."""
    out = np.zeros(tj.size)
    if tk.size == 0 or tj.size == 0:
        return out
    b1, b2 = f.support
    lo = np.searchsorted(tk, tj + b1, "left")
    hi = np.searchsorted(tk, tj + b2, "right")
    n = hi - lo
    # process partners in chunks to bound memory
    start = 0
    while start < tj.size:
        csum = np.cumsum(n[start:])
        stop = start + max(1, int(np.searchsorted(csum, _PAIR_CHUNK, "right")))
        idx = np.arange(start, stop)
        cnt = n[idx]
        total = int(cnt.sum())
        if total:
            owner = np.repeat(idx, cnt)
            offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            partner = lo[owner] + offs
            vals = f(tk[partner] - tj[owner])
            if drop_self:
                vals[partner == owner] = 0.0
            out[start:stop] = np.bincount(owner - start, weights=vals, minlength=stop - start)
        start = stop
    return out


def second_order_stat(f: BoundedFunctionSpec, stream: EventStream, j: int, k: int,
                      include_diagonal: bool = True) -> float:
    """``(1/T) sum_{t in N_k, t' in N_j} f(t - t')``.

    With ``j == k`` the pair of an event with itself contributes ``f(0)``
    unless ``include_diagonal`` is false.
    """
    if not isinstance(f, BoundedFunctionSpec):
        raise UnsupportedConfigurationError("f must be a BoundedFunctionSpec with bounded support")
    sums = _per_partner_sums(f, stream.component(k), stream.component(j), j == k and not include_diagonal)
    return float(np.sum(sums) / stream.horizon)


@dataclass(frozen=True)
class BlockSequence:
    """Block averages ``y_i`` with the epsilon actually used (``T / (2 eps)`` integral)."""

    values: np.ndarray
    epsilon: float
    requested_epsilon: float

    def mean_identity(self, horizon: float) -> float:
        """``(2 eps / T) sum_i y_i``; equals the full statistic by construction."""
        return float(2.0 * self.epsilon / horizon * np.sum(self.values))


def block_sequence(f: BoundedFunctionSpec, stream: EventStream, j: int, k: int, epsilon: float,
                   include_diagonal: bool = True) -> BlockSequence:
    """Blockwise contributions to the second-order statistic.

    ``y_i = (1 / 2 eps) sum over t' in N_j in block i, t in N_k of f(t - t')``
    for blocks ``[2 eps (i-1), 2 eps i)``; the last block is closed at ``T``.
    ``epsilon`` is rounded down so that the blocks tile ``[0, T]``.
    """
    if not epsilon > 0:
        raise ModelError(f"epsilon must be positive, got {epsilon}")
    T = stream.horizon
    n_blocks = int(math.ceil(T / (2.0 * epsilon) - 1e-12))
    n_blocks = max(n_blocks, 1)
    eps = T / (2.0 * n_blocks)
    tj = stream.component(j)
    sums = _per_partner_sums(f, stream.component(k), tj, j == k and not include_diagonal)
    block = np.minimum((tj / (2.0 * eps)).astype(np.int_), n_blocks - 1)
    totals = np.bincount(block, weights=sums, minlength=n_blocks)
    return BlockSequence(totals / (2.0 * eps), eps, float(epsilon))


def default_epsilon(model, f: BoundedFunctionSpec | None = None) -> float:
    eps = 6.0 / model.gamma_min
    if f is not None:
        eps = max(eps, f.radius)
    return eps


@dataclass
class CovEstimate:
    """Cross-covariance estimates ``values[k, j, g] = V_{k,j}(delta_grid[g])``.

    Orientation follows the smoothing estimator: pairs are (event of ``k`` at
    ``t``, event of ``j`` at ``t'``) weighted by ``K((t' - t + delta) / h)``.
    """

    delta_grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    horizon: float
    lambda_hat: np.ndarray
    kernel: str = "epanechnikov"
    se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def curve(self, k: int, j: int) -> np.ndarray:
        return self.values[k, j]

    def at_zero(self) -> np.ndarray:
        """``values[:, :, g0]`` where ``delta_grid[g0] == 0``."""
        hit = np.flatnonzero(self.delta_grid == 0.0)
        if hit.size == 0:
            raise ModelError("delta grid does not contain 0")
        return self.values[:, :, hit[0]]


def default_grid(bandwidth: float, B: float) -> np.ndarray:
    """Symmetric grid on ``[-B, B]`` with step at most ``h / 2`` and both ends included."""
    if not (B > 0 and bandwidth > 0):
        raise ModelError("B and bandwidth must be positive")
    n = int(math.ceil(B / (bandwidth / 2.0)))
    return np.arange(-n, n + 1) / n * B


def estimate_cross_cov(stream: EventStream, delta_grid, kernel: SmoothingKernel | float,
                       backend: str | None = None) -> CovEstimate:
    """Kernel-smoothed cross-covariance estimate on ``delta_grid``.

    ``V_{k,j}(d) = (T h)^{-1} sum_{t in N_k, t' in N_j} K((t' - t + d) / h) - L_j L_k``
    with the pairs ``t == t'`` of one event with itself dropped when ``j == k``.
    """
    if not isinstance(kernel, SmoothingKernel):
        kernel = SmoothingKernel(float(kernel))
    grid = np.asarray(delta_grid, dtype=float)
    if grid.ndim != 1 or not np.all(np.isfinite(grid)):
        raise ModelError("delta grid must be a finite 1-d array")
    order = np.argsort(grid, kind="stable")
    sorted_grid = np.ascontiguousarray(grid[order])
    core = _backend.get_core(backend)
    h = kernel.bandwidth
    T = stream.horizon
    sums = core.cross_pair_sums([np.ascontiguousarray(c) for c in stream.components()], sorted_grid, h)
    lam = mean_intensity_hat(stream)
    values = np.empty_like(sums)
    values[:, :, order] = sums / (T * h) - np.outer(lam, lam)[:, :, None]
    return CovEstimate(grid.copy(), values, h, T, lam, kernel.kind)


def bandwidth_rule(T: float, r: float = 1.0, c8: float = 0.32) -> float:
    """``h = c8 T^{-(r + 0.5) / (5 r + 2)}``; exponent ``-3/14`` at ``r = 1``."""
    if not T > 0:
        raise ModelError(f"T must be positive, got {T}")
    if not r > 0:
        raise ModelError(f"r must be positive, got {r}")
    return float(c8 * T ** (-(r + 0.5) / (5.0 * r + 2.0)))


def l2_band_distance(a, b, grid, B: float):
    """``sqrt(int_{-B}^{B} (a - b)^2)`` by the trapezoid rule on ``grid``.

    ``a`` and ``b`` may carry leading axes; the last axis runs along ``grid``.
    Endpoints ``+-B`` that are not grid points are linearly interpolated.
    """
    grid = np.asarray(grid, dtype=float)
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if diff.shape[-1] != grid.size:
        raise ModelError("curves and grid have different lengths")
    if B < 0:
        raise ModelError("B must be nonnegative")
    slack = 1e-12 * max(1.0, B)
    if grid.size < 2 or grid[0] > -B + slack or grid[-1] < B - slack:
        raise ModelError(f"grid [{grid[0] if grid.size else 'nan'}, {grid[-1] if grid.size else 'nan'}] "
                         f"does not cover [-{B}, {B}]")
    inside = (grid > -B) & (grid < B)
    xs = np.concatenate([[-B], grid[inside], [B]])
    flat = diff.reshape(-1, grid.size)
    left = np.array([np.interp(-B, grid, row) for row in flat])
    right = np.array([np.interp(B, grid, row) for row in flat])
    ys = np.concatenate([left[:, None], flat[:, inside], right[:, None]], axis=1)
    out = np.sqrt(trapezoid(ys * ys, xs, axis=1)).reshape(diff.shape[:-1])
    return float(out) if out.ndim == 0 else out
