"""Generalized Hawkes model specification and conditional intensities.

Components are indexed from 0 in the Python API. Files and the CLI use
1-based marks; conversion happens in :mod:`ghawkes.io`.

A kernel ``(k, j)`` is the effect of component ``k``'s events on the drive of
component ``j``::

    lambda_j(t) = phi_j( mu_j + sum_k sum_{t_ki < t} omega_kj(t - t_ki) )
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ModelError

LINK_KINDS = ("linear", "sigmoid", "rectifier", "capped-linear")
LINK_CODES = {kind: code for code, kind in enumerate(LINK_KINDS)}

DEFAULT_TRUNC_TOL = 1e-12


def _sigmoid(x):
    # split form avoids overflow in exp for large |x|
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class LinkSpec:
    """Link function ``phi_j`` mapping the drive to an intensity.

    ``linear`` is the identity and is only defined on nonnegative drives;
    the other kinds are nonnegative everywhere.
    """

    kind: str = "linear"
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ConfigError(f"unknown link kind {self.kind!r}; expected one of {LINK_KINDS}")
        if self.kind == "capped-linear":
            if self.cap is None or not self.cap > 0:
                raise ConfigError("capped-linear link needs a positive cap")
        elif self.cap is not None:
            raise ConfigError(f"cap is only meaningful for capped-linear, not {self.kind}")

    @property
    def lipschitz_alpha(self) -> float:
        # sigmoid's tight constant is 1/4; 1 is the declared bookkeeping value
        return 1.0

    @property
    def upper_bound(self) -> float | None:
        if self.kind == "sigmoid":
            return 1.0
        if self.kind == "capped-linear":
            return float(self.cap)
        return None

    @property
    def bounded(self) -> bool:
        return self.upper_bound is not None

    @property
    def code(self) -> int:
        return LINK_CODES[self.kind]

    def __call__(self, x):
        if np.ndim(x) > 0:
            return np.array([self(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))
        x = float(x)
        if self.kind == "linear":
            return x
        if self.kind == "sigmoid":
            return _sigmoid(x)
        if self.kind == "rectifier":
            return x if x > 0.0 else 0.0
        return min(x if x > 0.0 else 0.0, self.cap)


@dataclass(frozen=True)
class GammaKernel:
    """Transfer kernel ``a * gamma**2 * t * exp(-gamma * t)`` for ``t >= 0``.

    The shape integrates to one, so the L1 norm is ``|a|``. The kernel peaks
    at ``t = 1/gamma``.
    """

    amplitude: float
    decay: float = 1.0

    def __post_init__(self):
        if not (self.decay > 0 and math.isfinite(self.decay)):
            raise ConfigError(f"kernel decay must be positive and finite, got {self.decay}")
        if not math.isfinite(self.amplitude):
            raise ConfigError("kernel amplitude must be finite")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        g = self.decay
        out = np.where(t >= 0, self.amplitude * g * g * t * np.exp(-g * np.maximum(t, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def l1_norm(self) -> float:
        return abs(self.amplitude)

    def tail_mass(self, b):
        """Integral of ``|omega|`` over ``[b, inf)``."""
        b = np.maximum(np.asarray(b, dtype=float), 0.0)
        gb = self.decay * b
        out = abs(self.amplitude) * (1.0 + gb) * np.exp(-gb)
        return out if out.ndim else float(out)

    def envelope_sup(self, lag):
        """``sup_{s >= lag} |omega(s)|``; nonincreasing in ``lag``."""
        lag = np.maximum(np.asarray(lag, dtype=float), 1.0 / self.decay)
        out = np.abs(self(lag))
        return out if out.ndim else float(out)

    def truncation_lag(self, tol: float = DEFAULT_TRUNC_TOL) -> float:
        """Smallest lag ``L`` (to bisection precision) with ``tail_mass(L) < tol``."""
        if self.tail_mass(0.0) < tol:
            return 0.0
        lo, hi = 0.0, 1.0 / self.decay
        while self.tail_mass(hi) >= tol:
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.tail_mass(mid) >= tol:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * hi:
                break
        return hi


@dataclass(frozen=True)
class HawkesModel:
    """Multivariate generalized Hawkes model.

    Parameters
    ----------
    mu : sequence of float
        Background drives, one per component.
    links : sequence of LinkSpec
        One link per component.
    kernels : mapping (k, j) -> GammaKernel
        Sparse signed transfer kernels, source ``k`` to target ``j``.
    metadata : mapping, optional
        Free-form provenance (for example the block-model decay).
    """

    mu: tuple
    links: tuple
    kernels: Mapping = field(default_factory=dict)
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        mu = tuple(float(m) for m in np.ravel(self.mu))
        links = (self.links,) if isinstance(self.links, LinkSpec) else tuple(self.links)
        if len(mu) == 0:
            raise ConfigError("model needs at least one component")
        if len(links) == 1 and len(mu) > 1:
            links = links * len(mu)
        if len(links) != len(mu):
            raise ConfigError(f"{len(links)} links for {len(mu)} components")
        if not all(math.isfinite(m) for m in mu):
            raise ConfigError("background rates must be finite")
        p = len(mu)
        kernels = {}
        for (k, j), ker in dict(self.kernels).items():
            k, j = int(k), int(j)
            if not (0 <= k < p and 0 <= j < p):
                raise ConfigError(f"kernel index ({k}, {j}) outside [0, {p})")
            if not isinstance(ker, GammaKernel):
                raise ConfigError(f"kernel ({k}, {j}) is not a GammaKernel")
            if ker.amplitude != 0.0:
                kernels[(k, j)] = ker
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "kernels", dict(sorted(kernels.items())))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def p(self) -> int:
        return len(self.mu)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([link.lipschitz_alpha for link in self.links])

    @property
    def all_bounded(self) -> bool:
        return all(link.bounded for link in self.links)

    @property
    def gamma_min(self) -> float:
        return min((k.decay for k in self.kernels.values()), default=1.0)

    @property
    def gamma_max(self) -> float:
        return max((k.decay for k in self.kernels.values()), default=1.0)

    def incoming(self, j: int):
        """``[(k, kernel), ...]`` for kernels targeting ``j``, sorted by source."""
        return [(k, ker) for (k, jj), ker in self.kernels.items() if jj == j]

    def amplitude_matrix(self) -> np.ndarray:
        """``A[k, j]`` = amplitude of the kernel from ``k`` to ``j``."""
        a = np.zeros((self.p, self.p))
        for (k, j), ker in self.kernels.items():
            a[k, j] = ker.amplitude
        return a


@dataclass(frozen=True)
class EventStream:
    """A realization on ``[0, horizon]``: event times with 0-based marks."""

    horizon: float
    times: np.ndarray
    marks: np.ndarray
    p: int | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        marks = np.asarray(self.marks, dtype=np.int64).ravel()
        if not self.horizon > 0:
            raise ModelError(f"horizon must be positive, got {self.horizon}")
        if times.shape != marks.shape:
            raise ModelError("times and marks differ in length")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise ModelError("event times must be sorted")
            if times[0] < 0 or times[-1] > self.horizon:
                raise ModelError("event times must lie in [0, horizon]")
            if marks.min() < 0:
                raise ModelError("marks must be nonnegative")
            same = np.diff(times) == 0
            if np.any(same):
                pairs = set()
                for t, m in zip(times, marks):
                    if (t, m) in pairs:
                        raise ModelError(f"duplicate event ({t}, {m})")
                    pairs.add((t, m))
        p = self.p
        if p is None:
            p = int(marks.max()) + 1 if marks.size else 1
        elif marks.size and marks.max() >= p:
            raise ModelError(f"mark {marks.max()} out of range for p={p}")
        times.setflags(write=False)
        marks.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "p", int(p))
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def from_components(cls, horizon: float, per_component: Sequence, p: int | None = None):
        """Build from one time array per component."""
        if p is None:
            p = len(per_component)
        times = np.concatenate([np.asarray(t, dtype=float) for t in per_component] or [np.empty(0)])
        marks = np.concatenate(
            [np.full(len(t), j, dtype=np.int64) for j, t in enumerate(per_component)]
            or [np.empty(0, dtype=np.int64)]
        )
        order = np.lexsort((marks, times))
        return cls(horizon, times[order], marks[order], p)

    def __len__(self):
        return self.times.size

    def component(self, j: int) -> np.ndarray:
        return self.times[self.marks == j]

    def components(self) -> list:
        return [self.component(j) for j in range(self.p)]

    def counts(self) -> np.ndarray:
        return np.bincount(self.marks, minlength=self.p)

    def count(self, j: int, start: float = 0.0, stop: float | None = None, closed: str = "left") -> int:
        """``N_j`` over ``[start, stop)`` (``closed='left'``) or ``(start, stop]`` (``'right'``)."""
        t = self.component(j)
        stop = self.horizon if stop is None else stop
        side_lo, side_hi = ("left", "left") if closed == "left" else ("right", "right")
        return int(np.searchsorted(t, stop, side_hi) - np.searchsorted(t, start, side_lo))

    def restrict(self, start: float, stop: float | None = None) -> "EventStream":
        """Events in ``[start, stop]``, times unchanged."""
        stop = self.horizon if stop is None else stop
        keep = (self.times >= start) & (self.times <= stop)
        return EventStream(self.horizon, self.times[keep], self.marks[keep], self.p)


def intensity_at(model: HawkesModel, history: EventStream, t: float, j: int,
                 trunc_tol: float = DEFAULT_TRUNC_TOL) -> float:
    """Conditional intensity of component ``j`` at time ``t``.

    Only events strictly before ``t`` contribute. Each kernel sum is truncated
    at the lag where its tail mass drops below ``trunc_tol``.
    """
    if not 0 <= j < model.p:
        raise IndexError(f"component {j} out of range for p={model.p}")
    if t < 0:
        raise ModelError(f"intensity requested at negative time {t}")
    drive = model.mu[j]
    for k, ker in model.incoming(j):
        src = history.component(k)
        lag = ker.truncation_lag(trunc_tol)
        lo = np.searchsorted(src, t - lag, "left")
        hi = np.searchsorted(src, t, "left")
        if hi > lo:
            drive += float(np.sum(ker(t - src[lo:hi])))
    value = model.links[j](drive)
    if not math.isfinite(value) or value < 0:
        raise ModelError(f"intensity of component {j} at t={t} is {value} (link {model.links[j].kind})")
    return value


def build_block_model(p: int, gamma: float = 1.0) -> HawkesModel:
    """Connected block-diagonal network of 4-node blocks with sigmoid links.

    Within block ``i`` (nodes ``4i..4i+3``, 0-based): node 0 excites nodes 1
    and 2, which inhibit each other and excite node 3; every node inhibits
    itself. The last node of each block excites the first node of the next.
    All background drives are 1.
    """
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 4 or p % 4:
        raise ConfigError(f"block model needs p a positive multiple of 4, got {p!r}")
    p = int(p)
    amps = {}
    for i in range(p // 4):
        b = 4 * i
        for src, dst in ((b, b + 1), (b, b + 2), (b + 1, b + 3), (b + 2, b + 3)):
            amps[(src, dst)] = 0.3
        for src, dst in ((b + 1, b + 1), (b + 2, b + 2), (b + 1, b + 2), (b + 2, b + 1), (b + 3, b + 3)):
            amps[(src, dst)] = -0.3
        amps[(b, b)] = -0.9 if i == 0 else -0.45
        if b + 4 < p:
            amps[(b + 3, b + 4)] = 0.45
    kernels = {kj: GammaKernel(a, gamma) for kj, a in amps.items()}
    return HawkesModel(
        mu=(1.0,) * p,
        links=(LinkSpec("sigmoid"),) * p,
        kernels=kernels,
        metadata={"block_model": {"p": p, "gamma": gamma}},
    )
