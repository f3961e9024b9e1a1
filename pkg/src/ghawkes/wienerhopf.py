"""Discretized Wiener-Hopf system linking cross-covariances and transfer kernels.

For a linear Hawkes process write ``C_{k,j}(d)`` for the continuous part of
the covariance density of an event of ``k`` at ``t`` and an event of ``j``
at ``t + d``. Conditioning on the history gives, for ``d > 0``::

    C_{k,j}(d) = L_k w_{k->j}(d) + sum_i int_0^inf w_{i->j}(s) C_{k,i}(d - s) ds

with ``C_{k,i}(-x) = C_{i,k}(x)``. Grid curves store ``C`` in this
orientation on ``d = n step`` for ``n = -M..M`` and kernels on
``n = 0..M``; values beyond the band ``[-S, S]`` are treated as zero.

``wh_forward`` solves for ``C`` given the kernels using the trapezoid rule.
``wh_recover`` solves for the kernels given ``C`` with the kernel held
constant on each cell ``[m step, (m+1) step)``, a first-order product rule.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .analyze import spectral_radius
from .errors import InstabilityError, ModelError, NumericError
from .model import HawkesModel

log = logging.getLogger(__name__)

COND_WARN = 1e10


@dataclass
class GridCurveSet:
    """Curves on a uniform grid.

    ``kind='cov'`` stores ``values[k, j, n + M] = C_{k,j}(n step)`` for
    ``n = -M..M``; ``kind='omega'`` stores ``values[k, j, n] = w_{k->j}(n step)``
    for ``n = 0..M``.
    """

    step: float
    max_lag: float
    values: np.ndarray
    kind: str = "cov"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("cov", "omega"):
            raise ModelError(f"unknown curve kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=float)
        m = self.n_steps
        want = 2 * m + 1 if self.kind == "cov" else m + 1
        if self.values.ndim != 3 or self.values.shape[0] != self.values.shape[1] or self.values.shape[2] != want:
            raise ModelError(f"values of shape {self.values.shape} do not match a {self.kind} grid of {want} points")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return int(round(self.max_lag / self.step))

    @property
    def grid(self) -> np.ndarray:
        m = self.n_steps
        n = np.arange(-m, m + 1) if self.kind == "cov" else np.arange(m + 1)
        return n * self.step

    @classmethod
    def from_kernels(cls, model: HawkesModel, step: float, max_lag: float) -> "GridCurveSet":
        m = _n_steps(step, max_lag)
        s = np.arange(m + 1) * step
        values = np.zeros((model.p, model.p, m + 1))
        for (k, j), ker in model.kernels.items():
            values[k, j] = ker(s)
        return cls(step, m * step, values, "omega")

    @classmethod
    def from_cov_estimate(cls, est, step: float, max_lag: float) -> "GridCurveSet":
        """Convert a smoothing estimate to this orientation and grid.

        The estimator weights ``K((t' - t + d) / h)`` for ``t`` in ``k`` and
        ``t'`` in ``j``, so its ``(k, j)`` curve estimates ``C_{j,k}``. Values
        are linearly interpolated onto the grid and symmetrized; the largest
        asymmetry seen is kept in ``meta``.
        """
        m = _n_steps(step, max_lag)
        d = np.arange(-m, m + 1) * step
        grid = np.asarray(est.delta_grid, dtype=float)
        if grid.min() > -m * step + 1e-9 or grid.max() < m * step - 1e-9:
            raise ModelError("estimate grid does not cover [-max_lag, max_lag]")
        order = np.argsort(grid)
        p = est.values.shape[0]
        raw = np.empty((p, p, d.size))
        for k in range(p):
            for j in range(p):
                raw[k, j] = np.interp(d, grid[order], est.values[j, k][order])
        mirrored = np.transpose(raw, (1, 0, 2))[:, :, ::-1]
        asym = float(np.max(np.abs(raw - mirrored))) if raw.size else 0.0
        if asym > 0:
            log.info("symmetrizing covariance grid; max asymmetry %.3g", asym)
        return cls(step, m * step, 0.5 * (raw + mirrored), "cov", {"max_asymmetry": asym})


def _n_steps(step, max_lag) -> int:
    if not (step > 0 and max_lag > 0):
        raise ModelError("step and max_lag must be positive")
    m = int(round(max_lag / step))
    if m < 1 or abs(m * step - max_lag) > 1e-9 * max_lag:
        raise ModelError(f"max_lag {max_lag} is not a multiple of step {step}")
    return m


def default_step(model: HawkesModel) -> tuple:
    """``(step, max_lag) = (0.05 / gamma_min, 10 / gamma_min)``."""
    g = model.gamma_min
    return 0.05 / g, 10.0 / g


@dataclass
class WienerHopfResult:
    curves: GridCurveSet
    residual: float
    condition: float
    warnings: list = field(default_factory=list)


def _trap_weights(m):
    w = np.ones(m + 1)
    w[0] = w[-1] = 0.5
    return w


def _check_stable(omega: GridCurveSet):
    w = _trap_weights(omega.n_steps)
    mass = np.abs(omega.values) @ w * omega.step  # [k, j]
    radius = spectral_radius(mass.T)
    if radius >= 1.0:
        raise InstabilityError(f"discretized kernel masses have spectral radius {radius:.6g} >= 1")
    return radius


def _solve(a, rhs, what):
    try:
        lu = scipy.linalg.lu_factor(a, check_finite=True)
    except (ValueError, scipy.linalg.LinAlgError) as exc:
        raise NumericError(f"{what}: {exc}") from exc
    if np.any(np.diag(lu[0]) == 0):
        raise NumericError(f"{what}: singular system")
    anorm = np.linalg.norm(a, 1)
    rcond = scipy.linalg.lapack.dgecon(lu[0], anorm, norm="1")[0]
    cond = math.inf if rcond == 0 else 1.0 / rcond
    if not math.isfinite(cond):
        raise NumericError(f"{what}: singular system (reciprocal condition 0)")
    x = scipy.linalg.lu_solve(lu, rhs)
    return x, cond


def wh_forward(omega: GridCurveSet, lam) -> WienerHopfResult:
    """Covariance curves implied by kernels ``omega`` and mean intensities ``lam``.

    Unknowns are ``C_{k,j}(n step)`` for ``n = 0..M`` and every ordered pair.
    Equations hold at ``n >= 1``; at ``n = 0``, where ``C_{k,j}(0)`` and
    ``C_{j,k}(0)`` coincide, the two one-sided equations are averaged.
    """
    if omega.kind != "omega":
        raise ModelError("wh_forward needs kernel curves (kind='omega')")
    lam = np.asarray(lam, dtype=float)
    p, m, delta = omega.p, omega.n_steps, omega.step
    if lam.shape != (p,):
        raise ModelError("lambda has the wrong length")
    _check_stable(omega)
    w = _trap_weights(m) * delta
    n_unk = p * p * (m + 1)

    def idx(k, j, n):
        # signed lag n in [-m, m] -> unknown index via C_{k,j}(-x) = C_{j,k}(x)
        n = np.asarray(n)
        kk = np.where(n >= 0, k, j)
        jj = np.where(n >= 0, j, k)
        return (kk * p + jj) * (m + 1) + np.abs(n)

    a = np.zeros((n_unk, n_unk))
    rhs = np.zeros(n_unk)
    nn = np.arange(m + 1)[:, None]
    mm = np.arange(m + 1)[None, :]
    lag = nn - mm
    for k in range(p):
        for j in range(p):
            rows = (k * p + j) * (m + 1) + np.arange(m + 1)
            a[rows, rows] += 1.0
            rhs[rows] = lam[k] * omega.values[k, j]
            for i in range(p):
                wij = omega.values[i, j] * w
                if not np.any(wij):
                    continue
                cols = idx(k, i, lag)
                np.add.at(a, (np.broadcast_to(rows[:, None], cols.shape), cols), -np.broadcast_to(wij, cols.shape))
    # lag 0: replace the (k, j) and (j, k) rows by their average and a symmetry constraint
    for k in range(p):
        for j in range(k + 1, p):
            r1 = (k * p + j) * (m + 1)
            r2 = (j * p + k) * (m + 1)
            avg_row = 0.5 * (a[r1] + a[r2])
            avg_rhs = 0.5 * (rhs[r1] + rhs[r2])
            a[r1] = avg_row
            rhs[r1] = avg_rhs
            a[r2] = 0.0
            a[r2, r1] = 1.0
            a[r2, r2] = -1.0
            rhs[r2] = 0.0
    x, cond = _solve(a, rhs, "forward Wiener-Hopf system")
    residual = float(np.max(np.abs(a @ x - rhs))) if n_unk else 0.0
    pos = x.reshape(p, p, m + 1)
    full = np.zeros((p, p, 2 * m + 1))
    full[:, :, m:] = pos
    full[:, :, :m] = np.transpose(pos, (1, 0, 2))[:, :, :0:-1]
    notes = []
    if cond > COND_WARN:
        notes.append(f"condition estimate {cond:.3g} exceeds {COND_WARN:.0e}")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    curves = GridCurveSet(delta, m * delta, full, "cov", {"lambda": lam.tolist(), "condition": cond})
    return WienerHopfResult(curves, residual, cond, notes)


def wh_recover(cov: GridCurveSet, lam) -> WienerHopfResult:
    """Kernels on ``[0, S]`` solving the discretized system given covariances.

    The convolution uses ``w`` constant on each cell and the trapezoid rule
    for ``C`` inside the cell, which is first-order accurate in the step.
    The system matrix does not depend on the target component, so one
    factorization serves all targets.
    """
    if cov.kind != "cov":
        raise ModelError("wh_recover needs covariance curves (kind='cov')")
    lam = np.asarray(lam, dtype=float)
    p, m, delta = cov.p, cov.n_steps, cov.step
    if lam.shape != (p,):
        raise ModelError("lambda has the wrong length")
    if not np.all(lam > 0):
        raise ModelError("mean intensities must be positive")
    c = cov.values  # c[k, i, n + m]
    n_unk = p * (m + 1)
    a = np.zeros((n_unk, n_unk))
    nn = np.arange(m + 1)[:, None]
    mm = np.arange(m)[None, :]
    for k in range(p):
        rows = k * (m + 1) + np.arange(m + 1)
        a[rows, rows] += lam[k]
        for i in range(p):
            cell = 0.5 * delta * (c[k, i][nn - mm + m] + c[k, i][nn - mm - 1 + m])
            a[np.ix_(rows, i * (m + 1) + np.arange(m))] += cell
    rhs = np.stack([c[:, j, m:].reshape(-1) for j in range(p)], axis=1)
    x, cond = _solve(a, rhs, "Wiener-Hopf recovery system")
    residual = float(np.max(np.abs(a @ x - rhs))) if n_unk else 0.0
    values = np.empty((p, p, m + 1))
    for j in range(p):
        values[:, j, :] = x[:, j].reshape(p, m + 1)
    notes = []
    if cond > COND_WARN:
        notes.append(f"condition estimate {cond:.3g} exceeds {COND_WARN:.0e}")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    curves = GridCurveSet(delta, m * delta, values, "omega", {"lambda": lam.tolist(), "condition": cond})
    return WienerHopfResult(curves, residual, cond, notes)
