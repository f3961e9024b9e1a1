"""Stability checks, interaction-mass matrices and coupling deviation bounds.

Matrix orientation throughout: ``Omega[j, k] = alpha_j * ||omega_{k->j}||_1``,
so row ``j`` collects everything that drives component ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InstabilityError, NumericError
from .model import HawkesModel

DEFAULT_MARGIN_TOL = 1e-9
HARD_ASSUMPTIONS = ("spectral_radius",)


def build_omega(model: HawkesModel) -> np.ndarray:
    omega = np.zeros((model.p, model.p))
    alphas = model.alphas
    for (k, j), ker in model.kernels.items():
        omega[j, k] = alphas[j] * ker.l1_norm()
    return omega


def tail_matrix(model: HawkesModel, b: float) -> np.ndarray:
    """``eta[j, k] = alpha_j * int_b^inf |omega_{k->j}|``."""
    eta = np.zeros((model.p, model.p))
    alphas = model.alphas
    for (k, j), ker in model.kernels.items():
        eta[j, k] = alphas[j] * ker.tail_mass(b)
    return eta


def integrated_kernel_matrix(model: HawkesModel) -> np.ndarray:
    """Signed ``M[j, k] = int_0^inf omega_{k->j}``."""
    m = np.zeros((model.p, model.p))
    for (k, j), ker in model.kernels.items():
        m[j, k] = ker.amplitude
    return m


def _perron_root_irreducible(block, tol, max_iter):
    # shifting by s I makes the block primitive; the Collatz-Wielandt ratios
    # then bracket the Perron root and close geometrically. A shift of the
    # order of the root itself keeps the contraction rate away from one even
    # when the root is tiny next to the entries.
    shift = float(np.max(np.abs(np.linalg.eigvals(block))))
    if not shift > 0:
        shift = 1.0
    x = np.ones(block.shape[0])
    lo = hi = math.nan
    for _ in range(max_iter):
        y = block @ x + shift * x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= tol * hi:
            return max(0.5 * (lo + hi) - shift, 0.0)
        x = y / y.max()
    raise NumericError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(bracket [{lo - shift:.6g}, {hi - shift:.6g}], residual {hi - lo:.3g})"
    )


def spectral_radius(m, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Perron root of a nonnegative square matrix by power iteration.

    The matrix is split into strongly connected blocks (the root of a
    reducible matrix is the largest root over its diagonal blocks) and each
    irreducible block is iterated from the all-ones vector.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"spectral_radius needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if np.any(m < 0):
        raise ValueError("matrix must be nonnegative")
    if m.size == 0:
        return 0.0
    n_comp, labels = connected_components(csr_matrix(m > 0), directed=True, connection="strong")
    best = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        block = m[np.ix_(idx, idx)]
        if idx.size == 1:
            root = float(block[0, 0])
        else:
            # iterate on a unit-scale copy so tiny entries neither underflow nor defeat the tolerance
            scale = float(block.max())
            root = scale * _perron_root_irreducible(block / scale, tol, max_iter)
        best = max(best, root)
    return best


def _signed_spectral_radius(m) -> float:
    m = np.asarray(m, dtype=float)
    if np.all(m >= 0):
        return spectral_radius(m)
    return float(np.max(np.abs(np.linalg.eigvals(m)))) if m.size else 0.0


def tail_curve(model: HawkesModel, b_grid) -> np.ndarray:
    """``max_j sum_k int_b^inf |omega_{k->j}|`` on ``b_grid``."""
    b_grid = np.asarray(b_grid, dtype=float)
    per_target = np.zeros((model.p, b_grid.size))
    for (k, j), ker in model.kernels.items():
        per_target[j] += ker.tail_mass(b_grid)
    return per_target.max(axis=0)


def fit_tail(b_grid, tail, r_candidates=(0.5, 1.0, 2.0)) -> dict:
    """Least-squares fit of ``log tail = log c1 - c2 * b**r`` for each candidate ``r``.

    Returns the candidate with the smallest residual.
    """
    b_grid = np.asarray(b_grid, dtype=float)
    tail = np.asarray(tail, dtype=float)
    if np.all(tail == 0):
        return {"r": None, "c1": 0.0, "c2": math.inf, "rss": 0.0, "exact_zero": True}
    keep = tail > 0
    y = np.log(tail[keep])
    best = None
    for r in r_candidates:
        x = b_grid[keep] ** r
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        rss = float(np.sum((A @ coef - y) ** 2))
        if best is None or rss < best["rss"]:
            best = {"r": float(r), "c1": float(np.exp(coef[0])), "c2": float(-coef[1]), "rss": rss,
                    "exact_zero": False}
    return best


@dataclass
class Verdict:
    passed: bool
    margin: float
    hard: bool
    detail: str = ""


@dataclass
class AssumptionReport:
    gamma_omega: float
    rho_omega: float
    tail_fit: dict
    tail_exact: dict
    phi_max: float | None
    verdicts: dict = field(default_factory=dict)
    b_grid: np.ndarray | None = None
    tail: np.ndarray | None = None

    @property
    def hard_failure(self) -> bool:
        return any(v.hard and not v.passed for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "gamma_omega": self.gamma_omega,
            "rho_omega": self.rho_omega,
            "tail_fit": self.tail_fit,
            "tail_exact": self.tail_exact,
            "phi_max": self.phi_max,
            "verdicts": {k: vars(v) for k, v in self.verdicts.items()},
        }

    def format(self) -> str:
        lines = [
            f"spectral radius gamma_Omega = {self.gamma_omega:.12g}",
            f"max row sum     rho_Omega   = {self.rho_omega:.12g}",
            f"tail fit        r={self.tail_fit['r']} c1={self.tail_fit['c1']:.6g} c2={self.tail_fit['c2']:.6g}",
            f"tail exact      {self.tail_exact}",
            f"phi_max         {self.phi_max}",
        ]
        for name, v in self.verdicts.items():
            tag = "PASS" if v.passed else "FAIL"
            kind = "hard" if v.hard else "soft"
            lines.append(f"[{tag}] {name} ({kind}) margin={v.margin:.6g} {v.detail}".rstrip())
        return "\n".join(lines)


def default_b_grid(model: HawkesModel) -> np.ndarray:
    return np.linspace(1.0, 20.0, 40) / model.gamma_min


def check_assumptions(model: HawkesModel, b0_grid=None, margin_tol: float = DEFAULT_MARGIN_TOL,
                      strict: bool = False) -> AssumptionReport:
    """Evaluate the stability, tail, row-sum and boundedness conditions.

    Failures are reported as verdicts. Only the spectral-radius condition is
    hard unless ``strict`` is set.
    """
    omega = build_omega(model)
    gamma = spectral_radius(omega)
    rho = float(omega.sum(axis=1).max()) if model.p else 0.0
    b_grid = default_b_grid(model) if b0_grid is None else np.asarray(b0_grid, dtype=float)
    tail = tail_curve(model, b_grid)
    fit = fit_tail(b_grid, tail)
    if model.kernels:
        tail_exact = {"family": "gamma", "r": 1.0, "rate": model.gamma_min,
                      "form": "sum |a| (1 + gamma b) exp(-gamma b)"}
    else:
        tail_exact = {"family": "none", "r": None, "rate": math.inf, "form": "0"}
    phi_max = max(link.upper_bound for link in model.links) if model.all_bounded else None

    verdicts = {}
    verdicts["spectral_radius"] = Verdict(gamma < 1.0 - margin_tol, 1.0 - gamma, True,
                                          "Gamma_max(Omega) < 1")
    if fit["exact_zero"]:
        verdicts["tail_decay"] = Verdict(True, math.inf, strict, "no kernels")
    else:
        decreasing = bool(np.all(np.diff(tail) <= 1e-15 * tail[:-1]))
        ok = decreasing and fit["c2"] > 0 and tail[-1] < tail[0]
        verdicts["tail_decay"] = Verdict(ok, fit["c2"], strict, f"fitted r={fit['r']}")
    verdicts["row_sum"] = Verdict(rho < 1.0 - margin_tol, 1.0 - rho, strict, "max_j sum_k Omega_jk < 1")
    if phi_max is not None:
        verdicts["bounded"] = Verdict(True, phi_max, strict, "all links bounded")
    else:
        verdicts["bounded"] = Verdict(bool(fit["exact_zero"]), 0.0, strict,
                                      "unbounded link and nonzero kernel tails")
    return AssumptionReport(gamma, rho, fit, tail_exact, phi_max, verdicts, b_grid, tail)


def mean_intensity_linear(mu, m) -> np.ndarray:
    """Solve ``Lambda = mu + M Lambda`` for a stable linear model."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    m = np.atleast_2d(np.asarray(m, dtype=float))
    radius = _signed_spectral_radius(m)
    if radius >= 1.0:
        raise InstabilityError(f"spectral radius {radius:.6g} >= 1; no stationary mean intensity")
    return np.linalg.solve(np.eye(mu.size) - m, mu)


def neumann_intensity(mu, m, n_terms: int) -> np.ndarray:
    """Partial sum ``sum_{i < n_terms} M^i mu``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    m = np.atleast_2d(np.asarray(m, dtype=float))
    radius = _signed_spectral_radius(m)
    if radius >= 1.0:
        raise InstabilityError(f"spectral radius {radius:.6g} >= 1; series diverges")
    total = np.zeros_like(mu)
    term = mu.copy()
    for _ in range(int(n_terms)):
        total += term
        term = m @ term
    return total


def _n_blocks(u, b):
    if u < 0 or not b > 0:
        raise ValueError(f"need u >= 0 and b > 0, got u={u}, b={b}")
    return int(math.floor(u / b + 1.0))


def first_order_deviation_bound(omega, eta, v1: float, u: float, b: float) -> np.ndarray:
    """Upper bound on ``E|dN~(z+u) - dN(z+u)| / du`` per component.

    ``2 v1 (Omega^n J + sum_{i=1..n} Omega^(i-1) eta J)`` with ``n = floor(u/b + 1)``.
    """
    if not v1 > 0:
        raise ValueError("v1 must be positive")
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    n = _n_blocks(u, b)
    ones = np.ones(omega.shape[0])
    eta_j = eta @ ones
    power = np.eye(omega.shape[0])
    acc = np.zeros(omega.shape[0])
    for _ in range(n):
        acc += power @ eta_j
        power = power @ omega
    return 2.0 * v1 * (power @ ones + acc)


def second_order_deviation_bound(omega, eta, v1: float, v2: float, u: float, b: float) -> np.ndarray:
    """Upper bound on the product-deviation density, a ``p x p`` matrix.

    ``2 v2 {Omega^(n+1) + sum_{i=1..n} Omega^i eta} J J' +
    2 v1^2 {J J' (Omega^n)' + sum_{i=1..n} eta J J' (Omega^i)'}``
    with ``n = floor(u/b + 1)``.
    """
    if not (v1 > 0 and v2 > 0):
        raise ValueError("v1 and v2 must be positive")
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    p = omega.shape[0]
    n = _n_blocks(u, b)
    jj = np.ones((p, p))
    power = np.eye(p)
    left = np.zeros((p, p))
    right = np.zeros((p, p))
    for _ in range(n):
        power = power @ omega
        left += power @ eta
        right += eta @ jj @ power.T
    omega_n = power
    left_total = (omega_n @ omega + left) @ jj
    right_total = jj @ omega_n.T + right
    return 2.0 * v2 * left_total + 2.0 * v1 * v1 * right_total


def default_block_length(u: float, b0: float, rho_omega: float, c1: float, r: float) -> float:
    """Lag block ``b = max(b0, (log(1/rho) / c1)^(1/(r+1)) u^(1/(r+1)))``."""
    if rho_omega <= 0 or c1 <= 0 or not math.isfinite(c1) or u <= 0:
        return float(b0)
    scale = (math.log(1.0 / rho_omega) / c1) ** (1.0 / (r + 1.0))
    return float(max(b0, scale * u ** (1.0 / (r + 1.0))))


def v1_parameter(model: HawkesModel, lambda_hat) -> float:
    """``max_j max(phi_j(mu_j), Lambda_j)`` with an empirical ``Lambda``."""
    lam = np.asarray(lambda_hat, dtype=float)
    base = np.array([link(m) for link, m in zip(model.links, model.mu)])
    return float(np.max(np.maximum(base, lam)))


def v2_heuristic(values, lambda_hat, factor: float = 2.0) -> float:
    """Stand-in for the non-computable second-order constant: ``factor * max(|V| + Lambda Lambda')``.

    ``values`` has shape ``(p, p, G)``.
    """
    lam = np.asarray(lambda_hat, dtype=float)
    vmax = np.max(np.abs(values), axis=-1)
    return float(factor * np.max(vmax + np.outer(lam, lam)))
