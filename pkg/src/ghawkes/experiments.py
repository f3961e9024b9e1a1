"""Replication harness for the event-A probability study and related runs.

Every Monte Carlo task gets its own :class:`RandomKey` derived from the
master seed, a purpose tag, a horizon index and a replicate index, so
results do not depend on the number of workers. Aggregation always walks
tasks in index order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, ModelError
from .estimate import (CovEstimate, bandwidth_rule, default_grid, estimate_cross_cov, l2_band_distance,
                       mean_intensity_hat)
from .keys import RandomKey
from .model import EventStream, HawkesModel, build_block_model
from .parallel import iter_ordered
from .simulate import default_burn_in, simulate_burned

log = logging.getLogger(__name__)

PURPOSE_REFERENCE = 1
PURPOSE_TRIAL = 2


def task_key(master_seed: int, purpose: int, t_index: int, replicate: int) -> RandomKey:
    """Key for one Monte Carlo task; distinct arguments give independent streams."""
    if not (0 <= t_index < 2**20 and 0 <= replicate < 2**20):
        raise ValueError("t_index and replicate must be below 2**20")
    return RandomKey(master_seed, replicate=(purpose << 40) | (t_index << 20) | replicate)


@dataclass
class ExperimentConfig:
    """Settings for the event-A probability study.

    ``bandwidth_const`` scales the smoothing bandwidth
    ``h = bandwidth_const * T^{-(r + 0.5)/(5 r + 2)}``; ``c8`` scales the
    threshold ``c8 * T^{-(r + 0.5)/(5 r + 2)}``. ``extra_c8`` lists further
    threshold constants evaluated on the same trials.
    """

    p: int = 20
    gamma: float = 1.0
    model_config: dict | None = None
    T_list: list = field(default_factory=lambda: [20.0, 100.0, 400.0])
    replicates: int = 50
    B: float = 10.0
    c8: float = 0.32
    extra_c8: list = field(default_factory=list)
    r: float = 1.0
    bandwidth_const: float = 1.0
    ref_M: int = 100
    T_ref: float = 200.0
    master_seed: int = 20240101
    burn_in: float | None = None

    def __post_init__(self):
        self.T_list = [float(t) for t in self.T_list]
        if not self.T_list or any(t <= 0 for t in self.T_list):
            raise ConfigError("T_list must hold positive horizons")
        if self.T_list != sorted(self.T_list):
            raise ConfigError("T_list must be sorted ascending")
        if self.replicates < 1 or self.ref_M < 2:
            raise ConfigError("replicates must be >= 1 and ref_M >= 2")
        if not (self.B > 0 and self.c8 >= 0 and self.r > 0 and self.bandwidth_const > 0 and self.T_ref > 0):
            raise ConfigError("B, r, bandwidth_const, T_ref must be positive and c8 nonnegative")

    def build_model(self) -> HawkesModel:
        if self.model_config is not None:
            return io.model_from_config(self.model_config)
        return build_block_model(self.p, self.gamma)

    def bandwidth(self, T: float) -> float:
        return bandwidth_rule(T, self.r, self.bandwidth_const)

    def threshold(self, T: float, c8: float | None = None) -> float:
        c = self.c8 if c8 is None else c8
        return c * T ** (-(self.r + 0.5) / (5.0 * self.r + 2.0))

    def grid(self) -> np.ndarray:
        """Common symmetric grid with step at most half the smallest bandwidth used."""
        h_min = min(self.bandwidth(T) for T in self.T_list + [self.T_ref])
        return default_grid(h_min, self.B)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields {sorted(unknown)}")
        return cls(**d)


def _reference_task(args):
    model, T_ref, burn_in, key, grid, h = args
    stream = simulate_burned(model, T_ref, burn_in, key)
    return estimate_cross_cov(stream, grid, h).values


def reference_cov(model: HawkesModel, M: int, T_ref: float, master_seed: int, *, grid, bandwidth: float,
                  burn_in: float | None = None, workers: int = 1, keys=None) -> CovEstimate:
    """Pointwise average of ``M`` independent estimates, with per-point standard errors.

    ``keys`` overrides the per-run keys (for example to force seed reuse).
    """
    if M < 2:
        raise ModelError("reference needs at least 2 runs")
    if burn_in is None:
        burn_in = default_burn_in(model)
    grid = np.asarray(grid, dtype=float)
    if keys is None:
        keys = [task_key(master_seed, PURPOSE_REFERENCE, 0, r) for r in range(M)]
    if len(keys) != M:
        raise ModelError("need one key per reference run")
    tasks = [(model, float(T_ref), float(burn_in), key, grid, float(bandwidth)) for key in keys]
    total = None
    total_sq = None
    first = None
    all_same = True
    for values in iter_ordered(_reference_task, tasks, workers):
        if total is None:
            first = values
            total = values.copy()
            total_sq = values * values
        else:
            all_same = all_same and np.array_equal(values, first)
            total += values
            total_sq += values * values
    if all_same:
        mean = first.copy()
        se = np.zeros_like(mean)
    else:
        mean = total / M
        var = np.maximum(total_sq - M * mean * mean, 0.0) / (M - 1)
        se = np.sqrt(var / M)
    p = model.p
    return CovEstimate(grid.copy(), mean, float(bandwidth), float(T_ref), np.full(p, np.nan), se=se,
                       meta={"reference_runs": M, "burn_in": float(burn_in)})


def pair_distances(v_hat: CovEstimate, v_ref: CovEstimate, B: float) -> np.ndarray:
    """``||V_hat_{k,j} - V_ref_{k,j}||_{2,[-B,B]}`` for every pair."""
    if v_hat.values.shape != v_ref.values.shape or not np.array_equal(v_hat.delta_grid, v_ref.delta_grid):
        raise ModelError("estimate and reference grids differ")
    return l2_band_distance(v_hat.values, v_ref.values, v_hat.delta_grid, B)


def event_A_indicator(v_hat: CovEstimate, v_ref: CovEstimate, B: float, threshold: float) -> bool:
    """True iff every pair's band distance is at most ``threshold``."""
    return bool(np.all(pair_distances(v_hat, v_ref, B) <= threshold))


def _trial_task(args):
    model, T, burn_in, key, grid, h, ref_values, B = args
    stream = simulate_burned(model, T, burn_in, key)
    est = estimate_cross_cov(stream, grid, h)
    dist = l2_band_distance(est.values, ref_values, grid, B)
    return float(np.max(dist))


def binomial_se(successes: int, n: int) -> float:
    q = successes / n
    return math.sqrt(q * (1.0 - q) / n)


FIG1B_COLUMNS = ["p", "T", "T_pow_1_7", "c8", "threshold", "replicates", "successes", "probability", "se"]


def _manifest_path(out_dir):
    return Path(out_dir) / "trials.jsonl"


def _load_manifest(out_dir, fingerprint):
    path = _manifest_path(out_dir)
    done = {}
    if not path.exists():
        return done
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or json.loads(lines[0]).get("fingerprint") != fingerprint:
        return done
    for line in lines[1:]:
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            break  # torn final line from an interrupted write
        done[(rec["t_index"], rec["replicate"])] = float(rec["max_distance"])
    return done


def fig1b_curve(config: ExperimentConfig, *, workers: int = 1, out_dir=None, reference: CovEstimate | None = None,
                resume: bool = True) -> dict:
    """Empirical probability of event A for each horizon.

    Each trial simulates a burned-in realization, estimates all
    cross-covariances with the horizon's bandwidth and records the largest
    band distance to the reference. Event A holds when that maximum is at
    most the threshold, so all threshold constants share the same trials.

    With ``out_dir`` set, completed trials are appended to ``trials.jsonl``
    as they finish; a rerun with the same configuration resumes from it.
    Returns ``{"rows": [...], "distances": array, "reference": CovEstimate}``.
    """
    model = config.build_model()
    burn_in = default_burn_in(model) if config.burn_in is None else config.burn_in
    grid = config.grid()
    if reference is None:
        reference = reference_cov(model, config.ref_M, config.T_ref, config.master_seed, grid=grid,
                                  bandwidth=config.bandwidth(config.T_ref), burn_in=burn_in, workers=workers)
    fingerprint = json.dumps(config.to_dict(), sort_keys=True)
    done = {}
    sink = None
    if out_dir is not None:
        out_dir = io.ensure_dir(out_dir)
        done = _load_manifest(out_dir, fingerprint) if resume else {}
        sink = open(_manifest_path(out_dir), "w")
        sink.write(json.dumps({"fingerprint": fingerprint}) + "\n")
        for (ti, r), d in sorted(done.items()):
            sink.write(json.dumps({"t_index": ti, "replicate": r, "max_distance": d}) + "\n")
        sink.flush()
    distances = np.full((len(config.T_list), config.replicates), np.nan)
    for (ti, r), d in done.items():
        if ti < distances.shape[0] and r < distances.shape[1]:
            distances[ti, r] = d
    todo = [(ti, r) for ti in range(len(config.T_list)) for r in range(config.replicates)
            if not (ti, r) in done]
    tasks = [(model, config.T_list[ti], float(burn_in), task_key(config.master_seed, PURPOSE_TRIAL, ti, r), grid,
              config.bandwidth(config.T_list[ti]), reference.values, config.B) for ti, r in todo]
    try:
        for (ti, r), d in zip(todo, iter_ordered(_trial_task, tasks, workers)):
            distances[ti, r] = d
            if sink is not None:
                sink.write(json.dumps({"t_index": ti, "replicate": r, "max_distance": d}) + "\n")
                sink.flush()
    finally:
        if sink is not None:
            sink.close()
    rows = []
    for c8 in [config.c8] + list(config.extra_c8):
        for ti, T in enumerate(config.T_list):
            thr = config.threshold(T, c8)
            hits = int(np.sum(distances[ti] <= thr))
            n = config.replicates
            rows.append([model.p, T, T ** (1.0 / 7.0), float(c8), thr, n, hits, hits / n, binomial_se(hits, n)])
    return {"rows": rows, "distances": distances, "reference": reference, "burn_in": burn_in}


def write_fig1b(result: dict, config: ExperimentConfig, out_dir, extra_meta: dict | None = None):
    out_dir = io.ensure_dir(out_dir)
    io.write_table(out_dir / "fig1b.csv", FIG1B_COLUMNS, result["rows"])
    dist_rows = [[T, r, result["distances"][ti, r]] for ti, T in enumerate(config.T_list)
                 for r in range(config.replicates)]
    io.write_table(out_dir / "trial_distances.csv", ["T", "replicate", "max_distance"], dist_rows)
    io.write_cov_estimate(result["reference"], out_dir / "reference_cov.csv")
    meta = {"command": "reproduce-fig1b", "config": config.to_dict(), "burn_in": result["burn_in"],
            "grid": {"points": int(config.grid().size), "B": config.B},
            "reference_runs": config.ref_M}
    meta.update(extra_meta or {})
    io.write_meta(out_dir / "meta.json", meta)


@dataclass
class SoloistScores:
    scores: np.ndarray
    undefined: list


def soloist_scores(stream: EventStream | None, cov: CovEstimate) -> SoloistScores:
    """``L_j^{-1} sum_{k != j} V_{k,j}(0)`` per component.

    Mean intensities come from ``stream`` when given, else from
    ``cov.lambda_hat``. Components with zero intensity get ``nan`` and are
    listed in ``undefined``.
    """
    lam = mean_intensity_hat(stream) if stream is not None else np.asarray(cov.lambda_hat, dtype=float)
    v0 = cov.at_zero()
    off = v0.sum(axis=0) - np.diag(v0)
    scores = np.full(cov.p, np.nan)
    ok = lam > 0
    scores[ok] = off[ok] / lam[ok]
    undefined = [int(j) for j in np.flatnonzero(~ok)]
    if undefined:
        log.warning("soloist score undefined for components with no events: %s", [j + 1 for j in undefined])
    return SoloistScores(scores, undefined)


def deviation_rows(profile) -> list:
    """Flatten a deviation profile into ``(offset, component, mean, se)`` rows; component 0 is pooled."""
    rows = []
    for m, off in enumerate(profile.offsets):
        rows.append([off, 0, profile.pooled_mean[m], profile.pooled_se[m]])
        for j in range(profile.mean.shape[0]):
            rows.append([off, j + 1, profile.mean[j, m], profile.se[j, m]])
    return rows
