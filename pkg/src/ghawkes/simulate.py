"""Exact simulation by thinning, and coupled pairs sharing post-cut randomness.

Each component draws candidates from its own keyed stream of
(gap, height) uniform pairs. ``simulate`` refreshes a piecewise-constant
dominating rate from per-event envelopes; ``couple`` uses the constant
bound ``phi_max`` so that both processes of a pair can evaluate the same
post-cut candidate points.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .analyze import build_omega, mean_intensity_linear, spectral_radius
from .errors import (AssumptionError, DominationError, ModelError, NumericError,
                     UnsupportedConfigurationError)
from .keys import Phase, RandomKey
from .model import DEFAULT_TRUNC_TOL, EventStream, HawkesModel
from .parallel import map_ordered

DOM_TOL = 1e-12
DEFAULT_MAX_EVENTS = 50_000_000


@dataclass(frozen=True)
class _Network:
    mu: np.ndarray
    code: np.ndarray
    cap: np.ndarray
    in_ptr: np.ndarray
    in_src: np.ndarray
    in_amp: np.ndarray
    in_gam: np.ndarray
    in_lag: np.ndarray
    ref_ptr: np.ndarray
    ref_tgt: np.ndarray


def _network(model: HawkesModel, trunc_tol: float) -> _Network:
    p = model.p
    in_ptr = [0]
    src, amp, gam, lag = [], [], [], []
    for j in range(p):
        for k, ker in model.incoming(j):
            src.append(k)
            amp.append(ker.amplitude)
            gam.append(ker.decay)
            lag.append(ker.truncation_lag(trunc_tol))
        in_ptr.append(len(src))
    # after an accepted event of k: refresh k itself and every target it can excite
    ref_ptr = [0]
    ref_tgt = []
    for k in range(p):
        targets = {k} | {j for (kk, j), ker in model.kernels.items() if kk == k and ker.amplitude > 0}
        ref_tgt.extend(sorted(targets))
        ref_ptr.append(len(ref_tgt))
    return _Network(
        mu=np.array(model.mu, dtype=float),
        code=np.array([link.code for link in model.links], dtype=np.int_),
        cap=np.array([link.cap or 0.0 for link in model.links], dtype=float),
        in_ptr=np.array(in_ptr, dtype=np.int_),
        in_src=np.array(src, dtype=np.int_),
        in_amp=np.array(amp, dtype=float),
        in_gam=np.array(gam, dtype=float),
        in_lag=np.array(lag, dtype=float),
        ref_ptr=np.array(ref_ptr, dtype=np.int_),
        ref_tgt=np.array(ref_tgt, dtype=np.int_),
    )


def _check_stable(model: HawkesModel, allow_unstable: bool):
    radius = spectral_radius(build_omega(model))
    if radius >= 1.0:
        msg = f"model violates the stability condition (spectral radius of Omega = {radius:.6g} >= 1)"
        if not allow_unstable:
            raise AssumptionError(msg)
        warnings.warn(msg + "; simulating anyway", RuntimeWarning, stacklevel=3)


def _rate_guess(model: HawkesModel) -> np.ndarray:
    """Rough per-component rate, used only to size buffers."""
    bounds = [link.upper_bound for link in model.links]
    if all(b is not None for b in bounds):
        return np.array(bounds, dtype=float)
    m = np.clip(np.array([[0.0] * model.p] * model.p), 0, None)
    for (k, j), ker in model.kernels.items():
        m[j, k] = max(ker.amplitude, 0.0)
    mu = np.maximum(np.array(model.mu), 0.0) + 1e-3
    try:
        lam = mean_intensity_linear(mu, m)
    except NumericError:
        lam = mu * 10
    guess = np.array([b if b is not None else 2.0 * l for b, l in zip(bounds, lam)])
    return np.maximum(guess, 1e-3)


def _raise_for_status(status, comp, diag, model):
    s, lam, bar, _ = diag
    if status == 3:
        raise DominationError(
            f"dominating rate violated for component {comp} at t={s!r}: "
            f"intensity {lam!r} > bound {bar!r}"
        )
    if status == 4:
        link = model.links[comp].kind
        raise ModelError(f"intensity of component {comp} at t={s!r} is {lam!r} (link {link})")
    if status == 5:
        raise NumericError("event budget exceeded; the process looks explosive")
    raise NumericError(f"thinning kernel returned status {status}")


def _simulate_window(model, t0, t_end, key, trunc_tol, refresh_interval, allow_unstable,
                     max_events, backend):
    if not t_end > t0:
        raise ModelError(f"empty simulation window [{t0}, {t_end}]")
    _check_stable(model, allow_unstable)
    core = _backend.get_core(backend)
    net = _network(model, trunc_tol)
    p = model.p
    span = t_end - t0
    if refresh_interval is None:
        refresh_interval = 1.0 / model.gamma_max
    if max_events is None:
        max_events = DEFAULT_MAX_EVENTS
    rate = _rate_guess(model)
    n_pairs = np.ceil(4.0 * rate * span + 2.0 * span / refresh_interval + 64).astype(np.int_)
    cap_e = int(np.ceil(1.5 * rate.max() * span + 64))
    keys = [key.with_(component=j) for j in range(p)]
    streams = [keys[j].uniforms(2 * n_pairs[j]) for j in range(p)]
    while True:
        unif = np.zeros((p, 2 * int(n_pairs.max())))
        for j in range(p):
            unif[j, :streams[j].size] = streams[j]
        ev_times = np.zeros((p, cap_e))
        ev_count = np.zeros(p, dtype=np.int_)
        pos = np.zeros(p, dtype=np.int_)
        diag = np.zeros(4)
        status, comp = core.thin(
            float(t0), float(t_end), net.mu, net.code, net.cap, net.in_ptr, net.in_src,
            net.in_amp, net.in_gam, net.in_lag, net.ref_ptr, net.ref_tgt, unif, n_pairs,
            float(refresh_interval), ev_times, ev_count, pos, int(max_events), DOM_TOL, diag,
        )
        if status == 0:
            break
        if status == 1:
            n_pairs[comp] *= 2
            streams[comp] = keys[comp].uniforms(2 * n_pairs[comp])
        elif status == 2:
            cap_e *= 2
        else:
            _raise_for_status(status, comp, diag, model)
    return [ev_times[j, :ev_count[j]].copy() for j in range(p)]


def simulate(model: HawkesModel, horizon: float, key: RandomKey, *, trunc_tol: float = DEFAULT_TRUNC_TOL,
             refresh_interval: float | None = None, allow_unstable: bool = False,
             max_events: int | None = None, backend: str | None = None) -> EventStream:
    """One realization on ``[0, horizon]`` started from an empty history.

    Parameters
    ----------
    key : RandomKey
        Stream identity; ``component`` is overwritten per component.
    refresh_interval : float, optional
        Dominating rates are recomputed at least this often. Defaults to
        ``1 / gamma_max``.
    allow_unstable : bool
        Simulate models failing the stability check, with a warning.
    """
    return simulate_burned(model, horizon, 0.0, key, trunc_tol=trunc_tol,
                           refresh_interval=refresh_interval, allow_unstable=allow_unstable,
                           max_events=max_events, backend=backend)


def simulate_burned(model: HawkesModel, horizon: float, burn_in: float, key: RandomKey, *,
                    trunc_tol: float = DEFAULT_TRUNC_TOL, refresh_interval: float | None = None,
                    allow_unstable: bool = False, max_events: int | None = None,
                    backend: str | None = None) -> EventStream:
    """Simulate on ``[-burn_in, horizon]`` and keep the events in ``[0, horizon]``."""
    if not horizon > 0:
        raise ModelError(f"horizon must be positive, got {horizon}")
    if burn_in < 0:
        raise ModelError(f"burn_in must be nonnegative, got {burn_in}")
    comps = _simulate_window(model, -float(burn_in), float(horizon), key, trunc_tol,
                             refresh_interval, allow_unstable, max_events, backend)
    comps = [t[t >= 0.0] for t in comps]
    return EventStream.from_components(horizon, comps, model.p)


def default_burn_in(model: HawkesModel) -> float:
    return 50.0 / model.gamma_min


@dataclass(frozen=True)
class CoupledPair:
    """A process and its coupling copy sharing driving points after ``cut``."""

    original: EventStream
    coupled: EventStream
    cut: float
    post_counts: np.ndarray = field(repr=False)
    post_checksums: np.ndarray = field(repr=False)
    shared_violations: int = 0


def _candidates(key: RandomKey, rate: float, start: float, stop: float):
    """Points of a rate-``rate`` Poisson stream on ``(start, stop]`` with uniform heights."""
    n = int(rate * (stop - start) + 10.0 * math.sqrt(rate * (stop - start) + 1.0) + 16)
    while True:
        pairs = key.pairs(n)
        gaps = -np.log(1.0 - pairs[:, 0]) / rate
        times = start + np.cumsum(gaps)
        if times[-1] > stop:
            keep = times <= stop
            return times[keep], pairs[keep, 1]
        n *= 2


def _candidate_set(key, bars, pieces):
    """Merge per-component candidates from ``(phase, start, stop)`` pieces."""
    times, marks, heights = [], [], []
    for j, bar in enumerate(bars):
        for phase, start, stop in pieces:
            t, h = _candidates(key.with_(component=j, phase=phase), bar, start, stop)
            times.append(t)
            heights.append(h)
            marks.append(np.full(t.size, j, dtype=np.int_))
    times = np.concatenate(times)
    marks = np.concatenate(marks)
    heights = np.concatenate(heights)
    order = np.lexsort((marks, times))
    return times[order], marks[order], heights[order]


def _run_fixed(model, net, core, t_end, cut, cands, bars):
    p = model.p
    times, marks, heights = cands
    cap_e = int(np.ceil(1.2 * times.size / max(p, 1))) + 64
    while True:
        ev_times = np.zeros((p, cap_e))
        ev_count = np.zeros(p, dtype=np.int_)
        post_count = np.zeros(p, dtype=np.int_)
        post_sum = np.zeros((p, 2))
        diag = np.zeros(4)
        status, comp = core.thin_fixed(
            float(t_end), float(cut), net.mu, net.code, net.cap, net.in_ptr, net.in_src,
            net.in_amp, net.in_gam, net.in_lag, times, marks, heights, bars,
            ev_times, ev_count, post_count, post_sum, DOM_TOL, diag,
        )
        if status == 0:
            break
        if status == 2:
            cap_e *= 2
            continue
        _raise_for_status(status, comp, diag, model)
    return [ev_times[j, :ev_count[j]].copy() for j in range(p)], post_count, post_sum


def couple(model: HawkesModel, horizon: float, cut: float, key: RandomKey, *, burn_in: float = 0.0,
           trunc_tol: float = DEFAULT_TRUNC_TOL, backend: str | None = None) -> CoupledPair:
    """Build a process and its coupling copy.

    Up to ``cut`` the two processes are driven by independent streams; after
    ``cut`` both thin the same candidate points with the same heights. The
    copy has the law of the original and is independent of the original's
    history before ``cut``.

    Requires every link to be bounded: the shared candidates need a common
    constant dominating rate ``phi_max``.
    """
    if not 0 < cut < horizon:
        raise ModelError(f"need 0 < cut < horizon, got cut={cut}, horizon={horizon}")
    unbounded = [j for j, link in enumerate(model.links) if not link.bounded]
    if unbounded:
        raise UnsupportedConfigurationError(
            "coupling requires bounded links (phi_j <= phi_max for every j); "
            f"components {unbounded[:5]} have unbounded {model.links[unbounded[0]].kind} links"
        )
    _check_stable(model, False)
    core = _backend.get_core(backend)
    net = _network(model, trunc_tol)
    bars = np.array([link.upper_bound for link in model.links], dtype=float)
    t0 = -float(burn_in)
    post = (Phase.POST_CUT_SHARED, float(cut), float(horizon))
    cand_n = _candidate_set(key, bars, [(Phase.PRE_CUT_ORIGINAL, t0, float(cut)), post])
    cand_c = _candidate_set(key, bars, [(Phase.PRE_CUT_COUPLED, t0, float(cut)), post])
    comps_n, cnt_n, sum_n = _run_fixed(model, net, core, horizon, cut, cand_n, bars)
    comps_c, cnt_c, sum_c = _run_fixed(model, net, core, horizon, cut, cand_c, bars)
    violations = int(np.sum((cnt_n != cnt_c) | np.any(sum_n != sum_c, axis=1)))
    original = EventStream.from_components(horizon, [t[t >= 0] for t in comps_n], model.p)
    coupled = EventStream.from_components(horizon, [t[t >= 0] for t in comps_c], model.p)
    return CoupledPair(original, coupled, float(cut), np.stack([cnt_n, cnt_c]),
                       np.stack([sum_n, sum_c]), violations)


@dataclass
class DeviationProfile:
    """Mean ``|N~_j(bin) - N_j(bin)|`` over replicates, bins starting at the cut."""

    offsets: np.ndarray
    bin_width: float
    mean: np.ndarray
    se: np.ndarray
    pooled_mean: np.ndarray
    pooled_se: np.ndarray
    raw: np.ndarray = field(repr=False)
    shared_violations: int = 0

    def pooled_diff_se(self, a: int, b: int) -> float:
        """Standard error of ``pooled[a] - pooled[b]`` from paired replicates."""
        pooled = self.raw.mean(axis=1)
        d = pooled[:, a] - pooled[:, b]
        return float(d.std(ddof=1) / math.sqrt(d.size))


def _bin_counts(stream: EventStream, edges):
    out = np.empty((stream.p, edges.size - 1))
    for j in range(stream.p):
        t = stream.component(j)
        idx = np.searchsorted(t, edges, "left")
        out[j] = np.diff(idx)
    return out


def _deviation_task(args):
    model, horizon, cut, edges, key, burn_in, backend = args
    pair = couple(model, horizon, cut, key, burn_in=burn_in, backend=backend)
    diff = np.abs(_bin_counts(pair.coupled, edges) - _bin_counts(pair.original, edges))
    return diff, pair.shared_violations


def deviation_profile(model: HawkesModel, horizon: float, cut: float, bin_width: float,
                      replicates: int, key: RandomKey, *, burn_in: float = 0.0, workers: int = 1,
                      backend: str | None = None) -> DeviationProfile:
    """Monte Carlo estimate of ``E|N~_j - N_j|`` on bins ``[cut + m w, cut + (m+1) w)``."""
    if not bin_width > 0:
        raise ModelError("bin_width must be positive")
    if replicates < 2:
        raise ModelError("need at least 2 replicates for standard errors")
    n_bins = int(math.floor((horizon - cut) / bin_width + 1e-9))
    if n_bins < 1:
        raise ModelError("no complete bin between cut and horizon")
    edges = cut + bin_width * np.arange(n_bins + 1)
    tasks = [(model, horizon, cut, edges, key.with_(replicate=r), burn_in, backend)
             for r in range(replicates)]
    results = map_ordered(_deviation_task, tasks, workers)
    raw = np.stack([r[0] for r in results])
    violations = int(sum(r[1] for r in results))
    mean = raw.mean(axis=0)
    se = raw.std(axis=0, ddof=1) / math.sqrt(replicates)
    pooled = raw.mean(axis=1)
    return DeviationProfile(
        offsets=edges[:-1] - cut,
        bin_width=float(bin_width),
        mean=mean,
        se=se,
        pooled_mean=pooled.mean(axis=0),
        pooled_se=pooled.std(axis=0, ddof=1) / math.sqrt(replicates),
        raw=raw,
        shared_violations=violations,
    )
