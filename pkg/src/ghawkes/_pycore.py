"""Pure-Python kernels; the fallback when the compiled extension is missing.

The thinning loops mirror ``_core.pyx`` operation for operation, so both
backends return bit-identical event streams for the same inputs.
"""

import math

import numpy as np

OK = 0
NEED_UNIFORMS = 1
NEED_CAPACITY = 2
DOMINATION = 3
BAD_INTENSITY = 4
TOO_MANY_EVENTS = 5

INF = float("inf")


def _link(code, cap, x):
    if code == 0:
        return x
    if code == 1:
        if x >= 0.0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    if x < 0.0:
        x = 0.0
    if code == 3 and x > cap:
        x = cap
    return x


def _drive(j, s, mu, in_ptr, in_src, in_amp, in_gam, in_lag, lo, ev_times, ev_count):
    x = mu[j]
    for q in range(in_ptr[j], in_ptr[j + 1]):
        k = in_src[q]
        a = in_amp[q]
        g = in_gam[q]
        row = ev_times[k]
        n = ev_count[k]
        cut = s - in_lag[q]
        i = lo[q]
        while i < n and row[i] < cut:
            i += 1
        lo[q] = i
        while i < n:
            tt = row[i]
            if tt >= s:
                break
            lag = s - tt
            x += a * g * g * lag * math.exp(-g * lag)
            i += 1
    return x


def _bound_drive(j, s, mu, in_ptr, in_src, in_amp, in_gam, in_lag, lo, ev_times, ev_count):
    x = mu[j]
    for q in range(in_ptr[j], in_ptr[j + 1]):
        a = in_amp[q]
        if a <= 0.0:
            continue
        k = in_src[q]
        g = in_gam[q]
        peak = 1.0 / g
        row = ev_times[k]
        n = ev_count[k]
        cut = s - in_lag[q]
        i = lo[q]
        while i < n and row[i] < cut:
            i += 1
        lo[q] = i
        while i < n:
            tt = row[i]
            if tt > s:
                break
            lag = s - tt
            if lag < peak:
                lag = peak
            x += a * g * g * lag * math.exp(-g * lag)
            i += 1
    return x


def thin(t0, t_end, mu, link_code, link_cap, in_ptr, in_src, in_amp, in_gam, in_lag,
         ref_ptr, ref_tgt, unif, n_pairs, refresh_interval, ev_times, ev_count, pos,
         max_events, dom_tol, diag):
    """Thinning with refreshed piecewise-constant dominating rates.

    Fills ``ev_times``/``ev_count``/``pos`` in place and returns
    ``(status, component)``.
    """
    p = len(mu)
    mu = [float(v) for v in mu]
    link_code = [int(v) for v in link_code]
    link_cap = [float(v) for v in link_cap]
    in_ptr = [int(v) for v in in_ptr]
    in_src = [int(v) for v in in_src]
    in_amp = [float(v) for v in in_amp]
    in_gam = [float(v) for v in in_gam]
    in_lag = [float(v) for v in in_lag]
    ref_ptr = [int(v) for v in ref_ptr]
    ref_tgt = [int(v) for v in ref_tgt]
    cap_e = ev_times.shape[1]
    rows = [[] for _ in range(p)]
    counts = [0] * p
    lo = [0] * len(in_src)
    lam_bar = [0.0] * p
    next_c = [INF] * p
    height = [0.0] * p
    expiry = [INF] * p
    cursor = [0] * p
    limits = [int(v) for v in n_pairs]
    total = 0

    def flush(status, comp):
        for j in range(p):
            ev_count[j] = counts[j]
            pos[j] = cursor[j]
            if counts[j]:
                ev_times[j, :counts[j]] = rows[j]
        return status, comp

    def refresh(j, s):
        x = _bound_drive(j, s, mu, in_ptr, in_src, in_amp, in_gam, in_lag, lo, rows, counts)
        lb = _link(link_code[j], link_cap[j], x)
        if not lb > 0.0:
            lb = 0.0
        lam_bar[j] = lb
        expiry[j] = s + refresh_interval
        if lb > 0.0:
            c = cursor[j]
            if c >= limits[j]:
                return False
            u1 = unif[j, 2 * c]
            u2 = unif[j, 2 * c + 1]
            cursor[j] = c + 1
            next_c[j] = s + (-math.log(1.0 - u1)) / lb
            height[j] = u2
        else:
            next_c[j] = INF
        return True

    for j in range(p):
        if not refresh(j, t0):
            return flush(NEED_UNIFORMS, j)

    while True:
        best = INF
        bj = -1
        is_cand = False
        for j in range(p):
            c = next_c[j]
            e = expiry[j]
            if c <= e:
                if c < best:
                    best = c
                    bj = j
                    is_cand = True
            elif e < best:
                best = e
                bj = j
                is_cand = False
        if bj < 0 or best > t_end:
            break
        s = best
        j = bj
        if not is_cand:
            if not refresh(j, s):
                return flush(NEED_UNIFORMS, j)
            continue
        x = _drive(j, s, mu, in_ptr, in_src, in_amp, in_gam, in_lag, lo, rows, counts)
        lam = _link(link_code[j], link_cap[j], x)
        if not (lam >= 0.0 and lam < INF):
            diag[0] = s
            diag[1] = lam
            diag[2] = lam_bar[j]
            diag[3] = j
            return flush(BAD_INTENSITY, j)
        if lam > lam_bar[j] * (1.0 + dom_tol):
            diag[0] = s
            diag[1] = lam
            diag[2] = lam_bar[j]
            diag[3] = j
            return flush(DOMINATION, j)
        if lam > 0.0 and height[j] * lam_bar[j] <= lam:
            if counts[j] >= cap_e:
                return flush(NEED_CAPACITY, j)
            rows[j].append(s)
            counts[j] += 1
            total += 1
            if total > max_events:
                return flush(TOO_MANY_EVENTS, j)
            for r in range(ref_ptr[j], ref_ptr[j + 1]):
                if not refresh(ref_tgt[r], s):
                    return flush(NEED_UNIFORMS, ref_tgt[r])
        elif not refresh(j, s):
            return flush(NEED_UNIFORMS, j)
    return flush(OK, -1)


def thin_fixed(t_end, cut, mu, link_code, link_cap, in_ptr, in_src, in_amp, in_gam, in_lag,
               cand_time, cand_mark, cand_height, lam_bar, ev_times, ev_count,
               post_count, post_sum, dom_tol, diag):
    """Thinning against pre-drawn candidates with constant dominating rates.

    Candidates must be sorted by time. Candidates after ``cut`` are tallied
    into ``post_count``/``post_sum`` so callers can check that two runs saw
    the same post-cut driving points.
    """
    p = len(mu)
    mu = [float(v) for v in mu]
    link_code = [int(v) for v in link_code]
    link_cap = [float(v) for v in link_cap]
    in_ptr = [int(v) for v in in_ptr]
    in_src = [int(v) for v in in_src]
    in_amp = [float(v) for v in in_amp]
    in_gam = [float(v) for v in in_gam]
    in_lag = [float(v) for v in in_lag]
    bars = [float(v) for v in lam_bar]
    cap_e = ev_times.shape[1]
    rows = [[] for _ in range(p)]
    counts = [0] * p
    lo = [0] * len(in_src)
    status = OK
    comp = -1
    for c in range(len(cand_time)):
        s = float(cand_time[c])
        if s > t_end:
            break
        j = int(cand_mark[c])
        u = float(cand_height[c])
        if s > cut:
            post_count[j] += 1
            post_sum[j, 0] += s
            post_sum[j, 1] += u
        x = _drive(j, s, mu, in_ptr, in_src, in_amp, in_gam, in_lag, lo, rows, counts)
        lam = _link(link_code[j], link_cap[j], x)
        if not (lam >= 0.0 and lam < INF):
            diag[:] = (s, lam, bars[j], j)
            status, comp = BAD_INTENSITY, j
            break
        if lam > bars[j] * (1.0 + dom_tol):
            diag[:] = (s, lam, bars[j], j)
            status, comp = DOMINATION, j
            break
        if lam > 0.0 and u * bars[j] <= lam:
            if counts[j] >= cap_e:
                status, comp = NEED_CAPACITY, j
                break
            rows[j].append(s)
            counts[j] += 1
    for j in range(p):
        ev_count[j] = counts[j]
        if counts[j]:
            ev_times[j, :counts[j]] = rows[j]
    return status, comp


def epanechnikov_pair_sums(tk, tj, grid, h, same):
    """``S(d) = sum_{t in tk, t' in tj} K((t' - t + d) / h)`` on ``grid``.

    ``same`` drops the diagonal pairs (identical index), for ``tk is tj``.
    ``grid`` must be sorted ascending.
    """
    tk = np.asarray(tk, dtype=float)
    tj = np.asarray(tj, dtype=float)
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(grid.size)
    if tk.size == 0 or tj.size == 0 or grid.size == 0:
        return out
    # pairs with d = t' - t in [-max(grid) - h, -min(grid) + h]
    lo = np.searchsorted(tj, tk - grid[-1] - h, "left")
    hi = np.searchsorted(tj, tk - grid[0] + h, "right")
    n = hi - lo
    total = int(n.sum())
    if total == 0:
        return out
    owner = np.repeat(np.arange(tk.size), n)
    offs = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
    partner = lo[owner] + offs
    if same:
        keep = partner != owner
        owner, partner = owner[keep], partner[keep]
    d = np.sort(tj[partner] - tk[owner])
    # for grid point g, contributing d lie in (-g - h, -g + h)
    a = np.searchsorted(d, -grid - h, "right")
    b = np.searchsorted(d, -grid + h, "left")
    for g in range(grid.size):
        if b[g] > a[g]:
            x = (d[a[g]:b[g]] + grid[g]) / h
            out[g] = np.sum(0.75 * (1.0 - x * x))
    return out


def cross_pair_sums(components, grid, h):
    """``S[k, j, :]`` for every ordered pair, self-pairs dropped on the diagonal."""
    p = len(components)
    out = np.zeros((p, p, len(grid)))
    for k in range(p):
        for j in range(p):
            out[k, j] = epanechnikov_pair_sums(components[k], components[j], grid, h, k == j)
    return out
