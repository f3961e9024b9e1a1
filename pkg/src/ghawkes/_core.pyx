# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled thinning and pair-sum kernels.

Semantics match ``_pycore`` exactly; keep the two files in step.
"""

from libc.math cimport exp, log, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF OK = 0
DEF NEED_UNIFORMS = 1
DEF NEED_CAPACITY = 2
DEF DOMINATION = 3
DEF BAD_INTENSITY = 4
DEF TOO_MANY_EVENTS = 5


cdef inline double _link(long code, double cap, double x) nogil:
    cdef double e
    if code == 0:
        return x
    if code == 1:
        if x >= 0.0:
            return 1.0 / (1.0 + exp(-x))
        e = exp(x)
        return e / (1.0 + e)
    if x < 0.0:
        x = 0.0
    if code == 3 and x > cap:
        x = cap
    return x


cdef inline double _drive(Py_ssize_t j, double s, const double[:] mu,
                          const long[:] in_ptr, const long[:] in_src, const double[:] in_amp,
                          const double[:] in_gam, const double[:] in_lag, long[:] lo,
                          double[:, :] ev, long[:] cnt) nogil:
    cdef double x = mu[j]
    cdef double a, g, cut, tt, lag
    cdef Py_ssize_t q, k, i, n
    for q in range(in_ptr[j], in_ptr[j + 1]):
        k = in_src[q]
        a = in_amp[q]
        g = in_gam[q]
        n = cnt[k]
        cut = s - in_lag[q]
        i = lo[q]
        while i < n and ev[k, i] < cut:
            i += 1
        lo[q] = i
        while i < n:
            tt = ev[k, i]
            if tt >= s:
                break
            lag = s - tt
            x += a * g * g * lag * exp(-g * lag)
            i += 1
    return x


cdef inline double _bound_drive(Py_ssize_t j, double s, const double[:] mu,
                                const long[:] in_ptr, const long[:] in_src, const double[:] in_amp,
                                const double[:] in_gam, const double[:] in_lag, long[:] lo,
                                double[:, :] ev, long[:] cnt) nogil:
    cdef double x = mu[j]
    cdef double a, g, cut, tt, lag, peak
    cdef Py_ssize_t q, k, i, n
    for q in range(in_ptr[j], in_ptr[j + 1]):
        a = in_amp[q]
        if a <= 0.0:
            continue
        k = in_src[q]
        g = in_gam[q]
        peak = 1.0 / g
        n = cnt[k]
        cut = s - in_lag[q]
        i = lo[q]
        while i < n and ev[k, i] < cut:
            i += 1
        lo[q] = i
        while i < n:
            tt = ev[k, i]
            if tt > s:
                break
            lag = s - tt
            if lag < peak:
                lag = peak
            x += a * g * g * lag * exp(-g * lag)
            i += 1
    return x


cdef class _State:
    cdef double[:] mu
    cdef long[:] code
    cdef double[:] cap
    cdef long[:] in_ptr
    cdef long[:] in_src
    cdef double[:] in_amp
    cdef double[:] in_gam
    cdef double[:] in_lag
    cdef long[:] lo
    cdef double[:, :] ev
    cdef long[:] cnt
    cdef const double[:, :] unif
    cdef long[:] limits
    cdef long[:] cursor
    cdef double[:] lam_bar
    cdef double[:] next_c
    cdef double[:] height
    cdef double[:] expiry
    cdef double w

    cdef int refresh(self, Py_ssize_t j, double s) nogil:
        cdef double x, lb, u1, u2
        cdef long c
        x = _bound_drive(j, s, self.mu, self.in_ptr, self.in_src, self.in_amp, self.in_gam,
                         self.in_lag, self.lo, self.ev, self.cnt)
        lb = _link(self.code[j], self.cap[j], x)
        if not lb > 0.0:
            lb = 0.0
        self.lam_bar[j] = lb
        self.expiry[j] = s + self.w
        if lb > 0.0:
            c = self.cursor[j]
            if c >= self.limits[j]:
                return 0
            u1 = self.unif[j, 2 * c]
            u2 = self.unif[j, 2 * c + 1]
            self.cursor[j] = c + 1
            self.next_c[j] = s + (-log(1.0 - u1)) / lb
            self.height[j] = u2
        else:
            self.next_c[j] = INFINITY
        return 1


def thin(double t0, double t_end, mu, link_code, link_cap, in_ptr, in_src, in_amp, in_gam,
         in_lag, ref_ptr, ref_tgt, unif, n_pairs, double refresh_interval,
         double[:, :] ev_times, long[:] ev_count, long[:] pos, long max_events,
         double dom_tol, double[:] diag):
    """Thinning with refreshed piecewise-constant dominating rates."""
    cdef Py_ssize_t p = len(mu)
    cdef _State st = _State()
    st.mu = np.ascontiguousarray(mu, dtype=np.float64)
    st.code = np.ascontiguousarray(link_code, dtype=np.int_)
    st.cap = np.ascontiguousarray(link_cap, dtype=np.float64)
    st.in_ptr = np.ascontiguousarray(in_ptr, dtype=np.int_)
    st.in_src = np.ascontiguousarray(in_src, dtype=np.int_)
    st.in_amp = np.ascontiguousarray(in_amp, dtype=np.float64)
    st.in_gam = np.ascontiguousarray(in_gam, dtype=np.float64)
    st.in_lag = np.ascontiguousarray(in_lag, dtype=np.float64)
    st.lo = np.zeros(len(in_src), dtype=np.int_)
    st.ev = ev_times
    st.cnt = ev_count
    st.unif = np.ascontiguousarray(unif, dtype=np.float64)
    st.limits = np.ascontiguousarray(n_pairs, dtype=np.int_)
    st.cursor = pos
    st.lam_bar = np.zeros(p)
    st.next_c = np.full(p, INFINITY)
    st.height = np.zeros(p)
    st.expiry = np.full(p, INFINITY)
    st.w = refresh_interval
    cdef long[:] rptr = np.ascontiguousarray(ref_ptr, dtype=np.int_)
    cdef long[:] rtgt = np.ascontiguousarray(ref_tgt, dtype=np.int_)
    cdef Py_ssize_t cap_e = ev_times.shape[1]
    cdef Py_ssize_t j, bj, r
    cdef double best, c, e, s, x, lam
    cdef bint is_cand
    cdef long total = 0
    cdef int status = OK
    cdef long comp = -1

    for j in range(p):
        ev_count[j] = 0
        pos[j] = 0

    with nogil:
        for j in range(p):
            if not st.refresh(j, t0):
                status = NEED_UNIFORMS
                comp = j
                break
        while status == OK:
            best = INFINITY
            bj = -1
            is_cand = False
            for j in range(p):
                c = st.next_c[j]
                e = st.expiry[j]
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
                if not st.refresh(j, s):
                    status = NEED_UNIFORMS
                    comp = j
                continue
            x = _drive(j, s, st.mu, st.in_ptr, st.in_src, st.in_amp, st.in_gam, st.in_lag,
                       st.lo, st.ev, st.cnt)
            lam = _link(st.code[j], st.cap[j], x)
            if not (lam >= 0.0 and lam < INFINITY):
                diag[0] = s
                diag[1] = lam
                diag[2] = st.lam_bar[j]
                diag[3] = j
                status = BAD_INTENSITY
                comp = j
                break
            if lam > st.lam_bar[j] * (1.0 + dom_tol):
                diag[0] = s
                diag[1] = lam
                diag[2] = st.lam_bar[j]
                diag[3] = j
                status = DOMINATION
                comp = j
                break
            if lam > 0.0 and st.height[j] * st.lam_bar[j] <= lam:
                if st.cnt[j] >= cap_e:
                    status = NEED_CAPACITY
                    comp = j
                    break
                st.ev[j, st.cnt[j]] = s
                st.cnt[j] += 1
                total += 1
                if total > max_events:
                    status = TOO_MANY_EVENTS
                    comp = j
                    break
                for r in range(rptr[j], rptr[j + 1]):
                    if not st.refresh(rtgt[r], s):
                        status = NEED_UNIFORMS
                        comp = rtgt[r]
                        break
            elif not st.refresh(j, s):
                status = NEED_UNIFORMS
                comp = j
    return status, comp


def thin_fixed(double t_end, double cut, mu, link_code, link_cap, in_ptr, in_src, in_amp,
               in_gam, in_lag, cand_time, cand_mark, cand_height, lam_bar,
               double[:, :] ev_times, long[:] ev_count, long[:] post_count,
               double[:, :] post_sum, double dom_tol, double[:] diag):
    """Thinning against pre-drawn sorted candidates with constant dominating rates."""
    cdef Py_ssize_t p = len(mu)
    cdef double[:] mu_ = np.ascontiguousarray(mu, dtype=np.float64)
    cdef long[:] code = np.ascontiguousarray(link_code, dtype=np.int_)
    cdef double[:] capv = np.ascontiguousarray(link_cap, dtype=np.float64)
    cdef long[:] iptr = np.ascontiguousarray(in_ptr, dtype=np.int_)
    cdef long[:] isrc = np.ascontiguousarray(in_src, dtype=np.int_)
    cdef double[:] iamp = np.ascontiguousarray(in_amp, dtype=np.float64)
    cdef double[:] igam = np.ascontiguousarray(in_gam, dtype=np.float64)
    cdef double[:] ilag = np.ascontiguousarray(in_lag, dtype=np.float64)
    cdef long[:] lo = np.zeros(len(in_src), dtype=np.int_)
    cdef const double[:] ctime = np.ascontiguousarray(cand_time, dtype=np.float64)
    cdef const long[:] cmark = np.ascontiguousarray(cand_mark, dtype=np.int_)
    cdef const double[:] chgt = np.ascontiguousarray(cand_height, dtype=np.float64)
    cdef double[:] bars = np.ascontiguousarray(lam_bar, dtype=np.float64)
    cdef Py_ssize_t cap_e = ev_times.shape[1]
    cdef Py_ssize_t nc = ctime.shape[0]
    cdef Py_ssize_t c, j
    cdef double s, u, x, lam
    cdef int status = OK
    cdef long comp = -1

    for j in range(p):
        ev_count[j] = 0
    with nogil:
        for c in range(nc):
            s = ctime[c]
            if s > t_end:
                break
            j = cmark[c]
            u = chgt[c]
            if s > cut:
                post_count[j] += 1
                post_sum[j, 0] += s
                post_sum[j, 1] += u
            x = _drive(j, s, mu_, iptr, isrc, iamp, igam, ilag, lo, ev_times, ev_count)
            lam = _link(code[j], capv[j], x)
            if not (lam >= 0.0 and lam < INFINITY):
                diag[0] = s
                diag[1] = lam
                diag[2] = bars[j]
                diag[3] = j
                status = BAD_INTENSITY
                comp = j
                break
            if lam > bars[j] * (1.0 + dom_tol):
                diag[0] = s
                diag[1] = lam
                diag[2] = bars[j]
                diag[3] = j
                status = DOMINATION
                comp = j
                break
            if lam > 0.0 and u * bars[j] <= lam:
                if ev_count[j] >= cap_e:
                    status = NEED_CAPACITY
                    comp = j
                    break
                ev_times[j, ev_count[j]] = s
                ev_count[j] += 1
    return status, comp


cdef inline Py_ssize_t _lower(const double[:] a, double v) nogil:
    # first index with a[i] > v
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef void _pair_sums(const double[:] tk, const double[:] tj, const double[:] grid, double h,
                     bint same, double[:] out) nogil:
    cdef Py_ssize_t nk = tk.shape[0], nj = tj.shape[0], ng = grid.shape[0]
    cdef Py_ssize_t a, i, ip, g, lo = 0, hi = 0
    cdef double t, d, x, left, right
    if nk == 0 or nj == 0 or ng == 0:
        return
    for a in range(nk):
        t = tk[a]
        left = t - grid[ng - 1] - h
        right = t - grid[0] + h
        while lo < nj and tj[lo] < left:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < nj and tj[hi] <= right:
            hi += 1
        for ip in range(lo, hi):
            if same and ip == a:
                continue
            d = tj[ip] - t
            # grid points strictly inside (-d - h, -d + h)
            g = _lower(grid, -d - h)
            while g < ng and grid[g] < -d + h:
                x = (d + grid[g]) / h
                out[g] += 0.75 * (1.0 - x * x)
                g += 1


def epanechnikov_pair_sums(tk, tj, grid, double h, bint same):
    cdef const double[:] tk_ = np.ascontiguousarray(tk, dtype=np.float64)
    cdef const double[:] tj_ = np.ascontiguousarray(tj, dtype=np.float64)
    cdef const double[:] grid_ = np.ascontiguousarray(grid, dtype=np.float64)
    out = np.zeros(grid_.shape[0])
    cdef double[:] out_ = out
    with nogil:
        _pair_sums(tk_, tj_, grid_, h, same, out_)
    return out


def cross_pair_sums(components, grid, double h):
    cdef Py_ssize_t p = len(components)
    cdef const double[:] grid_ = np.ascontiguousarray(grid, dtype=np.float64)
    out = np.zeros((p, p, grid_.shape[0]))
    cdef double[:, :, :] out_ = out
    arrays = [np.ascontiguousarray(c, dtype=np.float64) for c in components]
    cdef const double[:] tk_
    cdef const double[:] tj_
    cdef Py_ssize_t k, j
    for k in range(p):
        tk_ = arrays[k]
        for j in range(p):
            tj_ = arrays[j]
            with nogil:
                _pair_sums(tk_, tj_, grid_, h, k == j, out_[k, j])
    return out
