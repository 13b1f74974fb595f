"""Compiled inner loops of the replica-exchange sampler.

Replica state lives in stacked arrays indexed by *slot*; ``slot[l]`` is the
slot currently held by temperature ``l``, so an exchange swaps two integers.
Per slot we keep the parameter vector, the residual ``I - f(E)``, each
component curve (edge, white line, peaks), the unit-height edge and the
residual sum of squares.

Gaussian components are evaluated only inside a window of ``CUT`` widths
around their centre; outside it they are below 1e-20 of their height. On a
uniform grid (spacing ``h > 0``) the Gaussian is advanced by a two-term
multiplicative recurrence, re-anchored with an exact ``exp`` every
``ANCHOR`` points so rounding stays at the 1e-14 level.

The energy axis must be sorted ascending.
"""

import math

import numba as nb
import numpy as np

CUT = 4.1
ANCHOR = 32
FOUR_LN2 = 4.0 * math.log(2.0)
NEG_INF = -np.inf

# parameter slots of the step block
H, E0, GAMMA, A, DELTA_E, OMEGA = range(6)
N_STEP = 6


@nb.njit(cache=True, nogil=True)
def log_density(kind, a, b, lognorm, x):
    if kind == 0:
        if x < a or x > b:
            return NEG_INF
        return lognorm
    if kind == 1:
        z = (x - a) / b
        return lognorm - 0.5 * z * z
    if x <= 0.0:
        return NEG_INF
    return lognorm + (a - 1.0) * math.log(x) - x / b


@nb.njit(cache=True, nogil=True)
def log_prior_vec(theta, kind, pa, pb, lognorm):
    total = 0.0
    for p in range(theta.shape[0]):
        total += log_density(kind[p], pa[p], pb[p], lognorm[p], theta[p])
    return total


@nb.njit(cache=True, nogil=True)
def _window(E, center, fwhm):
    half = CUT * abs(fwhm)
    lo = np.searchsorted(E, center - half, side="left")
    hi = np.searchsorted(E, center + half, side="right")
    return lo, hi


@nb.njit(cache=True, nogil=True)
def _fill_gauss(E, h, height, center, fwhm, lo, hi, out, ul, uh):
    """Write the Gaussian into ``out[ul:uh]``, zero outside ``[lo, hi)``."""
    for i in range(ul, min(lo, uh)):
        out[i] = 0.0
    for i in range(max(hi, ul), uh):
        out[i] = 0.0
    if hi <= lo:
        return
    c = -FOUR_LN2 / (fwhm * fwhm)
    if h <= 0.0:
        for i in range(lo, hi):
            x = E[i] - center
            out[i] = height * math.exp(c * x * x)
        return
    q = math.exp(2.0 * c * h * h)
    i = lo
    while i < hi:
        x = E[i] - center
        g = height * math.exp(c * x * x)
        r = math.exp(c * (2.0 * x * h + h * h))
        stop = min(i + ANCHOR, hi)
        while i < stop:
            out[i] = g
            g *= r
            r *= q
            i += 1


@nb.njit(cache=True, nogil=True)
def _fill_unit_edge(E, e0, gamma, out):
    inv = 2.0 / gamma
    for i in range(E.shape[0]):
        out[i] = 0.5 + math.atan((E[i] - e0) * inv) / math.pi


@nb.njit(cache=True, nogil=True)
def _center(theta, j, relative):
    """Centre of peak ``j`` (0-based)."""
    pos = theta[N_STEP + 3 * j + 1]
    if relative:
        return theta[E0] + pos
    return pos


@nb.njit(cache=True, nogil=True)
def refresh(E, I, h, theta, resid, comp, unit, lo, hi, relative):
    """Recompute every component and the residual; return the SSE."""
    n = E.shape[0]
    C = comp.shape[0]
    _fill_unit_edge(E, theta[E0], theta[GAMMA], unit)
    for i in range(n):
        comp[0, i] = theta[H] * unit[i]
    lo[0] = 0
    hi[0] = n
    wc = theta[E0] + theta[DELTA_E]
    l0, h0 = _window(E, wc, theta[OMEGA])
    lo[1] = l0
    hi[1] = h0
    _fill_gauss(E, h, theta[A], wc, theta[OMEGA], l0, h0, comp[1], 0, n)
    for j in range(C - 2):
        c = _center(theta, j, relative)
        w = theta[N_STEP + 3 * j + 2]
        l0, h0 = _window(E, c, w)
        lo[2 + j] = l0
        hi[2 + j] = h0
        _fill_gauss(E, h, theta[N_STEP + 3 * j], c, w, l0, h0, comp[2 + j], 0, n)
    sse = 0.0
    for i in range(n):
        m = 0.0
        for k in range(C):
            m += comp[k, i]
        r = I[i] - m
        resid[i] = r
        sse += r * r
    return sse


@nb.njit(cache=True, nogil=True)
def _step_move(E, h, theta, p, x_new, resid, comp, unit, lo, hi, relative,
               scratch, new_unit, slo, shi, delta):
    """Candidate curves for a step-block move.

    New component curves go to ``scratch`` (rows mirror ``comp``) with their
    windows in ``slo/shi``; untouched rows have ``slo = -1``. ``delta`` gets
    the total change ``old - new`` of the model on ``[ul, uh)``. Returns
    ``(ul, uh, dsse)``.
    """
    n = E.shape[0]
    C = comp.shape[0]
    for k in range(C):
        slo[k] = -1
    old = theta[p]
    theta[p] = x_new
    if p == GAMMA or p == E0:
        _fill_unit_edge(E, theta[E0], theta[GAMMA], new_unit)
        for i in range(n):
            scratch[0, i] = theta[H] * new_unit[i]
        slo[0] = 0
        shi[0] = n
    elif p == H:
        for i in range(n):
            scratch[0, i] = x_new * unit[i]
        slo[0] = 0
        shi[0] = n
    if p == A or p == DELTA_E or p == OMEGA or p == E0:
        wc = theta[E0] + theta[DELTA_E]
        l0, h0 = _window(E, wc, theta[OMEGA])
        _fill_gauss(E, h, theta[A], wc, theta[OMEGA], l0, h0, scratch[1],
                    min(l0, lo[1]), max(h0, hi[1]))
        slo[1] = l0
        shi[1] = h0
    if p == E0 and relative:
        for j in range(C - 2):
            c = _center(theta, j, relative)
            w = theta[N_STEP + 3 * j + 2]
            l0, h0 = _window(E, c, w)
            _fill_gauss(E, h, theta[N_STEP + 3 * j], c, w, l0, h0, scratch[2 + j],
                        min(l0, lo[2 + j]), max(h0, hi[2 + j]))
            slo[2 + j] = l0
            shi[2 + j] = h0
    theta[p] = old
    ul = n
    uh = 0
    for k in range(C):
        if slo[k] >= 0:
            ul = min(ul, min(slo[k], lo[k]))
            uh = max(uh, max(shi[k], hi[k]))
    for i in range(ul, uh):
        delta[i] = 0.0
    for k in range(C):
        if slo[k] >= 0:
            for i in range(min(slo[k], lo[k]), max(shi[k], hi[k])):
                delta[i] += comp[k, i] - scratch[k, i]
    dsse = 0.0
    for i in range(ul, uh):
        r = resid[i]
        rn = r + delta[i]
        dsse += rn * rn - r * r
    return ul, uh, dsse


@nb.njit(cache=True, nogil=True)
def _commit_step(p, resid, comp, unit, lo, hi, scratch, new_unit, slo, shi, delta, ul, uh):
    C = comp.shape[0]
    for i in range(ul, uh):
        resid[i] += delta[i]
    for k in range(C):
        if slo[k] < 0:
            continue
        for i in range(min(slo[k], lo[k]), max(shi[k], hi[k])):
            comp[k, i] = scratch[k, i]
        lo[k] = slo[k]
        hi[k] = shi[k]
    if p == GAMMA or p == E0:
        unit[:] = new_unit


@nb.njit(cache=True, nogil=True)
def _peak_move(E, h, theta, p, x_new, resid, cur, cur_lo, cur_hi, relative, buf):
    """Candidate curve of the peak owning slot ``p`` into ``buf``.

    Returns ``(lo, hi, ul, uh, dsse)``: the new window, the index range
    touched and the change of the residual sum of squares.
    """
    j = (p - N_STEP) // 3
    role = (p - N_STEP) % 3
    F = theta[N_STEP + 3 * j]
    c = _center(theta, j, relative)
    w = theta[N_STEP + 3 * j + 2]
    if role == 0:
        F = x_new
    elif role == 1:
        c = x_new + theta[E0] if relative else x_new
    else:
        w = x_new
    l0, h0 = _window(E, c, w)
    ul = min(l0, cur_lo)
    uh = max(h0, cur_hi)
    _fill_gauss(E, h, F, c, w, l0, h0, buf, ul, uh)
    dsse = 0.0
    for i in range(ul, uh):
        r = resid[i]
        rn = r + cur[i] - buf[i]
        dsse += rn * rn - r * r
    return l0, h0, ul, uh, dsse


@nb.njit(cache=True, nogil=True)
def trial_dsse(E, I, h, relative, theta, resid, comp, unit, lo, hi, p, x_new):
    """SSE change the sampler would compute for moving slot ``p`` to ``x_new``."""
    n = E.shape[0]
    C = comp.shape[0]
    if p < N_STEP:
        scratch = np.zeros((C, n))
        new_unit = np.zeros(n)
        delta = np.zeros(n)
        slo = np.empty(C, dtype=np.int64)
        shi = np.empty(C, dtype=np.int64)
        return _step_move(E, h, theta, p, x_new, resid, comp, unit, lo, hi, relative,
                          scratch, new_unit, slo, shi, delta)[2]
    ci = 2 + (p - N_STEP) // 3
    buf = np.zeros(n)
    return _peak_move(E, h, theta, p, x_new, resid, comp[ci], lo[ci], hi[ci], relative, buf)[4]


@nb.njit(cache=True, nogil=True)
def sweep_block(E, I, h, b, relative, kind, pa, pb, lognorm,
                theta, resid, comp, unit, lo, hi, sse, logp, slot,
                step, z, logu, n_acc, n_prop, l_start, l_stop):
    """Run ``z.shape[1]`` sweeps for temperatures ``l_start <= l < l_stop``.

    One sweep proposes a Gaussian random-walk move for every parameter with a
    non-zero step size, in vector order, accepting with probability
    ``min(1, exp(-b_l * dSSE / 2 + dlogprior))``. ``z`` and ``logu`` hold the
    standard normals and log-uniforms, shape ``(L, sweeps, P)``, so results
    do not depend on how temperatures are split between threads.
    """
    n = E.shape[0]
    P = theta.shape[1]
    C = comp.shape[1]
    n_sweeps = z.shape[1]
    scratch = np.zeros((C, n))
    new_unit = np.zeros(n)
    delta = np.zeros(n)
    slo = np.empty(C, dtype=np.int64)
    shi = np.empty(C, dtype=np.int64)
    buf = np.zeros(n)
    for l in range(l_start, l_stop):
        s = slot[l]
        bl = b[l]
        th = theta[s]
        rs = resid[s]
        for sw in range(n_sweeps):
            for p in range(P):
                sd = step[l, p]
                if sd == 0.0:
                    continue
                n_prop[l, p] += 1
                x_old = th[p]
                x_new = x_old + sd * z[l, sw, p]
                lp_new = log_density(kind[p], pa[p], pb[p], lognorm[p], x_new)
                if lp_new == NEG_INF:
                    continue
                dlp = lp_new - log_density(kind[p], pa[p], pb[p], lognorm[p], x_old)
                if bl == 0.0:
                    # prior-only target; curves are refreshed after the block
                    if logu[l, sw, p] < dlp:
                        th[p] = x_new
                        n_acc[l, p] += 1
                    continue
                if p < N_STEP:
                    ul, uh, dsse = _step_move(E, h, th, p, x_new, rs, comp[s], unit[s],
                                              lo[s], hi[s], relative, scratch, new_unit,
                                              slo, shi, delta)
                    if logu[l, sw, p] < -0.5 * bl * dsse + dlp:
                        th[p] = x_new
                        _commit_step(p, rs, comp[s], unit[s], lo[s], hi[s], scratch,
                                     new_unit, slo, shi, delta, ul, uh)
                        sse[s] += dsse
                        n_acc[l, p] += 1
                    continue
                ci = 2 + (p - N_STEP) // 3
                cs = comp[s, ci]
                l0, h0, ul, uh, dsse = _peak_move(E, h, th, p, x_new, rs, cs,
                                                  lo[s, ci], hi[s, ci], relative, buf)
                if logu[l, sw, p] < -0.5 * bl * dsse + dlp:
                    th[p] = x_new
                    for i in range(ul, uh):
                        rs[i] += cs[i] - buf[i]
                        cs[i] = buf[i]
                    lo[s, ci] = l0
                    hi[s, ci] = h0
                    sse[s] += dsse
                    n_acc[l, p] += 1
        # drop rounding accumulated by the incremental updates
        sse[s] = refresh(E, I, h, th, rs, comp[s], unit[s], lo[s], hi[s], relative)
        logp[s] = log_prior_vec(th, kind, pa, pb, lognorm)


@nb.njit(cache=True, nogil=True)
def exchange_pass(b, n_data, sse, slot, parity, logu, n_acc, n_prop):
    """Attempt swaps on pairs ``(l, l+1)`` with ``l % 2 == parity``.

    ``logu[l]`` is the log-uniform used for pair ``(l, l+1)``.
    """
    L = b.shape[0]
    for l in range(parity, L - 1, 2):
        e_lo = sse[slot[l]] / (2.0 * n_data)
        e_hi = sse[slot[l + 1]] / (2.0 * n_data)
        x = n_data * (b[l + 1] - b[l]) * (e_hi - e_lo)
        n_prop[l] += 1
        if x >= 0.0 or logu[l] < x:
            tmp = slot[l]
            slot[l] = slot[l + 1]
            slot[l + 1] = tmp
            n_acc[l] += 1
