"""Pure-numpy implementations of the hot kernels.

These are the reference semantics; ``mcfsing._speedups`` mirrors them in C.
Both backends must produce identical results (same arithmetic, same order),
so any change here has to be made in the compiled kernel as well.
"""

import numpy as np

# status codes shared with the compiled kernel
STATUS_TIME = 0
STATUS_PINCH = 1
STATUS_EXTINCT = 2
STATUS_MAXSTEPS = 3
STATUS_EMIT = 4


def greedy_cover(xs, ts, r):
    """Greedy parabolic cover of a point set at one scale.

    Scans points in input order; a point not already inside the closed
    parabolic ball of radius ``r`` around an earlier center becomes a new
    center.  Deterministic given the input order.

    Returns the array of center indices.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    npts = xs.shape[0]
    r2 = r * r
    covered = np.zeros(npts, dtype=bool)
    centers = []
    idx = 0
    while idx < npts:
        tail = ~covered[idx:]
        off = int(np.argmax(tail))
        if not tail[off]:
            break
        idx += off
        centers.append(idx)
        dx2 = np.sum((xs - xs[idx]) ** 2, axis=1)
        dt = np.abs(ts - ts[idx])
        covered |= (dx2 <= r2) & (dt <= r2)
        idx += 1
    return np.asarray(centers, dtype=np.int64)


def pairwise_bin_max(xs, ts, edges, spatial_key=False):
    """Per-bin maxima of ``|dt| / |dx|^2`` over all point pairs.

    Pairs are binned by parabolic distance (or spatial distance when
    ``spatial_key``); bin ``b`` holds pairs with key in
    ``(edges[b-1], edges[b]]``.  Pairs with key beyond ``edges[-1]`` are
    dropped.  Pairs with ``dx = 0`` but ``dt != 0`` set the per-bin infinity
    flag instead of a ratio.

    Returns ``(binmax, bininf)`` with ``binmax[b] = -1`` for empty bins.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    nbins = edges.shape[0]
    binmax = np.full(nbins, -1.0)
    bininf = np.zeros(nbins, dtype=bool)
    npts = xs.shape[0]
    block = max(1, int(2e6 // max(npts, 1)))
    for start in range(0, npts, block):
        stop = min(start + block, npts)
        dx2 = np.sum(
            (xs[start:stop, None, :] - xs[None, :, :]) ** 2, axis=2)
        dt = np.abs(ts[start:stop, None] - ts[None, :])
        # keep each unordered pair once
        ii, jj = np.indices(dx2.shape)
        keep = (ii + start) < jj
        dx2 = dx2[keep]
        dt = dt[keep]
        if spatial_key:
            key = np.sqrt(dx2)
        else:
            key = np.maximum(np.sqrt(dx2), np.sqrt(dt))
        bins = np.searchsorted(edges, key, side="left")
        ok = bins < nbins
        bins, dx2, dt = bins[ok], dx2[ok], dt[ok]
        zero = dx2 == 0.0
        inf_mask = zero & (dt > 0.0)
        if np.any(inf_mask):
            bininf[np.unique(bins[inf_mask])] = True
        fin = ~zero
        if np.any(fin):
            np.maximum.at(binmax, bins[fin], dt[fin] / dx2[fin])
    return binmax, bininf


def _stencils(v, iL, iR, h, aL, aR):
    """First and second derivatives on the active window [iL, iR].

    Central differences inside; one-sided three-point stencils through the
    cap points (where v = 0) at the ends.
    """
    vx = np.empty(iR - iL + 1)
    vxx = np.empty(iR - iL + 1)
    seg = v[iL:iR + 1]
    vx[1:-1] = (seg[2:] - seg[:-2]) / (2.0 * h)
    vxx[1:-1] = (seg[2:] - 2.0 * seg[1:-1] + seg[:-2]) / (h * h)
    # left cap: points (x_iL - aL, 0), (x_iL, v_iL), (x_iL + h, v_iL+1)
    a, b = aL, h
    vx[0] = (a * a * seg[1] + (b * b - a * a) * seg[0]) / (a * b * (a + b))
    vxx[0] = 2.0 * (a * seg[1] - (a + b) * seg[0]) / (a * b * (a + b))
    # right cap, mirrored
    a, b = aR, h
    vx[-1] = -(a * a * seg[-2] + (b * b - a * a) * seg[-1]) / (a * b * (a + b))
    vxx[-1] = 2.0 * (a * seg[-2] - (a + b) * seg[-1]) / (a * b * (a + b))
    return vx, vxx


def _stencils_periodic(v, h):
    vp = np.roll(v, -1)
    vm = np.roll(v, 1)
    vx = (vp - vm) / (2.0 * h)
    vxx = (vp - 2.0 * v + vm) / (h * h)
    return vx, vxx


def rotsym_step_block(v, h, x0, nrot, t, t_stop, iL, iR, xL, xR,
                      periodic, vmin_stop, cfl, max_steps,
                      vemit_lo=0.0, vemit_hi=0.0):
    """Advance the squared-radius profile ``v = u**2`` of a rotationally
    symmetric flow.

    The evolution is ``v_t = (4 v v_xx - 2 v_x^2)/(4 v + v_x^2) - 2 nrot``
    (``nrot = n - 1`` rotational directions), which is the graph flow
    ``u_t = u_xx/(1+u_x^2) - nrot/u`` rewritten in ``v``; the caps where the
    profile meets the axis are regular points of this equation.  Caps are
    tracked sub-grid: the active window is ``[iL, iR]`` and ``xL < x[iL]``,
    ``xR > x[iR]`` are the axis crossings.

    Steps until ``t_stop``, an interior pinch (``min v <= vmin_stop`` away
    from the caps), extinction of the window, ``max_steps``, or an emission
    trigger (interior min below ``vemit_lo`` / window max below
    ``vemit_hi``; zero disables).  ``v`` is modified in place.  Returns
    ``(t, iL, iR, xL, xR, status, steps, pinch_idx)``.
    """
    n = nrot + 1.0
    pinch_idx = -1
    steps = 0
    while steps < max_steps:
        if t >= t_stop - 1e-15:
            return t, iL, iR, xL, xR, STATUS_TIME, steps, pinch_idx
        if periodic:
            vx, vxx = _stencils_periodic(v, h)
            vint_min = float(np.min(v))
        else:
            if iR - iL + 1 < 3 or (xR - xL) <= 2.2 * h:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            aL = max((x0 + iL * h) - xL, 1e-12 * h)
            aR = max(xR - (x0 + iR * h), 1e-12 * h)
            vx, vxx = _stencils(v, iL, iR, h, aL, aR)
            if iR - 2 >= iL + 2:
                vint_min = float(np.min(v[iL + 2:iR - 1]))
            else:
                vint_min = float(np.max(v[iL:iR + 1]))
        dt = min(cfl * h * h, max(vint_min / (20.0 * n), 0.01 * vmin_stop))
        dt = min(dt, t_stop - t)
        seg = v[iL:iR + 1] if not periodic else v
        denom = 4.0 * seg + vx * vx
        rhs = (4.0 * seg * vxx - 2.0 * vx * vx) / denom - 2.0 * nrot
        seg += dt * rhs
        t += dt
        steps += 1
        if not periodic:
            # advance the caps: deactivate nodes the cap has passed, else
            # move the cap at its characteristic speed 2n / v_x
            moved = False
            while iL <= iR and v[iL] <= 0.0:
                iL += 1
                moved = True
            if iL > iR:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            if moved:
                xL = (x0 + iL * h) - h * v[iL] / (v[iL] - v[iL - 1])
            else:
                xL += dt * 2.0 * n * ((x0 + iL * h) - xL) / v[iL]
                xL = min(xL, (x0 + iL * h) - 1e-9 * h)
            moved = False
            while iR >= iL and v[iR] <= 0.0:
                iR -= 1
                moved = True
            if iR < iL:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            if moved:
                xR = (x0 + iR * h) + h * v[iR] / (v[iR] - v[iR + 1])
            else:
                xR += dt * 2.0 * n * ((x0 + iR * h) - xR) / v[iR]
                xR = max(xR, (x0 + iR * h) + 1e-9 * h)
            if iR - 2 >= iL + 2:
                win = v[iL + 2:iR - 1]
                k = int(np.argmin(win))
                if win[k] <= vmin_stop:
                    pinch_idx = iL + 2 + k
                    return t, iL, iR, xL, xR, STATUS_PINCH, steps, pinch_idx
                if vemit_lo > 0.0 and win[k] <= vemit_lo:
                    return t, iL, iR, xL, xR, STATUS_EMIT, steps, pinch_idx
            vmax = float(np.max(v[iL:iR + 1]))
            if vmax <= vmin_stop:
                return t, iL, iR, xL, xR, STATUS_EXTINCT, steps, pinch_idx
            if vemit_hi > 0.0 and vmax <= vemit_hi:
                return t, iL, iR, xL, xR, STATUS_EMIT, steps, pinch_idx
        else:
            k = int(np.argmin(v))
            if v[k] <= vmin_stop:
                pinch_idx = k
                return t, iL, iR, xL, xR, STATUS_PINCH, steps, pinch_idx
            if vemit_lo > 0.0 and v[k] <= vemit_lo:
                return t, iL, iR, xL, xR, STATUS_EMIT, steps, pinch_idx
    return t, iL, iR, xL, xR, STATUS_MAXSTEPS, steps, pinch_idx
