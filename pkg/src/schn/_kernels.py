"""Hot numeric kernels with a numba fast path and a pure numpy/Python fallback.

Set SCHN_NUMBA=0 to force the fallback path (useful when numba is unavailable
or misbehaving); both paths implement the same update semantics and consume
random numbers in the same order, so seeded runs are comparable across them.
``benchmarks/bench_kernels.py`` times the two paths side by side.
"""

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but keep the escape hatch
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SCHN_NUMBA", "1") != "0"


def _jit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return None


# ---------------------------------------------------------------------------
# single-spin-flip sweeps
# ---------------------------------------------------------------------------

def _heatbath_sweep_py(grid, ys, xs, ptab, u):
    # ptab[h+4] = P(spin -> +1 | local field h), h = sum of 4 neighbours
    for k in range(ys.size):
        y = ys[k]
        x = xs[k]
        h = grid[y - 1, x] + grid[y + 1, x] + grid[y, x - 1] + grid[y, x + 1]
        if u[k] < ptab[h + 4]:
            grid[y, x] = 1
        else:
            grid[y, x] = -1


def _metropolis_sweep_py(grid, ys, xs, acctab, u):
    # acctab[dH+8] = min(1, exp(-beta*dH)), dH = 2*s*h in [-8, 8]
    for k in range(ys.size):
        y = ys[k]
        x = xs[k]
        s = grid[y, x]
        h = grid[y - 1, x] + grid[y + 1, x] + grid[y, x - 1] + grid[y, x + 1]
        if u[k] < acctab[2 * s * h + 8]:
            grid[y, x] = -s


_heatbath_sweep_nb = _jit(_heatbath_sweep_py)
_metropolis_sweep_nb = _jit(_metropolis_sweep_py)


def heatbath_sweep(grid, ys, xs, ptab, u):
    if USE_NUMBA:
        _heatbath_sweep_nb(grid, ys, xs, ptab, u)
    else:
        _heatbath_sweep_py(grid, ys, xs, ptab, u)


def metropolis_sweep(grid, ys, xs, acctab, u):
    if USE_NUMBA:
        _metropolis_sweep_nb(grid, ys, xs, acctab, u)
    else:
        _metropolis_sweep_py(grid, ys, xs, acctab, u)


# ---------------------------------------------------------------------------
# brute-force partition sums (Gray-code enumeration, Kahan accumulation)
# ---------------------------------------------------------------------------

def _gray_partition_py(n, offsets, nbrs, field, beta):
    # sum over all 2^n assignments of exp(-beta*(H - H_allminus)); Gray code
    # flips one spin per step so the energy is updated locally.
    spins = np.full(n, -1, dtype=np.int8)
    h_rel = 0
    total = 1.0  # the all-minus configuration
    comp = 0.0
    for k in range(1, 1 << n):
        m = k
        i = 0
        while m & 1 == 0:
            m >>= 1
            i += 1
        s = int(spins[i])
        f = int(field[i])
        for j in range(offsets[i], offsets[i + 1]):
            f += int(spins[nbrs[j]])
        h_rel += 2 * s * f
        spins[i] = -s
        w = math.exp(-beta * h_rel)
        y = w - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


_gray_partition_nb = _jit(_gray_partition_py)


def gray_partition(n, offsets, nbrs, field, beta):
    if n == 0:
        return 1.0
    if USE_NUMBA:
        return _gray_partition_nb(n, offsets, nbrs, field, beta)
    return _gray_partition_py(n, offsets, nbrs, field, beta)


# ---------------------------------------------------------------------------
# self-avoiding path enumeration (depth-first, fixed E/N/W/S order)
# ---------------------------------------------------------------------------
#
# Enumerates SAWs from (sx, sy) to (tx, ty) inside the rectangle
# [xlo, xhi] x [ylo, yhi] with at most ``cutoff`` edges.  Returns the count of
# accepted paths per length plus a rigorous bound on the weight neglected by
# the cutoff: every pruned prefix (depth d, Manhattan distance r to target
# with d + r > cutoff) contributes exp(-beta*d) * q^r, q = 3*exp(-beta_eff),
# since its extensions to the target number at most 3^k over lengths k >= r
# of the right parity.  The caller divides the sum by (1 - q^2).

def _saw_counts_py(sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff, beta, q, allow_left,
                   bx, by):
    width = xhi - xlo + 1
    height = yhi - ylo + 1
    visited = np.zeros((width, height), dtype=np.uint8)
    if xlo <= bx <= xhi and ylo <= by <= yhi:
        visited[bx - xlo, by - ylo] = 1  # blocked cell, never unmarked
    counts = np.zeros(cutoff + 1, dtype=np.int64)
    prune = 0.0
    dx = (1, 0, -1, 0)
    dy = (0, 1, 0, -1)
    stack_x = np.empty(cutoff + 2, dtype=np.int64)
    stack_y = np.empty(cutoff + 2, dtype=np.int64)
    stack_d = np.empty(cutoff + 2, dtype=np.int64)
    sp = 0
    stack_x[0] = sx
    stack_y[0] = sy
    stack_d[0] = 0
    visited[sx - xlo, sy - ylo] = 1
    while sp >= 0:
        d = stack_d[sp]
        if d == 4:
            visited[stack_x[sp] - xlo, stack_y[sp] - ylo] = 0
            sp -= 1
            continue
        stack_d[sp] = d + 1
        if not allow_left and d == 2:
            continue
        nx = stack_x[sp] + dx[d]
        ny = stack_y[sp] + dy[d]
        if nx < xlo or nx > xhi or ny < ylo or ny > yhi:
            continue
        if visited[nx - xlo, ny - ylo]:
            continue
        depth = sp + 1
        if nx == tx and ny == ty:
            counts[depth] += 1
            continue
        dist = abs(nx - tx) + abs(ny - ty)
        if depth + dist > cutoff:
            prune += math.exp(-beta * depth) * q ** dist
            continue
        sp += 1
        stack_x[sp] = nx
        stack_y[sp] = ny
        stack_d[sp] = 0
        visited[nx - xlo, ny - ylo] = 1
    return counts, prune


_saw_counts_nb = _jit(_saw_counts_py)


def saw_counts(sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff, beta, q, allow_left=True,
               block=None):
    bx, by = block if block is not None else (xlo - 1, ylo - 1)
    args = (sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff, float(beta), float(q),
            allow_left, bx, by)
    if USE_NUMBA:
        return _saw_counts_nb(*args)
    return _saw_counts_py(*args)


def _saw_weights_synth_py(sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff,
                          beta, q, phi1, phi2, phi3):
    # Like _saw_counts_py but accumulates cluster-dressed weights
    #   exp(-beta*L + phi1*n1 + phi2*n2 + phi3*n3)
    # where n1 = vertices on the path, n2/n3 = 2x2 and 3x3 blocks touching it.
    width = xhi - xlo + 1
    height = yhi - ylo + 1
    visited = np.zeros((width, height), dtype=np.uint8)
    touch2 = np.zeros((width + 1, height + 1), dtype=np.int32)
    touch3 = np.zeros((width + 2, height + 2), dtype=np.int32)
    wsum = 0.0
    comp = 0.0
    npaths = 0
    prune = 0.0
    dx = (1, 0, -1, 0)
    dy = (0, 1, 0, -1)
    stack_x = np.empty(cutoff + 2, dtype=np.int64)
    stack_y = np.empty(cutoff + 2, dtype=np.int64)
    stack_d = np.empty(cutoff + 2, dtype=np.int64)
    n2 = 0
    n3 = 0

    # mark the start vertex
    sp = 0
    stack_x[0] = sx
    stack_y[0] = sy
    stack_d[0] = 0
    visited[sx - xlo, sy - ylo] = 1
    for ax in range(sx - xlo, sx - xlo + 2):
        for ay in range(sy - ylo, sy - ylo + 2):
            if touch2[ax, ay] == 0:
                n2 += 1
            touch2[ax, ay] += 1
    for ax in range(sx - xlo, sx - xlo + 3):
        for ay in range(sy - ylo, sy - ylo + 3):
            if touch3[ax, ay] == 0:
                n3 += 1
            touch3[ax, ay] += 1

    while sp >= 0:
        d = stack_d[sp]
        if d == 4:
            cx = stack_x[sp] - xlo
            cy = stack_y[sp] - ylo
            visited[cx, cy] = 0
            for ax in range(cx, cx + 2):
                for ay in range(cy, cy + 2):
                    touch2[ax, ay] -= 1
                    if touch2[ax, ay] == 0:
                        n2 -= 1
            for ax in range(cx, cx + 3):
                for ay in range(cy, cy + 3):
                    touch3[ax, ay] -= 1
                    if touch3[ax, ay] == 0:
                        n3 -= 1
            sp -= 1
            continue
        stack_d[sp] = d + 1
        nx = stack_x[sp] + dx[d]
        ny = stack_y[sp] + dy[d]
        if nx < xlo or nx > xhi or ny < ylo or ny > yhi:
            continue
        if visited[nx - xlo, ny - ylo]:
            continue
        depth = sp + 1
        if nx == tx and ny == ty:
            # count the target vertex's blocks without mutating state
            m2 = n2
            m3 = n3
            cx = nx - xlo
            cy = ny - ylo
            for ax in range(cx, cx + 2):
                for ay in range(cy, cy + 2):
                    if touch2[ax, ay] == 0:
                        m2 += 1
            for ax in range(cx, cx + 3):
                for ay in range(cy, cy + 3):
                    if touch3[ax, ay] == 0:
                        m3 += 1
            w = math.exp(-beta * depth + phi1 * (depth + 1) + phi2 * m2 + phi3 * m3)
            yk = w - comp
            t = wsum + yk
            comp = (t - wsum) - yk
            wsum = t
            npaths += 1
            continue
        dist = abs(nx - tx) + abs(ny - ty)
        if depth + dist > cutoff:
            prune += math.exp(-beta * depth) * q ** dist
            continue
        sp += 1
        stack_x[sp] = nx
        stack_y[sp] = ny
        stack_d[sp] = 0
        cx = nx - xlo
        cy = ny - ylo
        visited[cx, cy] = 1
        for ax in range(cx, cx + 2):
            for ay in range(cy, cy + 2):
                if touch2[ax, ay] == 0:
                    n2 += 1
                touch2[ax, ay] += 1
        for ax in range(cx, cx + 3):
            for ay in range(cy, cy + 3):
                if touch3[ax, ay] == 0:
                    n3 += 1
                touch3[ax, ay] += 1
    return wsum, prune, npaths


_saw_weights_synth_nb = _jit(_saw_weights_synth_py)


def saw_weights_synth(sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff, beta, q,
                      phi1, phi2, phi3):
    args = (sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff,
            float(beta), float(q), float(phi1), float(phi2), float(phi3))
    if USE_NUMBA:
        return _saw_weights_synth_nb(*args)
    return _saw_weights_synth_py(*args)


# ---------------------------------------------------------------------------
# dual-lattice loop tracing (south-west convention)
# ---------------------------------------------------------------------------
#
# hdis[iy, ix] marks the vertical dual edge of horizontal bond (ix, ix+1) in
# row iy; vdis[iy, ix] the horizontal dual edge of vertical bond (iy, iy+1).
# Directions: 0=E, 1=N, 2=W, 3=S from a dual vertex.  Output vertices are in
# doubled absolute coordinates; loops are concatenated with an offsets array.

def _trace_loops_py(hdis, vdis, xmin, ymin):
    hused = np.zeros(hdis.shape, dtype=np.uint8)
    vused = np.zeros(vdis.shape, dtype=np.uint8)
    total = int(hdis.sum()) + int(vdis.sum())
    vx = np.empty(total, dtype=np.int64)
    vy = np.empty(total, dtype=np.int64)
    offsets = np.zeros(total + 2, dtype=np.int64)
    hr, hc = hdis.shape
    vr, vc = vdis.shape
    n_loops = 0
    pos = 0
    for s_iy in range(hr + vr):
        for s_ix in range(max(hc, vc)):
            # unified scan: first all vertical dual edges (from horizontal
            # bonds) row-major, then all horizontal dual edges
            if s_iy < hr:
                if s_ix >= hc or not hdis[s_iy, s_ix] or hused[s_iy, s_ix]:
                    continue
                sa = 2 * (s_ix + xmin) + 1
                sb = 2 * (s_iy + ymin) - 1
                sdir = 1
            else:
                if s_ix >= vc or not vdis[s_iy - hr, s_ix] or vused[s_iy - hr, s_ix]:
                    continue
                sa = 2 * (s_ix + xmin) - 1
                sb = 2 * (s_iy - hr + ymin) + 1
                sdir = 0
            a2 = sa
            b2 = sb
            d = sdir
            while True:
                vx[pos] = a2
                vy[pos] = b2
                pos += 1
                # mark the edge being traversed
                if d == 1:
                    hused[(b2 + 1) // 2 - ymin, (a2 - 1) // 2 - xmin] = 1
                elif d == 3:
                    hused[(b2 - 1) // 2 - ymin, (a2 - 1) // 2 - xmin] = 1
                elif d == 0:
                    vused[(b2 - 1) // 2 - ymin, (a2 + 1) // 2 - xmin] = 1
                else:
                    vused[(b2 - 1) // 2 - ymin, (a2 - 1) // 2 - xmin] = 1
                if d == 0:
                    a2 += 2
                elif d == 1:
                    b2 += 2
                elif d == 2:
                    a2 -= 2
                else:
                    b2 -= 2
                # incident disagreement edges at the new vertex
                ix0 = (a2 - 1) // 2 - xmin
                iyn = (b2 + 1) // 2 - ymin
                iys = (b2 - 1) // 2 - ymin
                ixe = (a2 + 1) // 2 - xmin
                e1 = 0 <= iyn < hr and 0 <= ix0 < hc and hdis[iyn, ix0] != 0
                e3 = 0 <= iys < hr and 0 <= ix0 < hc and hdis[iys, ix0] != 0
                e0 = 0 <= iys < vr and 0 <= ixe < vc and vdis[iys, ixe] != 0
                e2 = 0 <= iys < vr and 0 <= ix0 < vc and vdis[iys, ix0] != 0
                incoming = (d + 2) % 4
                deg = int(e0) + int(e1) + int(e2) + int(e3)
                if deg == 2:
                    if e0 and incoming != 0:
                        d = 0
                    elif e1 and incoming != 1:
                        d = 1
                    elif e2 and incoming != 2:
                        d = 2
                    else:
                        d = 3
                else:
                    # south-west rule: pair (S, W) and (N, E)
                    if incoming == 3:
                        d = 2
                    elif incoming == 2:
                        d = 3
                    elif incoming == 1:
                        d = 0
                    else:
                        d = 1
                if a2 == sa and b2 == sb and d == sdir:
                    break
            n_loops += 1
            offsets[n_loops] = pos
    return vx, vy, offsets, n_loops


_trace_loops_nb = _jit(_trace_loops_py)


def trace_loops(hdis, vdis, xmin, ymin):
    if USE_NUMBA:
        return _trace_loops_nb(hdis, vdis, xmin, ymin)
    return _trace_loops_py(hdis, vdis, xmin, ymin)


def _point_inside_py(vx, vy, lo, hi, qx2, qy2):
    inside = False
    n = hi - lo
    for i in range(n):
        y1 = vy[lo + i]
        y2 = vy[lo + (i + 1) % n]
        if (y1 > qy2) != (y2 > qy2):
            if qx2 < vx[lo + i]:
                inside = not inside
    return inside


_point_inside_nb = _jit(_point_inside_py)


def point_inside(vx, vy, lo, hi, qx2, qy2):
    if USE_NUMBA:
        return _point_inside_nb(vx, vy, lo, hi, qx2, qy2)
    return _point_inside_py(vx, vy, lo, hi, qx2, qy2)


# ---------------------------------------------------------------------------
# ballot-problem dynamic programming and direct simulation
# ---------------------------------------------------------------------------

def _ballot_dp_py(N, u, thetas, zetas, probs, cap):
    dp = np.zeros((N + 1, cap + 1))
    dp[0, u] = 1.0
    for t in range(N):
        for y in range(1, cap + 1):
            w = dp[t, y]
            if w == 0.0:
                continue
            for s in range(thetas.size):
                t2 = t + thetas[s]
                if t2 > N:
                    continue
                y2 = y + zetas[s]
                if y2 < 1 or y2 > cap:
                    continue
                dp[t2, y2] += w * probs[s]
    return dp[N].copy()


_ballot_dp_nb = _jit(_ballot_dp_py)


def _ballot_dp_np(N, u, thetas, zetas, probs, cap):
    # vectorised fallback: one convolution along the height axis per
    # (position, advance) pair
    dp = np.zeros((N + 1, cap + 1))
    dp[0, u] = 1.0
    order = np.argsort(thetas, kind="stable")
    th_sorted = thetas[order]
    uniq = np.unique(th_sorted)
    kernels = {}
    for th in uniq:
        sel = thetas == th
        zmin = zetas[sel].min()
        zmax = zetas[sel].max()
        kern = np.zeros(zmax - zmin + 1)
        for z, p in zip(zetas[sel], probs[sel]):
            kern[z - zmin] += p
        kernels[int(th)] = (int(zmin), kern)
    for t in range(N):
        row = dp[t, 1:]
        if not row.any():
            continue
        for th, (zmin, kern) in kernels.items():
            t2 = t + th
            if t2 > N:
                continue
            conv = np.convolve(row, kern)
            # conv[j] is the mass arriving at height y2 = 1 + zmin + j
            lo = 1 + zmin
            y0 = max(1, lo)
            y1 = min(cap, lo + conv.size - 1)
            if y0 > y1:
                continue
            dp[t2, y0:y1 + 1] += conv[y0 - lo:y1 - lo + 1]
    return dp[N].copy()


def ballot_dp_row(N, u, thetas, zetas, probs, cap):
    """Arrival-probability row dp[N, 0..cap] for walks kept strictly positive."""
    if USE_NUMBA:
        return _ballot_dp_nb(N, u, thetas, zetas, probs, cap)
    return _ballot_dp_np(N, u, thetas, zetas, probs, cap)


def _ballot_mc_py(U, cdf, thetas, zetas, N, u, v):
    hits = 0
    for i in range(U.shape[0]):
        t = 0
        z = u
        for j in range(U.shape[1]):
            r = U[i, j]
            lo = 0
            hi = cdf.size - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if r < cdf[mid]:
                    hi = mid
                else:
                    lo = mid + 1
            t += thetas[lo]
            z += zetas[lo]
            if z <= 0:
                break
            if t >= N:
                if t == N and z == v:
                    hits += 1
                break
    return hits


_ballot_mc_nb = _jit(_ballot_mc_py)


def _ballot_mc_np(U, cdf, thetas, zetas, N, u, v):
    n = U.shape[0]
    t = np.zeros(n, dtype=np.int64)
    z = np.full(n, u, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    hits = 0
    for j in range(U.shape[1]):
        if not alive.any():
            break
        idx = np.searchsorted(cdf, U[:, j], side="right")
        t[alive] += thetas[idx[alive]]
        z[alive] += zetas[idx[alive]]
        died = alive & (z <= 0)
        alive &= ~died
        arrived = alive & (t >= N)
        hits += int(np.count_nonzero(arrived & (t == N) & (z == v)))
        alive &= ~arrived
    return hits


def ballot_mc_hits(U, cdf, thetas, zetas, N, u, v):
    if USE_NUMBA:
        return _ballot_mc_nb(U, cdf, thetas, zetas, N, u, v)
    return _ballot_mc_np(U, cdf, thetas, zetas, N, u, v)


# ---------------------------------------------------------------------------
# absorbed-walk DP for the harmonic-like functions of the vertical walk
# ---------------------------------------------------------------------------

def _absorb_dp_py(x0, zetas, probs, cap, horizon):
    alive = np.zeros(cap + 1)
    alive[x0] = 1.0
    absorbed_e = 0.0
    spill = 0.0
    for _ in range(horizon):
        new = np.zeros(cap + 1)
        for y in range(1, cap + 1):
            w = alive[y]
            if w == 0.0:
                continue
            for s in range(zetas.size):
                y2 = y + zetas[s]
                m = w * probs[s]
                if y2 <= 0:
                    absorbed_e += y2 * m
                elif y2 > cap:
                    spill += m
                else:
                    new[y2] += m
        alive = new
    d_h = 0.0
    mass = 0.0
    for y in range(1, cap + 1):
        d_h += y * alive[y]
        mass += alive[y]
    return d_h, absorbed_e, mass, spill


_absorb_dp_nb = _jit(_absorb_dp_py)


def _absorb_dp_np(x0, zetas, probs, cap, horizon):
    alive = np.zeros(cap + 1)
    alive[x0] = 1.0
    zmin = int(zetas.min())
    zmax = int(zetas.max())
    kern = np.zeros(zmax - zmin + 1)
    for z, p in zip(zetas, probs):
        kern[z - zmin] += p
    absorbed_e = 0.0
    spill = 0.0
    ys = None
    for _ in range(horizon):
        conv = np.convolve(alive[1:], kern)
        # conv[j] lands at height y2 = 1 + zmin + j
        lo = 1 + zmin
        heights = np.arange(lo, lo + conv.size)
        below = heights <= 0
        absorbed_e += float(np.dot(heights[below], conv[below]))
        above = heights > cap
        spill += float(conv[above].sum())
        keep = ~(below | above)
        alive = np.zeros(cap + 1)
        alive[heights[keep]] = conv[keep]
    ys = np.arange(cap + 1)
    return float(np.dot(ys, alive)), absorbed_e, float(alive.sum()), spill


def absorb_dp(x0, zetas, probs, cap, horizon):
    if USE_NUMBA:
        return _absorb_dp_nb(x0, zetas, probs, cap, horizon)
    return _absorb_dp_np(x0, zetas, probs, cap, horizon)


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    grid = -np.ones((3, 3), dtype=np.int8)
    ys = np.array([1], dtype=np.int64)
    xs = np.array([1], dtype=np.int64)
    tab = np.linspace(0.0, 1.0, 9)
    u = np.array([0.5])
    heatbath_sweep(grid, ys, xs, tab, u)
    metropolis_sweep(grid, ys, xs, np.linspace(0.0, 1.0, 17), u)
    gray_partition(1, np.array([0, 0], dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.array([4], dtype=np.int64), 1.0)
    saw_counts(0, 0, 1, 0, 0, 1, 0, 1, 3, 1.0, 0.5)
    saw_counts(0, 0, 1, 0, 0, 1, 0, 1, 3, 1.0, 0.5, block=(0, 1))
    saw_weights_synth(0, 0, 1, 0, 0, 1, 0, 1, 3, 1.0, 0.5, 0.0, 0.0, 0.0)
    g = -np.ones((3, 3), dtype=np.int8)
    g[1, 1] = 1
    vx, vy, off, n = trace_loops(g[:, :-1] != g[:, 1:], g[:-1, :] != g[1:, :],
                                 -1, -1)
    point_inside(vx, vy, 0, int(off[1]), 0, 0)
    one = np.array([1], dtype=np.int64)
    ballot_dp_row(1, 1, one, np.array([0], dtype=np.int64), np.array([1.0]), 4)
    ballot_mc_hits(np.array([[0.5]]), np.array([1.0]), one,
                   np.array([0], dtype=np.int64), 1, 1, 1)
    absorb_dp(1, np.array([1, -1], dtype=np.int64), np.array([0.5, 0.5]), 8, 2)
