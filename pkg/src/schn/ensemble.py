"""Truncated exact summation over weighted self-avoiding paths.

Paths carry weight exp(-beta * length).  An optional synthetic cluster mode
multiplies in positive factors exp(amplitude * exp(-rate * diam)) for every
axis-aligned block (1x1, 2x2, 3x3; diam = side - 1) touching the path, with
rate >= 2*beta so the factors stay inside the admissible cluster envelope.
This perturbs the ensemble the way a low-temperature dressing would without
pretending to construct one.

Every truncated sum comes with a rigorous bound on the neglected weight: a
pruned prefix of length d at Manhattan distance r from the target can extend
to the target in at most 3^k walks of length k >= r (k = r mod 2), so its
missing weight is at most exp(-beta*d) * q^r / (1 - q^2) with q = 3 e^{-beta}
(inflated by the per-step cluster factor cap in synthetic mode).  The bound
is only finite for q < 1, i.e. beta > ln 3.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class WeightModel:
    """Path weights exp(-beta|path|), optionally cluster-dressed."""

    beta: float
    cluster_rate: float | None = None
    cluster_amplitude: float = 0.0

    def __post_init__(self):
        if self.beta < 0:
            raise EnsembleError("beta must be >= 0")
        if self.synthetic:
            if self.cluster_rate < 2 * self.beta:
                raise EnsembleError("cluster rate must be >= 2*beta")
            if not (0 <= self.cluster_amplitude <= 1):
                raise EnsembleError("cluster amplitude must lie in [0, 1]")

    @property
    def synthetic(self) -> bool:
        return self.cluster_rate is not None and self.cluster_amplitude > 0.0

    def phi_terms(self):
        """(phi1, phi2, phi3): per-block log factors for sides 1, 2, 3."""
        if not self.synthetic:
            return 0.0, 0.0, 0.0
        a = self.cluster_amplitude
        r = self.cluster_rate
        return a, a * math.exp(-r), a * math.exp(-2 * r)

    def step_factor_cap(self) -> float:
        """Upper bound on the weight gain a single extra vertex can cause."""
        p1, p2, p3 = self.phi_terms()
        return math.exp(p1 + 4 * p2 + 9 * p3)


@dataclass(frozen=True)
class SemistripPathEnsemble:
    """Self-avoiding paths (0, u) -> (N, v) in the upper semistrip.

    Vertices satisfy 0 <= x <= N and y >= 0; at most ``cutoff`` edges.
    """

    N: int
    u: int
    v: int
    cutoff: int

    def __post_init__(self):
        if self.N < 1:
            raise EnsembleError("strip width must be >= 1")
        if self.u < 0 or self.v < 0:
            raise EnsembleError("endpoint heights must be >= 0")
        if self.cutoff < self.N + abs(self.u - self.v):
            raise EnsembleError("cutoff excludes the shortest admissible path")


@dataclass(frozen=True)
class ZResult:
    Z: float
    path_count: int
    truncation_bound: float
    length_counts: tuple = ()

    @property
    def reliable(self) -> bool:
        return self.Z > 0 and self.truncation_bound <= 0.01 * self.Z


def _tail_bound(prune_sum: float, beta: float, factor_cap: float) -> float:
    q = 3.0 * math.exp(-beta) * factor_cap
    if q >= 1.0:
        return math.inf
    return prune_sum * factor_cap / (1.0 - q * q)


def _enumerate(sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff, model,
               allow_left=True, block=None):
    """Shared driver; returns (Z, path_count, bound, counts-or-empty)."""
    cap = model.step_factor_cap()
    q = 3.0 * math.exp(-model.beta) * cap
    if model.synthetic:
        p1, p2, p3 = model.phi_terms()
        wsum, prune, npaths = _kernels.saw_weights_synth(
            sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff, model.beta, min(q, 4.0),
            p1, p2, p3)
        return wsum, npaths, _tail_bound(prune, model.beta, cap), ()
    counts, prune = _kernels.saw_counts(
        sx, sy, tx, ty, xlo, xhi, ylo, yhi, cutoff, model.beta, min(q, 4.0),
        allow_left, block)
    lengths = np.nonzero(counts)[0]
    z = float(sum(counts[l] * math.exp(-model.beta * l) for l in lengths))
    npaths = int(counts.sum())
    return z, npaths, _tail_bound(prune, model.beta, cap), tuple(
        (int(l), int(counts[l])) for l in lengths)


def enumerate_Z(ensemble: SemistripPathEnsemble, model: WeightModel) -> ZResult:
    """Truncated partition sum over the semistrip ensemble."""
    e = ensemble
    yhi = max(e.u, e.v) + e.cutoff
    z, npaths, bound, counts = _enumerate(
        0, e.u, e.N, e.v, 0, e.N, 0, yhi, e.cutoff, model)
    return ZResult(z, npaths, bound, counts)


@dataclass(frozen=True)
class VerticalRatioResult:
    ratio: float
    down_fraction: float
    z_upper: ZResult
    z_lower: ZResult

    @property
    def reliable(self) -> bool:
        return self.z_upper.reliable and self.z_lower.reliable


def vertical_z(v_top: int, v_bot: int, model: WeightModel, cutoff: int) -> ZResult:
    """Sum over SAWs (0, v_top) -> (0, v_bot) staying in x >= 0."""
    if v_top <= v_bot:
        raise EnsembleError("need v_top > v_bot")
    if cutoff < v_top - v_bot:
        raise EnsembleError("cutoff excludes the straight drop")
    z, npaths, bound, counts = _enumerate(
        0, v_top, 0, v_bot, 0, cutoff, v_bot - cutoff, v_top + cutoff, cutoff, model)
    return ZResult(z, npaths, bound, counts)


def _vertical_down_first(v_top, v_bot, model, cutoff) -> float:
    """Weight of paths whose first edge steps straight down.

    First edge (0, v_top) -> (0, v_top - 1); the remainder is a SAW to
    (0, v_bot) that avoids the consumed start vertex.
    """
    if model.synthetic:
        raise EnsembleError("down-first fraction is defined for mode none")
    z, _, _, _ = _enumerate(
        0, v_top - 1, 0, v_bot, 0, cutoff, v_bot - cutoff, v_top + cutoff,
        cutoff - 1, model, block=(0, v_top))
    return math.exp(-model.beta) * z


def vertical_ratio(v_top: int, v_bot: int, model: WeightModel,
                   cutoff: int) -> VerticalRatioResult:
    """Z(v_top, v_bot) / Z(v_top - 1, v_bot) plus the down-first weight share.

    The shortened ensemble reuses the same cutoff reduced by one edge so both
    sums are truncated at the same excess length.
    """
    if v_top <= v_bot + 1:
        raise EnsembleError("need v_top > v_bot + 1")
    z_hi = vertical_z(v_top, v_bot, model, cutoff)
    z_lo = vertical_z(v_top - 1, v_bot, model, cutoff - 1)
    if z_lo.Z <= 0:
        raise EnsembleError("empty denominator ensemble")
    ratio = z_hi.Z / z_lo.Z
    if model.synthetic:
        down_fraction = math.nan
    else:
        down_fraction = _vertical_down_first(v_top, v_bot, model, cutoff) / z_hi.Z
    return VerticalRatioResult(ratio, down_fraction, z_hi, z_lo)


def endpoint_ratio(ensemble: SemistripPathEnsemble, model: WeightModel):
    """(Z(u -> v+1) / Z(u -> v), raised ZResult, base ZResult).

    Both ensembles share the same cutoff so the truncation is uniform across
    the endpoint scan.
    """
    base = enumerate_Z(ensemble, model)
    raised = enumerate_Z(
        SemistripPathEnsemble(ensemble.N, ensemble.u, ensemble.v + 1,
                              ensemble.cutoff), model)
    if base.Z <= 0:
        raise EnsembleError("empty base ensemble")
    return raised.Z / base.Z, raised, base


# ---------------------------------------------------------------------------
# four-arc assembly check for the product factorisation
# ---------------------------------------------------------------------------

def _paths_by_floor_mask(N, start_y, end_y, cutoff, model, cap_top_left, cap_top_right):
    """Upper-semistrip paths grouped by their y = 0 footprint.

    Paths may not touch the left cap column (x=0, 0 <= y < cap_top_left) or
    the right cap column (x=N, 0 <= y < cap_top_right) except at their
    endpoints.  Returns a dict {bitmask over x of y=0 visits: total weight}.
    Python enumeration; intended for small N where the assembly check runs.
    """
    if model.synthetic:
        raise EnsembleError("four-arc check runs in mode none")
    beta = model.beta
    masks = {}
    target = (N, end_y)
    visited = {(0, start_y)}

    def dfs(x, y, depth, mask):
        if (x, y) == target and depth > 0:
            w = math.exp(-beta * depth)
            masks[mask] = masks.get(mask, 0.0) + w
            return
        if depth + abs(x - N) + abs(y - end_y) > cutoff:
            return
        for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            nx, ny = x + dx, y + dy
            if nx < 0 or nx > N or ny < 0:
                continue
            if (nx, ny) in visited:
                continue
            if (nx, ny) != target:
                if nx == 0 and ny < cap_top_left:
                    continue
                if nx == N and ny < cap_top_right:
                    continue
            nmask = mask | (1 << nx) if ny == 0 else mask
            visited.add((nx, ny))
            dfs(nx, ny, depth + 1, nmask)
            visited.discard((nx, ny))

    mask0 = 1 if start_y == 0 else 0
    dfs(0, start_y, 0, mask0)
    return masks


def four_arc_ratio(N, u1, u2, v1, v2, model: WeightModel, cutoff: int):
    """Z(four-arc loops) relative to the straight-cap product approximation.

    Loops are built from an upper strip arc (0,u1)->(N,v1), a lower strip arc
    (0,u2)->(N,v2) reflected into the lower half, and straight vertical caps
    joining the endpoints.  Legality = the assembled loop is self-avoiding.
    Returns (ratio, log_ratio) where ratio = Z_legal / Z_product <= 1.
    """
    if not (u1 > 0 > u2 and v1 > 0 > v2):
        raise EnsembleError("need u1, v1 > 0 > u2, v2")
    up = _paths_by_floor_mask(N, u1, v1, cutoff, model, u1, v1)
    lo = _paths_by_floor_mask(N, -u2, -v2, cutoff, model, -u2, -v2)
    z_up = sum(up.values())
    z_lo = sum(lo.values())
    if z_up == 0 or z_lo == 0:
        raise EnsembleError("empty arc ensemble")
    legal = 0.0
    for m1, w1 in sorted(up.items()):
        for m2, w2 in sorted(lo.items()):
            if m1 & m2 == 0:
                legal += w1 * w2
    ratio = legal / (z_up * z_lo)
    return ratio, math.log(ratio)


# ---------------------------------------------------------------------------
# exact sampling of x-monotone paths by DP + backward sampling
# ---------------------------------------------------------------------------

def monotone_weights(ensemble: SemistripPathEnsemble, model: WeightModel,
                     ycap: int | None = None):
    """Forward DP table over x-monotone paths with the length cutoff enforced.

    W[i, y, l] = total weight of monotone paths reaching column i at height y
    with l edges used.  Monotone = one vertical run per column, never stepping
    left; such paths are exactly the self-avoiding paths without west steps.
    """
    if model.synthetic:
        raise EnsembleError("directed sampling requires mode none")
    e = ensemble
    if ycap is None:
        ycap = max(e.u, e.v) + (e.cutoff - e.N - abs(e.u - e.v)) // 2 + 1
    w = math.exp(-model.beta)
    W = np.zeros((e.N + 1, ycap + 1, e.cutoff + 1))
    for y in range(ycap + 1):
        # vertical run at column 0 before the first right step
        if abs(y - e.u) <= e.cutoff:
            W[0, y, abs(y - e.u)] = w ** abs(y - e.u)
    for i in range(e.N):
        for y in range(ycap + 1):
            for l in range(e.cutoff):
                amp = W[i, y, l]
                if amp == 0.0:
                    continue
                for y2 in range(ycap + 1):
                    l2 = l + 1 + abs(y2 - y)
                    if l2 > e.cutoff:
                        continue
                    W[i + 1, y2, l2] += amp * w ** (1 + abs(y2 - y))
    return W


def sample_directed_path(ensemble: SemistripPathEnsemble, model: WeightModel,
                         seed, n_samples: int = 1):
    """Exact samples from the weight restricted to x-monotone paths.

    Returns a list of paths, each a list of (x, y) vertices (column heights
    joined by vertical runs).  Deterministic per seed.
    """
    e = ensemble
    W = monotone_weights(ensemble, model)
    ycap = W.shape[1] - 1
    final = W[e.N, e.v, :]
    total = final.sum()
    if total <= 0:
        raise EnsembleError("no admissible monotone path")
    rng = np.random.default_rng(seed)
    w1 = math.exp(-model.beta)
    out = []
    for _ in range(n_samples):
        l = int(rng.choice(e.cutoff + 1, p=final / total))
        heights = [0] * (e.N + 1)
        heights[e.N] = e.v
        y = e.v
        for i in range(e.N, 0, -1):
            probs = np.zeros(ycap + 1)
            for yp in range(ycap + 1):
                lp = l - 1 - abs(y - yp)
                if lp >= 0:
                    probs[yp] = W[i - 1, yp, lp] * w1 ** (1 + abs(y - yp))
            s = probs.sum()
            yp = int(rng.choice(ycap + 1, p=probs / s))
            l = l - 1 - abs(y - yp)
            y = yp
            heights[i - 1] = y
        verts = [(0, e.u)]
        step = 1 if heights[0] >= e.u else -1
        for yy in range(e.u + step, heights[0] + step, step):
            verts.append((0, yy))
        for i in range(e.N):
            y0, y1 = heights[i], heights[i + 1]
            verts.append((i + 1, y0))
            step = 1 if y1 >= y0 else -1
            for yy in range(y0 + step, y1 + step, step):
                verts.append((i + 1, yy))
        out.append(verts)
    return out


def monotone_length_distribution(ensemble, model):
    """Exact joint (mid-column height, total weight) law of monotone paths."""
    e = ensemble
    W = monotone_weights(ensemble, model)
    mid = e.N // 2
    ycap = W.shape[1] - 1
    w1 = math.exp(-model.beta)
    # weight of completions from (mid, y, l) to (N, v, <= cutoff)
    back = np.zeros((e.N + 1, ycap + 1, e.cutoff + 1))
    back[e.N, e.v, :] = 1.0
    for i in range(e.N - 1, mid - 1, -1):
        for y in range(ycap + 1):
            for l in range(e.cutoff + 1):
                acc = 0.0
                for y2 in range(ycap + 1):
                    l2 = l + 1 + abs(y2 - y)
                    if l2 <= e.cutoff:
                        acc += back[i + 1, y2, l2] * w1 ** (1 + abs(y2 - y))
                back[i, y, l] = acc
    dist = np.zeros(ycap + 1)
    for y in range(ycap + 1):
        dist[y] = float(np.dot(W[mid, y, :], back[mid, y, :]))
    total = dist.sum()
    return dist / total


def write_results_csv(path, rows):
    """Rows of (N, u, v, beta, cutoff, Z, truncation_bound, path_count)."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "u", "v", "beta", "cutoff", "Z",
                    "truncation_bound", "path_count"])
        for r in rows:
            w.writerow([r[0], r[1], r[2], repr(float(r[3])), r[4],
                        repr(float(r[5])), repr(float(r[6])), r[7]])
