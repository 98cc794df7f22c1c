"""Effective random walk built from irreducible path fragments.

A fragment is a self-avoiding path between two single-crossing abscissas:
it starts and ends with a horizontal edge, never revisits its start or end
column, and covers every interior column at least twice, so concatenating
fragments at their junction columns reproduces exactly the paths whose
vertical lines each meet them once.  With bare exponential weights the
fragment table induces a step law X = (theta, zeta), theta >= 1, and the
two-sided conditioned-path questions become first-passage (ballot) problems
for the walk of partial sums.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


class WalkError(ValueError):
    pass


@dataclass
class StepDistribution:
    """Probability table over steps (theta, zeta) with theta >= 1."""

    thetas: np.ndarray
    zetas: np.ndarray
    probs: np.ndarray
    name: str = "steps"

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=np.int64)
        self.zetas = np.asarray(self.zetas, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.thetas.min() < 1:
            raise WalkError("horizontal advances must be >= 1")
        total = self.probs.sum()
        if abs(total - 1.0) > 1e-12:
            raise WalkError(f"step law not normalised: sum = {total!r}")
        order = np.lexsort((self.zetas, self.thetas))
        self.thetas = self.thetas[order]
        self.zetas = self.zetas[order]
        self.probs = self.probs[order]

    def prob(self, theta, zeta) -> float:
        sel = (self.thetas == theta) & (self.zetas == zeta)
        return float(self.probs[sel].sum())

    @property
    def mean_theta(self) -> float:
        return float(np.dot(self.thetas, self.probs))

    @property
    def mean_zeta(self) -> float:
        return float(np.dot(self.zetas, self.probs))

    @property
    def var_zeta(self) -> float:
        m = self.mean_zeta
        return float(np.dot((self.zetas - m) ** 2, self.probs))

    @property
    def max_abs_zeta(self) -> int:
        return int(np.abs(self.zetas).max())

    def zeta_marginal(self):
        ks = np.unique(self.zetas)
        ps = np.array([self.probs[self.zetas == k].sum() for k in ks])
        return ks, ps

    def zeta_tail_rate(self):
        """Fitted c in P(zeta = k) <= A exp(-c |k|) (least squares over all k).

        Returns (c, A) with A raised so the bound actually holds pointwise.
        """
        ks, ps = self.zeta_marginal()
        sel = ps > 0
        if sel.sum() < 2:
            return math.inf, 1.0
        x = np.abs(ks[sel]).astype(float)
        y = np.log(ps[sel])
        slope = np.polyfit(x, y, 1)[0]
        c = -float(slope)
        a = float(np.max(ps[sel] * np.exp(c * np.abs(ks[sel]))))
        return c, a

    def is_degenerate(self) -> bool:
        return self.var_zeta == 0.0


def simple_steps() -> StepDistribution:
    """The +-1 unit walk: theta = 1, zeta = +-1 with probability 1/2."""
    return StepDistribution(np.array([1, 1]), np.array([1, -1]),
                            np.array([0.5, 0.5]), name="simple")


def parametric_steps(c: float, q: float, kmax: int = 60, tmax: int = 60,
                     name: str | None = None) -> StepDistribution:
    """P(theta = t, zeta = k) proportional to q^(t-1) exp(-c |k|).

    Truncated at |k| <= kmax, t <= tmax and renormalised; table entries below
    1e-15 of the total are dropped before renormalising (they are invisible
    at double precision but inflate every DP sweep).
    """
    if not (0 < q < 1):
        raise WalkError("need 0 < q < 1")
    if c <= 0:
        raise WalkError("need c > 0")
    ts = np.arange(1, tmax + 1)
    if math.isinf(c):
        ks = np.array([0])
    else:
        ks = np.arange(-kmax, kmax + 1)
    T, K = np.meshgrid(ts, ks, indexing="ij")
    w = q ** (T - 1).astype(float)
    if not math.isinf(c):
        w = w * np.exp(-c * np.abs(K))
    w = w.ravel()
    keep = w >= 1e-15 * w.sum()
    T, K, w = T.ravel()[keep], K.ravel()[keep], w[keep]
    w = w / w.sum()
    return StepDistribution(T, K, w, name=name or f"parametric(c={c:g},q={q:g})")


def degenerate_steps(q: float = 0.5) -> StepDistribution:
    """zeta identically zero; the walk never moves vertically."""
    ts = np.arange(1, 61)
    w = q ** (ts - 1).astype(float)
    return StepDistribution(ts, np.zeros_like(ts), w / w.sum(), name="degenerate")


# ---------------------------------------------------------------------------
# irreducible fragments
# ---------------------------------------------------------------------------

def enumerate_fragments(cutoff: int):
    """All irreducible fragments with at most ``cutoff`` edges.

    Yields (theta, zeta, length).  Fragments start at the origin with a
    rightward edge, end with a rightward edge, visit their first and last
    columns exactly once, and every column strictly between at least twice.
    """
    if cutoff > 12:
        raise WalkError("fragment cutoff capped at 12 edges")
    out = []
    # path state: list of vertices, visited set, per-column vertex counts
    visited = {(0, 0)}
    col_counts = {0: 1}

    def consider(x, y, length, came_horizontal):
        # accept the current endpoint as a fragment end if it qualifies:
        # start and end columns crossed once, interior columns at least twice
        if (came_horizontal and x >= 1 and col_counts.get(x, 0) == 1
                and col_counts.get(0, 0) == 1):
            ok = all(col_counts.get(c, 0) >= 2 for c in range(1, x))
            if ok:
                out.append((x, y, length))

    def dfs(x, y, length):
        consider(x, y, length, came_horizontal=True)
        if length == cutoff:
            return
        for dx, dy in ((1, 0), (0, 1), (0, -1), (-1, 0)):
            nx, ny = x + dx, y + dy
            if nx < 0 or (nx, ny) in visited:
                continue
            visited.add((nx, ny))
            col_counts[nx] = col_counts.get(nx, 0) + 1
            if dx != 0:
                dfs(nx, ny, length + 1)
            else:
                dfs_vertical(nx, ny, length + 1)
            col_counts[nx] -= 1
            visited.discard((nx, ny))

    def dfs_vertical(x, y, length):
        # arrived by a vertical edge: cannot terminate here
        if length == cutoff:
            return
        for dx, dy in ((1, 0), (0, 1), (0, -1), (-1, 0)):
            nx, ny = x + dx, y + dy
            if nx < 0 or (nx, ny) in visited:
                continue
            visited.add((nx, ny))
            col_counts[nx] = col_counts.get(nx, 0) + 1
            if dx != 0:
                dfs(nx, ny, length + 1)
            else:
                dfs_vertical(nx, ny, length + 1)
            col_counts[nx] -= 1
            visited.discard((nx, ny))

    # first edge is horizontal by construction
    visited.add((1, 0))
    col_counts[1] = 1
    dfs(1, 0, 1)
    return out


@dataclass
class StepBuildReport:
    mass: float
    tail_estimate: float
    flagged: bool
    per_length_mass: dict = field(default_factory=dict)


def build_steps_from_animals(beta: float, size_cutoff: int = 8):
    """Step law from bare irreducible fragments weighted exp(-beta * length).

    Returns (StepDistribution, StepBuildReport).  The report flags the law
    when the enumerated mass falls below 0.999 of the geometric-tail estimate
    of the cutoff-free total.
    """
    if size_cutoff > 10:
        raise WalkError("animal size cutoff capped at 10 edges")
    frags = enumerate_fragments(size_cutoff)
    # accumulate over |zeta| and split the mass evenly; the +k and -k fragment
    # sets mirror each other, so this keeps the reflection symmetry bit-exact
    half = {}
    per_len = {}
    for theta, zeta, length in frags:
        w = math.exp(-beta * length)
        half[(theta, abs(zeta))] = half.get((theta, abs(zeta)), 0.0) + w
        per_len[length] = per_len.get(length, 0.0) + w
    table = {}
    for (theta, k), w in half.items():
        if k == 0:
            table[(theta, 0)] = w
        else:
            table[(theta, k)] = w / 2.0
            table[(theta, -k)] = w / 2.0
    mass = sum(sorted(table.values()))
    # geometric tail estimate from the last two resolved length shells
    lengths = sorted(per_len)
    if len(lengths) >= 4:
        recent = per_len[lengths[-1]] + per_len[lengths[-2]]
        older = per_len[lengths[-3]] + per_len[lengths[-4]]
        rho = recent / older if older > 0 else 0.0
    else:
        rho = 0.0
    tail = recent * rho / (1.0 - rho) if 0.0 < rho < 1.0 else 0.0
    flagged = mass < 0.999 * (mass + tail)
    keys = sorted(table)
    steps = StepDistribution(
        np.array([k[0] for k in keys]),
        np.array([k[1] for k in keys]),
        np.array([table[k] / mass for k in keys]),
        name=f"animals(beta={beta:g},cutoff={size_cutoff})")
    return steps, StepBuildReport(mass, tail, flagged, per_len)


# ---------------------------------------------------------------------------
# ballot probabilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallotResult:
    probability: float
    method: str
    stderr: float = 0.0
    height_cap: int = 0
    cap_sensitivity: float = 0.0
    flagged: bool = False


def default_height_cap(N: int, u: int, v: int) -> int:
    return max(int(4 * math.sqrt(N)), u + 4, v + 4)


def ballot_rows(N: int, u: int, steps: StepDistribution, cap: int):
    """Arrival rows at the cap and at twice the cap, for sensitivity checks."""
    r1 = _kernels.ballot_dp_row(N, u, steps.thetas, steps.zetas, steps.probs, cap)
    r2 = _kernels.ballot_dp_row(N, u, steps.thetas, steps.zetas, steps.probs,
                                2 * cap)
    return r1, r2


def ballot_dp(N: int, u: int, v: int, steps: StepDistribution,
              height_cap: int | None = None) -> BallotResult:
    """P(walk from (0, u) arrives exactly at (N, v) staying at heights >= 1).

    Exact up to the height cap; the cap is doubled once to certify
    insensitivity and the result is flagged if the relative shift exceeds
    1e-10.
    """
    if u < 1 or v < 1:
        raise WalkError("endpoints must be >= 1 (strictly positive walk)")
    cap = height_cap if height_cap is not None else default_height_cap(N, u, v)
    if cap < max(u, v):
        raise WalkError("height cap below an endpoint")
    r1, r2 = ballot_rows(N, u, steps, cap)
    p1 = float(r1[v])
    p2 = float(r2[v])
    sens = abs(p2 - p1) / p2 if p2 > 0 else 0.0
    return BallotResult(p2, "dp", height_cap=cap,
                        cap_sensitivity=float(sens), flagged=sens > 1e-10)


def ballot_exact_simple(N: int, u: int, v: int):
    """Exact integer-arithmetic DP for the +-1 walk; returns a Fraction."""
    from fractions import Fraction

    cap = u + N + 1
    dp = [0] * (cap + 2)
    dp[u] = 1
    for _ in range(N):
        new = [0] * (cap + 2)
        for y in range(1, cap + 1):
            c = dp[y]
            if c:
                if y + 1 <= cap:
                    new[y + 1] += c
                if y - 1 >= 1:
                    new[y - 1] += c
        dp = new
    if v > cap:
        return Fraction(0)
    return Fraction(dp[v], 2 ** N)


def reflection_ballot(N: int, u: int, v: int):
    """Closed-form count for the +-1 walk staying >= 1, as a Fraction.

    Paths u -> v in N steps that touch 0 biject with paths -u -> v, so the
    surviving count is C(N, (N+v-u)/2) - C(N, (N+v+u)/2).
    """
    from fractions import Fraction

    if (N + v - u) % 2 != 0:
        return Fraction(0)
    k1 = (N + v - u) // 2
    k2 = (N + v + u) // 2
    c1 = math.comb(N, k1) if 0 <= k1 <= N else 0
    c2 = math.comb(N, k2) if 0 <= k2 <= N else 0
    return Fraction(c1 - c2, 2 ** N)


def ballot_mc(N: int, u: int, v: int, steps: StepDistribution, n_walks: int,
              seed, chunk: int = 4096) -> BallotResult:
    """Direct simulation of the arrival event; binomial standard error.

    Walk i consumes uniforms from the stream keyed by (seed, i), so results
    do not depend on chunking or thread count.
    """
    if u < 1 or v < 1:
        raise WalkError("endpoints must be >= 1")
    cdf = np.cumsum(steps.probs)
    cdf[-1] = 1.0
    hits = 0
    for start in range(0, n_walks, chunk):
        stop = min(start + chunk, n_walks)
        block = np.empty((stop - start, N))
        for i in range(start, stop):
            block[i - start] = np.random.default_rng((seed, i)).random(N)
        hits += int(_kernels.ballot_mc_hits(block, cdf, steps.thetas, steps.zetas,
                                            N, u, v))
    p = hits / n_walks
    se = math.sqrt(max(p * (1 - p), 1.0 / n_walks) / n_walks)
    return BallotResult(p, "mc", stderr=se)


# ---------------------------------------------------------------------------
# harmonic-like boundary functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HResult:
    value: float
    tail_bound: float
    flagged: bool
    horizon: int


def h_plus(x: int, steps: StepDistribution, horizon: int = 4000,
           cap: int | None = None) -> HResult:
    """x - E_x(height at first entry of (-inf, 0]), via absorbing DP.

    Computed as E[Z_horizon; still alive] (the two agree exactly for a
    mean-zero vertical step, by optional stopping).  The truncation error is
    bounded by the maximal overshoot times the surviving mass; for unit steps
    the overshoot is zero and the value is exact at any horizon.
    """
    if x < 1:
        raise WalkError("h is defined for x >= 1")
    if steps.is_degenerate():
        raise WalkError("degenerate vertical law never crosses zero")
    ks, ps = steps.zeta_marginal()
    sigma = math.sqrt(steps.var_zeta)
    if cap is None:
        cap = int(x + steps.max_abs_zeta + 10 * sigma * math.sqrt(horizon)) + 2
    d_h, absorbed_e, alive, spill = _kernels.absorb_dp(
        x, ks.astype(np.int64), ps, cap, horizon)
    overshoot = max(steps.max_abs_zeta - 1, 0)
    tail = overshoot * (alive + spill) + cap * spill
    return HResult(float(d_h), float(tail), tail > 1e-8, horizon)


def h_minus(x: int, steps: StepDistribution, horizon: int = 4000,
            cap: int | None = None) -> HResult:
    """Same functional for the reflected vertical walk."""
    ks, ps = steps.zeta_marginal()
    refl = StepDistribution(np.ones_like(ks), -ks, ps, name=steps.name + ":refl")
    return h_plus(x, refl, horizon=horizon, cap=cap)


# ---------------------------------------------------------------------------
# scaling and uniformity suites
# ---------------------------------------------------------------------------

def fit_loglog(ns, ps):
    """(slope, intercept, r_squared) of log p against log n."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(ps, dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


@dataclass
class ScalingReport:
    exponent: float
    intercept: float
    r_squared: float
    bulk_points: list  # (N, v_used, BallotResult)
    middle_ratio_spread: float
    middle_points: list
    diffusive_values: list
    diffusive_cauchy: float
    flagged: bool


def parity_adjust(v, u, N, steps):
    """Shift v by one if the (u, v, N) combination is parity-infeasible."""
    zs = steps.zetas
    if np.any(zs % 2 == 0) or np.any(steps.thetas != 1):
        return v
    if (N + v - u) % 2 != 0:
        return v + 1
    return v


def scaling_suite(steps: StepDistribution, u: int, v: int, n_list,
                  delta: float = 0.01) -> ScalingReport:
    """Bulk exponent fit plus middle-regime and diffusive-regime checks.

    Bulk: log-log slope of the arrival probability at fixed (u, v) across
    n_list.  Middle regime: v_N in [N^(1/2-delta), N^(1/2)]; the DP value is
    divided by h+(u) * v_N * exp(-v_N^2 / (2N)) * Var(zeta) * N^(-3/2) and
    the spread of that ratio is reported.  Diffusive regime: u = v = about
    sqrt(N)/2; sqrt(N) * probability should converge, reported via the last
    Cauchy difference.
    """
    n_list = sorted(n_list)
    if len(n_list) < 4:
        raise WalkError("need at least 4 sizes")
    if steps.is_degenerate():
        raise WalkError("degenerate law excluded from scaling fits")
    bulk = []
    for N in n_list:
        vv = parity_adjust(v, u, N, steps)
        r = ballot_dp(N, u, vv, steps)
        bulk.append((N, vv, r))
    slope, intercept, r2 = fit_loglog([b[0] for b in bulk],
                                      [b[2].probability for b in bulk])

    hp = h_plus(u, steps, horizon=2000).value
    var = steps.var_zeta
    middle = []
    for N in n_list:
        lo = max(u + 1, int(round(N ** (0.5 - delta))))
        hi = max(lo, int(math.floor(math.sqrt(N))))
        v_n = parity_adjust(hi, u, N, steps)
        r = ballot_dp(N, u, v_n, steps)
        pred = hp * v_n * math.exp(-v_n * v_n / (2.0 * N)) * var * N ** -1.5
        middle.append((N, v_n, r.probability, r.probability / pred))
    ratios = [m[3] for m in middle]
    spread = max(ratios) / min(ratios) - 1.0 if min(ratios) > 0 else math.inf

    diffusive = []
    for N in n_list:
        w = max(1, int(math.sqrt(N) / 2))
        w2 = parity_adjust(w, w, N, steps)
        r = ballot_dp(N, w, w2, steps)
        diffusive.append((N, math.sqrt(N) * r.probability))
    dv = [d[1] for d in diffusive]
    cauchy = abs(dv[-1] - dv[-2]) / dv[-1] if dv[-1] > 0 else math.inf

    return ScalingReport(slope, intercept, r2, bulk, spread, middle,
                         diffusive, cauchy, flagged=r2 < 0.99)


def endpoint_ratio_walk(N: int, u: int, v: int, steps: StepDistribution) -> float:
    """ballot(N, u, v+1) / ballot(N, u, v) from the DP (0 when v+1 unreachable)."""
    cap = default_height_cap(N, u, max(v + 1, u))
    row, _ = ballot_rows(N, u, steps, cap)
    if row[v] == 0.0:
        raise WalkError(f"base arrival ({N}, {u}->{v}) has probability zero")
    return float(row[v + 1] / row[v])


def uniformity_scan(steps: StepDistribution, n_list):
    """Max endpoint ratio over u, v in [1, sqrt(N)] per N, plus a trend slope.

    One DP row per (N, u) serves every v.  Returns (per_N list of
    (N, max_ratio), slope of max_ratio against log N).
    """
    per_n = []
    for N in n_list:
        top = int(math.floor(math.sqrt(N)))
        cap = default_height_cap(N, top, top + 1)
        best = 0.0
        for u in range(1, top + 1):
            row = _kernels.ballot_dp_row(N, u, steps.thetas, steps.zetas,
                                         steps.probs, cap)
            for v in range(1, top + 1):
                if row[v] > 0:
                    r = float(row[v + 1] / row[v])
                    if r > best:
                        best = r
        per_n.append((N, best))
    x = np.log([p[0] for p in per_n])
    y = np.array([p[1] for p in per_n])
    slope = float(np.polyfit(x, y, 1)[0])
    return per_n, slope
