"""Config-driven experiments tying the oracle, sampler, contour and walk
modules together.  Each runner writes fixed-schema CSV artifacts plus a
summary JSON with one verdict per asserted property; outputs are byte-stable
for a given (config, seed).

Directional verdicts (monotonicity, inequalities) are asserted; asymptotic
magnitudes are reported only, since the interesting regimes sit far beyond
desk scale.  Every experiment with an oracle-reachable small variant runs
that variant first and aborts on disagreement beyond three standard errors.
"""

import csv
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import walk as walk_mod
from .config import ConfigError, config_digest, require
from .contours import (ContourError, cut_points, exterior_contour_fast,
                       exterior_contour_of, exterior_loop_slice,
                       extract_contours, probe_interior_flags)
from .exact import brute_probability, transfer_probability
from .lattice import (FrozenSpec, Lattice, ModelParams, Segment,
                      SpinConfiguration, build_lattice, flip_delta, hamiltonian)
from .mc import MCError, Schedule, batch_means, resolve_threads, run_sampler


class OracleGateError(RuntimeError):
    """Raised when a small-instance oracle check disagrees with the sampler."""


@dataclass
class Verdict:
    prop: str
    passed: bool
    measured: float
    threshold: float


@dataclass
class ExperimentResult:
    experiment: str
    verdicts: list
    artifacts: list
    summary: dict = field(default_factory=dict)

    @property
    def all_passed(self):
        return all(v.passed for v in self.verdicts)


@dataclass
class DecayFit:
    rate: float
    rate_stderr: float
    intercept: float
    r_squared: float
    points: list  # (n, p, stderr, included)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_summary(out_dir, experiment, cfg, verdicts, artifacts, extra=None):
    summary = {
        "experiment": experiment,
        "config_digest": config_digest(cfg),
        "verdicts": [{"property": v.prop, "pass": bool(v.passed),
                      "measured": _jsonable(v.measured),
                      "threshold": _jsonable(v.threshold)} for v in verdicts],
        "artifacts": sorted(artifacts),
    }
    if extra:
        summary.update(_jsonable(extra))
    path = Path(out_dir) / "summary.json"
    with open(path, "w", newline="") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return summary


def fit_decay(ns, ps, ses):
    """OLS on log p with delta-method error propagation for the slope."""
    x = np.asarray(ns, dtype=float)
    y = np.log(np.asarray(ps, dtype=float))
    sy = np.asarray(ses, dtype=float) / np.asarray(ps, dtype=float)
    xb = x.mean()
    sxx = float(np.sum((x - xb) ** 2))
    slope = float(np.sum((x - xb) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xb)
    coeffs = (x - xb) / sxx
    slope_se = float(math.sqrt(np.sum((coeffs * sy) ** 2)))
    yhat = intercept + slope * x
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, slope_se, intercept, r2


# ---------------------------------------------------------------------------
# chain driving with per-sample collectors
# ---------------------------------------------------------------------------

def _collect_worker(payload):
    coll, lattice, params, schedule, seed_key, method = payload
    run_sampler(lattice, params, schedule, seed_key, coll.observe, method)
    return coll


def _run_collected(lattice, params, schedule, seed, replicas, threads,
                   make_collector, method="heatbath"):
    """One collector per replica, merged in replica order.

    Replicas fan out to worker processes (threads would convoy on the GIL
    between the many short kernel calls); results merge deterministically.
    """
    payloads = [(make_collector(), lattice, params, schedule, (seed, r), method)
                for r in range(replicas)]
    n_workers = resolve_threads(threads, replicas)
    if n_workers > 1 and replicas > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
            colls = list(pool.map(_collect_worker, payloads))
    else:
        colls = [_collect_worker(p) for p in payloads]
    head = colls[0]
    for c in colls[1:]:
        head.merge(c)
    return head


class _BatchAccumulator:
    """Batch sums for a vector of indicators, 16 batches per replica."""

    def __init__(self, n_series, n_samples, n_batches=16):
        self.n_samples = n_samples
        self.n_batches = n_batches
        self.sums = np.zeros((n_batches, n_series))
        self.sizes = np.zeros(n_batches, dtype=np.int64)
        self.k = 0
        self.batches = [self.sums]
        self.all_sizes = [self.sizes]

    def add(self, values):
        b = self.k * self.n_batches // self.n_samples
        self.sums[b] += values
        self.sizes[b] += 1
        self.k += 1

    def merge(self, other):
        self.batches.extend(other.batches)
        self.all_sizes.extend(other.all_sizes)

    def estimates(self):
        sums = np.concatenate(self.batches, axis=0)
        sizes = np.concatenate(self.all_sizes)
        means = sums / sizes[:, None]
        b = sizes.size
        mean = sums.sum(axis=0) / sizes.sum()
        se = means.std(axis=0, ddof=1) / math.sqrt(b)
        total = int(sizes.sum())
        return mean, se, total, b


def _wrap(lattice, grid):
    cfg = SpinConfiguration.__new__(SpinConfiguration)
    cfg.lattice = lattice
    cfg.grid = grid
    return cfg


# ---------------------------------------------------------------------------
# one-sided decay
# ---------------------------------------------------------------------------

class _DecayCollector:
    def __init__(self, lattice, segment, probes, n_samples):
        self.lattice = lattice
        self.segment = segment
        self.probes = probes
        self.idx = [lattice.index(p) for p in probes]
        self.acc = _BatchAccumulator(2 * len(probes), n_samples)
        self.anomalies = 0

    def observe(self, grid, sweep):
        k = len(self.probes)
        vals = np.zeros(2 * k)
        for i, (iy, ix) in enumerate(self.idx):
            vals[i] = 1.0 if grid[iy, ix] > 0 else 0.0
        try:
            vals[k:] = probe_interior_flags(self.lattice, grid, self.segment,
                                            self.probes)
        except ContourError:
            self.anomalies += 1
        self.acc.add(vals)

    def merge(self, other):
        self.acc.merge(other.acc)
        self.anomalies += other.anomalies


def _decay_gate(beta, method, threads):
    """Tiny instance cross-check: M=2, unit segment, brute vs sampler."""
    seg = Segment(-1, 0, 0, 1)
    lat = build_lattice(2, FrozenSpec(-1, (seg,)))
    params = ModelParams(beta)
    exact = brute_probability(lat, params, [((1, 0), 1)]).probability
    sched = Schedule(burn_in=500, sweeps=8000, thin=4)
    probe = [(1, 0)]
    coll = _run_collected(lat, params, sched, 20240, 2, threads,
                          lambda: _DecayCollector(lat, seg, probe, sched.n_samples),
                          method)
    mean, se, _, _ = coll.acc.estimates()
    if abs(mean[0] - exact) > 3 * max(se[0], 1e-6):
        raise OracleGateError(
            f"decay gate: sampler {mean[0]!r} vs exact {exact!r} "
            f"(stderr {se[0]!r})")
    return exact, float(mean[0]), float(se[0])


def run_one_sided_decay(cfg, out_dir, threads=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    m = require(cfg, "m", int)
    seg_lengths = require(cfg, "segment_lengths", list)
    probes = require(cfg, "probes", list)
    beta = require(cfg, "beta", float)
    seed = require(cfg, "seed", int)
    sched = Schedule(require(cfg, "burn_in", int), require(cfg, "sweeps", int),
                     require(cfg, "thin", int, 1))
    replicas = require(cfg, "replicas", int, 2)
    m_check = require(cfg, "m_check", int, 0)
    check_sweeps = require(cfg, "check_sweeps", int, max(sched.sweeps // 8, 1600))
    method = require(cfg, "method", str, "heatbath")
    for n in probes:
        for N in seg_lengths:
            if n + N >= m:
                raise ConfigError(f"probe {n} + segment {N} must stay inside m={m}")
    params = ModelParams(beta)
    gate = _decay_gate(beta, method, threads)

    point_rows = []
    fit_rows = []
    fits = {}
    probs_by_m = {}

    def run_box(m_box, schedule):
        results = {}
        for N in seg_lengths:
            seg = Segment(-N, 0, 0, 1)
            lat = build_lattice(m_box, FrozenSpec(-1, (seg,)))
            probe_sites = [(n, 0) for n in probes]
            coll = _run_collected(
                lat, params, schedule, seed + m_box + 1000 * N, replicas, threads,
                lambda lat=lat, seg=seg, ps=probe_sites:
                    _DecayCollector(lat, seg, ps, schedule.n_samples),
                method)
            mean, se, total, nb = coll.acc.estimates()
            results[N] = (mean, se, total, coll.anomalies)
        return results

    main_res = run_box(m, sched)
    for N in seg_lengths:
        mean, se, total, anomalies = main_res[N]
        k = len(probes)
        for series, off in (("spin", 0), ("contour", k)):
            pts, ps, ses = [], [], []
            for i, n in enumerate(probes):
                p = float(mean[off + i])
                s = float(se[off + i])
                included = p > 0 and s <= 0.2 * p
                point_rows.append([m, N, beta, series, n, p, s, total, int(included)])
                if included:
                    pts.append(n)
                    ps.append(p)
                    ses.append(s)
            if len(pts) >= 2:
                rate, rse, icpt, r2 = fit_decay(pts, ps, ses)
                fits[(N, series)] = DecayFit(rate, rse, icpt, r2,
                                             list(zip(pts, ps, ses)))
                fit_rows.append([m, N, beta, series, rate, rse, icpt, r2, len(pts)])
            else:
                fits[(N, series)] = None
                fit_rows.append([m, N, beta, series, math.nan, math.nan,
                                 math.nan, math.nan, len(pts)])

    # the contour-interior series carries the decay verdicts: it decays
    # cleanly to zero, while the spin series flattens onto the bulk
    # plus-probability of the finite minus box and is reported only
    verdicts = []
    for N in seg_lengths:
        f = fits.get((N, "contour"))
        tag = f"rate_negative[N={N}]"
        if f is None:
            verdicts.append(Verdict(tag, False, math.nan, 0.0))
            verdicts.append(Verdict(f"fit_r2[N={N}]", False, math.nan, 0.95))
            continue
        verdicts.append(Verdict(tag, f.rate < 0, f.rate, 0.0))
        verdicts.append(Verdict(f"fit_r2[N={N}]", f.r_squared >= 0.95,
                                f.r_squared, 0.95))
    if len(seg_lengths) >= 2:
        n0, n1 = seg_lengths[0], seg_lengths[1]
        f0, f1 = fits.get((n0, "contour")), fits.get((n1, "contour"))
        if f0 and f1 and f0.rate < 0:
            spread = abs(f0.rate - f1.rate) / abs(f0.rate)
            verdicts.append(Verdict("rate_uniform_in_N", spread <= 0.30,
                                    spread, 0.30))
        else:
            verdicts.append(Verdict("rate_uniform_in_N", False, math.nan, 0.30))

    if m_check:
        check_sched = Schedule(sched.burn_in, check_sweeps, sched.thin)
        check_res = run_box(m_check, check_sched)
        worst = 0.0
        for N in seg_lengths:
            mean0 = main_res[N][0]
            mean1 = check_res[N][0]
            for i, n in enumerate(probes):
                d = abs(float(mean0[i]) - float(mean1[i]))
                worst = max(worst, d)
                probs_by_m[(N, n)] = (float(mean0[i]), float(mean1[i]))
        verdicts.append(Verdict("uniform_in_M", worst <= 0.02, worst, 0.02))

    write_csv(out_dir / "decay_points.csv",
              ["m", "segment_length", "beta", "series", "n", "p", "stderr",
               "n_samples", "included"], point_rows)
    write_csv(out_dir / "decay_fits.csv",
              ["m", "segment_length", "beta", "series", "rate", "rate_stderr",
               "intercept", "r_squared", "points_used"], fit_rows)
    artifacts = ["decay_points.csv", "decay_fits.csv", "summary.json"]
    write_summary(out_dir, "one_sided_decay", cfg, verdicts, artifacts,
                  extra={"oracle_gate": {"exact": gate[0], "mc": gate[1],
                                         "stderr": gate[2]},
                         "m_comparison": {f"N={k[0]},n={k[1]}": v
                                          for k, v in sorted(probs_by_m.items())}})
    return ExperimentResult("one_sided_decay", verdicts, artifacts)


# ---------------------------------------------------------------------------
# two-sided wetting
# ---------------------------------------------------------------------------

class _WettingCollector:
    def __init__(self, lattice, seg_left, seg_right, n_samples):
        self.lattice = lattice
        self.seg_left = seg_left
        self.seg_right = seg_right
        self.origin = lattice.index((0, 0))
        self.acc = _BatchAccumulator(2, n_samples)
        self.anomalies = 0

    def observe(self, grid, sweep):
        vals = np.zeros(2)
        iy, ix = self.origin
        vals[0] = 1.0 if grid[iy, ix] > 0 else 0.0
        try:
            _, _, lo_l, hi_l = exterior_loop_slice(self.lattice, grid,
                                                   self.seg_left)
            _, _, lo_r, hi_r = exterior_loop_slice(self.lattice, grid,
                                                   self.seg_right)
            vals[1] = 1.0 if (lo_l, hi_l) == (lo_r, hi_r) else 0.0
        except ContourError:
            self.anomalies += 1
        self.acc.add(vals)

    def merge(self, other):
        self.acc.merge(other.acc)
        self.anomalies += other.anomalies


def _wetting_exact_gate(n, seg_lengths, betas, half_width=2):
    """Strip transfer check: two-sided conditioning beats one-sided, exactly."""
    rows = []
    for beta in betas:
        params = ModelParams(beta)
        for N in seg_lengths:
            take = Lattice(-(N + 3), N + 3, -half_width - 1, half_width + 1,
                           FrozenSpec(-1, (Segment(-N, -n, 0, 1),
                                           Segment(n, N, 0, 1))))
            p_two = transfer_probability(take, params, [((0, 0), 1)]).probability
            one = Lattice(-(N + 3), N + 3, -half_width - 1, half_width + 1,
                          FrozenSpec(-1, (Segment(-N, -n, 0, 1),)))
            p_one = transfer_probability(one, params, [((0, 0), 1)]).probability
            rows.append([beta, N, p_one, p_two])
            if p_two < p_one - 1e-12:
                raise OracleGateError(
                    f"wetting gate: two-sided {p_two!r} < one-sided {p_one!r} "
                    f"at beta={beta}, N={N}")
    return rows


def run_two_sided_wetting(cfg, out_dir, threads=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    m = require(cfg, "m", int)
    n = require(cfg, "n", int)
    seg_lengths = require(cfg, "segment_lengths", list)
    beta = require(cfg, "beta", float)
    seed = require(cfg, "seed", int)
    sched = Schedule(require(cfg, "burn_in", int), require(cfg, "sweeps", int),
                     require(cfg, "thin", int, 1))
    replicas = require(cfg, "replicas", int, 2)
    method = require(cfg, "method", str, "heatbath")
    if n < 1:
        raise ConfigError("gap half-width n must be >= 1")
    for N in seg_lengths:
        if N < n or N >= m:
            raise ConfigError(f"segment length {N} must satisfy n <= N < m")
    params = ModelParams(beta)
    gate_rows = _wetting_exact_gate(n, [N for N in seg_lengths if N <= 8] or
                                    [min(seg_lengths)], [beta])

    rows = []
    series = []
    for N in seg_lengths:
        segs = (Segment(-N, -n, 0, 1), Segment(n, N, 0, 1))
        lat = build_lattice(m, FrozenSpec(-1, segs))
        coll = _run_collected(
            lat, params, sched, seed + 1000 * N, replicas, threads,
            lambda lat=lat, s=segs, ns=sched.n_samples:
                _WettingCollector(lat, s[0], s[1], ns),
            method)
        mean, se, total, _ = coll.acc.estimates()
        # matching one-sided run: left segment only
        lat1 = build_lattice(m, FrozenSpec(-1, (segs[0],)))
        seg1 = segs[0]
        coll1 = _run_collected(
            lat1, params, sched, seed + 1000 * N + 7, replicas, threads,
            lambda lat=lat1, s=seg1, ns=sched.n_samples:
                _DecayCollector(lat, s, [(0, 0)], ns),
            method)
        mean1, se1, _, _ = coll1.acc.estimates()
        rows.append([m, n, N, beta, float(mean[0]), float(se[0]),
                     float(mean[1]), float(se[1]), float(mean1[0]),
                     float(se1[0]), total])
        series.append((N, float(mean[0]), float(se[0]), float(mean[1]),
                       float(se[1]), float(mean1[0]), float(se1[0])))

    verdicts = []
    for N, p2, s2, frac, sf, p1, s1 in series:
        slack = 3 * math.sqrt(s2 ** 2 + s1 ** 2)
        verdicts.append(Verdict(f"two_sided_ge_one_sided[N={N}]",
                                p2 >= p1 - slack, p2 - p1, -slack))
    for a, b in zip(series, series[1:]):
        slack = 3 * math.sqrt(a[2] ** 2 + b[2] ** 2)
        verdicts.append(Verdict(f"p_origin_nondecreasing[{a[0]}->{b[0]}]",
                                b[1] >= a[1] - slack, b[1] - a[1], -slack))
        slack_f = 3 * math.sqrt(a[4] ** 2 + b[4] ** 2)
        verdicts.append(Verdict(f"single_contour_increasing[{a[0]}->{b[0]}]",
                                b[3] >= a[3] - slack_f, b[3] - a[3], -slack_f))

    write_csv(out_dir / "wetting_points.csv",
              ["m", "n", "segment_length", "beta", "p_origin", "stderr",
               "single_contour_fraction", "stderr_fraction",
               "p_origin_one_sided", "stderr_one_sided", "n_samples"], rows)
    write_csv(out_dir / "wetting_gate.csv",
              ["beta", "segment_length", "p_one_sided_exact",
               "p_two_sided_exact"], gate_rows)
    artifacts = ["wetting_points.csv", "wetting_gate.csv", "summary.json"]
    write_summary(out_dir, "two_sided_wetting", cfg, verdicts, artifacts)
    return ExperimentResult("two_sided_wetting", verdicts, artifacts)


# ---------------------------------------------------------------------------
# cut-point height localisation
# ---------------------------------------------------------------------------

class _TipHeightCollector:
    def __init__(self, lattice, segment, n_samples, max_h):
        self.lattice = lattice
        self.segment = segment
        self.max_h = max_h
        self.counts = np.zeros(max_h + 2, dtype=np.int64)
        self.samples = 0
        self.anomalies = 0

    def observe(self, grid, sweep):
        self.samples += 1
        try:
            ext = exterior_contour_fast(self.lattice, grid, self.segment)
            cp = cut_points(ext, self.segment)
            h = cp.right_tip_height
        except ContourError:
            self.anomalies += 1
            return
        if 1 <= h <= self.max_h:
            self.counts[h] += 1
        else:
            self.counts[self.max_h + 1] += 1  # out of histogram range / below axis

    def merge(self, other):
        self.counts += other.counts
        self.samples += other.samples
        self.anomalies += other.anomalies


def tip_height_distribution_smallbox(m, N, beta, max_flips=3):
    """Weighted low-energy enumeration of the upper-right cut height.

    Enumerates configurations within ``max_flips`` spin flips of the ground
    state; adequate deep in the ordered phase where further shells carry
    exponentially negligible weight.
    """
    from itertools import combinations

    seg = Segment(-N, 0, 0, 1)
    lat = build_lattice(m, FrozenSpec(-1, (seg,)))
    base = lat.cold_config()
    h0 = hamiltonian(base)
    free = lat.free_sites
    weights = {}
    total = 0.0
    for k in range(0, max_flips + 1):
        for sites in combinations(free, k):
            grid = base.grid.copy()
            for s in sites:
                iy, ix = lat.index(s)
                grid[iy, ix] = -grid[iy, ix]
            cfgx = _wrap(lat, grid)
            h = hamiltonian(cfgx)
            w = math.exp(-beta * (h - h0))
            contours = extract_contours(cfgx)
            ext = exterior_contour_of(contours, seg)
            cp = cut_points(ext, seg)
            hh = cp.right_tip_height
            weights[hh] = weights.get(hh, 0.0) + w
            total += w
    return {h: w / total for h, w in sorted(weights.items())}


def _cut_height_gate(beta, method, threads):
    """Small-box MC tip-height mass against the weighted enumeration."""
    dist = tip_height_distribution_smallbox(4, 2, beta, max_flips=3)
    seg = Segment(-2, 0, 0, 1)
    lat = build_lattice(4, FrozenSpec(-1, (seg,)))
    sched = Schedule(burn_in=500, sweeps=6000, thin=3)
    coll = _run_collected(lat, ModelParams(beta), sched, 777, 2, threads,
                          lambda: _TipHeightCollector(lat, seg, sched.n_samples, 6),
                          method)
    n = coll.counts.sum()
    p1 = coll.counts[1] / n
    se = math.sqrt(max(p1 * (1 - p1), 1.0 / n) / n)
    if abs(p1 - dist.get(1, 0.0)) > 3 * se + 0.01:
        raise OracleGateError(
            f"cut-height gate: MC mass at height 1 = {p1!r}, "
            f"enumeration = {dist.get(1, 0.0)!r}")
    return dist.get(1, 0.0), float(p1), float(se)


def run_cut_height(cfg, out_dir, threads=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    m = require(cfg, "m", int)
    N = require(cfg, "segment_length", int)
    betas = require(cfg, "betas", list)
    seed = require(cfg, "seed", int)
    sched = Schedule(require(cfg, "burn_in", int), require(cfg, "sweeps", int),
                     require(cfg, "thin", int, 1))
    replicas = require(cfg, "replicas", int, 2)
    method = require(cfg, "method", str, "heatbath")
    min_bucket = require(cfg, "min_bucket", int, 100)
    max_h = require(cfg, "max_h", int, 8)
    if N >= m:
        raise ConfigError("segment must fit inside the box")
    betas = [float(b) for b in betas]
    # gate runs at beta 1.5 regardless of the scan grid: deep enough that the
    # 3-flip enumeration is effectively exact, and it validates the machinery
    gate = _cut_height_gate(1.5, method, threads)

    hist_rows = []
    ratio_rows = []
    fitted = {}
    per_h_ratios = {}
    warnings = []
    for beta in betas:
        params = ModelParams(beta)
        seg = Segment(-N, 0, 0, 1)
        lat = build_lattice(m, FrozenSpec(-1, (seg,)))
        coll = _run_collected(
            lat, params, sched, seed + int(beta * 1000), replicas, threads,
            lambda lat=lat, seg=seg: _TipHeightCollector(lat, seg,
                                                         sched.n_samples, max_h),
            method)
        counts = coll.counts
        n = int(counts.sum())
        asserted = beta >= 0.5
        if not asserted:
            warnings.append(f"beta={beta:g} below the ordered regime; "
                            "histogram reported without assertions")
        for h in range(1, max_h + 1):
            hist_rows.append([m, N, beta, h, int(counts[h]),
                              counts[h] / n if n else 0.0])
        included_h = [h for h in range(1, max_h + 1) if counts[h] >= min_bucket]
        ratios = {}
        for h in included_h:
            if h + 1 in included_h:
                ratios[h] = counts[h + 1] / counts[h]
                ratio_rows.append([beta, h, ratios[h], int(counts[h]),
                                   int(counts[h + 1]), 1])
        per_h_ratios[beta] = ratios
        # geometric fit: weighted LS of log counts against h
        if len(included_h) >= 2:
            hs = np.array(included_h, dtype=float)
            ys = np.log(counts[included_h].astype(float))
            w = counts[included_h].astype(float)
            wm = np.average(hs, weights=w)
            slope = float(np.sum(w * (hs - wm) * ys) / np.sum(w * (hs - wm) ** 2))
            fitted[beta] = math.exp(slope)
        else:
            fitted[beta] = math.nan

    verdicts = []
    b0 = betas[0]
    if b0 >= 0.5:
        for h in (1, 2, 3):
            r = per_h_ratios[b0].get(h)
            if r is None:
                verdicts.append(Verdict(f"ratio_below_one[h={h},beta={b0:g}]",
                                        False, math.nan, 1.0))
            else:
                verdicts.append(Verdict(f"ratio_below_one[h={h},beta={b0:g}]",
                                        r < 1.0, r, 1.0))
    for a, b in zip(betas, betas[1:]):
        if a >= 0.5 and b >= 0.5:
            fa, fb = fitted[a], fitted[b]
            ok = (not math.isnan(fa)) and (not math.isnan(fb)) and fb < fa
            verdicts.append(Verdict(f"fitted_ratio_decreasing[{a:g}->{b:g}]",
                                    ok, fb - fa if ok or True else math.nan, 0.0))

    write_csv(out_dir / "cut_height_hist.csv",
              ["m", "segment_length", "beta", "height", "count", "frequency"],
              hist_rows)
    write_csv(out_dir / "cut_height_ratios.csv",
              ["beta", "h", "ratio", "count_h", "count_h_plus_1", "included"],
              ratio_rows)
    artifacts = ["cut_height_hist.csv", "cut_height_ratios.csv", "summary.json"]
    write_summary(out_dir, "cut_height", cfg, verdicts, artifacts,
                  extra={"fitted_ratio": {f"{b:g}": fitted[b] for b in betas},
                         "warnings": warnings,
                         "oracle_gate": {"enumeration": gate[0], "mc": gate[1],
                                         "stderr": gate[2]}})
    return ExperimentResult("cut_height", verdicts, artifacts)


# ---------------------------------------------------------------------------
# walk suite
# ---------------------------------------------------------------------------

def run_walk_suite(cfg, out_dir, threads=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_list = require(cfg, "n_list", list, [64, 128, 256, 512])
    u = require(cfg, "u", int, 1)
    v = require(cfg, "v", int, 1)
    animal_beta = require(cfg, "animal_beta", float, 2.0)
    animal_cutoff = require(cfg, "animal_cutoff", int, 8)
    animal_n_list = require(cfg, "animal_n_list", list, [64, 128, 256, 512])
    par_c = require(cfg, "parametric_c", float, math.log(2.0))
    par_q = require(cfg, "parametric_q", float, 0.5)
    uniform_c = require(cfg, "uniform_c", float, 0.5)
    uniform_q = require(cfg, "uniform_q", float, 0.5)
    uniform_n_list = require(cfg, "uniform_n_list", list, [16, 32, 64, 128, 256])
    seed = require(cfg, "seed", int, 1)
    mc_walks = require(cfg, "mc_walks", int, 20000)

    laws = {
        "simple": walk_mod.simple_steps(),
        "animal": walk_mod.build_steps_from_animals(animal_beta, animal_cutoff)[0],
        "parametric": walk_mod.parametric_steps(par_c, par_q),
    }
    verdicts = []
    artifacts = ["summary.json"]
    extra = {}

    for name, steps in laws.items():
        rows = []
        nl = animal_n_list if name == "animal" else n_list
        report = walk_mod.scaling_suite(steps, u, v, nl)
        tol = 0.2 if name == "animal" else 0.15
        verdicts.append(Verdict(f"exponent[{name}]",
                                abs(report.exponent + 1.5) <= tol,
                                report.exponent, -1.5))
        verdicts.append(Verdict(f"fit_r2[{name}]", report.r_squared >= 0.99,
                                report.r_squared, 0.99))
        if name == "simple":
            verdicts.append(Verdict("middle_regime_spread[simple]",
                                    report.middle_ratio_spread <= 0.25,
                                    report.middle_ratio_spread, 0.25))
            # exact agreement with the reflection-principle count
            worst = 0.0
            for N, vv, r in report.bulk_points:
                exact = float(walk_mod.reflection_ballot(N, u, vv))
                worst = max(worst, abs(r.probability - exact) / exact)
            verdicts.append(Verdict("reflection_agreement[simple]",
                                    worst <= 1e-9, worst, 1e-9))
        for N, vv, r in report.bulk_points:
            rows.append([N, u, vv, "dp", r.probability, 0.0, r.height_cap,
                         r.cap_sensitivity])
        # one MC cross-check per law at the smallest size
        N0 = nl[0]
        v0 = walk_mod.parity_adjust(v, u, N0, steps)
        dp = walk_mod.ballot_dp(N0, u, v0, steps)
        mc = walk_mod.ballot_mc(N0, u, v0, steps, mc_walks, seed)
        rows.append([N0, u, v0, "mc", mc.probability, mc.stderr, 0, 0.0])
        verdicts.append(Verdict(f"mc_dp_agreement[{name}]",
                                abs(mc.probability - dp.probability)
                                <= 3 * mc.stderr,
                                mc.probability - dp.probability,
                                3 * mc.stderr))
        fname = f"walk_{name}.csv"
        write_csv(out_dir / fname,
                  ["N", "u", "v", "method", "probability", "stderr",
                   "height_cap", "cap_sensitivity"], rows)
        artifacts.append(fname)
        extra[f"scaling_{name}"] = {
            "exponent": report.exponent,
            "r_squared": report.r_squared,
            "middle_ratio_spread": report.middle_ratio_spread,
            "diffusive_cauchy": report.diffusive_cauchy,
        }

    # endpoint-ratio uniformity: the designated diffusive law carries the
    # two-sided flatness assertion; the sharply localised animal law is still
    # relaxing towards its limit on this window (from above), so it carries
    # the one-sided no-upward-trend form plus the bounded-by-N=16 check
    uniform_law = walk_mod.parametric_steps(uniform_c, uniform_q)
    scans = (("uniform", uniform_law, True), ("animal", laws["animal"], False))
    for name, law, two_sided in scans:
        per_n, slope = walk_mod.uniformity_scan(law, uniform_n_list)
        first_max = per_n[0][1]
        overall = max(r for _, r in per_n)
        ok = abs(slope) <= 0.02 if two_sided else slope <= 0.02
        verdicts.append(Verdict(f"endpoint_ratio_slope[{name}]", ok, slope, 0.02))
        verdicts.append(Verdict(f"endpoint_ratio_bounded[{name}]",
                                overall <= 1.1 * first_max,
                                overall / first_max, 1.1))
        extra[f"uniformity_{name}"] = {"per_N": per_n, "slope": slope}

    # harmonic-function checks
    unit = walk_mod.simple_steps()
    hvals = [walk_mod.h_plus(x, unit, horizon=600) for x in (1, 3, 7)]
    worst = max(abs(h.value - x) for h, x in zip(hvals, (1, 3, 7)))
    verdicts.append(Verdict("h_unit_identity", worst <= 1e-9, worst, 1e-9))
    par = laws["parametric"]
    hs = [walk_mod.h_plus(x, par, horizon=400).value for x in range(1, 11)]
    mono = all(b >= a - 1e-12 for a, b in zip(hs, hs[1:]))
    verdicts.append(Verdict("h_monotone[parametric]", mono,
                            min(b - a for a, b in zip(hs, hs[1:])), 0.0))
    hm = [walk_mod.h_minus(x, par, horizon=400).value for x in range(1, 11)]
    sym = max(abs(a - b) for a, b in zip(hs, hm))
    verdicts.append(Verdict("h_reflection_symmetry[parametric]", sym <= 1e-9,
                            sym, 1e-9))

    # degenerate law: reported, excluded from pass/fail
    degen = walk_mod.degenerate_steps()
    p_deg = walk_mod.ballot_dp(64, 1, 1, degen)
    extra["degenerate"] = {"p(N=64,1->1)": p_deg.probability,
                           "endpoint_ratio": walk_mod.endpoint_ratio_walk(
                               64, 1, 1, degen)}

    write_summary(out_dir, "walk_suite", cfg, verdicts, artifacts, extra=extra)
    return ExperimentResult("walk_suite", verdicts, artifacts)


RUNNERS = {
    "one_sided_decay": run_one_sided_decay,
    "two_sided_wetting": run_two_sided_wetting,
    "cut_height": run_cut_height,
    "walk_suite": run_walk_suite,
}


def run_experiment(cfg, out_dir, threads=None):
    name = require(cfg, "experiment", str)
    if name not in RUNNERS:
        raise ConfigError(f"unknown experiment {name!r} "
                          f"(choose from {sorted(RUNNERS)})")
    return RUNNERS[name](cfg, out_dir, threads=threads)
