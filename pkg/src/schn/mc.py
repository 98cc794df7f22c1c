"""Seeded single-spin-flip Monte Carlo for conditioned boxes.

Chains start cold (everything at the ring value except the frozen segments),
sweep free sites in row-major order, and draw one uniform per site per sweep
from a numpy PCG64 generator, so a (seed, replica) pair fixes the run bit for
bit on both kernel backends.  Replica r uses the stream keyed by (seed, r);
replicas are merged by sample-count-weighted average in replica order, so
results do not depend on the thread count.
"""

import math
import multiprocessing
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import Lattice, LatticeError, ModelParams, SpinConfiguration

DEBUG_FROZEN = os.environ.get("SCHN_DEBUG", "") == "1"

RASTER_MAGIC = b"SCHN"
RASTER_VERSION = 1


class MCError(ValueError):
    pass


@dataclass
class Schedule:
    burn_in: int
    sweeps: int
    thin: int = 1

    def __post_init__(self):
        if self.burn_in < 1 or self.sweeps < 1 or self.thin < 1:
            raise MCError("burn_in, sweeps >= 1 and thin >= 1 required")

    @property
    def n_samples(self):
        return self.sweeps // self.thin


class ChainState:
    """Owned by a single worker; holds the grid, the rng and a sweep counter."""

    def __init__(self, lattice: Lattice, seed_key):
        self.lattice = lattice
        self.config = lattice.cold_config()
        self.rng = np.random.default_rng(seed_key)
        self.sweeps_done = 0


def _heatbath_table(beta):
    h = np.arange(-4, 5, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-2.0 * beta * h))


def _metropolis_table(beta):
    dh = np.arange(-8, 9, dtype=np.float64)
    return np.minimum(1.0, np.exp(-beta * dh))


def heatbath_sweep(state: ChainState, params: ModelParams):
    """One heat-bath pass; each free site is redrawn from its conditional law."""
    lat = state.lattice
    u = state.rng.random(lat.n_free)
    _kernels.heatbath_sweep(state.config.grid, lat.free_iy, lat.free_ix,
                            _heatbath_table(params.beta), u)
    state.sweeps_done += 1
    if DEBUG_FROZEN:
        _assert_frozen(state)
    return state


def metropolis_sweep(state: ChainState, params: ModelParams):
    """One Metropolis pass with acceptance min(1, exp(-beta dH))."""
    lat = state.lattice
    u = state.rng.random(lat.n_free)
    _kernels.metropolis_sweep(state.config.grid, lat.free_iy, lat.free_ix,
                              _metropolis_table(params.beta), u)
    state.sweeps_done += 1
    if DEBUG_FROZEN:
        _assert_frozen(state)
    return state


def _assert_frozen(state):
    lat = state.lattice
    fm = lat.frozen_mask
    if not (state.config.grid[fm] == lat.frozen_values[fm]).all():
        raise AssertionError("frozen site changed during a sweep")


_SWEEPS = {"heatbath": heatbath_sweep, "metropolis": metropolis_sweep}


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

class SitePlus:
    """Indicator of {sigma_site = +1}."""

    def __init__(self, site):
        self.site = site

    def validate(self, lattice):
        if not lattice.is_free(self.site):
            raise MCError(f"observable references frozen/outside site {self.site}")

    def __call__(self, grid, lattice):
        iy, ix = lattice.index(self.site)
        return 1.0 if grid[iy, ix] > 0 else 0.0


class Magnetization:
    """Mean spin over the free sites."""

    def validate(self, lattice):
        pass

    def __call__(self, grid, lattice):
        return float(grid[lattice.free_iy, lattice.free_ix].mean())


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    stderr: float
    n_samples: int
    batch_count: int


def batch_means(series, n_batches=16):
    """(mean, stderr, batches) by batch means; needs at least 8 batches."""
    series = np.asarray(series, dtype=np.float64)
    n = series.size
    b = min(n_batches, n)
    if b < 8:
        raise MCError(f"need >= 8 samples for batch means, got {n}")
    edges = np.linspace(0, n, b + 1).astype(int)
    bm = np.array([series[edges[i]:edges[i + 1]].mean() for i in range(b)])
    se = float(bm.std(ddof=1) / math.sqrt(b))
    return float(series.mean()), se, b


def run_sampler(lattice, params, schedule, seed_key, on_sample,
                method="heatbath"):
    """Drive one chain; call ``on_sample(grid, sweep_index)`` per retained sweep."""
    sweep = _SWEEPS[method]
    state = ChainState(lattice, seed_key)
    for _ in range(schedule.burn_in):
        sweep(state, params)
    for s in range(1, schedule.sweeps + 1):
        sweep(state, params)
        if s % schedule.thin == 0:
            on_sample(state.config.grid, state.sweeps_done)
    return state


def _chain_worker(payload):
    lattice, params, schedule, seed_key, observables, names, method, stream = payload
    n_samp = schedule.n_samples
    values = {name: np.empty(n_samp) for name in names}
    k = [0]
    writer = RasterWriter(stream, lattice) if stream is not None else None

    def on_sample(grid, sweep_index):
        i = k[0]
        for name in names:
            values[name][i] = observables[name](grid, lattice)
        if writer is not None:
            writer.append(grid, sweep_index)
        k[0] += 1

    run_sampler(lattice, params, schedule, seed_key, on_sample, method)
    if writer is not None:
        writer.close()
    return values


def run_chain(lattice, params, schedule, seed, observables, method="heatbath",
              replicas=1, threads=None, stream_path=None):
    """Seeded estimates for named observables.

    ``observables`` maps names to callables with a ``validate(lattice)``
    hook.  Returns {name: EstimateWithError}.  With ``stream_path`` set, the
    first replica's retained samples are also written as a packed raster
    stream.  Replicas fan out to worker processes, merged in replica order.
    """
    for obs in observables.values():
        if hasattr(obs, "validate"):
            obs.validate(lattice)
    names = sorted(observables)
    n_samp = schedule.n_samples
    if n_samp < 8:
        raise MCError("schedule retains fewer than 8 samples")

    payloads = [(lattice, params, schedule, (seed, r), observables, names,
                 method, stream_path if r == 0 else None)
                for r in range(replicas)]
    n_workers = resolve_threads(threads, replicas)
    if n_workers > 1 and replicas > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
            results = list(pool.map(_chain_worker, payloads))
    else:
        results = [_chain_worker(p) for p in payloads]

    out = {}
    for name in names:
        per = [batch_means(res[name]) for res in results]
        w = np.full(len(per), n_samp, dtype=float)
        w /= w.sum()
        mean = float(np.dot(w, [p[0] for p in per]))
        se = float(math.sqrt(np.sum((w * [p[1] for p in per]) ** 2)))
        out[name] = EstimateWithError(mean, se, n_samp * replicas,
                                      sum(p[2] for p in per))
    return out


def resolve_threads(threads, upper=None):
    """CLI flag, then SCHN_THREADS, then the CPU count."""
    if threads is None:
        env = os.environ.get("SCHN_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    threads = max(1, int(threads))
    if upper is not None:
        threads = min(threads, upper)
    return threads


# ---------------------------------------------------------------------------
# packed raster sample streams
# ---------------------------------------------------------------------------

class RasterWriter:
    """Packed spin rasters: 32-byte header, then per record an 8-byte sweep
    index plus a row-major little-endian bitmap of free-site spins (+1 = 1)."""

    def __init__(self, path, lattice):
        self.lattice = lattice
        self.fh = open(path, "wb")
        m = lattice.m if lattice.m is not None else -1
        header = struct.pack("<4sIiI", RASTER_MAGIC, RASTER_VERSION, m,
                             lattice.n_free)
        self.fh.write(header.ljust(32, b"\0"))

    def append(self, grid, sweep_index):
        bits = grid[self.lattice.free_iy, self.lattice.free_ix] > 0
        packed = np.packbits(bits, bitorder="little")
        self.fh.write(struct.pack("<Q", sweep_index))
        self.fh.write(packed.tobytes())

    def close(self):
        self.fh.close()


def read_raster(path):
    """Returns (m, sweep_indices, bool array of shape (n_records, n_free))."""
    with open(path, "rb") as fh:
        header = fh.read(32)
        magic, version, m, n_free = struct.unpack("<4sIiI", header[:16])
        if magic != RASTER_MAGIC:
            raise MCError("not a raster stream (bad magic)")
        if version != RASTER_VERSION:
            raise MCError(f"unsupported raster version {version}")
        nbytes = (n_free + 7) // 8
        idx = []
        rows = []
        while True:
            rec = fh.read(8 + nbytes)
            if not rec:
                break
            if len(rec) != 8 + nbytes:
                raise MCError("truncated raster record")
            (sweep,) = struct.unpack("<Q", rec[:8])
            bits = np.unpackbits(np.frombuffer(rec[8:], dtype=np.uint8),
                                 bitorder="little")[:n_free]
            idx.append(sweep)
            rows.append(bits.astype(bool))
    return m, np.array(idx, dtype=np.uint64), (np.array(rows) if rows
                                               else np.zeros((0, n_free), bool))


def config_from_bits(lattice, bits):
    """Rebuild a SpinConfiguration from one raster record."""
    grid = lattice.cold_config().grid.copy()
    vals = np.where(bits, 1, -1).astype(np.int8)
    grid[lattice.free_iy, lattice.free_ix] = vals
    return SpinConfiguration(lattice, grid)
