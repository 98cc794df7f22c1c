"""Finite rectangular Ising boxes with hard-frozen boundary spins.

Sites are integer pairs (x, y).  A lattice is a rectangle of sites whose
boundary ring is frozen to a single value and which may carry additional
frozen horizontal segments strictly inside.  Free sites are everything else,
ordered row-major (y slow, x fast) so runs are bit-reproducible.

The energy convention counts nearest-neighbour bonds that touch at least one
free site; bonds between two frozen sites only shift H by a constant and are
omitted.
"""

from dataclasses import dataclass, field

import numpy as np

Site = tuple[int, int]


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Inverse temperature; coupling is 1 and the external field is 0."""

    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise LatticeError("beta must be >= 0")


@dataclass(frozen=True)
class Segment:
    """Horizontal run of sites [(x0, y) .. (x1, y)] frozen to ``value``."""

    x0: int
    x1: int
    y: int
    value: int = 1

    def __post_init__(self):
        if self.x1 < self.x0:
            raise LatticeError("segment needs x0 <= x1")
        if self.value not in (-1, 1):
            raise LatticeError("segment value must be -1 or +1")

    @property
    def sites(self) -> list[Site]:
        return [(x, self.y) for x in range(self.x0, self.x1 + 1)]

    def flipped(self) -> "Segment":
        return Segment(self.x0, self.x1, self.y, -self.value)


@dataclass(frozen=True)
class FrozenSpec:
    """Boundary condition: ring value plus interior plus/minus segments."""

    ring_value: int = -1
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.ring_value not in (-1, 1):
            raise LatticeError("ring value must be -1 or +1")
        object.__setattr__(self, "segments", tuple(self.segments))
        seen = set()
        for seg in self.segments:
            for s in seg.sites:
                if s in seen:
                    raise LatticeError("segments must be pairwise disjoint")
                seen.add(s)

    def flipped(self) -> "FrozenSpec":
        return FrozenSpec(-self.ring_value, tuple(s.flipped() for s in self.segments))


class Lattice:
    """Immutable geometry: rectangle bounds, frozen map, free-site list."""

    def __init__(self, xmin, xmax, ymin, ymax, spec: FrozenSpec):
        if xmax - xmin < 2 or ymax - ymin < 2:
            raise LatticeError("rectangle must have a nonempty interior")
        self.xmin, self.xmax = int(xmin), int(xmax)
        self.ymin, self.ymax = int(ymin), int(ymax)
        self.spec = spec
        self.width = self.xmax - self.xmin + 1
        self.height = self.ymax - self.ymin + 1

        frozen = np.zeros((self.height, self.width), dtype=bool)
        values = np.zeros((self.height, self.width), dtype=np.int8)
        frozen[0, :] = frozen[-1, :] = True
        frozen[:, 0] = frozen[:, -1] = True
        values[frozen] = spec.ring_value
        for seg in spec.segments:
            for (x, y) in seg.sites:
                if not (self.xmin < x < self.xmax and self.ymin < y < self.ymax):
                    raise LatticeError(
                        f"segment site {(x, y)} not strictly inside "
                        f"[{self.xmin},{self.xmax}]x[{self.ymin},{self.ymax}]")
                iy, ix = self.index(( x, y))
                frozen[iy, ix] = True
                values[iy, ix] = seg.value
        self.frozen_mask = frozen
        self.frozen_values = values
        iy, ix = np.nonzero(~frozen)  # row-major order
        self.free_iy = iy.astype(np.int64)
        self.free_ix = ix.astype(np.int64)
        self.n_free = int(iy.size)
        self._free_index = {}
        for k in range(self.n_free):
            self._free_index[(int(ix[k]) + self.xmin, int(iy[k]) + self.ymin)] = k
        self.frozen_mask.setflags(write=False)
        self.frozen_values.setflags(write=False)

    # -- geometry helpers ---------------------------------------------------

    def index(self, site: Site) -> tuple[int, int]:
        x, y = site
        return y - self.ymin, x - self.xmin

    def site(self, iy: int, ix: int) -> Site:
        return ix + self.xmin, iy + self.ymin

    def contains(self, site: Site) -> bool:
        x, y = site
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def is_free(self, site: Site) -> bool:
        return site in self._free_index

    def free_index(self, site: Site) -> int:
        try:
            return self._free_index[site]
        except KeyError:
            raise LatticeError(f"site {site} is frozen or outside the box") from None

    @property
    def free_sites(self) -> list[Site]:
        return [self.site(int(self.free_iy[k]), int(self.free_ix[k]))
                for k in range(self.n_free)]

    @property
    def m(self):
        """Half-side for centred square boxes, else None."""
        if (self.xmin == self.ymin == -self.xmax == -self.ymax):
            return self.xmax
        return None

    def with_pins(self, pins) -> "Lattice":
        """Copy of the lattice with extra (site, value) pairs frozen.

        Used to condition on partial assignments; pins must be free sites.
        """
        lat = Lattice.__new__(Lattice)
        for name in ("xmin", "xmax", "ymin", "ymax", "spec", "width", "height"):
            setattr(lat, name, getattr(self, name))
        frozen = self.frozen_mask.copy()
        values = self.frozen_values.copy()
        for site, val in pins:
            if val not in (-1, 1):
                raise LatticeError("pinned value must be -1 or +1")
            if not self.is_free(site):
                raise LatticeError(f"cannot pin non-free site {site}")
            iy, ix = self.index(site)
            frozen[iy, ix] = True
            values[iy, ix] = val
        lat.frozen_mask = frozen
        lat.frozen_values = values
        iy, ix = np.nonzero(~frozen)
        lat.free_iy = iy.astype(np.int64)
        lat.free_ix = ix.astype(np.int64)
        lat.n_free = int(iy.size)
        lat._free_index = {}
        for k in range(lat.n_free):
            lat._free_index[(int(ix[k]) + lat.xmin, int(iy[k]) + lat.ymin)] = k
        lat.frozen_mask.setflags(write=False)
        lat.frozen_values.setflags(write=False)
        return lat

    def cold_config(self) -> "SpinConfiguration":
        """All spins at ring value except the frozen segments."""
        grid = np.full((self.height, self.width), self.spec.ring_value, dtype=np.int8)
        grid[self.frozen_mask] = self.frozen_values[self.frozen_mask]
        return SpinConfiguration(self, grid)

    def __repr__(self):
        return (f"Lattice(x=[{self.xmin},{self.xmax}], y=[{self.ymin},{self.ymax}], "
                f"free={self.n_free})")


def build_lattice(m: int, spec: FrozenSpec) -> Lattice:
    """Square box of half-side m: all sites with max(|x|,|y|) <= m."""
    if m < 1:
        raise LatticeError("half-side must be >= 1")
    return Lattice(-m, m, -m, m, spec)


def strip_lattice(length: int, width: int, spec: FrozenSpec) -> Lattice:
    """Strip of ``length`` columns and ``width`` rows with x,y >= 0."""
    return Lattice(0, length - 1, 0, width - 1, spec)


class SpinConfiguration:
    """Spin values on a lattice; frozen sites always carry their frozen value."""

    def __init__(self, lattice: Lattice, grid: np.ndarray):
        if grid.shape != (lattice.height, lattice.width):
            raise LatticeError("grid shape does not match lattice")
        if not np.isin(grid, (-1, 1)).all():
            raise LatticeError("spins must be -1 or +1")
        fm = lattice.frozen_mask
        if not (grid[fm] == lattice.frozen_values[fm]).all():
            raise LatticeError("configuration violates its frozen spec")
        self.lattice = lattice
        self.grid = grid.astype(np.int8)

    def spin(self, site: Site) -> int:
        iy, ix = self.lattice.index(site)
        return int(self.grid[iy, ix])

    def copy(self) -> "SpinConfiguration":
        return SpinConfiguration(self.lattice, self.grid.copy())

    def flipped_global(self, flipped_lattice: Lattice) -> "SpinConfiguration":
        return SpinConfiguration(flipped_lattice, (-self.grid).astype(np.int8))


def free_bonds(lattice: Lattice):
    """Index arrays for the bonds that touch at least one free site.

    Returns (iy1, ix1, iy2, ix2) with each bond listed once.
    """
    fm = lattice.frozen_mask
    h_keep = ~(fm[:, :-1] & fm[:, 1:])
    v_keep = ~(fm[:-1, :] & fm[1:, :])
    hy, hx = np.nonzero(h_keep)
    vy, vx = np.nonzero(v_keep)
    iy1 = np.concatenate([hy, vy])
    ix1 = np.concatenate([hx, vx])
    iy2 = np.concatenate([hy, vy + 1])
    ix2 = np.concatenate([hx + 1, vx])
    return iy1, ix1, iy2, ix2


def hamiltonian(config: SpinConfiguration) -> int:
    """H = -sum of sigma_i sigma_j over bonds touching a free site (J = 1)."""
    g = config.grid
    iy1, ix1, iy2, ix2 = free_bonds(config.lattice)
    return -int(np.sum(g[iy1, ix1].astype(np.int64) * g[iy2, ix2]))


def local_field(config: SpinConfiguration, site: Site) -> int:
    """Sum of the four neighbour spins (all neighbours lie in the box)."""
    iy, ix = config.lattice.index(site)
    g = config.grid
    return int(g[iy - 1, ix]) + int(g[iy + 1, ix]) + int(g[iy, ix - 1]) + int(g[iy, ix + 1])


def flip_delta(config: SpinConfiguration, site: Site) -> int:
    """Energy change from flipping the spin at a free site."""
    if not config.lattice.is_free(site):
        raise LatticeError(f"site {site} is frozen or outside the box")
    iy, ix = config.lattice.index(site)
    return 2 * int(config.grid[iy, ix]) * local_field(config, site)
