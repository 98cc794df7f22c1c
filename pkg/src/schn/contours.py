"""Dual-lattice contours of a spin configuration.

Disagreement bonds (sigma_i * sigma_j = -1, bonds to frozen sites included)
are decomposed into closed self-avoiding loops on the dual lattice.  At a
dual vertex where four disagreement edges meet, the south-west rule pairs
(south, west) and (north, east), which splits the crossing deterministically.

Dual vertices live at half-integer coordinates; everything here is stored in
doubled integer coordinates (x2, y2) = (2x, 2y), so dual vertices have both
coordinates odd and arithmetic stays exact.  Loops are oriented clockwise
(negative shoelace area with y pointing up).
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import Segment, SpinConfiguration


class ContourError(ValueError):
    pass


@dataclass
class Contour:
    """Closed dual-lattice loop; verts2 has shape (L, 2) in doubled coords."""

    verts2: np.ndarray

    def __post_init__(self):
        self.verts2 = np.asarray(self.verts2, dtype=np.int64)

    def __len__(self):
        """Number of dual edges (equals the number of vertices, cyclic)."""
        return self.verts2.shape[0]

    @property
    def vertices(self):
        """Vertices as float half-integer (x, y) pairs."""
        return self.verts2 / 2.0

    def edge_set(self):
        """Frozenset of undirected edges as sorted doubled-coordinate pairs."""
        out = set()
        n = len(self)
        for i in range(n):
            a = (int(self.verts2[i, 0]), int(self.verts2[i, 1]))
            b = (int(self.verts2[(i + 1) % n, 0]), int(self.verts2[(i + 1) % n, 1]))
            out.add((a, b) if a <= b else (b, a))
        return frozenset(out)


def _disagreement_edges(config: SpinConfiguration):
    """Boolean rasters of disagreement bonds.

    hdis[iy, ix]: horizontal bond (ix, ix+1) in row iy -> vertical dual edge.
    vdis[iy, ix]: vertical bond (iy, iy+1) in column ix -> horizontal dual edge.
    """
    return _edge_rasters(config.grid)


def _edge_rasters(g):
    hdis = g[:, :-1] != g[:, 1:]
    vdis = g[:-1, :] != g[1:, :]
    return hdis, vdis


def _signed_area2(verts2):
    x = verts2[:, 0].astype(np.int64)
    y = verts2[:, 1].astype(np.int64)
    x2 = np.roll(x, -1)
    y2 = np.roll(y, -1)
    return int(np.sum(x * y2 - x2 * y))


def trace_raw(lattice, grid):
    """Loop vertex arrays (vx, vy, offsets, n_loops) without Contour wrapping."""
    hdis, vdis = _edge_rasters(grid)
    return _kernels.trace_loops(hdis, vdis, lattice.xmin, lattice.ymin)


def extract_contours(config: SpinConfiguration) -> list[Contour]:
    """All contours of a configuration, each clockwise, scan-order stable."""
    vx, vy, offsets, n_loops = trace_raw(config.lattice, config.grid)
    contours = []
    for k in range(n_loops):
        lo, hi = int(offsets[k]), int(offsets[k + 1])
        verts = np.stack([vx[lo:hi], vy[lo:hi]], axis=1)
        contours.append(_canonical(Contour(verts)))
    return contours


def _loop_holds_segment(vx, vy, lo, hi, segment):
    for x in range(segment.x0, segment.x1 + 1):
        if not _kernels.point_inside(vx, vy, lo, hi, 2 * x, 2 * segment.y):
            return False
    return True


def exterior_loop_slice(lattice, grid, segment):
    """(vx, vy, lo, hi) of the exterior loop around ``segment``, untraced
    orientation; fast path for per-sample statistics."""
    vx, vy, offsets, n_loops = trace_raw(lattice, grid)
    cands = []
    for k in range(n_loops):
        lo, hi = int(offsets[k]), int(offsets[k + 1])
        if _loop_holds_segment(vx, vy, lo, hi, segment):
            cands.append((lo, hi))
    if not cands:
        raise ContourError("no contour surrounds the segment")
    if len(cands) > 1:
        outer = []
        for lo, hi in cands:
            inside_other = False
            for lo2, hi2 in cands:
                if (lo2, hi2) == (lo, hi):
                    continue
                mx = (vx[lo] + vx[lo + 1]) // 2
                my = (vy[lo] + vy[lo + 1]) // 2
                if _kernels.point_inside(vx, vy, lo2, hi2, mx, my):
                    inside_other = True
                    break
            if not inside_other:
                outer.append((lo, hi))
        if len(outer) != 1:  # pragma: no cover - nesting is a partial order
            raise ContourError(f"expected one exterior loop, found {len(outer)}")
        cands = outer
    lo, hi = cands[0]
    return vx, vy, lo, hi


def exterior_contour_fast(lattice, grid, segment) -> Contour:
    """Canonical exterior contour via the raw-loop fast path."""
    vx, vy, lo, hi = exterior_loop_slice(lattice, grid, segment)
    return _canonical(Contour(np.stack([vx[lo:hi], vy[lo:hi]], axis=1)))


def probe_interior_flags(lattice, grid, segment, probes):
    """Indicator per probe site of lying inside the exterior contour."""
    vx, vy, lo, hi = exterior_loop_slice(lattice, grid, segment)
    return np.array([1.0 if _kernels.point_inside(vx, vy, lo, hi,
                                                  2 * p[0], 2 * p[1]) else 0.0
                     for p in probes])


def _canonical(contour: Contour) -> Contour:
    """Clockwise orientation, rotated to start at the smallest vertex."""
    v = contour.verts2
    if _signed_area2(v) > 0:
        v = v[::-1].copy()
    keys = [(int(a), int(b)) for a, b in v]
    start = min(range(len(keys)), key=keys.__getitem__)
    v = np.roll(v, -start, axis=0)
    return Contour(v)


def interior_contains(contour: Contour, site) -> bool:
    """Even-odd ray crossing; exact in doubled integer coordinates."""
    qx, qy = 2 * site[0], 2 * site[1]
    return _point_inside(contour.verts2, qx, qy)


def _point_inside(verts2, qx, qy):
    return bool(_kernels.point_inside(verts2[:, 0], verts2[:, 1], 0,
                                      verts2.shape[0], qx, qy))


def _edge_midpoint(contour: Contour):
    a = contour.verts2[0]
    b = contour.verts2[1]
    return (int(a[0] + b[0]) // 2, int(a[1] + b[1]) // 2)


def contour_contains_contour(outer: Contour, inner: Contour) -> bool:
    """Whether ``inner`` lies in the interior of ``outer``.

    Tested on an edge midpoint of ``inner``: distinct contours are edge
    disjoint, so the midpoint never lies on ``outer``.
    """
    mx, my = _edge_midpoint(inner)
    return _point_inside(outer.verts2, mx, my)


def exterior_contour_of(contours, segment: Segment) -> Contour:
    """The outermost contour whose interior contains every site of ``segment``."""
    if segment.value != 1:
        raise ContourError("exterior contour is defined for +1-frozen segments")
    holding = [c for c in contours
               if all(interior_contains(c, s) for s in segment.sites)]
    if not holding:
        raise ContourError("no contour surrounds the segment (should not happen "
                           "for a +1 segment in a minus ring)")
    outer = [c for c in holding
             if not any(contour_contains_contour(o, c) for o in holding if o is not c)]
    if len(outer) != 1:  # pragma: no cover - containment is a total order here
        raise ContourError(f"expected a unique exterior contour, found {len(outer)}")
    return outer[0]


@dataclass
class CutPoints:
    """Crossing data of a contour with the dual lines flanking a segment.

    Heights are stored in doubled coordinates; ``left_upper2 > left_lower2``
    and ``right_upper2 > right_lower2``.  Arcs are (start, end) index pairs
    into the contour, traversed forward (cyclically); the four arcs
    partition the loop: upper strip arc, right cap, lower strip arc, left cap.
    """

    left_upper2: int
    left_lower2: int
    right_upper2: int
    right_lower2: int
    arc_upper: tuple[int, int]
    arc_right: tuple[int, int]
    arc_lower: tuple[int, int]
    arc_left: tuple[int, int]

    @property
    def left_upper(self):
        return self.left_upper2 / 2.0

    @property
    def left_lower(self):
        return self.left_lower2 / 2.0

    @property
    def right_upper(self):
        return self.right_upper2 / 2.0

    @property
    def right_lower(self):
        return self.right_lower2 / 2.0

    @property
    def right_tip_height(self) -> int:
        """ceil of the upper-right crossing height (integer bucket)."""
        return (self.right_upper2 + 1) // 2

    def arc_lengths(self, contour_len: int):
        def span(arc):
            return (arc[1] - arc[0]) % contour_len
        return tuple(span(a) for a in
                     (self.arc_upper, self.arc_right, self.arc_lower, self.arc_left))


def cut_points(contour: Contour, segment: Segment) -> CutPoints:
    """Crossings with the vertical dual lines just outside the segment ends.

    The upper strip arc is the direct left-to-right transition arc (clockwise,
    no line hits strictly inside) with the highest right endpoint; the lower
    arc is the direct right-to-left arc with the lowest right endpoint.
    """
    xl2 = 2 * segment.x0 - 1
    xr2 = 2 * segment.x1 + 1
    v = contour.verts2
    n = v.shape[0]
    on_l = v[:, 0] == xl2
    on_r = v[:, 0] == xr2
    idx = np.nonzero(on_l | on_r)[0]
    hits = [(int(i), 0 if on_l[i] else 1) for i in idx]
    if not on_l.any() or not on_r.any():
        raise ContourError("contour does not cross both cut lines")
    m = len(hits)
    lr_arcs = []  # direct L->R transition arcs
    rl_arcs = []
    for k in range(m):
        i, side = hits[k]
        j, side2 = hits[(k + 1) % m]
        if side == 0 and side2 == 1:
            lr_arcs.append((i, j))
        elif side == 1 and side2 == 0:
            rl_arcs.append((i, j))
    if not lr_arcs or not rl_arcs:
        raise ContourError("no direct strip-crossing arcs found")
    up = max(lr_arcs, key=lambda a: (v[a[1], 1], v[a[0], 1]))
    lo = min(rl_arcs, key=lambda a: (v[a[0], 1], v[a[1], 1]))
    u1_2 = int(v[up[0], 1])
    v1_2 = int(v[up[1], 1])
    v2_2 = int(v[lo[0], 1])
    u2_2 = int(v[lo[1], 1])
    if not (u1_2 > u2_2 and v1_2 > v2_2):
        raise ContourError(
            f"cut points not vertically ordered: left ({u1_2}, {u2_2}) "
            f"right ({v1_2}, {v2_2}) in doubled coordinates")
    return CutPoints(
        left_upper2=u1_2, left_lower2=u2_2,
        right_upper2=v1_2, right_lower2=v2_2,
        arc_upper=(up[0], up[1]),
        arc_right=(up[1], lo[0]),
        arc_lower=(lo[0], lo[1]),
        arc_left=(lo[1], up[0]),
    )


def count_disagreement_bonds(config: SpinConfiguration) -> int:
    hdis, vdis = _disagreement_edges(config)
    return int(hdis.sum()) + int(vdis.sum())


def interior_sites_floodfill(config: SpinConfiguration, contour: Contour) -> set:
    """Sites inside a contour via flood fill from the boundary ring.

    Independent of the ray-casting test: BFS over lattice sites that never
    crosses a contour edge; unreached sites are the interior.  A dual vertex
    the loop visits twice carries both rounded corner arcs (south-west and
    north-east), which leaves a diagonal channel between the cells north-west
    and south-east of it; the BFS takes those diagonal steps too.
    """
    lat = config.lattice
    edges = contour.edge_set()
    seen_v = set()
    channels = {}
    for i in range(len(contour)):
        v = (int(contour.verts2[i, 0]), int(contour.verts2[i, 1]))
        if v in seen_v:
            a, b = v
            nw = ((a - 1) // 2, (b + 1) // 2)
            se = ((a + 1) // 2, (b - 1) // 2)
            channels.setdefault(nw, set()).add(se)
            channels.setdefault(se, set()).add(nw)
        seen_v.add(v)

    def blocked(s1, s2):
        # dual edge separating neighbouring sites s1, s2
        (x1, y1), (x2, y2) = s1, s2
        if x1 == x2:  # vertical bond -> horizontal dual edge
            ylo = min(y1, y2)
            a = (2 * x1 - 1, 2 * ylo + 1)
            b = (2 * x1 + 1, 2 * ylo + 1)
        else:  # horizontal bond -> vertical dual edge
            xlo = min(x1, x2)
            a = (2 * xlo + 1, 2 * y1 - 1)
            b = (2 * xlo + 1, 2 * y1 + 1)
        return ((a, b) if a <= b else (b, a)) in edges

    seen = set()
    stack = []
    for ix in range(lat.width):
        for iy in (0, lat.height - 1):
            stack.append(lat.site(iy, ix))
    for iy in range(lat.height):
        for ix in (0, lat.width - 1):
            stack.append(lat.site(iy, ix))
    seen.update(stack)
    while stack:
        x, y = stack.pop()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            s2 = (x + dx, y + dy)
            if not lat.contains(s2) or s2 in seen:
                continue
            if blocked((x, y), s2):
                continue
            seen.add(s2)
            stack.append(s2)
        for s2 in channels.get((x, y), ()):
            if lat.contains(s2) and s2 not in seen:
                seen.add(s2)
                stack.append(s2)
    inside = set()
    for iy in range(lat.height):
        for ix in range(lat.width):
            s = lat.site(iy, ix)
            if s not in seen:
                inside.add(s)
    return inside


def dump_contours_csv(path, contours_by_sample):
    """CSV with columns (sample_id, contour_id, vertex_index, x2, y2).

    ``contours_by_sample`` is an iterable of (sample_id, [Contour, ...]).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "contour_id", "vertex_index", "x2", "y2"])
        for sample_id, contours in contours_by_sample:
            for cid, c in enumerate(contours):
                for vi in range(len(c)):
                    w.writerow([sample_id, cid, vi,
                                int(c.verts2[vi, 0]), int(c.verts2[vi, 1])])
