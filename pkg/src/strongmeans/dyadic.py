"""Exact dyadic interval and cube geometry on the torus.

Everything here is integer arithmetic.  The torus [0, 1) is modelled at a
global power-of-two scale S = 2**(j_max + 4); the extra 4 bits guarantee
that every supported dilation factor (9/8, 2, 3, 4, 9/2, 5) of a dyadic
interval of level <= j_max has integer endpoints at scale S.  Arcs are
half-open [lo, hi) with 0 <= lo < S and 0 < hi - lo <= S; an arc that
wraps past 1 is represented with hi > S, never split in two.

Derived rational quantities (measures, distances) are returned as
fractions.Fraction values, so callers can compare them exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

DEFAULT_J_MAX = 14
_SCALE_BITS = 4  # 9/8 dilation needs 3 extra bits, one more for headroom

SUPPORTED_FACTORS = (
    Fraction(9, 8),
    Fraction(2),
    Fraction(3),
    Fraction(4),
    Fraction(9, 2),
    Fraction(5),
)


class ResolutionExceededError(ValueError):
    """Operation would need cells finer than the global resolution cap."""


class InvalidFactorError(ValueError):
    """Dilation factor outside the supported exact set."""


class OverlapError(ValueError):
    """Inputs required to be disjoint are not."""


def scale_for(j_max: int = DEFAULT_J_MAX) -> int:
    return 1 << (j_max + _SCALE_BITS)


def _as_factor(c) -> Fraction:
    f = Fraction(c)
    if f not in SUPPORTED_FACTORS:
        raise InvalidFactorError(f"unsupported dilation factor {c!r}")
    return f


@dataclass(frozen=True)
class DyadicInterval:
    """Half-open dyadic interval [index * 2**-level, (index+1) * 2**-level)."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if not 0 <= self.index < (1 << self.level):
            raise ValueError("index out of range for level")

    @property
    def lo(self) -> Fraction:
        return Fraction(self.index, 1 << self.level)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.index + 1, 1 << self.level)

    @property
    def measure(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    @property
    def midpoint(self) -> Fraction:
        return Fraction(2 * self.index + 1, 1 << (self.level + 1))

    def units(self, j_max: int = DEFAULT_J_MAX) -> tuple[int, int]:
        """Endpoints as integers at scale 2**(j_max+4)."""
        if self.level > j_max:
            raise ResolutionExceededError(
                f"level {self.level} exceeds resolution cap {j_max}"
            )
        w = scale_for(j_max) >> self.level
        return self.index * w, (self.index + 1) * w

    def children(self, j_max: int = DEFAULT_J_MAX) -> tuple["DyadicInterval", "DyadicInterval"]:
        if self.level >= j_max:
            raise ResolutionExceededError(
                f"cannot split level {self.level} at cap {j_max}"
            )
        return (
            DyadicInterval(self.level + 1, 2 * self.index),
            DyadicInterval(self.level + 1, 2 * self.index + 1),
        )

    def parent(self) -> "DyadicInterval":
        if self.level == 0:
            raise ValueError("root has no parent")
        return DyadicInterval(self.level - 1, self.index // 2)

    def contains(self, other: "DyadicInterval") -> bool:
        if other.level < self.level:
            return False
        return (other.index >> (other.level - self.level)) == self.index


@dataclass(frozen=True)
class ScaledInterval:
    """Arc [lo, hi) on the scaled torus, hi > scale means wraparound."""

    lo: int
    hi: int
    scale: int

    def __post_init__(self):
        if not 0 <= self.lo < self.scale:
            raise ValueError("lo out of range")
        if not 0 < self.hi - self.lo <= self.scale:
            raise ValueError("arc length must lie in (0, scale]")

    @property
    def length_units(self) -> int:
        return self.hi - self.lo

    @property
    def measure(self) -> Fraction:
        return Fraction(self.hi - self.lo, self.scale)

    @property
    def midpoint(self) -> Fraction:
        return Fraction((self.lo + self.hi) % (2 * self.scale), 2 * self.scale)

    def segments(self) -> list[tuple[int, int]]:
        """Linear pieces inside [0, scale); a wrapping arc yields two."""
        if self.hi <= self.scale:
            return [(self.lo, self.hi)]
        if self.hi - self.scale == self.lo:  # full torus
            return [(0, self.scale)]
        return [(self.lo, self.scale), (0, self.hi - self.scale)]

    def contains_arc(self, other: "ScaledInterval") -> bool:
        if self.scale != other.scale:
            raise ValueError("scale mismatch")
        if self.length_units == self.scale:
            return True
        off = (other.lo - self.lo) % self.scale
        return off + other.length_units <= self.length_units


def interval_to_scaled(iv: DyadicInterval, j_max: int = DEFAULT_J_MAX) -> ScaledInterval:
    lo, hi = iv.units(j_max)
    return ScaledInterval(lo, hi, scale_for(j_max))


def dilate(iv: DyadicInterval, c, j_max: int = DEFAULT_J_MAX) -> ScaledInterval:
    """Concentric dilation c * I, capped at full-torus length.

    The midpoint is preserved exactly; the result length is
    min(1, c * measure(I)) at scale 2**(j_max+4).
    """
    f = _as_factor(c)
    if iv.level > j_max:
        raise ResolutionExceededError(
            f"level {iv.level} exceeds resolution cap {j_max}"
        )
    S = scale_for(j_max)
    w = S >> iv.level
    new_len = min(int(f * w), S)  # exact: denominator of f divides w
    center2 = (2 * iv.index + 1) * w  # doubled center
    lo = ((center2 - new_len) // 2) % S
    return ScaledInterval(lo, lo + new_len, S)


def dilate_scaled(arc: ScaledInterval, c: int) -> ScaledInterval:
    """Integer concentric dilation of an already-scaled arc."""
    if c < 1:
        raise InvalidFactorError(f"bad factor {c}")
    new_len = min(c * arc.length_units, arc.scale)
    lo2 = (arc.lo + arc.hi) - new_len  # doubled lo
    if lo2 % 2 != 0:
        raise InvalidFactorError("dilation would leave the integer grid")
    lo = (lo2 // 2) % arc.scale
    return ScaledInterval(lo, lo + new_len, arc.scale)


def gap_units(alo: int, ahi: int, blo: int, bhi: int, S: int) -> int:
    """Integer torus gap between arcs [alo, ahi) and [blo, bhi)."""
    best = None
    for shift in (-S, 0, S):
        lo, hi = blo + shift, bhi + shift
        gap = max(lo - ahi, alo - hi, 0)
        best = gap if best is None else min(best, gap)
    return best


def torus_distance(a: ScaledInterval, b: ScaledInterval) -> Fraction:
    """Infimum of |x - y| on the torus over the two arcs; 0 iff they touch."""
    if a.scale != b.scale:
        raise ValueError("scale mismatch")
    return Fraction(gap_units(a.lo, a.hi, b.lo, b.hi, a.scale), a.scale)


def intervals_disjoint(a: DyadicInterval, b: DyadicInterval) -> bool:
    """Dyadic intervals are either nested or disjoint."""
    return not (a.contains(b) or b.contains(a))


def adjacent(a: DyadicInterval, b: DyadicInterval, j_max: int = DEFAULT_J_MAX) -> bool:
    """True iff the disjoint intervals share an endpoint on the torus.

    Raises OverlapError when the inputs are not disjoint.
    """
    if not intervals_disjoint(a, b):
        raise OverlapError(f"{a} and {b} overlap")
    jm = max(a.level, b.level, j_max)
    sa = interval_to_scaled(a, jm)
    sb = interval_to_scaled(b, jm)
    return (sa.hi % sa.scale) == sb.lo or (sb.hi % sb.scale) == sa.lo


def merged_segments(arcs) -> list[tuple[int, int]]:
    """Union of arcs as sorted disjoint linear segments in [0, scale)."""
    segs = []
    scale = None
    for arc in arcs:
        if scale is None:
            scale = arc.scale
        elif arc.scale != scale:
            raise ValueError("scale mismatch")
        segs.extend(arc.segments())
    if not segs:
        return []
    segs.sort()
    out = [list(segs[0])]
    for lo, hi in segs[1:]:
        if lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def union_measure(arcs) -> Fraction:
    """Exact measure of a finite union of arcs (same scale), <= 1."""
    arcs = list(arcs)
    if not arcs:
        return Fraction(0)
    scale = arcs[0].scale
    total = sum(hi - lo for lo, hi in merged_segments(arcs))
    return Fraction(total, scale)


def segment_cell_coverage(segments, m_cells: int, scale: int) -> np.ndarray:
    """Covered length (integer units) of each of m_cells uniform cells.

    segments must be disjoint sorted linear pieces in [0, scale), and
    m_cells must divide scale.
    """
    if scale % m_cells != 0:
        raise ValueError("cell count must divide the scale")
    u = scale // m_cells
    cov = np.zeros(m_cells, dtype=np.int64)
    for lo, hi in segments:
        c0, c1 = lo // u, (hi - 1) // u  # cells touched
        if c0 == c1:
            cov[c0] += hi - lo
            continue
        cov[c0] += (c0 + 1) * u - lo
        cov[c1] += hi - c1 * u
        if c1 > c0 + 1:
            cov[c0 + 1 : c1] += u
    return cov


# ---------------------------------------------------------------------------
# cubes / boxes

@dataclass(frozen=True)
class DyadicCube:
    """Product of dyadic intervals with a common level."""

    axes: tuple[DyadicInterval, ...]

    def __post_init__(self):
        if not self.axes:
            raise ValueError("empty cube")
        levels = {iv.level for iv in self.axes}
        if len(levels) != 1:
            raise ValueError("cube axes must share a level")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def level(self) -> int:
        return self.axes[0].level

    @property
    def measure(self) -> Fraction:
        return Fraction(1, 1 << (self.level * self.dim))

    def children(self, j_max: int = DEFAULT_J_MAX) -> list["DyadicCube"]:
        halves = [iv.children(j_max) for iv in self.axes]
        out = []
        for combo in _product_indices(len(self.axes)):
            out.append(DyadicCube(tuple(halves[i][b] for i, b in enumerate(combo))))
        return out

    def contains(self, other: "DyadicCube") -> bool:
        return all(a.contains(b) for a, b in zip(self.axes, other.axes))


def _product_indices(d: int):
    for mask in range(1 << d):
        yield tuple((mask >> i) & 1 for i in range(d))


@dataclass(frozen=True)
class ScaledBox:
    axes: tuple[ScaledInterval, ...]

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def measure(self) -> Fraction:
        m = Fraction(1)
        for arc in self.axes:
            m *= arc.measure
        return m

    def contains_box(self, other: "ScaledBox") -> bool:
        return all(a.contains_arc(b) for a, b in zip(self.axes, other.axes))


def cubes_disjoint(a: DyadicCube, b: DyadicCube) -> bool:
    """Products of half-open intervals are disjoint iff some axis pair is."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    return any(intervals_disjoint(x, y) for x, y in zip(a.axes, b.axes))


def cube_adjacent(a: DyadicCube, b: DyadicCube, j_max: int = DEFAULT_J_MAX) -> bool:
    """True iff the disjoint cubes have torus distance zero (closures touch)."""
    if not cubes_disjoint(a, b):
        raise OverlapError(f"{a} and {b} overlap")
    for x, y in zip(a.axes, b.axes):
        sx = interval_to_scaled(x, j_max)
        sy = interval_to_scaled(y, j_max)
        if torus_distance(sx, sy) > 0:
            return False
    return True


def dilate_cube(q: DyadicCube, c, j_max: int = DEFAULT_J_MAX) -> ScaledBox:
    return ScaledBox(tuple(dilate(iv, c, j_max) for iv in q.axes))


def dilate_box(box: ScaledBox, c: int) -> ScaledBox:
    return ScaledBox(tuple(dilate_scaled(arc, c) for arc in box.axes))


def box_distance(a: ScaledBox, b: ScaledBox) -> Fraction:
    """Euclidean-style gap: zero iff every axis projection touches."""
    gaps = [torus_distance(x, y) for x, y in zip(a.axes, b.axes)]
    return max(gaps)


def _box_rects(box: ScaledBox) -> list[tuple[int, int, int, int]]:
    """Non-wrapping rectangles (x0,x1,y0,y1) covering a 2-d box."""
    xs = box.axes[0].segments()
    ys = box.axes[1].segments()
    return [(x0, x1, y0, y1) for x0, x1 in xs for y0, y1 in ys]


def _slab_sweep(boxes):
    """Decompose a union of 2-d boxes into x-slabs with merged y-segments.

    Yields (x0, x1, [(y0, y1), ...]) with disjoint sorted y pieces.
    """
    rects = []
    for box in boxes:
        if box.dim != 2:
            raise ValueError("slab sweep needs 2-d boxes")
        rects.extend(_box_rects(box))
    if not rects:
        return
    cuts = sorted({r[0] for r in rects} | {r[1] for r in rects})
    for x0, x1 in zip(cuts[:-1], cuts[1:]):
        ys = sorted((r[2], r[3]) for r in rects if r[0] <= x0 and r[1] >= x1)
        if not ys:
            continue
        merged = [list(ys[0])]
        for lo, hi in ys[1:]:
            if lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        yield x0, x1, [(lo, hi) for lo, hi in merged]


def boxes_union_measure(boxes) -> Fraction:
    boxes = list(boxes)
    if not boxes:
        return Fraction(0)
    scale = boxes[0].axes[0].scale
    area = 0
    for x0, x1, ys in _slab_sweep(boxes):
        area += (x1 - x0) * sum(hi - lo for lo, hi in ys)
    return Fraction(area, scale * scale)


def box_cell_coverage(boxes, m_cells: int, scale: int) -> np.ndarray:
    """Covered area units per cell of the m_cells x m_cells uniform grid."""
    if scale % m_cells != 0:
        raise ValueError("cell count must divide the scale")
    u = scale // m_cells
    cov = np.zeros((m_cells, m_cells), dtype=np.int64)
    for x0, x1, ys in _slab_sweep(boxes):
        cov_y = segment_cell_coverage(ys, m_cells, scale)
        c0, c1 = x0 // u, (x1 - 1) // u
        if c0 == c1:
            cov[c0] += (x1 - x0) * cov_y
            continue
        cov[c0] += ((c0 + 1) * u - x0) * cov_y
        cov[c1] += (x1 - c1 * u) * cov_y
        if c1 > c0 + 1:
            cov[c0 + 1 : c1] += u * cov_y
    return cov
