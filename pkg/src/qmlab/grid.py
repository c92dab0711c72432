"""Finite planar cell spaces, regions, connectivity and solidness.

A :class:`GridSpace` models either a compact rectangle (optionally masked to
a disk-like shape) or a locally compact plane, where noncompactness is
represented by a marked "infinity ring": the outermost ring of cells is
reserved and excluded from every admissible region.

Regions carry a role tag, ``"compact"`` or ``"open"``.  The tag decides which
adjacency the region itself uses and which one its complement uses:

* compact-role regions connect through edges *and* corners (8-adjacency),
  their complements through edges only (4-adjacency);
* open-role regions connect through edges only (4-adjacency), their
  complements through edges and corners (8-adjacency).

This mirrors the geometric realization of a cell set as a union of closed
unit squares (compact role) or as the interior of that union (open role):
two closed squares meeting at a corner intersect, two open interiors do not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

COMPACT = "compact"
OPEN = "open"

_STRUCT4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT8 = np.ones((3, 3), dtype=bool)

# grids up to this many cells use pure-int flood fills, larger ones scipy
_SMALL_GRID = 1024


def flip_role(role: str) -> str:
    return OPEN if role == COMPACT else COMPACT


def role_adjacency(role: str) -> int:
    """Adjacency a region of the given role uses for its own connectivity."""
    return 8 if role == COMPACT else 4


@dataclass(frozen=True)
class GridSpace:
    """Rectangular cell grid, compact or with a marked infinity ring.

    ``cell_size`` is the side length of a cell; ``origin`` gives the real
    coordinates of the center of cell (0, 0).  In compact mode an optional
    ``mask`` (bitset int) restricts the admissible cells, e.g. to a digital
    disk; the mask must be 4-connected.
    """

    width: int
    height: int
    mode: str = COMPACT  # "compact" | "marked_infinity"
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    mask: int | None = None

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ValueError("grid must be at least 3x3")
        if self.mode not in (COMPACT, "marked_infinity"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mask is not None:
            if self.mode != COMPACT:
                raise ValueError("mask only supported in compact mode")
            if self.mask & ~self._rect_bits():
                raise ValueError("mask exceeds grid")
            arr = self.bits_to_array(self.mask)
            _, n = _label(arr, 4)
            if n != 1:
                raise ValueError("mask must be a single 4-connected piece")

    # -- geometry ----------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def cell_index(self, x: int, y: int) -> int:
        return y * self.width + x

    def cell_xy(self, index: int) -> tuple[int, int]:
        return index % self.width, index // self.width

    def cell_center(self, index: int) -> tuple[float, float]:
        x, y = self.cell_xy(index)
        return (self.origin[0] + x * self.cell_size,
                self.origin[1] + y * self.cell_size)

    def cell_at(self, px: float, py: float) -> int | None:
        """Index of the cell whose square contains the point, or None."""
        x = int(round((px - self.origin[0]) / self.cell_size))
        y = int(round((py - self.origin[1]) / self.cell_size))
        if 0 <= x < self.width and 0 <= y < self.height:
            return self.cell_index(x, y)
        return None

    # -- admissibility -----------------------------------------------------

    def _rect_bits(self) -> int:
        return (1 << self.n_cells) - 1

    @property
    def admissible_bits(self) -> int:
        if self.mode == COMPACT:
            return self.mask if self.mask is not None else self._rect_bits()
        return self._rect_bits() & ~self.ring_bits

    @property
    def ring_bits(self) -> int:
        """Cells of the infinity ring (zero in compact mode)."""
        if self.mode == COMPACT:
            return 0
        return _frame_bits(self.width, self.height, 0)

    @property
    def frame_bits(self) -> int:
        """Admissible cells 8-adjacent to the infinity ring."""
        if self.mode == COMPACT:
            return 0
        return _frame_bits(self.width, self.height, 1)

    # -- bitset/array conversion -------------------------------------------

    def bits_to_array(self, bits: int) -> np.ndarray:
        nbytes = (self.n_cells + 7) // 8
        raw = np.frombuffer(bits.to_bytes(nbytes, "little"), dtype=np.uint8)
        flat = np.unpackbits(raw, bitorder="little")[: self.n_cells]
        return flat.astype(bool).reshape(self.height, self.width)

    def array_to_bits(self, arr: np.ndarray) -> int:
        flat = np.asarray(arr, dtype=bool).reshape(-1)
        packed = np.packbits(flat, bitorder="little")
        return int.from_bytes(packed.tobytes(), "little")

    def cells_of(self, bits: int) -> list[int]:
        out = []
        while bits:
            low = bits & -bits
            out.append(low.bit_length() - 1)
            bits ^= low
        return out


@dataclass(frozen=True)
class Region:
    """Immutable cell set with a role tag; equality is (bits, role)."""

    bits: int
    role: str = COMPACT

    def __post_init__(self):
        if self.role not in (COMPACT, OPEN):
            raise ValueError(f"unknown role {self.role!r}")
        if self.bits < 0:
            raise ValueError("negative bitset")

    @property
    def is_empty(self) -> bool:
        return self.bits == 0

    def size(self) -> int:
        return self.bits.bit_count()

    def with_role(self, role: str) -> "Region":
        return Region(self.bits, role)

    def __contains__(self, cell_index: int) -> bool:
        return bool(self.bits >> cell_index & 1)


@dataclass(frozen=True)
class GridFunction:
    """Real values per cell, stored row-major as a read-only array."""

    space: GridSpace
    values: np.ndarray = field(compare=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float).reshape(
            self.space.height, self.space.width)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def at(self, cell_index: int) -> float:
        return float(self.flat()[cell_index])

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def vanishes_near_ring(self) -> bool:
        if self.space.mode == COMPACT:
            return True
        frame = self.space.bits_to_array(self.space.frame_bits | self.space.ring_bits)
        return bool((self.values[frame] == 0).all())


def admissible(space: GridSpace, r: Region) -> bool:
    return (r.bits & ~space.admissible_bits) == 0


def check_admissible(space: GridSpace, r: Region) -> None:
    if not admissible(space, r):
        raise ValueError("region leaves the admissible cell set")


# -- adjacency primitives on raw bitsets ------------------------------------


@lru_cache(maxsize=32)
def _frame_bits(width: int, height: int, inset: int) -> int:
    arr = np.zeros((height, width), dtype=bool)
    arr[inset, inset:width - inset] = True
    arr[height - 1 - inset, inset:width - inset] = True
    arr[inset:height - inset, inset] = True
    arr[inset:height - inset, width - 1 - inset] = True
    packed = np.packbits(arr.reshape(-1), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


@lru_cache(maxsize=32)
def _column_masks(width: int, height: int) -> tuple[int, int]:
    """(mask without leftmost column, mask without rightmost column)."""
    full = (1 << (width * height)) - 1
    left_col = 0
    for y in range(height):
        left_col |= 1 << (y * width)
    right_col = left_col << (width - 1)
    return full & ~left_col, full & ~right_col


def shift_bits(space: GridSpace, bits: int, dx: int, dy: int) -> int:
    """Translate a bitset by (dx, dy), dropping cells shifted off the grid."""
    w, h = space.width, space.height
    no_left, no_right = _column_masks(w, h)
    if dx == 1:
        bits = (bits & no_right) << 1
    elif dx == -1:
        bits = (bits & no_left) >> 1
    if dy == 1:
        bits = (bits << w) & ((1 << (w * h)) - 1)
    elif dy == -1:
        bits = bits >> w
    return bits


def dilate_bits(space: GridSpace, bits: int, adjacency: int) -> int:
    """Bits together with all their 4- or 8-neighbors (unclipped)."""
    out = bits
    out |= shift_bits(space, bits, 1, 0) | shift_bits(space, bits, -1, 0)
    out |= shift_bits(space, bits, 0, 1) | shift_bits(space, bits, 0, -1)
    if adjacency == 8:
        for dx in (-1, 1):
            for dy in (-1, 1):
                out |= shift_bits(space, bits, dx, dy)
    return out


def adjacent_bits(space: GridSpace, a: int, b: int, adjacency: int) -> bool:
    """True if some cell of a touches some cell of b under the adjacency."""
    return bool(dilate_bits(space, a, adjacency) & b)


def _label(arr: np.ndarray, adjacency: int):
    structure = _STRUCT4 if adjacency == 4 else _STRUCT8
    return ndimage.label(arr, structure=structure)


def _components_bits_small(space: GridSpace, bits: int, adjacency: int) -> list[int]:
    comps = []
    rest = bits
    while rest:
        seed = rest & -rest
        comp = seed
        while True:
            grown = dilate_bits(space, comp, adjacency) & rest
            if grown == comp:
                break
            comp = grown
        comps.append(comp)
        rest &= ~comp
    return comps


def components_bits(space: GridSpace, bits: int, adjacency: int) -> list[int]:
    """Maximal connected cell sets of a bitset, ordered by lowest cell index."""
    if bits == 0:
        return []
    if space.n_cells <= _SMALL_GRID:
        comps = _components_bits_small(space, bits, adjacency)
    else:
        arr = space.bits_to_array(bits)
        labels, n = _label(arr, adjacency)
        comps = [space.array_to_bits(labels == k) for k in range(1, n + 1)]
    comps.sort(key=lambda b: (b & -b))
    return comps


def connected_bits(space: GridSpace, bits: int, adjacency: int) -> bool:
    if bits == 0:
        return False
    if space.n_cells <= _SMALL_GRID:
        seed = bits & -bits
        comp = seed
        while True:
            grown = dilate_bits(space, comp, adjacency) & bits
            if grown == comp:
                break
            comp = grown
        return comp == bits
    arr = space.bits_to_array(bits)
    _, n = _label(arr, adjacency)
    return n == 1


# -- spec operations ---------------------------------------------------------


def components(space: GridSpace, r: Region, adjacency: str = "region") -> list[Region]:
    """Split a region into connected components.

    ``adjacency="region"`` uses 4-neighborhoods, ``"complement"`` uses
    8-neighborhoods.
    """
    check_admissible(space, r)
    adj = 4 if adjacency == "region" else 8
    return [Region(b, r.role) for b in components_bits(space, r.bits, adj)]


def complement(space: GridSpace, r: Region) -> Region:
    """Admissible cells not in r, with the role flipped."""
    check_admissible(space, r)
    return Region(space.admissible_bits & ~r.bits, flip_role(r.role))


def is_precompact(space: GridSpace, r: Region) -> bool:
    """True iff no cell of r is 8-adjacent to the infinity ring."""
    if space.mode == COMPACT:
        raise ValueError("all sets precompact in compact mode")
    check_admissible(space, r)
    return (r.bits & space.frame_bits) == 0


def is_solid(space: GridSpace, r: Region) -> bool:
    """Solidness of a region, with role-dependent adjacency.

    Compact mode: r connected and its complement connected.  Marked-infinity
    mode: r connected and every complement component reaches the infinity
    ring.  A compact-role region connects through 8-neighborhoods and its
    complement through 4-neighborhoods; for open-role regions the pair is
    swapped.
    """
    if r.is_empty:
        raise ValueError("empty set has no solidness")
    check_admissible(space, r)
    own = role_adjacency(r.role)
    dual = role_adjacency(flip_role(r.role))
    if not connected_bits(space, r.bits, own):
        return False
    comp = space.admissible_bits & ~r.bits
    if space.mode == COMPACT:
        return comp == 0 or connected_bits(space, comp, dual)
    frame = space.frame_bits
    for piece in components_bits(space, comp, dual):
        if not piece & frame:
            return False
    return True


def solid_hull(space: GridSpace, r: Region) -> Region:
    """Region together with its precompact complement components.

    Marked-infinity mode only: filling the holes of a connected region yields
    a solid region.
    """
    if space.mode == COMPACT:
        raise ValueError("solid hull needs a marked-infinity space")
    check_admissible(space, r)
    dual = role_adjacency(flip_role(r.role))
    comp = space.admissible_bits & ~r.bits
    fill = 0
    for piece in components_bits(space, comp, dual):
        if not piece & space.frame_bits:
            fill |= piece
    return Region(r.bits | fill, r.role)


# -- constructors ------------------------------------------------------------


def full_region(space: GridSpace, role: str = COMPACT) -> Region:
    return Region(space.admissible_bits, role)


def cell_region(space: GridSpace, cells, role: str = COMPACT) -> Region:
    if isinstance(cells, int):
        cells = [cells]
    bits = 0
    for c in cells:
        bits |= 1 << c
    r = Region(bits, role)
    check_admissible(space, r)
    return r


def rect_region(space: GridSpace, x0: int, y0: int, x1: int, y1: int,
                role: str = COMPACT) -> Region:
    arr = np.zeros((space.height, space.width), dtype=bool)
    arr[y0:y1 + 1, x0:x1 + 1] = True
    r = Region(space.array_to_bits(arr) & space.admissible_bits, role)
    return r


def disk_region(space: GridSpace, center: tuple[float, float], radius: float,
                role: str = COMPACT) -> Region:
    """Cells whose centers lie within the Euclidean radius of a point."""
    xs = space.origin[0] + np.arange(space.width) * space.cell_size
    ys = space.origin[1] + np.arange(space.height) * space.cell_size
    dx = xs[None, :] - center[0]
    dy = ys[:, None] - center[1]
    arr = dx * dx + dy * dy <= radius * radius
    return Region(space.array_to_bits(arr) & space.admissible_bits, role)


def disk_mask(width: int, height: int) -> int:
    """Bitset of a digital disk inscribed in a width x height rectangle."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    rad = min(width, height) / 2.0 - 0.25
    xs = np.arange(width)[None, :] - cx
    ys = np.arange(height)[:, None] - cy
    arr = xs * xs + ys * ys <= rad * rad
    packed = np.packbits(arr.reshape(-1), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def boundary_cells(space: GridSpace, r: Region) -> Region:
    """Cells of r that are 8-adjacent to the outside of r (or the grid edge)."""
    check_admissible(space, r)
    outside = space._rect_bits() & ~r.bits
    touching = dilate_bits(space, outside, 8) & r.bits
    edge = _frame_bits(space.width, space.height, 0) & r.bits
    return Region(touching | edge, r.role)


# -- run-length region literals ----------------------------------------------


def region_to_rle(space: GridSpace, r: Region) -> str:
    """Run lengths of the row-major scan, zeros first, space separated."""
    flat = space.bits_to_array(r.bits).reshape(-1)
    runs = []
    current, count = False, 0
    for v in flat:
        if bool(v) == current:
            count += 1
        else:
            runs.append(count)
            current, count = bool(v), 1
    runs.append(count)
    return " ".join(str(n) for n in runs)


def region_from_rle(space: GridSpace, rle: str, role: str) -> Region:
    runs = [int(tok) for tok in rle.split()]
    if sum(runs) != space.n_cells:
        raise ValueError("run lengths do not cover the grid")
    flat = np.zeros(space.n_cells, dtype=bool)
    pos, value = 0, False
    for n in runs:
        flat[pos:pos + n] = value
        pos += n
        value = not value
    r = Region(space.array_to_bits(flat), role)
    check_admissible(space, r)
    return r
