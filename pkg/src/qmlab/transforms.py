"""Image transformations between grid spaces, their adjoints, and the
function-level counterpart theta.

An image transformation maps regions of a source space to regions of a
target space, preserving roles, sending disjoint unions to disjoint unions,
and commuting with monotone limits.  Its adjoint pulls a measure on the
target back to the source, ``(q* nu)(A) = nu(q(A))``; its function-level
counterpart satisfies ``theta(f)(y) = integral of f against q* delta_y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import (COMPACT, OPEN, GridFunction, GridSpace, Region,
                   check_admissible, complement, components_bits,
                   dilate_bits, flip_role, full_region, is_solid,
                   role_adjacency)
from .integrals import _distinct_values, quasi_integral, superlevel
from .measures import (DEFICIENT, TOPOLOGICAL, CheckReport, ExtensionError,
                       TopoMeasure)
from .sampling import derive_rng, random_disjoint_solids, random_solid


@dataclass(frozen=True)
class ImageTransform:
    """Region-to-region map; the cell action is role-independent."""

    source: GridSpace
    target: GridSpace
    map_bits: Callable[[int, str], int] = field(compare=False)
    descriptor: str = "transform"

    def map(self, r: Region) -> Region:
        check_admissible(self.source, r)
        out = self.map_bits(r.bits, r.role) & self.target.admissible_bits
        return Region(out, r.role)

    def __call__(self, r: Region) -> Region:
        return self.map(r)


def identity_transform(space: GridSpace) -> ImageTransform:
    return ImageTransform(space, space, lambda bits, role: bits, "identity")


def from_proper_map(u: np.ndarray, source: GridSpace,
                    target: GridSpace) -> ImageTransform:
    """Preimage transformation of a cell map u: target -> source.

    ``u[y]`` is the source cell hit by target cell y; q(A) = u^{-1}(A).
    On marked-infinity spaces u must be proper: preimages of precompact
    regions stay precompact.
    """
    u = np.asarray(u, dtype=np.int64)
    if u.shape != (target.n_cells,):
        raise ValueError("cell map must cover every target cell")
    t_adm = target.bits_to_array(target.admissible_bits).reshape(-1)
    s_adm = source.bits_to_array(source.admissible_bits).reshape(-1)
    if not s_adm[u[t_adm]].all():
        raise ValueError("cell map leaves the admissible source cells")
    if source.mode != COMPACT or target.mode != COMPACT:
        if source.mode == COMPACT or target.mode == COMPACT:
            raise ValueError("cell map must relate spaces of the same mode")
        core = source.admissible_bits & ~source.frame_bits
        pre = _preimage_bits(u, target, core)
        if pre & target.frame_bits:
            raise ValueError("cell map is not proper")

    def map_bits(bits: int, role: str) -> int:
        return _preimage_bits(u, target, bits)

    return ImageTransform(source, target, map_bits, "inverse_map")


def _preimage_bits(u: np.ndarray, target: GridSpace, bits: int) -> int:
    if bits == 0:
        return 0
    # membership of u[y] in bits, through a source-sized lookup table
    n_source = int(u.max()) + 1
    nbytes = (n_source + 7) // 8
    raw = np.frombuffer(bits.to_bytes(max(nbytes, (bits.bit_length() + 7) // 8),
                                      "little"), dtype=np.uint8)
    table = np.unpackbits(raw, bitorder="little")
    hit = table[u].astype(bool)
    return target.array_to_bits(hit.reshape(target.height, target.width))


def cell_map_from_pointwise(source: GridSpace, target: GridSpace,
                            fn: Callable[[float, float], tuple[float, float]]
                            ) -> np.ndarray:
    """Tabulate a pointwise map target -> source as a cell map."""
    u = np.empty(target.n_cells, dtype=np.int64)
    for y in range(target.n_cells):
        px, py = target.cell_center(y)
        sx, sy = fn(px, py)
        idx = source.cell_at(sx, sy)
        if idx is None:
            raise ValueError(f"image of cell {y} leaves the source grid")
        u[y] = idx
    return u


def grid_isometry_map(space: GridSpace, which: int) -> np.ndarray:
    """Cell map of one of the 8 symmetries of a square grid.

    ``which`` indexes rotations 0/90/180/270 (0-3) and the four reflections
    (4-7).
    """
    if space.width != space.height:
        raise ValueError("isometries need a square grid")
    n = space.width
    u = np.empty(space.n_cells, dtype=np.int64)
    for idx in range(space.n_cells):
        x, y = space.cell_xy(idx)
        if which == 0:
            sx, sy = x, y
        elif which == 1:
            sx, sy = y, n - 1 - x
        elif which == 2:
            sx, sy = n - 1 - x, n - 1 - y
        elif which == 3:
            sx, sy = n - 1 - y, x
        elif which == 4:
            sx, sy = n - 1 - x, y
        elif which == 5:
            sx, sy = x, n - 1 - y
        elif which == 6:
            sx, sy = y, x
        elif which == 7:
            sx, sy = n - 1 - y, n - 1 - x
        else:
            raise ValueError("which must be 0..7")
        u[idx] = space.cell_index(sx, sy)
    return u


def constant_from_simple(mu_s: TopoMeasure, target: GridSpace) -> ImageTransform:
    """Transform sending every region to all of the target or nothing.

    The adjoint is then constant: every normalized measure on the target
    pulls back to ``mu_s``.
    """
    if target.mode != COMPACT:
        raise ValueError("target must be compact")
    if mu_s.total_mass != 1.0:
        raise ValueError("seed measure must be simple (values in {0,1})")
    rng = derive_rng(0, "simple", mu_s.name)
    probes = [random_solid(mu_s.space, rng, COMPACT if i % 2 else OPEN)
              for i in range(32)]
    if any(mu_s(r) not in (0.0, 1.0) for r in probes):
        raise ValueError("seed measure must be simple (values in {0,1})")
    source = mu_s.space
    full = target.admissible_bits

    def map_bits(bits: int, role: str) -> int:
        v = mu_s(Region(bits, role))
        if v not in (0.0, 1.0):
            raise ValueError("seed measure must be simple (values in {0,1})")
        return full if v == 1.0 else 0

    return ImageTransform(source, target, map_bits, "constant_simple")


def extend_solid_q(q0: Callable[[Region], Region], source: GridSpace,
                   target: GridSpace, check_budget: int = 64,
                   seed: int = 0, descriptor: str = "solid_extension"
                   ) -> ImageTransform:
    """Extend a map given on solid regions to all admissible regions.

    Uses the same complement decomposition as the measure extension:
    components map separately, and a connected non-solid region maps to the
    image of the full space minus the images of its (solid) complement
    components.  The given map is first spot-checked for disjointness-into
    and two-piece partition compatibility.
    """
    rng = derive_rng(seed, "solidq", descriptor)
    full = q0(full_region(source, COMPACT)).bits
    for _ in range(check_budget):
        a = random_solid(source, rng, COMPACT)
        b = complement(source, a)
        if not b.is_empty and is_solid(source, b):
            qa, qb = q0(a), q0(b)
            if qa.bits & qb.bits or (qa.bits | qb.bits) != full:
                raise ExtensionError("solid map is not partition-compatible")
        outer = random_solid(source, rng, COMPACT)
        inner = random_disjoint_solids(source, rng, COMPACT, 2, separation=8)
        inner = [c for c in inner if c.bits & ~outer.bits == 0]
        if len(inner) == 2:
            qi = [q0(c) for c in inner]
            if qi[0].bits & qi[1].bits:
                raise ExtensionError("solid map is not disjointness-preserving")
            if (qi[0].bits | qi[1].bits) & ~q0(outer).bits:
                raise ExtensionError("solid map is not monotone into")

    memo: dict[tuple[int, str], int] = {}

    def eval_region(r: Region) -> int:
        key = (r.bits, r.role)
        got = memo.get(key)
        if got is not None:
            return got
        out = 0
        comps = components_bits(source, r.bits, role_adjacency(r.role))
        if len(comps) > 1:
            for bits in comps:
                piece = eval_region(Region(bits, r.role))
                if piece & out:
                    raise ExtensionError("inconsistent images on components")
                out |= piece
        elif is_solid(source, r):
            out = q0(r).bits
        else:
            dual_role = flip_role(r.role)
            out = full
            for bits in components_bits(source,
                                        source.admissible_bits & ~r.bits,
                                        role_adjacency(dual_role)):
                piece = Region(bits, dual_role)
                if not is_solid(source, piece):
                    raise ExtensionError("non-solid complement component")
                img = q0(piece).bits
                if img & ~out:
                    raise ExtensionError("inconsistent images on complement")
                out &= ~img
        memo[key] = out
        return out

    def map_bits(bits: int, role: str) -> int:
        if bits == 0:
            return 0
        return eval_region(Region(bits, role))

    return ImageTransform(source, target, map_bits, descriptor)


def two_point_hull(space: GridSpace, x: int, z: int) -> ImageTransform:
    """Transform fixing solids with one marked point, filling those with two.

    A solid region maps to itself when it holds exactly one of the two marked
    cells, to the whole space when it holds both, and to nothing otherwise.
    """
    if space.mode != COMPACT:
        raise ValueError("needs a compact space")
    if x == z:
        raise ValueError("marked cells must differ")
    ebits = (1 << x) | (1 << z)
    if ebits & ~space.admissible_bits:
        raise ValueError("marked cells must be interior")
    fullb = space.admissible_bits

    def q0(r: Region) -> Region:
        k = (r.bits & ebits).bit_count()
        if k == 0:
            return Region(0, r.role)
        if k == 1:
            return r
        return Region(fullb, r.role)

    return extend_solid_q(q0, space, space, descriptor="two_point_hull")


def compose(p: ImageTransform, q: ImageTransform) -> ImageTransform:
    """Composition (p o q)(A) = p(q(A)); q's target must be p's source."""
    if q.target != p.source:
        raise ValueError("space mismatch: target of q must be source of p")

    def map_bits(bits: int, role: str) -> int:
        return p.map_bits(q.map_bits(bits, role) & q.target.admissible_bits,
                          role)

    return ImageTransform(q.source, p.target, map_bits,
                          f"compose({p.descriptor},{q.descriptor})")


def adjoint_eval(q: ImageTransform, nu: TopoMeasure, a: Region) -> float:
    """(q* nu)(A) = nu(q(A))."""
    if nu.space != q.target:
        raise ValueError("measure must live on the target space")
    return nu(q.map(a))


def adjoint_measure(q: ImageTransform, nu: TopoMeasure,
                    kind: str | None = None) -> TopoMeasure:
    """The pullback measure q* nu as an evaluator."""
    if nu.space != q.target:
        raise ValueError("measure must live on the target space")
    if kind is None:
        kind = nu.kind if nu.kind in (TOPOLOGICAL, DEFICIENT) else TOPOLOGICAL
    total = nu(q.map(full_region(q.source, COMPACT)))
    return TopoMeasure(q.source, lambda r: nu(q.map(r)), kind=kind,
                       total_mass=total, name=f"{q.descriptor}*{nu.name}")


def theta(q: ImageTransform, f: GridFunction) -> GridFunction:
    """Function-level counterpart of q, assembled over all target cells.

    Computed by one superlevel sweep: theta(f)(y) accumulates the increments
    of f over the thresholds whose mapped superlevel contains y.
    """
    if f.space != q.source:
        raise ValueError("function must live on the source space")
    target = q.target
    values = _distinct_values(f)
    base = min(values[0], 0.0) if q.source.mode != COMPACT else values[0]
    if base < values[0]:
        values = [base] + values
    acc = np.zeros(target.n_cells)
    if base != 0.0:
        top = q.map(full_region(q.source, COMPACT)).bits
        acc += base * _indicator(target, top)
    for v, v_next in zip(values, values[1:]):
        bits = q.map(superlevel(f, v, strict=True)).bits
        acc += (v_next - v) * _indicator(target, bits)
    out = acc.reshape(target.height, target.width)
    return GridFunction(target, out)


def _indicator(space: GridSpace, bits: int) -> np.ndarray:
    return space.bits_to_array(bits).reshape(-1).astype(float)


def theta_eval(q: ImageTransform, f: GridFunction, y: int) -> float:
    """theta(f)(y), the integral of f against the pulled-back point mass."""
    delta = TopoMeasure(q.target,
                        lambda r: 1.0 if y in r else 0.0,
                        kind=TOPOLOGICAL, total_mass=1.0, name=f"delta_{y}")
    return quasi_integral(adjoint_measure(q, delta), f)


def check_it_axioms(q: ImageTransform, budget: int = 100, seed: int = 0) -> CheckReport:
    """Sampled audit of the image-transformation axioms.

    Checks role preservation, monotonicity, disjoint additivity over
    separated pairs, regularity along maximal one-cell compact chains, and
    that the full source covers the full target.
    """
    rng = derive_rng(seed, "it", q.descriptor)
    report = CheckReport(passed=True)
    source, target = q.source, q.target
    if q.map(Region(0, COMPACT)).bits != 0:
        report.add_failure("IT1", "empty region must map to the empty region")
        return report
    fullb = q.map(full_region(source, COMPACT)).bits
    if fullb != target.admissible_bits:
        report.add_failure("IT2", ("full source must cover the full target",
                                   Region(fullb, COMPACT)))
        return report
    for trial in range(budget):
        report.checked += 1
        role = COMPACT if trial % 2 == 0 else OPEN
        a = random_solid(source, rng, role)
        qa = q.map(a)
        if qa.role != role:
            report.add_failure("IT1", a)
            break
        # monotonicity on a nested pair
        grown = Region((dilate_bits(source, a.bits, 4) & source.admissible_bits)
                       | a.bits, role)
        if q.map(a).bits & ~q.map(grown).bits:
            report.add_failure("monotone", (a, grown))
            break
        # IT2: disjoint additivity over separated pairs
        sep = role_adjacency(role)
        pieces = random_disjoint_solids(source, rng, role, 2, separation=sep)
        if len(pieces) == 2:
            b, c = pieces
            img_b, img_c = q.map(b), q.map(c)
            both = Region(b.bits | c.bits, role)
            if img_b.bits & img_c.bits:
                report.add_failure("IT2", (b, c, "images overlap"))
                break
            if q.map(both).bits != (img_b.bits | img_c.bits):
                report.add_failure("IT2", (b, c, "images miss the union"))
                break
        # IT3/IT4 at grid resolution: compacts strictly inside an open region
        # (8-dilation contained) map inside its image, compacts map inside
        # the image of their 8-dilation, and on solid regions the two roles
        # of the same cells agree.
        u = random_solid(source, rng, OPEN)
        k = Region(u.bits & ~dilate_bits(
            source, source.admissible_bits & ~u.bits, 8), COMPACT)
        prev = 0
        while not k.is_empty:
            img = q.map(k).bits
            if img & ~q.map(u).bits or prev & ~img:
                report.add_failure("IT3", (k, u))
                return report
            prev = img
            grown = dilate_bits(source, k.bits, 4) & u.bits & \
                ~dilate_bits(source, source.admissible_bits & ~u.bits, 8)
            if grown == k.bits:
                break
            k = Region(grown, COMPACT)
        c = random_solid(source, rng, COMPACT)
        dil = Region(dilate_bits(source, c.bits, 8)
                     & source.admissible_bits, OPEN)
        if q.map(c).bits & ~q.map(dil).bits:
            report.add_failure("IT4", (c, dil))
            break
        swap = q.map(a.with_role(OPEN if role == COMPACT else COMPACT))
        if is_solid(source, a.with_role(swap.role)) and swap.bits != qa.bits:
            report.add_failure("IT3", (a, "role swap on a solid region"))
            break
    return report


def corrupted_transform(space: GridSpace, cell: int) -> ImageTransform:
    """Deliberately broken fixture: deletes a fixed cell from every image."""
    mask = ~(1 << cell)

    def map_bits(bits: int, role: str) -> int:
        return bits & mask

    return ImageTransform(space, space, map_bits, "corrupted")
