"""Solid-set functions, their extension to topological measures, and the
example gallery.

A solid-set function assigns nonnegative values to solid regions only.  The
extension evaluator defined here produces values for arbitrary admissible
regions by complement decomposition:

* a multi-component region is the sum of its components (components of a
  compact-role region are mutually 8-separated, open-role ones mutually
  4-separated, so additivity over them is forced);
* a connected solid region evaluates through the seed directly;
* a connected non-solid region in compact mode satisfies
  ``value(R) = total - sum(value(T_i))`` over the complement components
  ``T_i``, each of which is itself solid;
* in marked-infinity mode a connected region is evaluated against its solid
  hull: ``value(R) = value(hull) - sum(value(holes))``.

The complement components of a connected region are always solid here (their
complements glue together through the region), so the recursion bottoms out
after one level.  A failure of that property signals an inconsistent seed and
raises :class:`ExtensionError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import (COMPACT, OPEN, GridSpace, Region, boundary_cells,
                   check_admissible, complement, components_bits,
                   dilate_bits, disk_region, flip_role, full_region,
                   is_precompact, is_solid, role_adjacency, solid_hull)
from .sampling import random_disjoint_solids, random_solid, random_solid_inside

TOPOLOGICAL = "topological"
DEFICIENT = "deficient"
MEASURE = "measure"


class ExtensionError(RuntimeError):
    """Raised when complement decomposition meets a non-solid piece."""


class ValuationGapError(RuntimeError):
    """Raised when a seed has no value on a sampled solid region."""


@dataclass(frozen=True)
class SolidSetFunction:
    """Valuation defined on solid regions; the seed of a topological measure.

    ``total`` is the value of the full space in compact mode and the
    supremum over compact solid regions (possibly ``inf``) otherwise.
    """

    space: GridSpace
    valuate: Callable[[Region], float]
    total: float
    name: str = "ssf"

    def __call__(self, r: Region) -> float:
        v = self.valuate(r)
        if v is None:
            raise ValuationGapError(f"valuation gap at region of size {r.size()}")
        if v < 0 or math.isnan(v):
            raise ValueError(f"{self.name}: negative or NaN value {v}")
        return float(v)


class TopoMeasure:
    """Memoized evaluator for regions; kind records which axioms hold.

    ``kind`` is ``"topological"`` (additive over disjoint compact/open
    unions), ``"deficient"`` (additive over disjoint compact pairs only) or
    ``"measure"`` (also subadditive).
    """

    def __init__(self, space: GridSpace, eval_fn: Callable[[Region], float],
                 kind: str = TOPOLOGICAL, total_mass: float | None = None,
                 name: str = "measure"):
        self.space = space
        self.kind = kind
        self.name = name
        self._eval_fn = eval_fn
        self._memo: dict[tuple[int, str], float] = {}
        if total_mass is None:
            total_mass = eval_fn(full_region(space, COMPACT))
        self.total_mass = total_mass

    def eval(self, r: Region) -> float:
        if r.is_empty:
            return 0.0
        key = (r.bits, r.role)
        got = self._memo.get(key)
        if got is None:
            got = self._eval_fn(r)
            self._memo[key] = got
        return got

    def __call__(self, r: Region) -> float:
        return self.eval(r)

    @property
    def is_simple(self) -> bool:
        return self.total_mass == 1.0

    @classmethod
    def from_ssf(cls, ssf: SolidSetFunction, kind: str = TOPOLOGICAL) -> "TopoMeasure":
        evaluator = _Extension(ssf)
        total = ssf.total
        return cls(ssf.space, evaluator, kind=kind, total_mass=total,
                   name=ssf.name)


class _Extension:
    """Extension of a solid-set function by complement decomposition."""

    def __init__(self, ssf: SolidSetFunction):
        self.ssf = ssf
        self.space = ssf.space

    def __call__(self, r: Region) -> float:
        space = self.space
        check_admissible(space, r)
        if space.mode != COMPACT and not is_precompact(space, r):
            if r.bits == space.admissible_bits:
                return self.ssf.total
            raise ValueError("marked-infinity evaluation needs a precompact region")
        total = 0.0
        own = role_adjacency(r.role)
        for bits in components_bits(space, r.bits, own):
            total += self._connected(Region(bits, r.role))
        return total

    def _connected(self, r: Region) -> float:
        space = self.space
        if is_solid(space, r):
            return self.ssf(r)
        dual_role = flip_role(r.role)
        dual_adj = role_adjacency(dual_role)
        comp = space.admissible_bits & ~r.bits
        if space.mode == COMPACT:
            value = self.ssf.total
            for bits in components_bits(space, comp, dual_adj):
                piece = Region(bits, dual_role)
                if not is_solid(space, piece):
                    raise ExtensionError("extension inconsistency: "
                                         "non-solid complement component")
                value -= self.ssf(piece)
            return value
        hull = solid_hull(space, r)
        if not is_solid(space, hull):
            raise ExtensionError("extension inconsistency: hull not solid")
        value = self.ssf(hull)
        for bits in components_bits(space, comp, dual_adj):
            if bits & space.frame_bits:
                continue
            piece = Region(bits, dual_role)
            if not is_solid(space, piece):
                raise ExtensionError("extension inconsistency: "
                                     "non-solid hole")
            value -= self.ssf(piece)
        return value


def extend(ssf: SolidSetFunction) -> TopoMeasure:
    """Topological measure extending a solid-set function."""
    return TopoMeasure.from_ssf(ssf, kind=TOPOLOGICAL)


# -- gallery -----------------------------------------------------------------


def make_point_mass(space: GridSpace, cell: int) -> SolidSetFunction:
    if not (1 << cell) & space.admissible_bits:
        raise ValueError("cell not admissible")

    def valuate(r: Region) -> float:
        return 1.0 if cell in r else 0.0

    return SolidSetFunction(space, valuate, total=1.0, name="point_mass")


def make_point_config(space: GridSpace, points: list[int]) -> SolidSetFunction:
    """Seed worth i/n on solid regions holding 2i or 2i+1 of 2n+1 points."""
    if len(points) < 3 or len(points) % 2 == 0:
        raise ValueError("need an odd number (>= 3) of points")
    if len(set(points)) != len(points):
        raise ValueError("points must be pairwise distinct")
    pbits = 0
    for p in points:
        pbits |= 1 << p
    if pbits & ~space.admissible_bits:
        raise ValueError("points must be interior")
    if space.mode != COMPACT and pbits & space.frame_bits:
        raise ValueError("points must stay off the frame")
    n = (len(points) - 1) // 2

    def valuate(r: Region) -> float:
        return ((r.bits & pbits).bit_count() // 2) / n

    return SolidSetFunction(space, valuate, total=1.0, name="points_2n1")


def make_weighted_two_point(space: GridSpace, p1: int, p2: int,
                            cell_area: float | None = None) -> SolidSetFunction:
    """Area-weighted two-point seed on a marked-infinity space.

    Solid regions missing both points weigh 0; holding exactly one of them
    they weigh their area; holding both, twice their area.
    """
    if space.mode == COMPACT:
        raise ValueError("needs a marked-infinity space")
    if p1 == p2:
        raise ValueError("points must differ")
    pbits = (1 << p1) | (1 << p2)
    if pbits & ~space.admissible_bits or pbits & space.frame_bits:
        raise ValueError("points must be interior")
    if cell_area is None:
        cell_area = space.cell_size ** 2

    def valuate(r: Region) -> float:
        k = (r.bits & pbits).bit_count()
        if k == 0:
            return 0.0
        return k * r.size() * cell_area

    return SolidSetFunction(space, valuate, total=math.inf,
                            name="two_point_weighted")


def make_aarnes_circle(space: GridSpace, p: int) -> SolidSetFunction:
    """Simple seed on a disk-like compact space.

    Worth 1 on solid regions that contain the whole boundary, or contain the
    marked interior point and touch the boundary; 0 otherwise.
    """
    if space.mode != COMPACT:
        raise ValueError("needs a compact space")
    bbits = boundary_cells(space, full_region(space, COMPACT)).bits
    if (1 << p) & bbits or not (1 << p) & space.admissible_bits:
        raise ValueError("p must be strictly interior")

    def valuate(r: Region) -> float:
        if bbits & ~r.bits == 0:
            return 1.0
        if p in r and r.bits & bbits:
            return 1.0
        return 0.0

    return SolidSetFunction(space, valuate, total=1.0, name="aarnes_circle")


def make_diffuse_dtm(space: GridSpace, d: Region) -> TopoMeasure:
    """Deficient evaluator: 1 exactly on regions containing a fixed blob.

    The blob is a closed set; it sits inside an open-role region only when
    the region also covers its 8-neighborhood (the blob's boundary must be
    interior to the region).
    """
    check_admissible(space, d)
    if d.size() < 2:
        raise ValueError("blob needs at least 2 cells")
    from .grid import connected_bits
    if not connected_bits(space, d.bits, 8):
        raise ValueError("blob must be connected")
    dbits = d.bits
    d_closure = dilate_bits(space, dbits, 8) & space.admissible_bits

    def eval_fn(r: Region) -> float:
        need = dbits if r.role == COMPACT else d_closure
        return 1.0 if need & ~r.bits == 0 else 0.0

    return TopoMeasure(space, eval_fn, kind=DEFICIENT, total_mass=1.0,
                       name="diffuse_dtm")


def make_cell_count(space: GridSpace, normalized: bool = True) -> TopoMeasure:
    """Plain counting measure over admissible cells (a genuine measure)."""
    n = space.admissible_bits.bit_count()
    scale = 1.0 / n if normalized else 1.0
    return TopoMeasure(space, lambda r: r.size() * scale, kind=MEASURE,
                       total_mass=n * scale, name="cell_count")


GALLERY_SEEDS = ("point_mass", "points_2n1", "two_point_weighted",
                 "aarnes_circle", "diffuse_dtm", "cell_count")


# -- axiom and criteria checkers ----------------------------------------------


@dataclass
class CheckReport:
    passed: bool
    checked: int = 0
    witnesses: list = field(default_factory=list)

    def add_failure(self, label: str, detail) -> None:
        self.passed = False
        self.witnesses.append((label, detail))


def check_ssf_axioms(ssf: SolidSetFunction, budget: int = 200,
                     seed: int = 0) -> CheckReport:
    """Sampled audit of the solid-set-function axioms.

    Superadditivity over disjoint solid compacts inside a solid compact,
    regularity against same-cell role swaps and one-cell dilations/erosions,
    and two-piece partition additivity (compact mode).  Reports the first
    witness per axiom.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    from .sampling import derive_rng
    space = ssf.space
    report = CheckReport(passed=True)
    tol = 1e-12

    rng = derive_rng(seed, "ssf", ssf.name)
    for trial in range(budget):
        report.checked += 1
        outer = random_solid(space, rng, COMPACT)
        # (s1) superadditivity inside a solid compact
        sep = role_adjacency(COMPACT)
        inner = random_disjoint_solids(space, rng, COMPACT, count=3, separation=sep)
        inner = [c for c in inner if c.bits & ~outer.bits == 0]
        if inner:
            lhs = sum(ssf(c) for c in inner)
            if lhs > ssf(outer) + tol:
                report.add_failure("s1", (outer, inner))
                break
        # monotonicity on nested solids
        sub = random_solid_inside(space, rng, outer, COMPACT, tries=8)
        if sub is not None and ssf(sub) > ssf(outer) + tol:
            report.add_failure("monotone", (sub, outer))
            break
        # (s2)/(s3) regularity.  At fixed resolution the inf/sup over strictly
        # smaller/larger solid regions cannot reach the value itself, so the
        # executable transcription is: same cells under the swapped role must
        # agree exactly, one-cell erosions stay below, one-cell dilations
        # stay above.
        u = outer.with_role(OPEN)
        if is_solid(space, u):
            if abs(ssf(u) - ssf(outer)) > tol:
                report.add_failure("s2", (u, outer))
                break
            eroded = outer.bits & ~dilate_bits(
                space, space.admissible_bits & ~outer.bits, 8)
            if eroded:
                er = Region(eroded, COMPACT)
                if is_solid(space, er) and ssf(er) > ssf(u) + tol:
                    report.add_failure("s2", (u, er))
                    break
        dil_bits = dilate_bits(space, outer.bits, 8) & space.admissible_bits
        dl = Region(dil_bits, OPEN)
        if ((space.mode == COMPACT or is_precompact(space, dl))
                and is_solid(space, dl) and ssf(outer) > ssf(dl) + tol):
            report.add_failure("s3", (outer, dl))
            break
        # (s4) two-piece partition of the space (automatic when noncompact)
        if space.mode == COMPACT:
            a = random_solid(space, rng, COMPACT)
            b = complement(space, a)
            if not b.is_empty and is_solid(space, b):
                if abs(ssf.total - ssf(a) - ssf(b)) > tol:
                    report.add_failure("s4", (a, b))
                    break
    return report


def check_measure_criteria(mu: TopoMeasure, budget: int = 200, seed: int = 0,
                           probes: list[tuple[Region, Region]] | None = None
                           ) -> CheckReport:
    """Sampled subadditivity audit: evidence that ``mu`` extends to a measure.

    Samples pairs of compact-role and open-role regions (blobs and digital
    disks) and checks ``mu(A u B) <= mu(A) + mu(B)``; any violation is
    reported with its witness pair.  Optional explicit probe pairs are
    checked first.
    """
    from .sampling import derive_rng
    space = mu.space
    report = CheckReport(passed=True)
    tol = 1e-12
    rng = derive_rng(seed, "subadd", mu.name)

    def check_pair(a: Region, b: Region) -> bool:
        union = Region(a.bits | b.bits, a.role)
        if space.mode != COMPACT and not is_precompact(space, union):
            return True
        report.checked += 1
        if mu(union) > mu(a) + mu(b) + tol:
            report.add_failure("subadditivity", (a, b, union))
            return False
        return True

    for a, b in probes or []:
        if not check_pair(a, b):
            return report

    n_adm = space.admissible_bits.bit_count()
    x0, y0 = space.origin
    x1 = x0 + (space.width - 1) * space.cell_size
    y1 = y0 + (space.height - 1) * space.cell_size
    span = min(x1 - x0, y1 - y0)
    for trial in range(budget):
        role = COMPACT if trial % 2 == 0 else OPEN
        if rng.random() < 0.4:
            a = random_solid(space, rng, role, max_cells=max(1, n_adm // 6))
            b = random_solid(space, rng, role, max_cells=max(1, n_adm // 6))
        else:
            # overlapping interior disk pairs: where subadditivity breaks first
            r_hi = max(2.5 * space.cell_size, span / 4)
            ra = rng.uniform(1.5 * space.cell_size, r_hi)
            rb = rng.uniform(1.5 * space.cell_size, r_hi)
            ca = (rng.uniform(x0 + 0.2 * span, x1 - 0.2 * span),
                  rng.uniform(y0 + 0.2 * span, y1 - 0.2 * span))
            ang = rng.uniform(0, 2 * np.pi)
            gap = rng.uniform(0, 0.8) * (ra + rb)
            cb = (ca[0] + gap * np.cos(ang), ca[1] + gap * np.sin(ang))
            a = disk_region(space, ca, ra, role)
            b = disk_region(space, cb, rb, role)
            if a.is_empty or b.is_empty:
                continue
        if space.mode != COMPACT:
            if not (is_precompact(space, a) and is_precompact(space, b)):
                continue
        if not check_pair(a, b):
            break
    return report


def check_tm1_sampled(mu: TopoMeasure, budget: int = 200, seed: int = 0) -> CheckReport:
    """Sampled additivity over valid disjoint pairs, per the measure's kind.

    Compact-role pairs must be 8-separated; open-role pairs (checked only for
    topological kind) 4-separated.
    """
    from .sampling import derive_rng
    space = mu.space
    report = CheckReport(passed=True)
    tol = 1e-12
    rng = derive_rng(seed, "tm1", mu.name)
    roles = [COMPACT] if mu.kind == DEFICIENT else [COMPACT, OPEN]
    for trial in range(budget):
        role = roles[trial % len(roles)]
        sep = role_adjacency(role)
        pieces = random_disjoint_solids(space, rng, role, count=2, separation=sep)
        if len(pieces) < 2:
            continue
        a, b = pieces
        union = Region(a.bits | b.bits, role)
        if space.mode != COMPACT and not is_precompact(space, union):
            continue
        report.checked += 1
        if abs(mu(union) - mu(a) - mu(b)) > tol:
            report.add_failure("tm1", (a, b))
            break
    return report


def check_superadditivity(mu: TopoMeasure, budget: int = 200, seed: int = 0) -> CheckReport:
    """mu(A) >= sum mu(A_t) over sampled disjoint families inside A."""
    from .sampling import derive_rng
    space = mu.space
    report = CheckReport(passed=True)
    tol = 1e-12
    rng = derive_rng(seed, "superadd", mu.name)
    for trial in range(budget):
        role = COMPACT if trial % 2 == 0 else OPEN
        outer = random_solid(space, rng, role)
        inner_role = COMPACT
        pieces = random_disjoint_solids(space, rng, inner_role, count=3,
                                        separation=8)
        pieces = [p for p in pieces if p.bits & ~outer.bits == 0]
        if not pieces:
            continue
        if space.mode != COMPACT and not is_precompact(space, outer):
            continue
        report.checked += 1
        if sum(mu(p) for p in pieces) > mu(outer) + tol:
            report.add_failure("superadditivity", (outer, pieces))
            break
    return report
