"""Generalized sample-median distributions for finite map families.

The distribution of a family of maps assigns to a set the probability that a
majority of the maps land in it.  For an odd family on a 1-D interval grid
this equals the pushforward of the sample median; even families average the
augmented odd families.  Weights are kept as exact fractions so the
order-statistic identities hold without tolerance.

One-dimensional set evaluation follows the same complement-decomposition
scheme as the planar measure extension: initial and final cell runs are
solid and evaluate by direct counting, interior runs evaluate through their
complement, and multi-run sets sum over runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .grid import COMPACT, GridSpace, Region, is_solid
from .measures import CheckReport, TopoMeasure
from .sampling import derive_rng, random_solid
from .transforms import ImageTransform


@dataclass(frozen=True)
class Interval1D:
    """Uniform cell grid over a closed interval."""

    lo: float
    hi: float
    cells: int

    def __post_init__(self):
        if self.cells < 2 or not self.hi > self.lo:
            raise ValueError("interval grid needs hi > lo and >= 2 cells")

    @property
    def pitch(self) -> float:
        return (self.hi - self.lo) / self.cells

    def cell_of(self, v: float) -> int:
        j = int(np.floor((v - self.lo) / self.pitch))
        return min(max(j, 0), self.cells - 1)

    def center(self, j: int) -> float:
        return self.lo + (j + 0.5) * self.pitch


def _as_fractions(weights) -> tuple[Fraction, ...]:
    out = tuple(w if isinstance(w, Fraction) else Fraction(w) for w in weights)
    if any(w < 0 for w in out):
        raise ValueError("weights must be nonnegative")
    return out


@dataclass(frozen=True)
class Family1D:
    """Finite weighted sample space with real-valued maps into an interval."""

    interval: Interval1D
    weights: tuple[Fraction, ...]
    values: np.ndarray  # shape (n_maps, n_samples)

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_fractions(self.weights))
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != len(self.weights):
            raise ValueError("values must be (n_maps, n_samples)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_maps(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    @property
    def odd(self) -> bool:
        return self.n_maps % 2 == 1

    def cells(self) -> np.ndarray:
        cell = np.vectorize(self.interval.cell_of, otypes=[np.int64])
        return cell(self.values)

    def total(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def with_maps(self, rows: Sequence[int]) -> "Family1D":
        return Family1D(self.interval, self.weights, self.values[list(rows)])

    def augmented(self, j: int) -> "Family1D":
        return Family1D(self.interval, self.weights,
                        np.vstack([self.values, self.values[j:j + 1]]))


def order_statistic(fam: Family1D, k: int, sample: int) -> float:
    """k-th smallest map value at one sample point (duplicates kept)."""
    if not 1 <= k <= fam.n_maps:
        raise ValueError("order statistic index out of range")
    return float(np.sort(fam.values[:, sample])[k - 1])


def median_values(fam: Family1D) -> np.ndarray:
    if not fam.odd:
        raise ValueError("sample median needs an odd family")
    n = (fam.n_maps + 1) // 2
    return np.sort(fam.values, axis=0)[n - 1]


def _counting(fam: Family1D, member: np.ndarray) -> Fraction:
    """Weight of samples where a majority of maps land in the member set."""
    n = (fam.n_maps + 1) // 2  # works for odd 2n-1; callers handle even
    counts = member[fam.cells()].sum(axis=0)
    out = Fraction(0)
    for j, w in enumerate(fam.weights):
        if counts[j] >= n:
            out += w
    return out


def gdsm_region_1d(fam: Family1D, cellset: Sequence[int]) -> Fraction:
    """Defining valuation: weight of a majority of maps landing in the set.

    This is the raw counting value, meaningful on solid sets (initial and
    final runs); arbitrary sets evaluate through :func:`gdsm_eval_1d`.
    """
    if not fam.odd:
        raise ValueError("even families evaluate through gdsm_even")
    member = np.zeros(fam.interval.cells, dtype=bool)
    member[list(cellset)] = True
    return _counting(fam, member)


def _runs(cellset: Sequence[int]) -> list[tuple[int, int]]:
    cells = sorted(set(int(c) for c in cellset))
    runs = []
    for c in cells:
        if runs and c == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], c)
        else:
            runs.append((c, c))
    return runs


def gdsm_eval_1d(fam: Family1D, cellset: Sequence[int]) -> Fraction:
    """Set evaluation of the odd distribution by complement decomposition."""
    if not fam.odd:
        raise ValueError("even families evaluate through gdsm_even")
    m = fam.interval.cells
    total = fam.total()
    out = Fraction(0)
    for a, b in _runs(cellset):
        if a < 0 or b >= m:
            raise ValueError("cells out of range")
        if a == 0 or b == m - 1:
            out += gdsm_region_1d(fam, range(a, b + 1))
        else:
            left = gdsm_region_1d(fam, range(0, a))
            right = gdsm_region_1d(fam, range(b + 1, m))
            out += total - left - right
    return out


def gdsm_measure_1d(fam: Family1D) -> list[Fraction]:
    """Per-cell distribution; odd: median pushforward, even: the averaged
    pushforwards of the two middle order statistics."""
    m = fam.interval.cells
    if fam.odd:
        med = median_values(fam)
        out = [Fraction(0)] * m
        for j, w in enumerate(fam.weights):
            out[fam.interval.cell_of(float(med[j]))] += w
        return out
    n = fam.n_maps // 2
    stat_n = np.sort(fam.values, axis=0)[n - 1]
    stat_n1 = np.sort(fam.values, axis=0)[n]
    out = [Fraction(0)] * m
    for j, w in enumerate(fam.weights):
        out[fam.interval.cell_of(float(stat_n[j]))] += w * Fraction(1, 2)
        out[fam.interval.cell_of(float(stat_n1[j]))] += w * Fraction(1, 2)
    return out


@dataclass
class EvenResult:
    augmented: list[Fraction]
    leave_one_out: list[Fraction]
    middle_average: list[Fraction]

    def masses(self) -> list[Fraction]:
        return self.augmented


def gdsm_even(fam: Family1D, cellset: Sequence[int] | None = None):
    """Even-family distribution computed three ways, checked for equality.

    Returns per-cell masses by default, or the three set evaluations when a
    cell set is given.  The augmented average, the leave-one-out average and
    the averaged middle order statistics must coincide exactly; any
    disagreement flags an implementation bug.
    """
    if fam.odd:
        raise ValueError("family has an odd number of maps")
    two_n = fam.n_maps
    if cellset is not None:
        aug = sum((gdsm_eval_1d(fam.augmented(j), cellset)
                   for j in range(two_n)), Fraction(0)) / two_n
        loo = sum((gdsm_eval_1d(fam.with_maps([i for i in range(two_n) if i != j]),
                                cellset)
                   for j in range(two_n)), Fraction(0)) / two_n
        mid = sum((gdsm_measure_1d(fam)[c] for c in set(cellset)), Fraction(0))
        if not aug == loo == mid:
            raise AssertionError("even-family formulas disagree")
        return aug
    m = fam.interval.cells
    aug = [Fraction(0)] * m
    loo = [Fraction(0)] * m
    for j in range(two_n):
        for c, w in enumerate(gdsm_measure_1d(fam.augmented(j))):
            aug[c] += w / two_n
        rest = fam.with_maps([i for i in range(two_n) if i != j])
        for c, w in enumerate(gdsm_measure_1d(rest)):
            loo[c] += w / two_n
    mid = gdsm_measure_1d(fam)
    result = EvenResult(aug, loo, mid)
    if not (aug == loo == mid):
        raise AssertionError("even-family formulas disagree")
    return result


# -- planar families -----------------------------------------------------------


@dataclass(frozen=True)
class Family2D:
    """Finite weighted sample space with maps into a planar grid."""

    space: GridSpace
    weights: tuple[Fraction, ...]
    cells: np.ndarray  # shape (n_maps, n_samples), cell indices

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_fractions(self.weights))
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] != len(self.weights):
            raise ValueError("cells must be (n_maps, n_samples)")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def n_maps(self) -> int:
        return self.cells.shape[0]

    @property
    def odd(self) -> bool:
        return self.n_maps % 2 == 1


def gdsm_region(fam: Family2D, a: Region) -> Fraction:
    """Weight of samples with a majority of maps landing in the region."""
    if not fam.odd:
        raise ValueError("even planar families evaluate map by map; "
                         "average the augmented families")
    n = (fam.n_maps + 1) // 2
    member = fam.space.bits_to_array(a.bits).reshape(-1)
    counts = member[fam.cells].sum(axis=0)
    out = Fraction(0)
    for j, w in enumerate(fam.weights):
        if counts[j] >= n:
            out += w
    return out


@dataclass(frozen=True)
class GridFamily:
    """Maps between grids, with a topological measure on the sample space."""

    base: GridSpace
    measure: TopoMeasure
    space: GridSpace
    maps: np.ndarray  # shape (n_maps, base cells), cell indices into space

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.int64)
        maps.setflags(write=False)
        object.__setattr__(self, "maps", maps)
        if maps.shape[1] != self.base.n_cells:
            raise ValueError("each map must cover the sample grid")

    @property
    def n_maps(self) -> int:
        return self.maps.shape[0]


def sample_median_q(fam: GridFamily) -> ImageTransform:
    """Majority transform of a grid family, as an image transformation.

    On solid regions ``q(A)`` collects the sample cells where at least half
    (n of 2n-1) of the maps land in A; the rule is only additive on solid
    regions, so arbitrary regions evaluate through the solid extension.  The
    adjoint against the base measure reproduces the distribution of the
    family.
    """
    if fam.n_maps % 2 == 0:
        raise ValueError("majority transform needs an odd family")
    n = (fam.n_maps + 1) // 2
    space, base, maps = fam.space, fam.base, fam.maps

    def majority_bits(bits: int) -> int:
        if bits == 0:
            return 0
        nbytes = (space.n_cells + 7) // 8
        raw = np.frombuffer(bits.to_bytes(nbytes, "little"), dtype=np.uint8)
        table = np.unpackbits(raw, bitorder="little")[:space.n_cells]
        counts = table[maps].sum(axis=0)
        hit = counts >= n
        return base.array_to_bits(hit.reshape(base.height, base.width))

    from .transforms import extend_solid_q

    def q0(r: Region) -> Region:
        return Region(majority_bits(r.bits), r.role)

    return extend_solid_q(q0, space, base, descriptor="sample_median_q")


def gdsm_grid(fam: GridFamily, a: Region) -> float:
    """Distribution value through the majority transform and base measure."""
    q = sample_median_q(fam)
    return fam.measure(q.map(a))


# -- solid variables and equivariance -------------------------------------------


@dataclass(frozen=True)
class SolidVariable:
    """Cell map whose preimages of solid sets are solid.

    ``certificate`` is ``"monotone-1d"`` for nondecreasing interval maps,
    ``"grid-isometry"`` for the symmetries of a square grid, or ``"checked"``
    for maps certified by brute-force sampling.
    """

    mapping: np.ndarray  # per-cell image indices
    certificate: str
    source_cells: int
    target_cells: int

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=np.int64)
        m.setflags(write=False)
        object.__setattr__(self, "mapping", m)
        if len(m) != self.source_cells:
            raise ValueError("mapping must cover the source")
        if m.min() < 0 or m.max() >= self.target_cells:
            raise ValueError("mapping leaves the target")

    def preimage_cells(self, target_cells: Sequence[int]) -> np.ndarray:
        member = np.zeros(self.target_cells, dtype=bool)
        member[list(target_cells)] = True
        return np.nonzero(member[self.mapping])[0]


def monotone_1d_variable(mapping: Sequence[int], target_cells: int) -> SolidVariable:
    m = np.asarray(mapping, dtype=np.int64)
    if not (np.diff(m) >= 0).all():
        raise ValueError("map is not monotone")
    return SolidVariable(m, "monotone-1d", len(m), target_cells)


def isometry_variable(space: GridSpace, which: int) -> SolidVariable:
    from .transforms import grid_isometry_map
    return SolidVariable(grid_isometry_map(space, which), "grid-isometry",
                         space.n_cells, space.n_cells)


def checked_variable(mapping: Sequence[int], source: GridSpace,
                     target: GridSpace, budget: int = 64,
                     seed: int = 0) -> SolidVariable:
    """Brute-force certification: preimages of sampled solids are solid."""
    var = SolidVariable(np.asarray(mapping), "checked",
                        source.n_cells, target.n_cells)
    rng = derive_rng(seed, "solidvar")
    for trial in range(budget):
        role = COMPACT if trial % 2 == 0 else "open"
        a = random_solid(target, rng, role)
        pre_cells = var.preimage_cells(target.cells_of(a.bits))
        if len(pre_cells) == 0:
            continue
        bits = 0
        for c in pre_cells:
            bits |= 1 << int(c)
        if not is_solid(source, Region(bits, role)):
            raise ValueError("preimage of a solid set is not solid")
    return var


def compose_family_1d(var: SolidVariable, fam: Family1D,
                      target: Interval1D) -> Family1D:
    """Family of f composed with the maps, valued at target cell centers."""
    cells = fam.cells()
    new_cells = var.mapping[cells]
    values = np.vectorize(target.center)(new_cells)
    return Family1D(target, fam.weights, values)


def compose_family_2d(var: SolidVariable, fam: Family2D,
                      target: GridSpace) -> Family2D:
    return Family2D(target, fam.weights, var.mapping[fam.cells])


def equivariance_check(var: SolidVariable, fam, probes,
                       target=None) -> CheckReport:
    """Exact equivariance of the distribution under a solid variable.

    For every probe A the distribution of the composed family on A must
    equal the distribution of the original family on the preimage of A.
    """
    report = CheckReport(passed=True)
    if isinstance(fam, Family1D):
        if target is None:
            raise ValueError("target interval required")
        composed = compose_family_1d(var, fam, target)
        for probe in probes:
            report.checked += 1
            pre = var.preimage_cells(probe)
            lhs = gdsm_eval_1d(composed, probe) if fam.odd else \
                gdsm_even(composed, probe)
            rhs = gdsm_eval_1d(fam, pre) if fam.odd else gdsm_even(fam, pre)
            if lhs != rhs:
                report.add_failure("equivariance", (probe, lhs, rhs))
                break
    elif isinstance(fam, Family2D):
        if target is None:
            raise ValueError("target space required")
        composed = compose_family_2d(var, fam, target)
        for probe in probes:
            report.checked += 1
            pre_cells = var.preimage_cells(target.cells_of(probe.bits))
            bits = 0
            for c in pre_cells:
                bits |= 1 << int(c)
            pre = Region(bits, probe.role)
            lhs = gdsm_region(composed, probe)
            rhs = gdsm_region(fam, pre)
            if lhs != rhs:
                report.add_failure("equivariance", (probe, lhs, rhs))
                break
    else:
        raise TypeError("unsupported family type")
    return report
