"""Sample-median distributions, order-statistic identities, equivariance."""

from fractions import Fraction

import numpy as np
import pytest

from qmlab.grid import COMPACT, OPEN, GridSpace, is_solid
from qmlab.measures import check_tm1_sampled, make_cell_count
from qmlab.median import (Family1D, Family2D, GridFamily, Interval1D,
                          checked_variable, equivariance_check, gdsm_even,
                          gdsm_eval_1d, gdsm_measure_1d, gdsm_region,
                          gdsm_region_1d, isometry_variable, median_values,
                          monotone_1d_variable, order_statistic,
                          sample_median_q)
from qmlab.sampling import derive_rng
from qmlab.transforms import adjoint_eval, check_it_axioms


def unit_interval(cells=10):
    return Interval1D(0.0, 1.0, cells)


def random_family(rng, n_maps, n_samples, cells=10):
    interval = unit_interval(cells)
    counts = rng.integers(1, 9, size=n_samples)
    total = int(counts.sum())
    weights = [Fraction(int(c), total) for c in counts]
    values = rng.random((n_maps, n_samples))
    return Family1D(interval, weights, values)


def constants_family(values, cells=10, lo=0.0, hi=1.0):
    interval = Interval1D(lo, hi, cells)
    vals = np.array(values, dtype=float).reshape(-1, 1)
    return Family1D(interval, [Fraction(1)], vals)


def test_order_statistic_basics():
    fam = constants_family([3.0, 1.0, 2.0], lo=0.0, hi=4.0)
    assert order_statistic(fam, 1, 0) == 1.0
    assert order_statistic(fam, 2, 0) == 2.0
    assert order_statistic(fam, 3, 0) == 3.0
    assert float(median_values(fam)[0]) == 2.0


def test_constants_odd_is_point_mass():
    fam = constants_family([0.15, 0.55, 0.95])
    masses = gdsm_measure_1d(fam)
    target = fam.interval.cell_of(0.55)
    assert masses[target] == 1
    assert sum(masses) == 1
    # counting sees the mass through any initial segment holding the median
    assert gdsm_region_1d(fam, range(0, target + 1)) == 1
    assert gdsm_region_1d(fam, range(0, target)) == 0


def test_constants_even_splits():
    fam = constants_family([0.15, 0.35, 0.55, 0.95])
    res = gdsm_even(fam)
    c35 = fam.interval.cell_of(0.35)
    c55 = fam.interval.cell_of(0.55)
    assert res.augmented[c35] == Fraction(1, 2)
    assert res.augmented[c55] == Fraction(1, 2)
    assert res.augmented == res.leave_one_out == res.middle_average


def test_hand_enumerated_family():
    # 3 maps on a 2-point space; oracle: enumerate both sample points
    interval = unit_interval(4)
    weights = [Fraction(1, 4), Fraction(3, 4)]
    values = np.array([[0.1, 0.6], [0.3, 0.7], [0.9, 0.25]])
    fam = Family1D(interval, weights, values)
    # sample 0: values (.1,.3,.9) -> cells (0,1,3); sample 1: (.6,.7,.25)
    # -> cells (2,2,1)
    # majority in cells {0,1}: sample 0 yes (2 of 3), sample 1 no (1 of 3)
    assert gdsm_region_1d(fam, [0, 1]) == Fraction(1, 4)
    # majority in {2}: sample 1 yes; majority in {2,3}: sample 1 yes
    assert gdsm_region_1d(fam, [2]) == Fraction(3, 4)
    assert gdsm_region_1d(fam, [2, 3]) == Fraction(3, 4)
    # medians: sample 0 -> 0.3 (cell 1), sample 1 -> 0.6 (cell 2)
    masses = gdsm_measure_1d(fam)
    assert masses == [Fraction(0), Fraction(1, 4), Fraction(3, 4), Fraction(0)]


def test_odd_counting_matches_median_pushforward():
    rng = derive_rng(70, "oddfam")
    for _ in range(60):
        n_maps = int(rng.choice([3, 5, 7]))
        fam = random_family(rng, n_maps, int(rng.integers(2, 30)))
        masses = gdsm_measure_1d(fam)
        # per-cell mass from the structural evaluator
        for j in range(fam.interval.cells):
            assert gdsm_eval_1d(fam, [j]) == masses[j]
        # counting on initial segments is the distribution's own CDF
        acc = Fraction(0)
        for j in range(fam.interval.cells):
            acc += masses[j]
            assert gdsm_region_1d(fam, range(0, j + 1)) == acc


def test_even_identities_random():
    rng = derive_rng(71, "evenfam")
    for _ in range(40):
        n_maps = int(rng.choice([4, 6]))
        fam = random_family(rng, n_maps, int(rng.integers(2, 20)))
        res = gdsm_even(fam)  # raises if the three formulas disagree
        assert sum(res.augmented) == fam.total()


def test_eval_1d_additivity_and_subadditivity():
    rng = derive_rng(72, "adds")
    for _ in range(80):
        fam = random_family(rng, int(rng.choice([3, 5, 7])),
                            int(rng.integers(2, 25)), cells=12)
        m = fam.interval.cells
        a0 = int(rng.integers(0, m - 1))
        a1 = int(rng.integers(a0, m - 1))
        b0 = int(rng.integers(a1 + 1, m))
        b1 = int(rng.integers(b0, m))
        a = set(range(a0, a1 + 1))
        b = set(range(b0, b1 + 1))
        lhs = gdsm_eval_1d(fam, a | b)
        assert lhs == gdsm_eval_1d(fam, a) + gdsm_eval_1d(fam, b)
        # overlapping pair: subadditive
        c = set(range(a0, b1 + 1))
        assert gdsm_eval_1d(fam, c | a) <= gdsm_eval_1d(fam, c) + gdsm_eval_1d(fam, a)


def test_2d_family_counting_and_nonadditivity():
    space = GridSpace(6, 6)
    cells = [space.cell_index(1, 1), space.cell_index(4, 1),
             space.cell_index(2, 4)]
    fam = Family2D(space, [Fraction(1)],
                   np.array(cells, dtype=np.int64).reshape(3, 1))
    from qmlab.grid import rect_region
    a = rect_region(space, 0, 0, 2, 2, COMPACT)   # holds cell (1,1)
    b = rect_region(space, 2, 0, 5, 2, COMPACT)   # holds cell (4,1)
    union = rect_region(space, 0, 0, 5, 2, COMPACT)
    assert gdsm_region(fam, a) == 0
    assert gdsm_region(fam, b) == 0
    assert gdsm_region(fam, union) == 1  # subadditivity fails on this probe
    assert is_solid(space, a) and is_solid(space, b) and is_solid(space, union)


def test_sample_median_q_identity_family():
    space = GridSpace(5, 5)
    ident = np.arange(space.n_cells, dtype=np.int64)
    p = make_cell_count(space)
    fam = GridFamily(space, p, space, np.stack([ident, ident, ident]))
    q = sample_median_q(fam)
    rng = derive_rng(73, "qident")
    from qmlab.sampling import random_solid
    for _ in range(30):
        a = random_solid(space, rng, COMPACT if rng.random() < 0.5 else OPEN)
        assert q.map(a) == a


def test_sample_median_q_constants_family():
    space = GridSpace(5, 5)
    consts = [space.cell_index(1, 1), space.cell_index(3, 1),
              space.cell_index(2, 3)]
    maps = np.stack([np.full(space.n_cells, c, dtype=np.int64) for c in consts])
    p = make_cell_count(space)
    fam = GridFamily(space, p, space, maps)
    q = sample_median_q(fam)
    from qmlab.grid import rect_region, full_region
    holds_two = rect_region(space, 0, 0, 3, 1, COMPACT)
    holds_one = rect_region(space, 0, 0, 1, 1, COMPACT)
    assert q.map(holds_two) == full_region(space, COMPACT)
    assert q.map(holds_one).is_empty
    assert check_it_axioms(q, budget=40, seed=2).passed
    # the adjoint measure is the distribution and extends to a measure family
    pulled = lambda r: adjoint_eval(q, p, r)
    assert pulled(holds_two) == 1.0
    from qmlab.transforms import adjoint_measure
    assert check_tm1_sampled(adjoint_measure(q, p), budget=150, seed=3).passed


def test_grid_family_matches_finite_counting():
    space = GridSpace(5, 5)
    rng = derive_rng(74, "gridfam")
    maps = np.stack([rng.integers(0, space.n_cells, size=space.n_cells)
                     for _ in range(3)]).astype(np.int64)
    p = make_cell_count(space)
    fam_grid = GridFamily(space, p, space, maps)
    # equivalent finite family: every base cell is a sample of weight 1/25
    weights = [Fraction(1, space.n_cells)] * space.n_cells
    fam_fin = Family2D(space, weights, maps)
    q = sample_median_q(fam_grid)
    from qmlab.sampling import random_solid
    for _ in range(40):
        a = random_solid(space, rng, COMPACT)
        assert float(gdsm_region(fam_fin, a)) == pytest.approx(
            adjoint_eval(q, p, a), abs=1e-12)


# -- solid variables and equivariance ------------------------------------------


def test_monotone_variable_equivariance():
    rng = derive_rng(75, "monot")
    target = unit_interval(10)
    for _ in range(50):
        fam = random_family(rng, int(rng.choice([3, 5])),
                            int(rng.integers(2, 20)))
        steps = rng.integers(0, 3, size=10)
        mapping = np.minimum(np.cumsum(steps), 9)
        var = monotone_1d_variable(mapping, 10)
        probes = []
        for _ in range(6):
            lo = int(rng.integers(0, 10))
            hi = int(rng.integers(lo, 10))
            probes.append(list(range(lo, hi + 1)))
        report = equivariance_check(var, fam, probes, target=target)
        assert report.passed


def test_non_monotone_rejected():
    with pytest.raises(ValueError, match="monotone"):
        monotone_1d_variable([0, 2, 1, 3], 4)


def test_checked_variable_catches_folding():
    # a fold x -> |x - mid| pulls solid sets back to split preimages
    space = GridSpace(8, 8)
    target = GridSpace(8, 8)
    fold = np.empty(space.n_cells, dtype=np.int64)
    for idx in range(space.n_cells):
        x, y = space.cell_xy(idx)
        fold[idx] = target.cell_index(abs(x - 4) + 2, y)
    with pytest.raises(ValueError, match="solid"):
        checked_variable(fold, space, target, budget=64, seed=4)


def test_isometry_equivariance_2d():
    space = GridSpace(6, 6)
    rng = derive_rng(76, "iso2d")
    cells = rng.integers(0, space.n_cells, size=(3, 12)).astype(np.int64)
    counts = rng.integers(1, 5, size=12)
    total = int(counts.sum())
    fam = Family2D(space, [Fraction(int(c), total) for c in counts], cells)
    from qmlab.sampling import random_solid
    probes = [random_solid(space, rng, COMPACT) for _ in range(16)]
    for which in range(8):
        var = isometry_variable(space, which)
        report = equivariance_check(var, fam, probes, target=space)
        assert report.passed, which


def test_equivariance_composes():
    rng = derive_rng(77, "compose")
    target = unit_interval(10)
    fam = random_family(rng, 5, 12)
    m1 = np.minimum(np.cumsum(rng.integers(0, 2, size=10)), 9)
    m2 = np.minimum(np.cumsum(rng.integers(0, 3, size=10)), 9)
    v1 = monotone_1d_variable(m1, 10)
    v2 = monotone_1d_variable(m2, 10)
    composed = monotone_1d_variable(m2[m1], 10)
    probes = [list(range(0, 4)), list(range(3, 8)), [9], list(range(10))]
    assert equivariance_check(composed, fam, probes, target=target).passed
