"""Image transformations, adjoints, and the function-level map theta."""

import numpy as np
import pytest

from qmlab.grid import (COMPACT, OPEN, GridSpace, Region, full_region,
                        rect_region)
from qmlab.integrals import quasi_integral, superlevel
from qmlab.measures import (extend, make_aarnes_circle, make_cell_count,
                            make_point_config, make_point_mass)
from qmlab.sampling import derive_rng, random_grid_function, random_solid
from qmlab.transforms import (adjoint_eval, adjoint_measure, check_it_axioms,
                              compose, constant_from_simple,
                              corrupted_transform, extend_solid_q,
                              from_proper_map, grid_isometry_map,
                              identity_transform, theta, theta_eval,
                              two_point_hull)


def rotation_transform(space):
    return from_proper_map(grid_isometry_map(space, 1), space, space)


def delta(space, cell):
    return extend(make_point_mass(space, cell))


def test_identity_preimage(square6):
    q = from_proper_map(np.arange(square6.n_cells), square6, square6)
    r = rect_region(square6, 1, 1, 3, 4, COMPACT)
    assert q.map(r) == r


def test_rotation_permutes_regions(square6):
    q = rotation_transform(square6)
    r = rect_region(square6, 0, 0, 1, 2, OPEN)
    img = q.map(r)
    assert img.size() == r.size() and img.role == OPEN
    # oracle: preimage of r under the underlying cell permutation
    u = grid_isometry_map(square6, 1)
    want = {y for y in range(square6.n_cells) if (1 << u[y]) & r.bits}
    assert set(square6.cells_of(img.bits)) == want


def test_constant_cell_map(square6):
    c = square6.cell_index(2, 3)
    u = np.full(square6.n_cells, c)
    q = from_proper_map(u, square6, square6)
    holds = rect_region(square6, 1, 2, 3, 4, COMPACT)
    misses = rect_region(square6, 4, 0, 5, 1, COMPACT)
    assert q.map(holds) == full_region(square6, COMPACT)
    assert q.map(misses).is_empty


def test_proper_map_rejected_when_not_proper():
    space = GridSpace(9, 9, mode="marked_infinity")
    c = space.cell_index(4, 4)
    u = np.full(space.n_cells, c)  # constant map: preimage of {c} is everything
    with pytest.raises(ValueError, match="proper"):
        from_proper_map(u, space, space)


def test_constant_from_simple_adjoint_is_constant(square6):
    mu_s = extend(make_aarnes_circle(square6, square6.cell_index(2, 2)))
    q = constant_from_simple(mu_s, square6)
    rng = derive_rng(31, "const")
    count = make_cell_count(square6)
    for _ in range(40):
        a = random_solid(square6, rng, COMPACT if rng.random() < 0.5 else OPEN)
        assert adjoint_eval(q, count, a) == mu_s(a)
        assert adjoint_eval(q, delta(square6, 17), a) == mu_s(a)


def test_constant_from_simple_rejects_non_simple(square6):
    with pytest.raises(ValueError, match="simple"):
        constant_from_simple(make_cell_count(square6), square6)


def test_two_point_hull_values(square6):
    x, z = square6.cell_index(1, 1), square6.cell_index(4, 4)
    q = two_point_hull(square6, x, z)
    only_x = rect_region(square6, 0, 0, 2, 2, COMPACT)
    both = Region(rect_region(square6, 0, 0, 2, 2).bits
                  | rect_region(square6, 3, 3, 5, 5).bits, COMPACT)
    neither = rect_region(square6, 3, 0, 5, 0, COMPACT)
    assert q.map(only_x) == only_x
    assert q.map(neither).is_empty
    # both: the solid hull of the two blocks is everything
    from qmlab.grid import is_solid
    blk = rect_region(square6, 0, 0, 4, 4, COMPACT)  # solid, holds x and z
    assert q.map(blk) == full_region(square6, COMPACT)
    assert check_it_axioms(q, budget=60, seed=1).passed


def test_extend_solid_q_identity(square6):
    q = extend_solid_q(lambda r: r, square6, square6)
    rng = derive_rng(33, "extid")
    for _ in range(40):
        bits = int(rng.integers(1, 1 << 36))
        r = Region(bits & square6.admissible_bits, COMPACT)
        if r.is_empty:
            continue
        assert q.map(r) == r


def test_extend_solid_q_matches_preimage_path(square6):
    u = grid_isometry_map(square6, 3)
    q_full = from_proper_map(u, square6, square6)
    q_ext = extend_solid_q(lambda r: q_full.map(r), square6, square6)
    rng = derive_rng(34, "extrot")
    for _ in range(60):
        bits = int(rng.integers(1, 1 << 36)) & square6.admissible_bits
        for role in (COMPACT, OPEN):
            r = Region(bits, role)
            if r.is_empty:
                continue
            assert q_ext.map(r) == q_full.map(r)


def test_compose(square6):
    q1 = rotation_transform(square6)
    q_id = identity_transform(square6)
    r = rect_region(square6, 0, 1, 2, 3, COMPACT)
    assert compose(q_id, q1).map(r) == q1.map(r)
    # two quarter turns equal a half turn
    half = from_proper_map(grid_isometry_map(square6, 2), square6, square6)
    assert compose(q1, q1).map(r) == half.map(r)


def test_compose_space_mismatch(square6):
    other = GridSpace(8, 8)
    q1 = identity_transform(square6)
    q2 = identity_transform(other)
    with pytest.raises(ValueError, match="mismatch"):
        compose(q1, q2)


def test_compose_adjoint_contravariant(square6):
    p = rotation_transform(square6)
    q = from_proper_map(grid_isometry_map(square6, 4), square6, square6)
    pq = compose(p, q)
    rng = derive_rng(35, "adjcomp")
    nus = [make_cell_count(square6), delta(square6, 9),
           extend(make_aarnes_circle(square6, square6.cell_index(3, 3)))]
    for _ in range(100):
        nu = nus[int(rng.integers(len(nus)))]
        a = random_solid(square6, rng, COMPACT if rng.random() < 0.5 else OPEN)
        lhs = adjoint_eval(pq, nu, a)
        rhs = adjoint_eval(q, adjoint_measure(p, nu), a)
        assert lhs == rhs


def test_adjoint_of_delta_is_delta_at_image(square6):
    u = grid_isometry_map(square6, 1)
    q = from_proper_map(u, square6, square6)
    y = square6.cell_index(2, 5)
    x = int(u[y])
    rng = derive_rng(36, "adjdelta")
    dy = delta(square6, y)
    for _ in range(40):
        a = random_solid(square6, rng, COMPACT)
        assert adjoint_eval(q, dy, a) == (1.0 if x in a else 0.0)


def test_adjoint_linear_combinations(square6):
    q = rotation_transform(square6)
    mu, nu = make_cell_count(square6), delta(square6, 21)
    rng = derive_rng(37, "adjlin")
    for _ in range(50):
        a = random_solid(square6, rng, OPEN)
        w1, w2 = rng.uniform(0, 2), rng.uniform(0, 2)
        lhs = w1 * adjoint_eval(q, mu, a) + w2 * adjoint_eval(q, nu, a)
        combo_eval = lambda r: w1 * mu(r) + w2 * nu(r)
        from qmlab.measures import TopoMeasure
        combo = TopoMeasure(square6, combo_eval, total_mass=w1 + w2)
        assert adjoint_eval(q, combo, a) == pytest.approx(lhs, abs=1e-12)


def test_adjoint_output_is_topological(square6):
    from qmlab.measures import check_superadditivity, check_tm1_sampled
    mu = extend(make_point_config(square6, [square6.cell_index(1, 1),
                                            square6.cell_index(4, 1),
                                            square6.cell_index(2, 4)]))
    for q in (rotation_transform(square6),
              two_point_hull(square6, square6.cell_index(1, 1),
                             square6.cell_index(4, 4))):
        pulled = adjoint_measure(q, mu)
        assert check_tm1_sampled(pulled, budget=150, seed=8).passed
        assert check_superadditivity(pulled, budget=150, seed=8).passed


def test_theta_identity(square6):
    q = identity_transform(square6)
    rng = derive_rng(38, "thetaid")
    f = random_grid_function(square6, rng)
    assert np.allclose(theta(q, f).values, f.values, atol=1e-12)


def test_theta_matches_pointwise_adjoint(square6):
    q = two_point_hull(square6, square6.cell_index(1, 1),
                       square6.cell_index(4, 4))
    rng = derive_rng(39, "thetapt")
    f = random_grid_function(square6, rng)
    tf = theta(q, f)
    for y in [0, 7, 14, 21, 28, 35]:
        assert tf.at(y) == pytest.approx(theta_eval(q, f, y), abs=1e-12)


def test_theta_nonexpansive(square6):
    qs = [rotation_transform(square6),
          two_point_hull(square6, square6.cell_index(1, 1),
                         square6.cell_index(4, 4)),
          constant_from_simple(extend(make_aarnes_circle(
              square6, square6.cell_index(2, 2))), square6)]
    rng = derive_rng(40, "thetanorm")
    for _ in range(100):
        q = qs[int(rng.integers(len(qs)))]
        f = random_grid_function(square6, rng)
        g = random_grid_function(square6, rng)
        assert theta(q, f).sup_norm() <= f.sup_norm() + 1e-12
        gap = float(np.abs(theta(q, f).values - theta(q, g).values).max())
        assert gap <= float(np.abs(f.values - g.values).max()) + 1e-12


def test_level_set_identity_for_preimage_transforms(square6):
    q = rotation_transform(square6)
    rng = derive_rng(41, "levelset")
    for _ in range(25):
        f = random_grid_function(square6, rng)
        tf = theta(q, f)
        for t in np.quantile(f.values, [0.1, 0.5, 0.9]):
            for strict in (True, False):
                assert q.map(superlevel(f, float(t), strict)) == \
                    superlevel(tf, float(t), strict)


def test_full_source_maps_to_full_target(square6):
    for q in (rotation_transform(square6),
              two_point_hull(square6, 7, 28),
              constant_from_simple(delta(square6, 9), square6)):
        assert q.map(full_region(square6, COMPACT)) == \
            full_region(square6, COMPACT)


def test_duality(square6):
    # integral of f against the pullback equals integral of theta(f)
    qs = [rotation_transform(square6),
          from_proper_map(grid_isometry_map(square6, 6), square6, square6),
          two_point_hull(square6, square6.cell_index(1, 1),
                         square6.cell_index(4, 4)),
          constant_from_simple(extend(make_aarnes_circle(
              square6, square6.cell_index(2, 2))), square6)]
    nus = [make_cell_count(square6), delta(square6, 15),
           extend(make_point_config(square6, [square6.cell_index(1, 1),
                                              square6.cell_index(4, 1),
                                              square6.cell_index(2, 4)]))]
    rng = derive_rng(42, "duality")
    for _ in range(50):
        q = qs[int(rng.integers(len(qs)))]
        nu = nus[int(rng.integers(len(nus)))]
        f = random_grid_function(square6, rng)
        lhs = quasi_integral(adjoint_measure(q, nu), f)
        rhs = quasi_integral(nu, theta(q, f))
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_axiom_checker_passes_good_transforms(square6):
    assert check_it_axioms(rotation_transform(square6), budget=60, seed=2).passed
    q = constant_from_simple(delta(square6, 9), square6)
    assert check_it_axioms(q, budget=60, seed=3).passed


def test_axiom_checker_catches_corruption(square6):
    bad = corrupted_transform(square6, square6.cell_index(2, 2))
    report = check_it_axioms(bad, budget=60, seed=4)
    assert not report.passed
    assert report.witnesses[0][0] == "IT2"
