"""Exact transport distances and the KR lower-bound estimator."""

import numpy as np
import pytest

from qmlab.grid import GridFunction, GridSpace
from qmlab.kr import (DiscreteMeasure, d_kr_topo_lower, lip_project,
                      point_cloud, w1_discrete, w1_value)
from qmlab.measures import extend, make_cell_count, make_point_mass
from qmlab.sampling import derive_rng


def random_measure(rng, n, scale=1.0, mass=1.0):
    pts = rng.random((n, 2)) * scale
    w = rng.random(n) + 0.05
    return DiscreteMeasure(pts, w / w.sum() * mass)


def test_delta_pair_distance():
    rng = derive_rng(50, "deltas")
    for _ in range(50):
        x, y = rng.random(2), rng.random(2)
        res = w1_discrete(point_cloud([x]), point_cloud([y]))
        assert res.value == pytest.approx(float(np.hypot(*(x - y))), abs=1e-12)
        assert res.gap <= 1e-9


def test_self_distance_zero():
    rng = derive_rng(51, "selfd")
    mu = random_measure(rng, 40)
    assert w1_value(mu, mu) == pytest.approx(0.0, abs=1e-12)


def test_two_point_matching():
    mu = point_cloud([(0.0, 0.0), (1.0, 0.0)])
    nu = point_cloud([(0.0, 1.0), (1.0, 1.0)])
    # both matchings cost 1 (enumerated by hand)
    assert w1_value(mu, nu) == pytest.approx(1.0, abs=1e-12)


def test_unbalanced_rejected():
    mu = point_cloud([(0, 0)], weights=[1.0])
    nu = point_cloud([(1, 0)], weights=[0.5])
    with pytest.raises(ValueError, match="unbalanced"):
        w1_discrete(mu, nu)


def test_dual_feasibility_and_certificate():
    rng = derive_rng(52, "duals")
    for _ in range(20):
        n, m = int(rng.integers(3, 40)), int(rng.integers(3, 40))
        mu, nu = random_measure(rng, n), random_measure(rng, m)
        res = w1_discrete(mu, nu)
        assert res.gap <= 1e-9
        u, v = res.potentials
        cost = np.hypot(mu.points[:, None, 0] - nu.points[None, :, 0],
                        mu.points[:, None, 1] - nu.points[None, :, 1])
        assert (u[:, None] + v[None, :] - cost).max() <= 1e-9
        # the plan is a feasible coupling
        plan = np.zeros((n, m))
        for i, j, w in res.plan:
            plan[i, j] = w
        assert np.allclose(plan.sum(axis=1), mu.weights, atol=1e-9)
        assert np.allclose(plan.sum(axis=0), nu.weights, atol=1e-9)


def test_symmetry_and_triangle():
    rng = derive_rng(53, "metric")
    for _ in range(30):
        a = random_measure(rng, int(rng.integers(2, 25)))
        b = random_measure(rng, int(rng.integers(2, 25)))
        c = random_measure(rng, int(rng.integers(2, 25)))
        dab, dba = w1_value(a, b), w1_value(b, a)
        assert dab == pytest.approx(dba, abs=1e-9)
        assert dab <= w1_value(a, c) + w1_value(c, b) + 1e-9


def test_merge_and_coarsen():
    mu = DiscreteMeasure(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]),
                         np.array([0.25, 0.25, 0.5]))
    merged = mu.merged()
    assert len(merged) == 2
    assert merged.total_mass == pytest.approx(1.0)
    snapped, move = mu.coarsened(0.25)
    assert move <= 0.25 * np.sqrt(2) / 2 + 1e-12
    # coarsening perturbs transport distance by at most the moved mass cost
    other = random_measure(derive_rng(54, "c"), 6)
    d_orig = w1_value(mu, other)
    d_snap = w1_value(snapped, other)
    assert abs(d_orig - d_snap) <= move + 1e-9


def test_csv_roundtrip():
    rng = derive_rng(55, "csv")
    mu = random_measure(rng, 12)
    back = DiscreteMeasure.from_csv(mu.to_csv())
    assert w1_value(mu, back) == pytest.approx(0.0, abs=1e-9)


# -- Lipschitz projection -------------------------------------------------------


def test_lip_project_idempotent(square6):
    vals = np.fromfunction(lambda y, x: 0.5 * x, (6, 6))
    f = GridFunction(square6, vals)
    out = lip_project(f)
    assert np.allclose(out.values, vals)
    again = lip_project(out.as_grid_function())
    assert np.allclose(again.values, out.values)


def test_pair_clip_closed_form():
    from qmlab.kr import clip_pair
    # values (0, 10) at unit spacing project symmetrically to (4.5, 5.5)
    assert clip_pair(0.0, 10.0, 1.0) == (4.5, 5.5)
    assert clip_pair(10.0, 0.0, 1.0) == (5.5, 4.5)
    assert clip_pair(1.0, 1.5, 1.0) == (1.0, 1.5)


def test_lip_project_spreads_feasibly():
    space = GridSpace(3, 3)
    vals = np.zeros((3, 3))
    vals[0, 1] = 10.0
    out = lip_project(GridFunction(space, vals))
    assert out.max_violation() < 1e-10
    assert out.values.max() <= 10.0 + 1e-9


def test_lip_project_constant_unchanged(square6):
    f = GridFunction(square6, np.full((6, 6), 3.25))
    assert np.allclose(lip_project(f).values, 3.25)


def test_lip_project_feasible(square6):
    rng = derive_rng(56, "lipfeas")
    f = GridFunction(square6, rng.normal(size=(6, 6)) * 10)
    out = lip_project(f)
    assert out.max_violation() < 1e-10


# -- lower bound on grid measures -------------------------------------------------


def test_lower_bound_zero_for_equal(square6):
    mu = make_cell_count(square6)
    res = d_kr_topo_lower(mu, mu, restarts=4, iters=10, seed=1)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_lower_bound_delta_pair():
    space = GridSpace(8, 8)
    x, y = space.cell_index(1, 1), space.cell_index(6, 5)
    mu = extend(make_point_mass(space, x))
    nu = extend(make_point_mass(space, y))
    res = d_kr_topo_lower(mu, nu, restarts=20, iters=30, seed=2)
    dist = float(np.hypot(*(np.array(space.cell_center(x))
                            - np.array(space.cell_center(y)))))
    assert res.value >= 0.95 * dist
    # never exceeds the true distance (feasible test functions only)
    assert res.value <= dist + 1e-9
    assert res.witness.max_violation() < 1e-9


def test_lower_bound_translation_positive():
    space = GridSpace(17, 17, mode="marked_infinity", cell_size=0.5,
                      origin=(-4.0, -4.0))
    from qmlab.measures import make_weighted_two_point
    p1 = space.cell_at(-1.0, 0.0)
    p2 = space.cell_at(1.0, 0.0)
    mu = extend(make_weighted_two_point(space, p1, p2))
    q1 = space.cell_at(-0.5, 0.0)
    q2 = space.cell_at(1.5, 0.0)
    nu = extend(make_weighted_two_point(space, q1, q2))
    res = d_kr_topo_lower(mu, nu, restarts=8, iters=20, seed=3)
    assert res.value > 0.0


def test_lower_bound_bounded_by_norm_bound(square6):
    # |rho_mu(f) - rho_nu(f)| <= |f| (mu(X) + nu(X)) <= 2 r (M + M')
    mu = make_cell_count(square6)
    nu = extend(make_point_mass(square6, 14))
    res = d_kr_topo_lower(mu, nu, restarts=6, iters=15, seed=4)
    r = np.hypot(5.0, 5.0)
    assert res.value <= 2 * r * (mu.total_mass + nu.total_mass)
