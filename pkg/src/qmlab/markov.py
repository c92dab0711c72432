"""Markov operators over measures: grid transform systems, Hutchinson
pushforward mixtures on point clouds, fixed-point iteration, the chaos game,
contraction diagnostics and density rasters.

The grid backend applies adjoints of image transformations lazily with
memoization.  The continuous backend pushes discrete measures through affine
contractions; consecutive-iterate distances are reported exactly while the
supports stay small, and as certified upper bounds (scaled by the mixture's
mean contraction factor) once exact transport would be too large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import COMPACT, GridSpace, Region, full_region
from .kr import DiscreteMeasure, w1_value
from .measures import DEFICIENT, TOPOLOGICAL, TopoMeasure
from .sampling import derive_rng
from .transforms import ImageTransform

ALPHA_TOL = 1e-12


@dataclass(frozen=True)
class AffineMap:
    """Planar affine map x -> A x + b."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        out = np.empty_like(pts)
        out[:, 0] = self.a * pts[:, 0] + self.b * pts[:, 1] + self.e
        out[:, 1] = self.c * pts[:, 0] + self.d * pts[:, 1] + self.f
        return out

    def apply_one(self, p) -> tuple[float, float]:
        q = self.apply(np.asarray(p, dtype=float).reshape(1, 2))[0]
        return float(q[0]), float(q[1])

    @property
    def linear(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def contraction_factor(self) -> float:
        return float(np.linalg.norm(self.linear, 2))

    def is_similitude(self, tol: float = 1e-12) -> bool:
        s = np.linalg.svd(self.linear, compute_uv=False)
        return abs(s[0] - s[1]) <= tol * max(1.0, s[0])

    def fixed_point(self) -> tuple[float, float]:
        mat = np.eye(2) - self.linear
        sol = np.linalg.solve(mat, np.array([self.e, self.f]))
        return float(sol[0]), float(sol[1])


@dataclass(frozen=True)
class TransformSystem:
    """Weighted family of transforms: grid image transformations or affine maps."""

    transforms: tuple
    alphas: np.ndarray
    backend: str  # "grid" | "continuous"
    tail_bound: float = 0.0

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float)
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        if (alphas < 0).any():
            raise ValueError("alphas must be nonnegative")
        if alphas.sum() > 1.0 + ALPHA_TOL:
            raise ValueError("alphas must sum to at most 1")
        if len(alphas) != len(self.transforms):
            raise ValueError("one alpha per transform")
        if self.tail_bound < 0:
            raise ValueError("tail bound must be nonnegative")

    @property
    def alpha_sum(self) -> float:
        return float(self.alphas.sum())

    def contraction_factor(self) -> float:
        if self.backend != "continuous":
            raise ValueError("contraction factor applies to affine systems")
        return max(t.contraction_factor() for t in self.transforms)

    def mean_contraction_factor(self) -> float:
        s = sum(a * t.contraction_factor()
                for a, t in zip(self.alphas, self.transforms))
        return float(s / self.alpha_sum) if self.alpha_sum else 0.0

    def all_similitudes(self) -> bool:
        return all(t.is_similitude() for t in self.transforms)


def make_system(transforms: Sequence, alphas: Sequence[float],
                tail_bound: float = 0.0) -> TransformSystem:
    transforms = tuple(transforms)
    if not transforms:
        raise ValueError("system needs at least one transform")
    backend = "grid" if isinstance(transforms[0], ImageTransform) else "continuous"
    return TransformSystem(transforms, np.asarray(alphas, dtype=float),
                           backend, tail_bound)


def sierpinski_system() -> TransformSystem:
    """Three half-scale similitudes toward the corners of a unit triangle."""
    verts = [(0.0, 0.0), (1.0, 0.0), (0.5, np.sqrt(3.0) / 2.0)]
    maps = [AffineMap(0.5, 0.0, 0.0, 0.5, vx / 2.0, vy / 2.0)
            for vx, vy in verts]
    return make_system(maps, [1.0 / 3.0] * 3)


def make_system_from_generator(gen: Callable[[int], tuple],
                               tail: Callable[[int], float],
                               epsilon: float,
                               max_terms: int = 10_000) -> TransformSystem:
    """Truncate an infinite generator of (transform, alpha) pairs.

    ``tail(n)`` must bound the summed alphas beyond the first n terms; the
    smallest prefix with ``tail(n) <= epsilon`` is kept and the bound is
    recorded on the system, so downstream integrals carry the truncation
    error ``|f|_sup * mass * epsilon``.
    """
    n = 1
    while tail(n) > epsilon:
        n += 1
        if n > max_terms:
            raise ValueError("generator tail does not certify below epsilon")
    pairs = [gen(i) for i in range(n)]
    transforms = [t for t, _ in pairs]
    alphas = [a for _, a in pairs]
    return make_system(transforms, alphas, tail_bound=float(tail(n)))


# -- grid backend -------------------------------------------------------------


def apply(system: TransformSystem, mu: TopoMeasure) -> TopoMeasure:
    """One Markov step on a grid measure: eval(A) = sum alpha_i mu(q_i(A))."""
    if system.backend != "grid":
        raise ValueError("grid backend required")
    transforms = system.transforms
    alphas = system.alphas

    def eval_fn(r: Region) -> float:
        return float(sum(a * mu(q.map(r))
                         for a, q in zip(alphas, transforms)))

    kind = mu.kind if mu.kind in (TOPOLOGICAL, DEFICIENT) else TOPOLOGICAL
    total = eval_fn(full_region(mu.space, COMPACT))
    return TopoMeasure(mu.space, eval_fn, kind=kind, total_mass=total,
                       name=f"S({mu.name})")


def iterate_grid(system: TransformSystem, mu: TopoMeasure, steps: int,
                 max_steps: int = 10) -> list[TopoMeasure]:
    """Iterates mu, S(mu), ..., S^steps(mu); capped word expansion."""
    if steps > max_steps:
        raise ValueError(f"grid iteration capped at {max_steps} steps; "
                         "use the continuous backend for longer runs")
    out = [mu]
    for _ in range(steps):
        out.append(apply(system, out[-1]))
    return out


# -- continuous backend -------------------------------------------------------


def apply_discrete(system: TransformSystem, nu: DiscreteMeasure,
                   support_cap: int = 2_000_000) -> DiscreteMeasure:
    """Pushforward mixture of a point cloud through the affine maps."""
    if system.backend != "continuous":
        raise ValueError("continuous backend required")
    pts, ws = [], []
    for a, t in zip(system.alphas, system.transforms):
        if a == 0.0:
            continue
        pts.append(t.apply(nu.points))
        ws.append(a * nu.weights)
    out = DiscreteMeasure(np.vstack(pts), np.concatenate(ws)).merged(1e-12)
    if len(out) > support_cap:
        raise ValueError("support explosion; sample the invariant measure "
                         "with chaos_game instead")
    return out


@dataclass
class TraceEntry:
    k: int
    d: float
    method: str  # "exact" | "scaled_bound" | "grid"


@dataclass
class FixedPointResult:
    measure: object
    iterations: int
    trace: list[TraceEntry] = field(default_factory=list)
    converged: bool = False


class ContractionViolation(RuntimeError):
    pass


def fixed_point(system: TransformSystem, mu0, tol: float = 1e-3,
                max_iter: int = 30, exact_cap: int = 250_000,
                probe_regions: Sequence[Region] | None = None,
                kr_budget: tuple[int, int] = (6, 20),
                seed: int = 0) -> FixedPointResult:
    """Iterate the Markov operator until consecutive iterates are tol-close.

    Continuous backend: the step distance is the exact transport distance
    while the instance fits the solver, afterwards a certified upper bound
    obtained by scaling the last exact distance with the system's mean
    contraction factor (valid because pushing any coupling through the maps
    contracts its cost by at least that factor).  Grid backend: the step
    distance is the larger of the KR lower bound and the sup over a probe
    family; both must fall below tol.
    """
    trace: list[TraceEntry] = []
    if system.backend == "continuous":
        factor = system.mean_contraction_factor()
        branching = sum(1 for a in system.alphas if a > 0)
        current: DiscreteMeasure | None = mu0
        nxt = apply_discrete(system, mu0)
        for k in range(max_iter):
            if current is not None and len(current) * len(nxt) <= exact_cap:
                d = w1_value(current, nxt)
                method = "exact"
            else:
                if not trace:
                    raise ValueError("supports too large for an exact start; "
                                     "coarsen the initial measure")
                # any coupling pushed through the maps contracts by at least
                # the mean factor, so the previous entry scales to a bound
                d = trace[-1].d * factor
                method = "scaled_bound"
            trace.append(TraceEntry(k, d, method))
            _check_decay(trace)
            if d <= tol:
                return FixedPointResult(nxt, k + 1, trace, converged=True)
            if current is not None and len(nxt) * branching <= 2_000_000:
                current, nxt = nxt, apply_discrete(system, nxt)
            else:
                current = None  # keep the last materialized iterate
        return FixedPointResult(nxt, max_iter, trace, converged=False)

    from .kr import d_kr_topo_lower
    if probe_regions is None:
        probe_regions = _default_probes(mu0.space, seed)
    chain = [mu0, apply(system, mu0)]
    for k in range(max_iter):
        a, b = chain[-2], chain[-1]
        probe_gap = max(abs(a(r) - b(r)) for r in probe_regions)
        restarts, iters = kr_budget
        kr_gap = d_kr_topo_lower(a, b, restarts=restarts, iters=iters,
                                 seed=seed).value
        d = max(probe_gap, kr_gap)
        trace.append(TraceEntry(k, d, "grid"))
        _check_decay(trace)
        if d <= tol:
            return FixedPointResult(b, k + 1, trace, converged=True)
        chain.append(apply(system, b))
        if len(chain) > 11:
            raise ValueError("grid iteration capped at 10 steps; "
                             "use the continuous backend for longer runs")
    return FixedPointResult(chain[-1], max_iter, trace, converged=False)


def _check_decay(trace: list[TraceEntry]) -> None:
    if len(trace) >= 6:
        recent = [t.d for t in trace[-6:]]
        if all(b >= a for a, b in zip(recent, recent[1:])) and recent[0] > 0:
            raise ContractionViolation("contraction violated: distance trace "
                                       "non-decreasing over 5 consecutive steps")


def _default_probes(space: GridSpace, seed: int) -> list[Region]:
    from .sampling import random_solid
    rng = derive_rng(seed, "probes")
    return [random_solid(space, rng, COMPACT) for _ in range(64)]


def chaos_game(system: TransformSystem, n: int, burn_in: int = 64,
               seed: int = 0) -> DiscreteMeasure:
    """Empirical measure of the random-map Markov chain.

    Requires a probability system (alphas summing to 1) of strict
    contractions; deterministic for a given seed.
    """
    if system.backend != "continuous":
        raise ValueError("continuous backend required")
    if abs(system.alpha_sum - 1.0) > 1e-9:
        raise ValueError("chaos game needs alphas summing to 1")
    if any(t.contraction_factor() >= 1.0 for t in system.transforms):
        raise ValueError("chaos game needs strict contractions")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(system.transforms), size=n + burn_in, p=system.alphas)
    mats = np.stack([t.linear for t in system.transforms])
    offs = np.array([[t.e, t.f] for t in system.transforms])
    x = np.array(system.transforms[0].fixed_point())
    pts = np.empty((n, 2))
    for k in range(n + burn_in):
        i = idx[k]
        x = mats[i] @ x + offs[i]
        if k >= burn_in:
            pts[k - burn_in] = x
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


@dataclass
class ContractionReport:
    ratios: list[float]
    max_ratio: float
    contraction: bool
    claimed: float


def contraction_check(system: TransformSystem, trials: int = 50,
                      seed: int = 0, claimed: float | None = None,
                      support: int = 24, workers: int = 1) -> ContractionReport:
    """Empirical contraction ratios of the Markov operator.

    Continuous backend: transport ratios over random discrete pairs.  Grid
    backend: set-distance ratios ``delta(K, G) / delta'(q(K), q(G))`` over
    random compact pairs with nonempty separated images.  Trials use
    per-index generators, so results are identical for any worker count.
    """
    rng = derive_rng(seed, "contract")
    ratios: list[float] = []
    if system.backend == "continuous":
        if claimed is None:
            claimed = system.contraction_factor()
        lo, hi = _system_box(system)
        span = hi - lo

        def one_trial(t: int) -> float | None:
            trng = derive_rng(seed, "contract", t)
            pts_a = lo + trng.random((support, 2)) * span
            pts_b = lo + trng.random((support, 2)) * span
            mu = DiscreteMeasure(pts_a, np.full(support, 1.0 / support))
            nu = DiscreteMeasure(pts_b, np.full(support, 1.0 / support))
            d0 = w1_value(mu, nu)
            if d0 <= 1e-12:
                return None
            d1 = w1_value(apply_discrete(system, mu),
                          apply_discrete(system, nu))
            return d1 / d0

        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one_trial, range(trials)))
        else:
            results = [one_trial(t) for t in range(trials)]
        ratios = [r for r in results if r is not None]
    else:
        if claimed is None:
            claimed = 1.0
        from .sampling import random_solid
        space = system.transforms[0].source
        centers = np.array([space.cell_center(i)
                            for i in range(space.n_cells)])
        for trial in range(trials):
            k = random_solid(space, rng, COMPACT)
            g = random_solid(space, rng, COMPACT)
            d0 = _set_distance(space, centers, k.bits, g.bits)
            if d0 <= 0:
                continue
            for q in system.transforms:
                qk, qg = q.map(k), q.map(g)
                if qk.is_empty or qg.is_empty:
                    continue
                d1 = _set_distance(q.target, None, qk.bits, qg.bits)
                if d1 <= 0:
                    ratios.append(math.inf)
                else:
                    ratios.append(d0 / d1)
    max_ratio = max(ratios) if ratios else 0.0
    return ContractionReport(ratios, max_ratio,
                             contraction=max_ratio <= claimed + 1e-9,
                             claimed=claimed)


def _system_box(system: TransformSystem) -> tuple[np.ndarray, np.ndarray]:
    fps = []
    for t in system.transforms:
        try:
            fps.append(t.fixed_point())
        except np.linalg.LinAlgError:
            pass  # no unique fixed point (e.g. the identity map)
    if not fps:
        return np.zeros(2), np.ones(2)
    fps = np.array(fps)
    lo, hi = fps.min(axis=0), fps.max(axis=0)
    pad = max((hi - lo).max(), 1.0) * 0.1
    return lo - pad, hi + pad


def _set_distance(space: GridSpace, centers, a_bits: int, b_bits: int) -> float:
    if centers is None:
        centers = np.array([space.cell_center(i) for i in range(space.n_cells)])
    a_idx = space.cells_of(a_bits)
    b_idx = space.cells_of(b_bits)
    pa, pb = centers[a_idx], centers[b_idx]
    d = np.hypot(pa[:, None, 0] - pb[None, :, 0],
                 pa[:, None, 1] - pb[None, :, 1])
    return float(d.min())


# -- rasters -------------------------------------------------------------------


def bin_weights(nu: DiscreteMeasure, resolution: int,
                bounds: tuple[float, float, float, float]) -> np.ndarray:
    """Total weight per raster bin, row 0 at the top of the bounding box."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    x0, y0, x1, y1 = bounds
    inside = ((nu.points[:, 0] >= x0) & (nu.points[:, 0] <= x1)
              & (nu.points[:, 1] >= y0) & (nu.points[:, 1] <= y1))
    if not inside.any():
        raise ValueError("bounds exclude all points")
    hist, _, _ = np.histogram2d(nu.points[inside, 0], nu.points[inside, 1],
                                bins=resolution, range=((x0, x1), (y0, y1)),
                                weights=nu.weights[inside])
    return hist.T[::-1]


def render_density(nu: DiscreteMeasure, resolution: int,
                   bounds: tuple[float, float, float, float]) -> np.ndarray:
    """Log-scaled grayscale raster of a point cloud, uint8 values."""
    hist = bin_weights(nu, resolution, bounds)
    top = hist.max()
    if top <= 0:
        return np.zeros_like(hist, dtype=np.uint8)
    img = np.log1p(hist / top * 255.0) / np.log(256.0)
    return np.round(img * 255.0).astype(np.uint8)
