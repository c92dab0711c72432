"""Kantorovich-Rubinstein distances.

For weighted point clouds the distance is computed exactly as a balanced
transport linear program with Euclidean ground cost; the solver returns the
plan and dual potentials, and the primal-dual gap certifies optimality.  For
topological measures on grids the supremum over Lipschitz test functions is
generally nonconcave, so only a certified lower bound is produced, by ascent
over the Lipschitz-1 polytope.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .grid import COMPACT, GridFunction, GridSpace
from .integrals import quasi_integral
from .measures import DEFICIENT, TopoMeasure
from .sampling import derive_rng

BALANCE_TOL = 1e-12
_LP_SIZE_CAP = 4_000_000  # refuse transport instances beyond this many variables


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted planar point cloud; weights are positive after pruning."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise ValueError("points and weights disagree in length")
        keep = w > 0
        pts, w = pts[keep], w[keep]
        if len(pts) == 0:
            raise ValueError("measure needs at least one point of positive weight")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def normalized(self) -> bool:
        return abs(self.total_mass - 1.0) <= BALANCE_TOL

    def normalize(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, self.weights / self.total_mass)

    def merged(self, tol: float = 1e-12) -> "DiscreteMeasure":
        """Collapse support points that coincide up to the tolerance."""
        keys = np.round(self.points / tol).astype(np.int64)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        w = np.zeros(len(uniq))
        np.add.at(w, inverse, self.weights)
        pts = np.zeros((len(uniq), 2))
        np.add.at(pts, inverse, self.points * self.weights[:, None])
        pts /= w[:, None]
        return DiscreteMeasure(pts, w)

    def coarsened(self, pitch: float) -> tuple["DiscreteMeasure", float]:
        """Snap points to a lattice of the given pitch.

        Returns the snapped measure and the exact mass-weighted displacement,
        a transport-cost bound between the measure and its snapped version.
        """
        snapped = np.round(self.points / pitch) * pitch
        move = float((np.hypot(*(self.points - snapped).T) * self.weights).sum())
        return DiscreteMeasure(snapped, self.weights).merged(), move

    def to_csv(self) -> str:
        order = np.lexsort((self.points[:, 1], self.points[:, 0]))
        buf = io.StringIO()
        buf.write("x,y,weight\n")
        for i in order:
            buf.write(f"{self.points[i, 0]:.17g},{self.points[i, 1]:.17g},"
                      f"{self.weights[i]:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteMeasure":
        pts, w = [], []
        for line in text.strip().splitlines():
            if line.startswith("x,") or not line.strip():
                continue
            sx, sy, sw = line.split(",")
            pts.append((float(sx), float(sy)))
            w.append(float(sw))
        return cls(np.array(pts), np.array(w))


def point_cloud(points, weights=None) -> DiscreteMeasure:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if weights is None:
        weights = np.full(len(pts), 1.0 / len(pts))
    return DiscreteMeasure(pts, weights)


@dataclass(frozen=True)
class W1Result:
    value: float
    plan: list[tuple[int, int, float]]
    potentials: tuple[np.ndarray, np.ndarray]
    dual_value: float

    @property
    def gap(self) -> float:
        return abs(self.value - self.dual_value)


def w1_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure) -> W1Result:
    """Exact balanced transport between point clouds.

    Solves the transport linear program with Euclidean costs; the returned
    dual potentials satisfy ``u_i + v_j <= d(x_i, y_j)`` on every support
    pair and the primal-dual gap certifies optimality.
    """
    if abs(mu.total_mass - nu.total_mass) > BALANCE_TOL * max(1.0, mu.total_mass):
        raise ValueError("unbalanced; normalize first")
    n, m = len(mu), len(nu)
    if n * m > _LP_SIZE_CAP:
        raise ValueError(f"transport instance too large ({n}x{m}); "
                         "coarsen the measures first")
    cost = np.hypot(mu.points[:, None, 0] - nu.points[None, :, 0],
                    mu.points[:, None, 1] - nu.points[None, :, 1])
    a_eq = sparse.vstack([
        sparse.kron(sparse.eye(n, format="csr"), np.ones((1, m))),
        sparse.kron(np.ones((1, n)), sparse.eye(m, format="csr")),
    ], format="csr")
    b_eq = np.concatenate([mu.weights, nu.weights])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport solve failed: {res.message}")
    duals = res.eqlin.marginals
    u, v = duals[:n].copy(), duals[n:].copy()
    dual_value = float(mu.weights @ u + nu.weights @ v)
    x = res.x.reshape(n, m)
    nz = np.argwhere(x > 0)
    plan = [(int(i), int(j), float(x[i, j])) for i, j in nz]
    return W1Result(float(res.fun), plan, (u, v), dual_value)


def w1_value(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return w1_discrete(mu, nu).value


# -- Lipschitz test functions on grids ----------------------------------------


@dataclass(frozen=True)
class LipFunction:
    """Grid function obeying the Lipschitz-1 constraint along cell edges.

    Adjacent cells differ by at most the cell size, diagonal neighbors by at
    most sqrt(2) times it.
    """

    space: GridSpace
    values: np.ndarray = field(compare=False)

    def as_grid_function(self) -> GridFunction:
        return GridFunction(self.space, self.values)

    def max_violation(self) -> float:
        return _max_violation(self.space, self.values)


_OFFSETS = ((0, 1, 1.0), (1, 0, 1.0), (1, 1, np.sqrt(2.0)), (1, -1, np.sqrt(2.0)))


def clip_pair(a: float, b: float, bound: float) -> tuple[float, float]:
    """Symmetric projection of one value pair onto |a - b| <= bound."""
    excess = abs(a - b) - bound
    if excess <= 0:
        return a, b
    shift = 0.5 * excess * (1.0 if a > b else -1.0)
    return a - shift, b + shift


def _pair_views(space: GridSpace, vals: np.ndarray, dx: int, dy: int):
    h, w = vals.shape
    if dy >= 0:
        a = vals[dy:, :]
        b = vals[:h - dy, :]
    else:
        a = vals[:h + dy, :]
        b = vals[-dy:, :]
    if dx >= 0:
        a = a[:, dx:]
        b = b[:, :w - dx]
    else:
        a = a[:, :w + dx]
        b = b[:, -dx:]
    return a, b


def _max_violation(space: GridSpace, vals: np.ndarray) -> float:
    worst = 0.0
    for dx, dy, scale in _OFFSETS:
        bound = scale * space.cell_size
        a, b = _pair_views(space, vals, dx, dy)
        if a.size:
            worst = max(worst, float((np.abs(a - b) - bound).max()))
    return max(worst, 0.0)


def lip_project(f: GridFunction, tol: float = 1e-10,
                max_sweeps: int = 100_000) -> LipFunction:
    """Project onto the Lipschitz-1 polytope by iterated pairwise clipping.

    Each sweep symmetrically clips every violated adjacent (and diagonal)
    pair; feasible inputs pass through unchanged.
    """
    space = f.space
    vals = np.array(f.values, dtype=float)
    for _ in range(max_sweeps):
        if _max_violation(space, vals) < tol:
            return LipFunction(space, vals)
        for dx, dy, scale in _OFFSETS:
            bound = scale * space.cell_size
            a, b = _pair_views(space, vals, dx, dy)
            if not a.size:
                continue
            diff = a - b
            excess = np.abs(diff) - bound
            np.clip(excess, 0.0, None, out=excess)
            shift = 0.5 * excess * np.sign(diff)
            a -= shift
            b += shift
    raise RuntimeError("Lipschitz projection did not converge")


def _cell_centers(space: GridSpace) -> np.ndarray:
    xs = space.origin[0] + np.arange(space.width) * space.cell_size
    ys = space.origin[1] + np.arange(space.height) * space.cell_size
    cx, cy = np.meshgrid(xs, ys)
    return np.stack([cx.reshape(-1), cy.reshape(-1)], axis=1)


def euclidean_lip_constant(space: GridSpace, vals: np.ndarray) -> float:
    """Largest |f(c1)-f(c2)| / d(c1, c2) over all admissible cell pairs.

    The edge polytope only constrains octile paths, which overshoot the
    Euclidean metric by up to ~8%; this is the exact constant.
    """
    adm = space.bits_to_array(space.admissible_bits).reshape(-1)
    pts = _cell_centers(space)[adm]
    fv = np.asarray(vals, dtype=float).reshape(-1)[adm]
    worst = 0.0
    chunk = max(1, 2_000_000 // max(len(pts), 1))
    for lo in range(0, len(pts), chunk):
        hi = min(lo + chunk, len(pts))
        d = np.hypot(pts[lo:hi, None, 0] - pts[None, :, 0],
                     pts[lo:hi, None, 1] - pts[None, :, 1])
        df = np.abs(fv[lo:hi, None] - fv[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d > 0, df / d, 0.0)
        worst = max(worst, float(ratio.max()))
    return worst


def _cone(space: GridSpace, center: int, radius: float,
          frame_dist: np.ndarray | None) -> np.ndarray:
    cx, cy = space.cell_center(center)
    pts = _cell_centers(space)
    dist = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
    vals = np.clip(radius - dist, 0.0, None).reshape(space.height, space.width)
    if frame_dist is not None:
        vals = np.minimum(vals, frame_dist)  # keeps Lip-1, vanishes near ring
    return vals


@dataclass(frozen=True)
class KRLowerBound:
    value: float
    witness: LipFunction


def d_kr_topo_lower(mu: TopoMeasure, nu: TopoMeasure, restarts: int = 20,
                    iters: int = 60, seed: int = 0) -> KRLowerBound:
    """Certified lower bound on the KR distance of two grid measures.

    Maximizes ``|rho_mu(f) - rho_nu(f)|`` by multi-start hill climbing.  A
    candidate is made feasible before every evaluation: clipped nonnegative
    where required, zeroed near the infinity ring, and rescaled by its exact
    Euclidean Lipschitz constant, so every reported value is attained by a
    genuinely Lipschitz-1 test function and is a valid lower bound.
    """
    if mu.space != nu.space:
        raise ValueError("measures must share a space")
    space = mu.space
    nonneg = DEFICIENT in (mu.kind, nu.kind) or space.mode != COMPACT
    rng = derive_rng(seed, "krlb", mu.name, nu.name)

    if space.mode != COMPACT:
        dead = space.bits_to_array(space.frame_bits | space.ring_bits)
        pts = _cell_centers(space)
        dead_pts = pts[dead.reshape(-1)]
        frame_dist = np.array([
            float(np.hypot(dead_pts[:, 0] - x, dead_pts[:, 1] - y).min())
            for x, y in pts]).reshape(space.height, space.width)
    else:
        dead = None
        frame_dist = None
    masked = space.bits_to_array(space.mask) if space.mask is not None else None

    def constrain(vals: np.ndarray) -> np.ndarray:
        vals = vals.copy()
        if nonneg:
            np.clip(vals, 0.0, None, out=vals)
        if dead is not None:
            vals[dead] = 0.0
        if masked is not None:
            vals[~masked] = 0.0
        return vals

    def certify(vals: np.ndarray, known_lip1: bool = False):
        vals = constrain(vals)
        if not known_lip1:
            lip = euclidean_lip_constant(space, vals)
            if lip > 1.0:
                vals = vals / lip
        lf = LipFunction(space, vals)
        g = lf.as_grid_function()
        return abs(quasi_integral(mu, g) - quasi_integral(nu, g)), lf

    span = max(space.width, space.height) * space.cell_size
    cells = space.cells_of(space.admissible_bits)
    scan = cells if len(cells) <= 4096 else [
        cells[i] for i in rng.choice(len(cells), size=4096, replace=False)]
    best_val, best_f = certify(np.zeros((space.height, space.width)), True)
    scored = []
    for c in scan:
        val, lf = certify(_cone(space, c, span, frame_dist), known_lip1=True)
        scored.append((val, c))
        if val > best_val:
            best_val, best_f = val, lf
    scored.sort(key=lambda t: -t[0])

    seeds: list[np.ndarray] = [
        _cone(space, c, span, frame_dist) for _, c in scored[:max(2, restarts // 2)]]
    while len(seeds) < restarts:
        raw = rng.normal(size=(space.height, space.width)) * span / 4
        seeds.append(lip_project(GridFunction(space, constrain(raw))).values)

    step = space.cell_size
    for raw in seeds[:restarts]:
        val, lf = certify(np.asarray(raw, dtype=float))
        for _ in range(iters):
            vals = lf.values.copy()
            c = cells[int(rng.integers(len(cells)))]
            bump = _cone(space, c, rng.uniform(1, 4) * space.cell_size, None)
            vals += rng.choice((-1.0, 1.0)) * step * bump
            cand_val, cand = certify(vals)
            if cand_val > val:
                lf, val = cand, cand_val
        if val > best_val:
            best_val, best_f = val, lf
    return KRLowerBound(best_val, best_f)
