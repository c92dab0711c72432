"""Scene files: one JSON document naming spaces, measures, transforms,
systems, families, functions and probe regions.

Every stochastic command derives its generator from the scene seed and the
command's own label, so outputs are reproducible and order-independent.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
import numpy as np

from .grid import (COMPACT, GridFunction, GridSpace, Region, cell_region,
                   disk_mask, disk_region, rect_region, region_from_rle)
from .kr import DiscreteMeasure
from .markov import AffineMap, TransformSystem, make_system, sierpinski_system
from .measures import (SolidSetFunction, TopoMeasure, extend,
                       make_aarnes_circle, make_cell_count, make_diffuse_dtm,
                       make_point_config, make_point_mass,
                       make_weighted_two_point)
from .median import Family1D, Interval1D
from .transforms import (ImageTransform, compose, constant_from_simple,
                         from_proper_map, grid_isometry_map,
                         identity_transform, two_point_hull)


class SceneError(KeyError):
    """Unresolvable name or malformed scene entry."""


@dataclass
class Scene:
    space: GridSpace
    seed: int
    raw: dict
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        self._seeds: dict[str, SolidSetFunction] = {}
        self._measures: dict[str, TopoMeasure] = {}
        self._regions: dict[str, Region] = {}
        self._functions: dict[str, GridFunction] = {}
        self._transforms: dict[str, ImageTransform] = {}
        self._systems: dict[str, TransformSystem] = {}
        self._families: dict[str, Family1D] = {}
        self._clouds: dict[str, DiscreteMeasure] = {}

    # -- lookups ------------------------------------------------------------

    def _section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def _cell(self, xy) -> int:
        x, y = xy
        return self.space.cell_index(int(x), int(y))

    def region(self, name: str) -> Region:
        if name not in self._regions:
            entry = self._section("regions").get(name)
            if entry is None:
                raise SceneError(f"unknown region {name!r}")
            role = entry.get("role", COMPACT)
            if "rle" in entry:
                r = region_from_rle(self.space, entry["rle"], role)
            elif "rect" in entry:
                x0, y0, x1, y1 = entry["rect"]
                r = rect_region(self.space, x0, y0, x1, y1, role)
            elif "disk" in entry:
                cx, cy, rad = entry["disk"]
                r = disk_region(self.space, (cx, cy), rad, role)
            elif "cells" in entry:
                r = cell_region(self.space, [self._cell(c) for c in entry["cells"]],
                                role)
            else:
                raise SceneError(f"region {name!r} has no geometry")
            self._regions[name] = r
        return self._regions[name]

    def seed_fn(self, name: str) -> SolidSetFunction:
        if name not in self._seeds:
            entry = self._section("measures").get(name)
            if entry is None:
                raise SceneError(f"unknown measure {name!r}")
            kind = entry["kind"]
            if kind == "point_mass":
                ssf = make_point_mass(self.space, self._cell(entry["cell"]))
            elif kind == "points_2n1":
                ssf = make_point_config(
                    self.space, [self._cell(p) for p in entry["points"]])
            elif kind == "two_point_weighted":
                ssf = make_weighted_two_point(self.space,
                                              self._cell(entry["p1"]),
                                              self._cell(entry["p2"]))
            elif kind == "aarnes_circle":
                ssf = make_aarnes_circle(self.space, self._cell(entry["p"]))
            elif kind in ("diffuse_dtm", "cell_count"):
                raise SceneError(f"measure {name!r} has no seed form")
            else:
                raise SceneError(f"unknown measure kind {kind!r}")
            self._seeds[name] = ssf
        return self._seeds[name]

    def measure(self, name: str) -> TopoMeasure:
        if name not in self._measures:
            entry = self._section("measures").get(name)
            if entry is None:
                raise SceneError(f"unknown measure {name!r}")
            kind = entry["kind"]
            if kind == "diffuse_dtm":
                mu = make_diffuse_dtm(self.space, self.region(entry["region"]))
            elif kind == "cell_count":
                mu = make_cell_count(self.space)
            else:
                mu = extend(self.seed_fn(name))
            self._measures[name] = mu
        return self._measures[name]

    def grid_function(self, name: str) -> GridFunction:
        if name not in self._functions:
            entry = self._section("functions").get(name)
            if entry is None:
                raise SceneError(f"unknown function {name!r}")
            kind = entry.get("kind", "dense")
            h, w = self.space.height, self.space.width
            if kind == "dense":
                vals = np.asarray(entry["values"], dtype=float).reshape(h, w)
            elif kind == "radial":
                cx, cy = entry["center"]
                rad = float(entry.get("radius", max(h, w) / 2))
                amp = float(entry.get("amplitude", 1.0))
                xs = self.space.origin[0] + np.arange(w) * self.space.cell_size
                ys = self.space.origin[1] + np.arange(h) * self.space.cell_size
                dist = np.hypot(xs[None, :] - cx, ys[:, None] - cy)
                vals = amp * np.clip(1.0 - dist / rad, 0.0, None)
            elif kind == "coordinate_x":
                xs = self.space.origin[0] + np.arange(w) * self.space.cell_size
                vals = np.tile(xs, (h, 1))
            elif kind == "coordinate_y":
                ys = self.space.origin[1] + np.arange(h) * self.space.cell_size
                vals = np.tile(ys[:, None], (1, w))
            elif kind == "indicator":
                vals = self.space.bits_to_array(
                    self.region(entry["region"]).bits).astype(float)
            else:
                raise SceneError(f"unknown function kind {kind!r}")
            self._functions[name] = GridFunction(self.space, vals)
        return self._functions[name]

    def transform(self, name: str) -> ImageTransform:
        if name not in self._transforms:
            entry = self._section("transforms").get(name)
            if entry is None:
                raise SceneError(f"unknown transform {name!r}")
            kind = entry["kind"]
            if kind == "identity":
                q = identity_transform(self.space)
            elif kind == "inverse_map":
                if "isometry" in entry:
                    u = grid_isometry_map(self.space, int(entry["isometry"]))
                else:
                    u = np.asarray(entry["cells"], dtype=np.int64)
                q = from_proper_map(u, self.space, self.space)
            elif kind == "constant_simple":
                q = constant_from_simple(self.measure(entry["measure"]),
                                         self.space)
            elif kind == "two_point_hull":
                q = two_point_hull(self.space, self._cell(entry["x"]),
                                   self._cell(entry["z"]))
            elif kind == "compose":
                q = compose(self.transform(entry["outer"]),
                            self.transform(entry["inner"]))
            else:
                raise SceneError(f"unknown transform kind {kind!r}")
            self._transforms[name] = q
        return self._transforms[name]

    def system(self, name: str) -> TransformSystem:
        if name not in self._systems:
            entry = self._section("systems").get(name)
            if entry is None:
                raise SceneError(f"unknown system {name!r}")
            kind = entry.get("kind", "affine")
            if kind == "sierpinski":
                sys = sierpinski_system()
            elif kind == "affine":
                maps = [AffineMap(*coeffs) for coeffs in entry["maps"]]
                sys = make_system(maps, entry["alphas"],
                                  tail_bound=float(entry.get("tail", 0.0)))
            elif kind == "grid":
                qs = [self.transform(t) for t in entry["transforms"]]
                sys = make_system(qs, entry["alphas"],
                                  tail_bound=float(entry.get("tail", 0.0)))
            else:
                raise SceneError(f"unknown system kind {kind!r}")
            self._systems[name] = sys
        return self._systems[name]

    def family(self, name: str) -> Family1D:
        if name not in self._families:
            entry = self._section("families").get(name)
            if entry is None:
                raise SceneError(f"unknown family {name!r}")
            lo, hi, cells = entry["interval"]
            interval = Interval1D(float(lo), float(hi), int(cells))
            if "csv" in entry:
                weights, rows = [], []
                for line in entry["csv"].strip().splitlines():
                    parts = [p.strip() for p in line.split(",")]
                    weights.append(Fraction(parts[0]))
                    rows.append([float(v) for v in parts[1:]])
                values = np.array(rows, dtype=float).T
            else:
                weights = [Fraction(w) if isinstance(w, str) else Fraction(w)
                           for w in entry["weights"]]
                values = np.asarray(entry["values"], dtype=float)
            self._families[name] = Family1D(interval, tuple(weights), values)
        return self._families[name]

    def cloud(self, name: str) -> DiscreteMeasure:
        if name not in self._clouds:
            entry = self._section("clouds").get(name)
            if entry is None:
                raise SceneError(f"unknown point cloud {name!r}")
            if "csv" in entry:
                cloud = DiscreteMeasure.from_csv(entry["csv"])
            elif "path" in entry:
                with open(entry["path"]) as fh:
                    cloud = DiscreteMeasure.from_csv(fh.read())
            else:
                pts = np.asarray(entry["points"], dtype=float)
                w = entry.get("weights")
                if w is None:
                    w = np.full(len(pts), 1.0 / len(pts))
                cloud = DiscreteMeasure(pts, np.asarray(w, dtype=float))
            self._clouds[name] = cloud
        return self._clouds[name]


def load_scene(path: str, seed_override: int | None = None) -> Scene:
    with open(path) as fh:
        raw = json.load(fh)
    entry = raw.get("space", {})
    mode = entry.get("mode", COMPACT)
    mask = None
    if entry.get("disk_mask"):
        mask = disk_mask(int(entry["width"]), int(entry["height"]))
    space = GridSpace(int(entry.get("width", 16)), int(entry.get("height", 16)),
                      mode=mode,
                      cell_size=float(entry.get("cell_size", 1.0)),
                      origin=tuple(entry.get("origin", (0.0, 0.0))),
                      mask=mask)
    seed = seed_override if seed_override is not None else raw.get("seed")
    if seed is None:
        raise SceneError("scene needs a seed for stochastic commands")
    return Scene(space, int(seed), raw, raw.get("tolerances", {}))


def thread_count() -> int:
    """Worker count for parallelizable checks, from QMLAB_THREADS."""
    try:
        return max(1, int(os.environ.get("QMLAB_THREADS", "1")))
    except ValueError:
        return 1
