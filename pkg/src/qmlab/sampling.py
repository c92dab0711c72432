"""Seeded random generators for regions and grid functions.

All stochastic checkers and CLI commands derive their generators from a
single integer seed through :func:`derive_rng`, so independent sub-commands
see independent, reproducible streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .grid import (COMPACT, GridFunction, GridSpace, Region, components_bits,
                   dilate_bits, flip_role, is_solid, role_adjacency,
                   solid_hull)


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Independent generator for (seed, labels); order of calls is irrelevant."""
    digest = hashlib.sha256(repr(labels).encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, *words]))


def random_blob(space: GridSpace, rng: np.random.Generator, role: str = COMPACT,
                max_cells: int | None = None) -> Region:
    """Connected admissible region grown by seeded BFS."""
    adm = space.admissible_bits
    cells = space.cells_of(adm)
    if max_cells is None:
        max_cells = max(1, len(cells) // 2)
    target = int(rng.integers(1, max_cells + 1))
    start = cells[int(rng.integers(len(cells)))]
    adj = role_adjacency(role)
    bits = 1 << start
    for _ in range(target - 1):
        frontier = dilate_bits(space, bits, adj) & adm & ~bits
        if not frontier:
            break
        choices = space.cells_of(frontier)
        bits |= 1 << choices[int(rng.integers(len(choices)))]
    return Region(bits, role)


def random_solid(space: GridSpace, rng: np.random.Generator, role: str = COMPACT,
                 max_cells: int | None = None) -> Region:
    """Random solid region: a blob with its holes filled."""
    r = random_blob(space, rng, role, max_cells)
    if space.mode == COMPACT:
        comp = space.admissible_bits & ~r.bits
        dual = role_adjacency(flip_role(role))
        pieces = components_bits(space, comp, dual)
        if len(pieces) > 1:
            keep = max(pieces, key=lambda b: b.bit_count())
            r = Region(space.admissible_bits & ~keep, role)
    else:
        r = solid_hull(space, r)
    assert is_solid(space, r)
    return r


def random_solid_inside(space: GridSpace, rng: np.random.Generator, outer: Region,
                        role: str = COMPACT, tries: int = 32) -> Region | None:
    """Solid region whose cells stay inside ``outer``, or None."""
    for _ in range(tries):
        r = random_solid(space, rng, role)
        if r.bits and (r.bits & ~outer.bits) == 0:
            return r
    return None


def random_disjoint_solids(space: GridSpace, rng: np.random.Generator, role: str,
                           count: int, separation: int, tries: int = 64) -> list[Region]:
    """Up to ``count`` mutually separated solid regions.

    ``separation`` is the adjacency under which the pieces must not touch
    (8 for compact-role families, 4 for open-role ones).
    """
    picked: list[Region] = []
    occupied = 0
    for _ in range(tries):
        if len(picked) == count:
            break
        r = random_solid(space, rng, role,
                         max_cells=max(1, space.admissible_bits.bit_count() // (2 * count)))
        halo = dilate_bits(space, occupied, separation)
        if r.bits & halo or r.bits & occupied:
            continue
        picked.append(r)
        occupied |= r.bits
    return picked


def random_grid_function(space: GridSpace, rng: np.random.Generator,
                         kind: str = "radial", nonneg: bool = True) -> GridFunction:
    """Random bounded test function; vanishes near the ring when one exists."""
    h, w = space.height, space.width
    xs = np.arange(w)[None, :].astype(float)
    ys = np.arange(h)[:, None].astype(float)
    if kind == "radial":
        vals = np.zeros((h, w))
        for _ in range(int(rng.integers(1, 4))):
            cx = rng.uniform(0, w - 1)
            cy = rng.uniform(0, h - 1)
            rad = rng.uniform(1.0, max(w, h) / 2)
            amp = rng.uniform(0.2, 2.0)
            dist = np.hypot(xs - cx, ys - cy)
            vals += amp * np.clip(1.0 - dist / rad, 0.0, None)
    elif kind == "steps":
        vals = rng.integers(0, 5, size=(h, w)).astype(float) / 4.0
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if not nonneg:
        vals -= rng.uniform(0.0, 0.5) * vals.max() if vals.max() > 0 else 0.0
    if space.mode != COMPACT:
        border = np.zeros((h, w), dtype=bool)
        border[:2, :] = border[-2:, :] = True
        border[:, :2] = border[:, -2:] = True
        vals = vals.copy()
        vals[border] = 0.0
    if space.mask is not None:
        vals = vals.copy()
        vals[~space.bits_to_array(space.mask)] = 0.0
    return GridFunction(space, vals)
