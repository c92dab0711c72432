"""Exhaustive additivity verification on small compact grids.

Enumerates every admissible disjoint pair of regions whose geometric
realizations are genuinely disjoint with a realizable union:

* compact + compact: the cell sets must be 8-separated;
* open + open: 4-separated (corner contact is fine, the interiors stay
  disjoint and their union realizes the cell union);
* compact + open with compact union: every cell 4-adjacent to the open part
  lies in the compact part (the closure of the open part is glued in);
* compact + open with open union: every 4-neighbor of the compact part lies
  in the open part and every 8-neighbor in the union (the compact part sits
  in the interior).

Additivity of an evaluator over all such triples is the exhaustive TM1
suite.  Enumeration happens once per grid size and is reused across
measures; evaluating a measure over all regions uses the one-time
decomposition of every region into solid pieces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import (COMPACT, OPEN, GridSpace, Region, components_bits,
                   dilate_bits, flip_role, is_solid, role_adjacency)
from .measures import DEFICIENT, SolidSetFunction, TopoMeasure


@dataclass
class Tm1Report:
    checked: int
    violations: list


@lru_cache(maxsize=4)
def _dilation_tables(width: int, height: int):
    space = GridSpace(width, height)
    n = 1 << space.n_cells
    dil4 = np.empty(n, dtype=np.int64)
    dil8 = np.empty(n, dtype=np.int64)
    for bits in range(n):
        dil4[bits] = dilate_bits(space, bits, 4)
        dil8[bits] = dilate_bits(space, bits, 8)
    return space, dil4, dil8


def _subsets(mask: int):
    sub = mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


@lru_cache(maxsize=4)
def enumerate_tm1_triples(width: int, height: int):
    """All valid disjoint triples (A, B, union) per role combination.

    Returns dict combo -> (A array, B array, U array) with combos "KK",
    "OO", "KO_K" (open glued into compact union) and "KO_O" (compact inside
    open union).
    """
    space, dil4, dil8 = _dilation_tables(width, height)
    full = space.admissible_bits
    out = {}
    kk_a, kk_b = [], []
    oo_a, oo_b = [], []
    for a in range(1, full + 1):
        free = full & ~int(dil8[a])
        for b in _subsets(free):
            if b >= a:
                kk_a.append(a)
                kk_b.append(b)
        free = full & ~int(dil4[a]) & ~a
        for b in _subsets(free):
            if b >= a:
                oo_a.append(a)
                oo_b.append(b)
    ko_k_a, ko_k_b = [], []
    ko_o_a, ko_o_b = [], []
    for b in range(1, full + 1):  # b is the open part
        ring = int(dil4[b]) & ~b & full
        rest = full & ~b & ~ring
        # compact part must contain the 4-ring of b
        for extra in [0, *_subsets(rest)]:
            a = ring | extra
            if a:
                ko_k_a.append(a)
                ko_k_b.append(b)
    for a in range(1, full + 1):  # a is the compact part
        ring4 = int(dil4[a]) & ~a & full
        ring8 = int(dil8[a]) & ~a & full
        rest = full & ~a & ~ring8
        # open part must contain the 4-ring and, with a, cover the 8-ring
        diag = ring8 & ~ring4
        for extra in [0, *_subsets(rest)]:
            b = ring4 | diag | extra
            if b and not b & a:
                ko_o_a.append(a)
                ko_o_b.append(b)
    def pack(xs, ys):
        xa = np.array(xs, dtype=np.int64)
        ya = np.array(ys, dtype=np.int64)
        return xa, ya, xa | ya
    out["KK"] = pack(kk_a, kk_b)
    out["OO"] = pack(oo_a, oo_b)
    out["KO_K"] = pack(ko_k_a, ko_k_b)
    out["KO_O"] = pack(ko_o_a, ko_o_b)
    return out


@lru_cache(maxsize=4)
def _decompositions(width: int, height: int):
    """Per (region, role): total-coefficient and signed solid pieces.

    value(region) = coeff * total + sum(sign * seed(piece)); pieces are solid
    by construction of the complement decomposition.
    """
    space, _, _ = _dilation_tables(width, height)
    full = space.admissible_bits
    coeff = {COMPACT: np.zeros(full + 1, dtype=np.int32),
             OPEN: np.zeros(full + 1, dtype=np.int32)}
    starts = {COMPACT: np.zeros(full + 2, dtype=np.int64),
              OPEN: np.zeros(full + 2, dtype=np.int64)}
    pieces = {COMPACT: ([], [], []), OPEN: ([], [], [])}
    for role in (COMPACT, OPEN):
        own = role_adjacency(role)
        dual_role = flip_role(role)
        dual = role_adjacency(dual_role)
        bits_list, roles_list, signs_list = pieces[role]
        for bits in range(full + 1):
            starts[role][bits] = len(bits_list)
            if bits == 0:
                continue
            c = 0
            for comp in components_bits(space, bits, own):
                if is_solid(space, Region(comp, role)):
                    bits_list.append(comp)
                    roles_list.append(role)
                    signs_list.append(1)
                else:
                    c += 1
                    for t in components_bits(space, full & ~comp, dual):
                        assert is_solid(space, Region(t, dual_role))
                        bits_list.append(t)
                        roles_list.append(dual_role)
                        signs_list.append(-1)
            coeff[role][bits] = c
        starts[role][full + 1] = len(bits_list)
    packed = {}
    for role in (COMPACT, OPEN):
        b, r, s = pieces[role]
        packed[role] = (coeff[role], starts[role],
                        np.array(b, dtype=np.int64),
                        np.array([1 if x == COMPACT else 0 for x in r],
                                 dtype=np.int8),
                        np.array(s, dtype=np.int8))
    return space, packed


def evaluate_all_regions(ssf: SolidSetFunction) -> dict[str, np.ndarray]:
    """Extension values for every region of a small grid, both roles."""
    space, packed = _decompositions(ssf.space.width, ssf.space.height)
    out = {}
    for role in (COMPACT, OPEN):
        coeff, starts, piece_bits, piece_roles, signs = packed[role]
        vals = np.array([ssf(Region(int(b), COMPACT if pr else OPEN))
                         for b, pr in zip(piece_bits, piece_roles)])
        terms = vals * signs
        acc = np.concatenate([[0.0], np.cumsum(terms)])
        sums = acc[starts[1:]] - acc[starts[:-1]]
        out[role] = coeff.astype(float) * ssf.total + sums
    return out


def table_for_measure(mu: TopoMeasure) -> dict[str, np.ndarray]:
    """Evaluator values for every region of a small grid, both roles."""
    space = mu.space
    full = space.admissible_bits
    out = {}
    for role in (COMPACT, OPEN):
        out[role] = np.array([mu(Region(bits, role)) if bits else 0.0
                              for bits in range(full + 1)])
    return out


def tm1_exhaustive(tables: dict[str, np.ndarray], width: int, height: int,
                   kind: str = "topological", tol: float = 1e-12) -> Tm1Report:
    """Check additivity over every valid disjoint triple.

    Deficient evaluators are held to the compact-compact pairs only.
    """
    triples = enumerate_tm1_triples(width, height)
    vk, vo = tables[COMPACT], tables[OPEN]
    combos = ["KK"] if kind == DEFICIENT else ["KK", "OO", "KO_K", "KO_O"]
    checked = 0
    violations = []
    for combo in combos:
        a, b, u = triples[combo]
        if combo == "KK":
            lhs, rhs = vk[u], vk[a] + vk[b]
        elif combo == "OO":
            lhs, rhs = vo[u], vo[a] + vo[b]
        elif combo == "KO_K":
            lhs, rhs = vk[u], vk[a] + vo[b]
        else:
            lhs, rhs = vo[u], vk[a] + vo[b]
        checked += len(a)
        bad = np.nonzero(np.abs(lhs - rhs) > tol)[0]
        for i in bad[:8]:
            violations.append((combo, int(a[i]), int(b[i]),
                               float(lhs[i]), float(rhs[i])))
    return Tm1Report(checked, violations)
