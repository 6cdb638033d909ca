"""Box distance between finite mm-spaces.

Parameters of a finite space are modelled by laying its atoms out as
consecutive subintervals of [0, 1).  Two layouts plus a kept set of
subintervals give an explicit parameter pair, hence an upper bound; for
uniform spaces of equal size the search over atom bijections and whole-atom
discards is exhaustive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParam, Unsupported
from .mmspace import FiniteMMSpace

EXACT_MAX_POINTS = 6


@dataclass(frozen=True)
class AtomParameterization:
    """Lengths of the consecutive subintervals of [0, 1) assigned to points."""

    order: tuple[int, ...]
    lengths: tuple[float, ...]

    @classmethod
    def of(cls, space: FiniteMMSpace, order=None) -> "AtomParameterization":
        order = tuple(range(space.k)) if order is None else tuple(order)
        return cls(order, tuple(float(space.weights[i]) for i in order))

    def point_at(self, s: float) -> int:
        acc = 0.0
        for i, length in zip(self.order, self.lengths):
            acc += length
            if s < acc:
                return i
        return self.order[-1]


@dataclass(frozen=True)
class BoxResult:
    value: float
    discarded_mass: float
    alignment: str


def _is_uniform(space: FiniteMMSpace) -> bool:
    return bool(np.all(np.abs(space.weights - 1.0 / space.k) <= 1e-12))


def box_distance_exact(x: FiniteMMSpace, y: FiniteMMSpace) -> BoxResult:
    """Box distance for equal-size uniform spaces with at most six points.

    For a bijection s and a discarded set D of atoms the smallest admissible
    epsilon is max(|D|/k, largest distortion |d_X - d_Y o s| over kept pairs);
    the minimum over all (s, D) is returned.
    """
    if x.k != y.k or not (_is_uniform(x) and _is_uniform(y)):
        raise Unsupported("exact box distance needs uniform spaces of equal size; use box_distance_upper")
    k = x.k
    if k > EXACT_MAX_POINTS:
        raise Unsupported(f"exact box distance is limited to {EXACT_MAX_POINTS} points")
    best = (math.inf, 0.0, "")
    subsets = [
        [i for i in range(k) if mask >> i & 1] for mask in range(1 << k)
    ]
    for perm in itertools.permutations(range(k)):
        distortion = np.abs(x.dist - y.dist[np.ix_(perm, perm)])
        for kept in subsets:
            discarded = (k - len(kept)) / k
            if discarded >= best[0]:
                continue
            worst = float(distortion[np.ix_(kept, kept)].max()) if kept else 0.0
            eps = max(discarded, worst)
            if eps < best[0]:
                pairs = ", ".join(f"{x.labels[i]}->{y.labels[perm[i]]}" for i in kept)
                best = (eps, discarded, f"bijection keeping [{pairs}]")
    return BoxResult(best[0], best[1], best[2])


def _refinement(x: FiniteMMSpace, y: FiniteMMSpace, ox, oy):
    """Common refinement of two atom layouts: list of (x point, y point, mass)."""
    frags = []
    i = j = 0
    rx = float(x.weights[ox[0]])
    ry = float(y.weights[oy[0]])
    while i < len(ox) and j < len(oy):
        m = min(rx, ry)
        if m > 1e-15:
            frags.append((ox[i], oy[j], m))
        rx -= m
        ry -= m
        if rx <= 1e-15:
            i += 1
            if i < len(ox):
                rx = float(x.weights[ox[i]])
        if ry <= 1e-15:
            j += 1
            if j < len(oy):
                ry = float(y.weights[oy[j]])
    return frags


def _trim(x: FiniteMMSpace, y: FiniteMMSpace, frags) -> tuple[float, float, list[int]]:
    """Greedily discard fragments in the worst pairs; best epsilon along the way."""
    fx = np.array([f[0] for f in frags])
    fy = np.array([f[1] for f in frags])
    mass = np.array([f[2] for f in frags])
    distort = np.abs(x.dist[np.ix_(fx, fx)] - y.dist[np.ix_(fy, fy)])
    kept = np.ones(len(frags), dtype=bool)
    discarded = 0.0
    best = (1.0, 1.0, [])  # discard everything
    while kept.any():
        sub = np.where(kept[:, None] & kept[None, :], distort, -1.0)
        worst = float(sub.max())
        eps = max(discarded, worst)
        if eps < best[0]:
            best = (eps, discarded, list(np.flatnonzero(kept)))
        if worst <= discarded:
            break
        # drop the lighter end of the worst pair, scoring by how often it is involved
        a, b = np.unravel_index(np.argmax(sub), sub.shape)
        involvement = (sub >= worst - 1e-15).sum(axis=1)
        cand = [a, b]
        drop = max(cand, key=lambda c: (involvement[c], -mass[c], -c))
        kept[drop] = False
        discarded += float(mass[drop])
    return best


def _orders(space: FiniteMMSpace):
    k = space.k
    ecc = space.dist @ space.weights
    yield tuple(range(k))
    yield tuple(int(i) for i in np.argsort(ecc, kind="stable"))
    yield tuple(int(i) for i in np.argsort(-space.weights, kind="stable"))


def _upper_one_way(x: FiniteMMSpace, y: FiniteMMSpace) -> BoxResult:
    best = BoxResult(1.0, 1.0, "discard everything")
    for ox in _orders(x):
        for oy in _orders(y):
            frags = _refinement(x, y, ox, oy)
            eps, disc, kept = _trim(x, y, frags)
            if eps < best.value:
                desc = ", ".join(
                    f"{x.labels[frags[i][0]]}~{y.labels[frags[i][1]]}:{frags[i][2]:.6g}" for i in kept
                )
                best = BoxResult(eps, disc, f"refinement keeping [{desc}]")
    return best


def box_distance_upper(x: FiniteMMSpace, y: FiniteMMSpace) -> BoxResult:
    """Upper bound on the box distance from explicit interval layouts.

    Several canonical atom orders of each space are aligned by their common
    mass refinement and the worst fragments trimmed greedily.  The result is
    symmetric in its arguments.
    """
    a = _upper_one_way(x, y)
    b = _upper_one_way(y, x)
    res = a if a.value <= b.value else BoxResult(b.value, b.discarded_mass, b.alignment + " (reversed)")
    if x.k == y.k and x.k <= EXACT_MAX_POINTS and _is_uniform(x) and _is_uniform(y):
        ex = box_distance_exact(x, y)
        if ex.value < res.value:
            res = ex
    return res


def product_lemma_bound(x: FiniteMMSpace, y: FiniteMMSpace, n: int) -> float:
    """n * n! * box(X, Y): bound on the box distance between the l_p powers."""
    if int(n) != n or n < 1:
        raise BadParam(f"n must be a positive integer, got {n!r}")
    try:
        box = box_distance_exact(x, y).value
    except Unsupported:
        box = box_distance_upper(x, y).value
    return n * math.factorial(int(n)) * box

