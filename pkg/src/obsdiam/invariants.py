"""Observable diameter brackets and the combinatorial invariants around it.

Everything here is exhaustive or certified one-sided: lower bounds come from
explicit 1-Lipschitz functions or explicit sets, upper bounds only from
exhaustive enumeration (the grid oracle) or the separation-distance sandwich.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadKappas,
    BadParam,
    BadRadius,
    GridTooCoarse,
    KappaOutOfRange,
    NotLipschitzOnSubset,
    TooLarge,
)
from .mmspace import FiniteMMSpace, stats

MASS_TOL = 1e-12
LIPSCHITZ_TOL = 1e-12
ENUMERATION_BUDGET = 10**7


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float
    method: str

    def __post_init__(self):
        if self.lower < 0 or self.upper < 0 or self.lower > self.upper + 1e-12:
            raise ValueError(f"inconsistent bracket [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tol: float = 1e-12) -> bool:
        return self.lower - tol <= value <= self.upper + tol


@dataclass(frozen=True, eq=False)
class LipschitzWitness:
    values: np.ndarray
    lipschitz_constant: float

    def verify(self, space: FiniteMMSpace, tol: float = LIPSCHITZ_TOL) -> bool:
        v = np.asarray(self.values, dtype=float)
        gap = np.abs(v[:, None] - v[None, :]) - self.lipschitz_constant * space.dist
        return bool(gap.max() <= tol)


def lipschitz_constant(space: FiniteMMSpace, values) -> float:
    """Smallest L with |f(x) - f(y)| <= L d(x, y) for all pairs."""
    if space.k < 2:
        return 0.0
    v = np.asarray(values, dtype=float)
    off = ~np.eye(space.k, dtype=bool)
    return float((np.abs(v[:, None] - v[None, :])[off] / space.dist[off]).max())


def _resolve(space: FiniteMMSpace, points) -> list[int]:
    return [space.index(p) for p in points]


# -- vectorised partial diameters ----------------------------------------------


def partial_diameters(values: np.ndarray, weights: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise partial diameter of the pushforwards ``values[r]_* weights``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if alpha <= 0:
        return np.zeros(len(values))
    order = np.argsort(values, axis=1, kind="stable")
    v = np.take_along_axis(values, order, axis=1)
    w = weights[order]
    prefix = np.concatenate([np.zeros((len(v), 1)), np.cumsum(w, axis=1)], axis=1)
    k = v.shape[1]
    # window (i, j) inclusive, mass prefix[j+1] - prefix[i]
    mass = prefix[:, None, 1:] - prefix[:, :-1, None]
    ok = (mass >= alpha - MASS_TOL) & np.triu(np.ones((k, k), dtype=bool))[None]
    spread = v[:, None, :] - v[:, :, None]
    spread = np.where(ok, spread, np.inf)
    out = spread.min(axis=(1, 2))
    return np.where(np.isinf(out), v[:, -1] - v[:, 0], out)


# -- subset enumeration ----------------------------------------------------------


def _subset_blocks(space: FiniteMMSpace, low_bits: int = 12):
    """Yield (masks, mass, dist_to_set) for every nonempty subset, block by block.

    ``dist_to_set[r, x]`` is d(x, A_r); the empty set is skipped.
    """
    k = space.k
    d = space.dist
    w = space.weights
    lo = min(k, low_bits)
    nlo = 1 << lo
    dlo = np.full((nlo, k), np.inf)
    mlo = np.zeros(nlo)
    for b in range(lo):
        span = 1 << b
        dlo[span : 2 * span] = np.minimum(dlo[:span], d[b][None, :])
        mlo[span : 2 * span] = mlo[:span] + w[b]
    masks_lo = np.arange(nlo, dtype=np.int64)
    for high in range(1 << (k - lo)):
        dh = np.full(k, np.inf)
        mh = 0.0
        for b in range(k - lo):
            if high >> b & 1:
                dh = np.minimum(dh, d[lo + b])
                mh += w[lo + b]
        masks = masks_lo | (high << lo)
        dist = np.minimum(dlo, dh[None, :])
        mass = mlo + mh
        if high == 0:
            masks, dist, mass = masks[1:], dist[1:], mass[1:]
        yield masks, mass, dist


# -- lower bounds from explicit function families ---------------------------------


def _check_kappa_open(kappa: float) -> None:
    if not 0 < kappa < 1:
        raise KappaOutOfRange(f"kappa must lie in (0, 1), got {kappa!r}")


def _parse_family(spec) -> tuple[str, int]:
    if isinstance(spec, (tuple, list)):
        return str(spec[0]), int(spec[1])
    name, _, count = str(spec).partition(":")
    return name, int(count) if count else 256


def obs_diam_lower_family(
    space: FiniteMMSpace,
    kappa: float,
    family_spec: Sequence = ("distance_to_subset",),
    seed: int = 0,
) -> tuple[float, LipschitzWitness]:
    """Best (1 - kappa)-partial diameter over explicit 1-Lipschitz candidates.

    ``family_spec`` items: ``"distance_to_subset"`` (all nonempty subsets for
    up to 16 points, otherwise ``"distance_to_subset:count"`` random ones) and
    ``"random_mcshane:count"``.
    """
    if kappa <= 0:
        raise KappaOutOfRange(f"kappa must be positive, got {kappa!r}")
    k = space.k
    zero = LipschitzWitness(np.zeros(k), 1.0)
    if kappa >= 1 or k == 1:
        return 0.0, zero
    alpha = 1.0 - kappa
    rng = np.random.default_rng(seed)
    best, best_values = 0.0, np.zeros(k)

    def consider(cands: np.ndarray) -> None:
        nonlocal best, best_values
        if len(cands) == 0:
            return
        pd = partial_diameters(cands, space.weights, alpha)
        i = int(np.argmax(pd))
        if pd[i] > best:
            best, best_values = float(pd[i]), cands[i].copy()

    for item in family_spec:
        name, count = _parse_family(item)
        if name == "distance_to_subset":
            if k <= 16:
                for _, _, dist in _subset_blocks(space, low_bits=10):
                    consider(dist)
            else:
                picks = rng.random((count, k)) < rng.random((count, 1))
                picks[np.arange(count), rng.integers(0, k, count)] = True
                cands = np.stack([space.dist[:, p].min(axis=1) for p in picks])
                consider(cands)
        elif name == "random_mcshane":
            diam = stats(space).diameter
            cands = []
            for _ in range(count):
                size = int(rng.integers(1, k + 1))
                subset = rng.choice(k, size=size, replace=False)
                vals = rng.uniform(0.0, diam, size=size)
                if size > 1:
                    sub = space.dist[np.ix_(subset, subset)]
                    off = ~np.eye(size, dtype=bool)
                    lip = float((np.abs(vals[:, None] - vals[None, :])[off] / sub[off]).max())
                    if lip > 1:
                        vals = vals / lip
                cands.append(_mcshane(space.dist, subset, vals, 1.0))
            consider(np.array(cands))
        else:
            raise BadParam(f"unknown function family {name!r}")
    return best, LipschitzWitness(best_values, 1.0)


# -- grid oracle -------------------------------------------------------------------


def _floyd_negative_cycle(w: list[list[float]], k: int) -> tuple[bool, list[list[float]]]:
    d = [row[:] for row in w]
    for m in range(k):
        dm = d[m]
        for i in range(k):
            dim = d[i][m]
            if dim == math.inf:
                continue
            di = d[i]
            for j in range(k):
                c = dim + dm[j]
                if c < di[j]:
                    di[j] = c
    return any(d[i][i] < 0 for i in range(k)), d


def _level_caps(space: FiniteMMSpace, h: float, relaxed: bool) -> tuple[list[list[float]], int]:
    k = space.k
    diam = stats(space).diameter
    if relaxed:
        caps = np.floor(space.dist / h + 1.0 + 1e-9)
        levels = int(math.floor(diam / h + 0.5 + 1e-9))
    else:
        caps = np.floor(space.dist / h + 1e-9)
        # never let a rounding slip admit a non-Lipschitz grid function
        over = caps * h > space.dist * (1 + 1e-12)
        caps = caps - over
        levels = int(math.floor(diam / h + 1e-9))
        if levels * h > diam * (1 + 1e-12):
            levels -= 1
    w = [[math.inf] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if i != j:
                w[i][j] = float(caps[i, j])
        w[i][i] = 0.0
    for i in range(1, k):
        w[0][i] = min(w[0][i], levels)
        w[i][0] = min(w[i][0], levels)
    return w, levels


def _grid_optimum(space: FiniteMMSpace, kappa: float, h: float, relaxed: bool):
    """Largest integer T such that some grid function reaches partial diameter T*h.

    A grid function takes values in h*Z, is 0 at the first point, stays within
    the level range, and obeys the (exact or relaxed) Lipschitz caps.  Fixing
    the order in which it lists the points turns the search into a system of
    difference constraints, decided exactly by negative-cycle detection.
    """
    k = space.k
    base, _ = _level_caps(space, h, relaxed)
    alpha = 1.0 - kappa
    weights = space.weights
    best_t, best_levels = 0, [0] * k
    for perm in itertools.permutations(range(k)):
        if perm[0] > perm[-1]:
            continue  # mirror image of another order under f -> -f
        prefix = [0.0]
        for p in perm:
            prefix.append(prefix[-1] + weights[p])
        windows = []
        b = 0
        for a in range(k):
            b = max(b, a)
            while b < k and prefix[b + 1] - prefix[a] < alpha - MASS_TOL:
                b += 1
            if b == k:
                break
            windows.append((perm[a], perm[b]))
        if not windows or any(u == v for u, v in windows):
            continue
        w0 = [row[:] for row in base]
        for a in range(k - 1):
            u, v = perm[a], perm[a + 1]
            w0[v][u] = min(w0[v][u], 0.0)
        neg, closure = _floyd_negative_cycle(w0, k)
        if neg:
            continue
        t_cap = min(closure[u][v] for u, v in windows)
        if t_cap <= best_t:
            continue

        def solve(t: int):
            w = [row[:] for row in w0]
            for u, v in windows:
                w[v][u] = min(w[v][u], -float(t))
            return _floyd_negative_cycle(w, k)

        lo, hi = best_t, int(t_cap)
        found = None
        while lo < hi:
            mid = (lo + hi + 1) // 2
            neg, closure = solve(mid)
            if neg:
                hi = mid - 1
            else:
                lo, found = mid, closure
        if lo > best_t:
            if found is None:
                found = solve(lo)[1]
            pot = [min(0.0, min(found[u][v] for u in range(k))) for v in range(k)]
            shift = pot[0]
            best_t, best_levels = lo, [int(round(p - shift)) for p in pot]
    return best_t, best_levels


def obs_diam_bracket(
    space: FiniteMMSpace,
    kappa: float,
    grid_step: float = 0.02,
    max_oracle_points: int = 5,
    seed: int = 0,
) -> Bracket:
    """Certified enclosure of ObsDiam(space; -kappa).

    Small spaces go through the grid oracle: the lower end is the best grid
    function that is exactly 1-Lipschitz, the upper end the best grid function
    under caps relaxed by one step, plus one step.  Larger spaces pair the
    function-family lower bound with Sep(space; kappa/2, kappa/2) above.
    """
    _check_kappa_open(kappa)
    if not grid_step > 0:
        raise BadParam(f"grid_step must be positive, got {grid_step!r}")
    if space.k == 1:
        return Bracket(0.0, 0.0, "single-point")
    fam_lower, _ = obs_diam_lower_family(space, kappa, seed=seed)
    diam = stats(space).diameter
    if space.k <= max_oracle_points:
        h = grid_step
        if math.floor(diam / h + 1e-9) < 1:
            raise GridTooCoarse(f"grid step {h!r} exceeds the diameter {diam!r}")
        t_low, _ = _grid_optimum(space, kappa, h, relaxed=False)
        t_up, _ = _grid_optimum(space, kappa, h, relaxed=True)
        lower = max(t_low * h, fam_lower)
        upper = min(t_up * h + h, diam)
        return Bracket(lower, max(upper, lower), f"grid-oracle(h={h!r})")
    try:
        upper = sep(space, (kappa / 2, kappa / 2), "exact")
        method = "family/sep-sandwich"
    except TooLarge:
        upper = diam
        method = "family/diameter"
    upper = min(upper, diam)
    return Bracket(fam_lower, max(upper, fam_lower), method)


def grid_witness(space: FiniteMMSpace, kappa: float, grid_step: float) -> tuple[float, LipschitzWitness]:
    """The best exactly-Lipschitz grid function and its objective."""
    _check_kappa_open(kappa)
    t, levels = _grid_optimum(space, kappa, grid_step, relaxed=False)
    return t * grid_step, LipschitzWitness(np.array(levels, dtype=float) * grid_step, 1.0)


# -- separation distance -------------------------------------------------------------


def _check_kappas(kappas) -> list[float]:
    ks = [float(x) for x in kappas]
    if len(ks) < 2 or any(not x > 0 for x in ks):
        raise BadKappas(f"need at least two positive kappas, got {kappas!r}")
    return ks


def _sep_pair(space: FiniteMMSpace, k0: float, k1: float) -> tuple[float, bool]:
    best = 0.0
    feasible = False
    w = space.weights
    for _, mass, dist in _subset_blocks(space):
        rows = dist[mass >= k0 - MASS_TOL]
        if len(rows) == 0:
            continue
        order = np.argsort(-rows, axis=1, kind="stable")
        sd = np.take_along_axis(rows, order, axis=1)
        # points of A itself (distance 0) cannot belong to B
        cum = np.cumsum(np.where(sd > 0, w[order], 0.0), axis=1)
        reach = cum >= k1 - MASS_TOL
        first = np.argmax(reach, axis=1)
        has = reach[np.arange(len(rows)), first]
        s = sd[np.arange(len(rows)), first]
        feasible = feasible or bool(has.any())
        s = np.where(has, s, 0.0)
        best = max(best, float(s.max()))
    return best, feasible


def _sep_assignments(space: FiniteMMSpace, kappas: Sequence[float]) -> tuple[float, bool]:
    """Exhaustive Sep over all assignments of points to sets or to no set."""
    k = space.k
    nsets = len(kappas)
    base = nsets + 1
    total = base**k
    need = np.asarray(kappas) - MASS_TOL
    d = space.dist
    best = 0.0
    feasible = False
    chunk = 200_000
    powers = base ** np.arange(k)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        lab = (codes[:, None] // powers[None, :]) % base  # label nsets == unassigned
        masses = np.stack([(lab == s) @ space.weights for s in range(nsets)], axis=1)
        ok = np.all(masses >= need[None, :], axis=1)
        if not ok.any():
            continue
        feasible = True
        lab = lab[ok]
        value = np.full(len(lab), np.inf)
        for s, t in itertools.combinations(range(nsets), 2):
            ins = lab == s
            int_ = lab == t
            pair = np.where(ins[:, :, None] & int_[:, None, :], d[None], np.inf)
            value = np.minimum(value, pair.min(axis=(1, 2)))
        best = max(best, float(value.max()))
    return best, feasible


def _sep_heuristic(space: FiniteMMSpace, kappas: Sequence[float]) -> float:
    d, w = space.dist, space.weights
    k = space.k
    if len(kappas) == 2:
        best = 0.0
        for ka, kb in (kappas, kappas[::-1]):
            for x in range(k):
                for r in np.unique(d[x]):
                    inside = d[x] <= r
                    if w[inside].sum() < ka - MASS_TOL:
                        continue
                    gap = d[:, inside].min(axis=1)
                    for s in np.unique(gap[gap > 0]):
                        far = gap >= s
                        if w[far].sum() >= kb - MASS_TOL:
                            best = max(best, float(s))
        return best
    # several sets: farthest-first centres grown into balls of a common radius
    best = 0.0
    nsets = len(kappas)
    if nsets > k:
        return 0.0
    for start in range(k):
        centres = [start]
        while len(centres) < nsets:
            gap = d[:, centres].min(axis=1)
            centres.append(int(np.argmax(gap)))
        if len(set(centres)) < nsets:
            continue
        for r in np.unique(d):
            sets = [d[c] <= r for c in centres]
            if any(w[s].sum() < kk - MASS_TOL for s, kk in zip(sets, kappas)):
                continue
            val = min(d[np.ix_(a, b)].min() for a, b in itertools.combinations(sets, 2))
            best = max(best, float(val))
            break
    return best


def sep(space: FiniteMMSpace, kappas: Sequence[float], mode: str = "exact") -> float:
    return sep_report(space, kappas, mode)[0]


def sep_report(space: FiniteMMSpace, kappas: Sequence[float], mode: str = "exact") -> tuple[float, bool | None]:
    """Separation distance Sep(space; kappa_0, ..., kappa_N).

    ``exact`` enumerates every assignment (budget (N+2)^k <= 1e7); two sets
    use an equivalent subset scan.  ``heuristic`` returns a lower bound from
    explicit ball-shaped sets.  Infeasible mass requirements give 0.

    ``sep_report`` also says whether disjoint sets with the required masses
    exist (``None`` when a heuristic run cannot tell).
    """
    ks = _check_kappas(kappas)
    if mode == "heuristic":
        value = _sep_heuristic(space, ks)
        return value, (True if value > 0 else None)
    if mode != "exact":
        raise BadParam(f"unknown mode {mode!r}")
    if (len(ks) + 1) ** space.k > ENUMERATION_BUDGET:
        raise TooLarge(f"{len(ks) + 1}^{space.k} assignments exceed the budget")
    if len(ks) == 2:
        return _sep_pair(space, ks[0], ks[1])
    return _sep_assignments(space, ks)


# -- concentration function ----------------------------------------------------------


def concentration(space: FiniteMMSpace, r: float, mode: str = "exact") -> float:
    """alpha(r): worst missing mass of the open r-neighbourhood of a half-mass set."""
    if not r > 0:
        raise BadRadius(f"radius must be positive, got {r!r}")
    w = space.weights
    if mode == "exact":
        if 2**space.k > ENUMERATION_BUDGET:
            raise TooLarge(f"2^{space.k} subsets exceed the budget")
        best = 0.0
        for _, mass, dist in _subset_blocks(space):
            rows = dist[mass >= 0.5 - MASS_TOL]
            if len(rows):
                covered = (rows < r) @ w
                best = max(best, float(1.0 - covered.min()))
        return max(best, 0.0)
    if mode != "heuristic":
        raise BadParam(f"unknown mode {mode!r}")
    d = space.dist
    cands = []
    for x in range(space.k):
        for s in np.unique(d[x]):
            cands.append(d[x] <= s)
            cands.append(d[x] >= s)
    greedy = np.zeros(space.k, dtype=bool)
    for i in np.argsort(-w, kind="stable"):
        greedy[i] = True
        if w[greedy].sum() >= 0.5 - MASS_TOL:
            break
    cands.append(greedy)
    best = 0.0
    for a in cands:
        if w[a].sum() < 0.5 - MASS_TOL:
            continue
        near = d[:, a].min(axis=1) < r
        best = max(best, float(1.0 - w[near].sum()))
    return best


# -- Lipschitz order -----------------------------------------------------------------


def dominates(x_space: FiniteMMSpace, y_space: FiniteMMSpace) -> bool:
    """True iff some 1-Lipschitz map X -> Y pushes mu_X onto mu_Y (Y is dominated by X)."""
    kx, ky = x_space.k, y_space.k
    if ky**kx > ENUMERATION_BUDGET:
        raise TooLarge(f"{ky}^{kx} maps exceed the budget")
    dx, dy = x_space.dist, y_space.dist
    wx, wy = x_space.weights, y_space.weights
    order = list(np.argsort(-wx, kind="stable"))
    assign = [-1] * kx
    load = np.zeros(ky)

    def place(pos: int) -> bool:
        if pos == kx:
            return bool(np.all(np.abs(load - wy) <= MASS_TOL))
        x = order[pos]
        for y in range(ky):
            if load[y] + wx[x] > wy[y] + MASS_TOL:
                continue
            if any(dy[y, assign[z]] > dx[x, z] + LIPSCHITZ_TOL for z in order[:pos]):
                continue
            assign[x] = y
            load[y] += wx[x]
            if place(pos + 1):
                return True
            load[y] -= wx[x]
            assign[x] = -1
        return False

    return place(0)


# -- extension and nets ----------------------------------------------------------------


def _mcshane(dist: np.ndarray, subset, values, L: float) -> np.ndarray:
    subset = np.asarray(subset, dtype=int)
    values = np.asarray(values, dtype=float)
    f = (values[None, :] + L * dist[:, subset]).min(axis=1)
    f[subset] = values
    return f


def mcshane_extend(space: FiniteMMSpace, subset, partial_values, L: float = 1.0) -> LipschitzWitness:
    """Extend an L-Lipschitz function on ``subset`` by f(x) = min_y v(y) + L d(x, y)."""
    idx = _resolve(space, subset)
    vals = np.asarray(partial_values, dtype=float)
    if len(idx) == 0 or len(vals) != len(idx):
        raise BadParam("subset and partial_values must be nonempty and of equal length")
    for a, b in itertools.combinations(range(len(idx)), 2):
        if abs(vals[a] - vals[b]) > L * space.dist[idx[a], idx[b]] + LIPSCHITZ_TOL:
            pair = (space.labels[idx[a]], space.labels[idx[b]])
            raise NotLipschitzOnSubset(f"values on {pair} violate the constant {L!r}", pair)
    return LipschitzWitness(_mcshane(space.dist, idx, vals, L), float(L))


def max_delta_net(points: Sequence, metric, delta: float, order: Sequence[int] | None = None) -> list:
    """Greedy maximal delta-separated subset of ``points``.

    ``metric`` is a callable on two points or a matrix indexed by positions in
    ``points``.  ``order`` lists positions in the order they are offered.
    """
    if not delta > 0:
        raise BadParam(f"delta must be positive, got {delta!r}")
    if callable(metric):
        dist: Callable = lambda i, j: metric(points[i], points[j])
    else:
        mat = np.asarray(metric, dtype=float)
        dist = lambda i, j: float(mat[i, j])
    chosen: list[int] = []
    for i in order if order is not None else range(len(points)):
        if all(dist(i, j) >= delta for j in chosen):
            chosen.append(i)
    return [points[i] for i in chosen]
