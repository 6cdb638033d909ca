"""l_p-products X_p^n: construction, sampling, and bounds on their observable diameter."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import realdist
from .errors import BadBudget, BadParam, BadTuple, DegenerateBase, KappaOutOfRange, TooLarge
from .invariants import LipschitzWitness, max_delta_net, mcshane_extend
from .mmspace import FiniteMMSpace, new_finite, stats

EXPLICIT_LIMIT = 4096
CHUNK_ROWS = 1024


@dataclass(frozen=True)
class ProductHandle:
    """X_p^n without materialising its k^n points."""

    base: FiniteMMSpace
    n: int
    p: float
    mode: str = "implicit"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise BadParam(f"n must be a positive integer, got {self.n!r}")
        if not self.p >= 1:
            raise BadParam(f"p must be >= 1, got {self.p!r}")
        if self.mode not in ("explicit", "implicit"):
            raise BadParam(f"unknown mode {self.mode!r}")
        if self.mode == "explicit" and self.base.k ** self.n > EXPLICIT_LIMIT:
            raise TooLarge(f"{self.base.k}^{self.n} points exceed the explicit limit")

    def explicit(self) -> FiniteMMSpace:
        return product_explicit(self.base, self.n, self.p)


@dataclass(frozen=True)
class WitnessReport:
    basepoint: str
    n: int
    p: float
    kappa: float
    alpha_n: float
    beta_n: float
    c_n: float
    certified_lower: float
    value_uncertainty: float
    # what certified_lower bounds; for p > 1 only ObsDiam at levels below kappa
    certifies: str


def _check_p_finite(p: float) -> None:
    if not 1 <= p < math.inf:
        raise BadParam(f"p must be finite and >= 1, got {p!r}")


def _combine(parts: np.ndarray, p: float, axis: int = -1) -> np.ndarray:
    """l_p norm of coordinate distances along ``axis``."""
    if p == math.inf:
        return parts.max(axis=axis)
    if p == 1:
        return parts.sum(axis=axis)
    return (parts**p).sum(axis=axis) ** (1.0 / p)


def product_explicit(base: FiniteMMSpace, n: int, p: float) -> FiniteMMSpace:
    ProductHandle(base, n, p)  # validates n and p
    k = base.k
    if k**n > EXPLICIT_LIMIT:
        raise TooLarge(f"{k}^{n} points exceed the explicit limit {EXPLICIT_LIMIT}")
    coords = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64).reshape(-1, n)
    parts = np.stack([base.dist[coords[:, i][:, None], coords[:, i][None, :]] for i in range(n)], axis=-1)
    dist = _combine(parts, p)
    weights = np.prod(base.weights[coords], axis=1)
    weights = weights / weights.sum()
    labels = [",".join(base.labels[c] for c in row) for row in coords]
    return new_finite(labels, dist, weights, check_triangle=len(labels) <= 512)


def _as_indices(handle: ProductHandle, x) -> list[int]:
    if len(x) != handle.n:
        raise BadTuple(f"expected a {handle.n}-tuple, got length {len(x)}")
    try:
        return [handle.base.index(c) for c in x]
    except (KeyError, ValueError):
        raise BadTuple(f"tuple {x!r} names an unknown point") from None


def product_metric(handle: ProductHandle, x: Sequence, y: Sequence) -> float:
    xi, yi = _as_indices(handle, x), _as_indices(handle, y)
    parts = handle.base.dist[xi, yi]
    return float(_combine(parts, handle.p))


# -- sampling -----------------------------------------------------------------------


def _chunk_sample(base: FiniteMMSpace, n: int, rows: int, seed: int, stream: int, chunk: int) -> np.ndarray:
    rng = np.random.default_rng([seed, stream, chunk])
    cum = np.cumsum(base.weights)
    u = rng.random((rows, n))
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    return np.minimum(idx, base.k - 1).astype(np.int32)


def _chunks(count: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK_ROWS, count - c * CHUNK_ROWS)) for c in range(-(-count // CHUNK_ROWS))]


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sample_product(handle: ProductHandle, count: int, seed: int = 0, workers: int = 1, stream: int = 0) -> np.ndarray:
    """``count`` i.i.d. points of X^n as a (count, n) array of point indices.

    Rows come in fixed-size chunks, each from its own generator keyed by
    (seed, stream, chunk), so the result does not depend on ``workers``.
    """
    if int(count) != count or count < 1:
        raise BadBudget(f"count must be a positive integer, got {count!r}")
    parts = _map(
        lambda c: _chunk_sample(handle.base, handle.n, c[1], seed, stream, c[0]),
        _chunks(int(count)),
        workers,
    )
    return np.concatenate(parts, axis=0)


# -- CLT witness ----------------------------------------------------------------------


def v_p(base: FiniteMMSpace, p: float) -> tuple[float, str]:
    """max_x Var(d(x, .)^p) with its first maximiser."""
    _check_p_finite(p)
    vals = base.dist**p
    means = vals @ base.weights
    var = ((vals - means[:, None]) ** 2) @ base.weights
    top = float(var.max())
    best = int(np.flatnonzero(var >= top - 1e-12 * max(top, 1e-300))[0])
    return float(var[best]), base.labels[best]


def witness_law(base: FiniteMMSpace, n: int, p: float, merge_tol: float = 1e-12):
    """Basepoint and exact law of f_n(x) = sum_i d(x0, x_i)^p under the product measure."""
    _, x0 = v_p(base, p)
    i0 = base.index(x0)
    nu = realdist.pushforward(base, base.dist[i0] ** p)
    return x0, realdist.convolve_power(nu, n, merge_tol)


def witness_bound(base: FiniteMMSpace, n: int, p: float, kappa: float, merge_tol: float = 1e-12) -> WitnessReport:
    """Certified lower bound from the sublevel/superlevel sets of f_n.

    For p = 1, f_n is 1-Lipschitz on X_1^n and the bound is the partial
    diameter of its law at level 1 - kappa, a bound on ObsDiam(-kappa).  For
    p > 1 the bound is the l_p distance between the kappa-tails of f_n, a
    bound on Sep(kappa, kappa) and so on ObsDiam(-kappa') for kappa' < kappa.
    """
    _check_p_finite(p)
    if not 0 < kappa < 0.5:
        raise KappaOutOfRange(f"kappa must lie in (0, 1/2), got {kappa!r}")
    if base.k < 2:
        raise DegenerateBase("the witness needs a base with at least two points")
    var, x0 = v_p(base, p)
    if var <= 0:
        raise DegenerateBase("d(x0, .)^p is constant")
    _, law = witness_law(base, n, p, merge_tol)
    q = realdist.quantile_pair(law, kappa)
    u = law.value_error
    c_n = (q.beta_q - q.alpha_q) / math.sqrt(n * var)
    st = stats(base)
    if p == 1:
        lower = realdist.partial_diameter(law, 1.0 - kappa) - 2 * u
        certifies = f"ObsDiam(X_1^n; -{kappa!r})"
    else:
        gap = q.beta_q - q.alpha_q - 2 * u
        ratio = (st.min_positive_distance / st.diameter) ** (p - 1)
        lower = (gap * ratio / p) ** (1.0 / p) if gap > 0 else 0.0
        certifies = f"Sep(X_p^n; {kappa!r}, {kappa!r}), hence ObsDiam(X_p^n; -k') for k' < {kappa!r}"
    return WitnessReport(
        basepoint=x0,
        n=int(n),
        p=float(p),
        kappa=float(kappa),
        alpha_n=q.alpha_q,
        beta_n=q.beta_q,
        c_n=c_n,
        certified_lower=max(0.0, lower),
        value_uncertainty=u,
        certifies=certifies,
    )


def witness_lipschitz_constant(base: FiniteMMSpace, n: int, p: float) -> float:
    """Lipschitz constant of f_n on X_p^n used to normalise it: p diam^(p-1) n^(1-1/p)."""
    _check_p_finite(p)
    return p * stats(base).diameter ** (p - 1) * n ** (1.0 - 1.0 / p)


# -- closed-form bounds ------------------------------------------------------------------


def upper_constant(kappa: float, p: float) -> float:
    if not 0 < kappa < 1:
        raise KappaOutOfRange(f"kappa must lie in (0, 1), got {kappa!r}")
    _check_p_finite(p)
    core = 4.0 * math.sqrt(2.0 * math.log(2.0 / kappa))
    return core if p == 1 else 4.0 + core


def upper_bound(base: FiniteMMSpace, n: int, p: float, kappa: float) -> float:
    """C(kappa, p) * diam(X) * n^(1/(2p)), an upper bound for ObsDiam(X_p^n; -kappa)."""
    c = upper_constant(kappa, p)
    return c * stats(base).diameter * n ** (1.0 / (2.0 * p))


def asymptotic_lower(base: FiniteMMSpace, p: float, kappa: float) -> float:
    """Coefficient of n^(1/(2p)) in the liminf lower bound."""
    _check_p_finite(p)
    if not 0 < kappa <= 0.5:
        raise KappaOutOfRange(f"kappa must lie in (0, 1/2], got {kappa!r}")
    if base.k < 2:
        return 0.0
    z = max(0.0, realdist.gaussian_tail_inv(kappa))
    var, _ = v_p(base, p)
    if p == 1:
        return 2.0 * z * math.sqrt(var)
    st = stats(base)
    return (2.0 * z * math.sqrt(var) / p) ** (1.0 / p) * (st.min_positive_distance / st.diameter) ** (1.0 - 1.0 / p)


# -- Monte Carlo lower bound -------------------------------------------------------------------


def dkw_epsilon(samples: int, confidence: float) -> float:
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * samples))


def _parse_families(families) -> list[tuple[str, int]]:
    out = []
    for item in families:
        name, _, count = str(item).partition(":")
        out.append((name, int(count) if count else (8 if name == "anchor" else 1)))
    return out


def mc_obs_lower(
    handle: ProductHandle,
    kappa: float,
    families: Sequence[str] = ("witness", "anchor:8"),
    samples: int = 10_000,
    seed: int = 0,
    confidence: float = 0.99,
    workers: int = 1,
) -> float:
    """High-confidence lower bound on ObsDiam(X_p^n; -kappa) by sampling.

    Each candidate is an explicit 1-Lipschitz function: the witness f_n
    divided by its Lipschitz constant, or the distance to a small random set
    of anchor tuples.  With probability >= ``confidence`` the empirical CDF of
    a candidate is uniformly within eps of the true one, so every interval of
    true mass >= 1 - kappa has empirical mass >= 1 - kappa - 2 eps; the
    empirical partial diameter at that lowered level is then a lower bound.
    The failure probability is split evenly over the candidates.
    """
    if not 0 < kappa < 1:
        raise KappaOutOfRange(f"kappa must lie in (0, 1), got {kappa!r}")
    if int(samples) != samples or samples < 100:
        raise BadBudget(f"need at least 100 samples, got {samples!r}")
    if not 0.5 <= confidence < 1:
        raise BadBudget(f"confidence must lie in [0.5, 1), got {confidence!r}")
    base, n, p = handle.base, handle.n, handle.p
    if base.k == 1:
        return 0.0

    dp = base.dist**p if p != math.inf else base.dist
    evaluators = []
    for name, count in _parse_families(families):
        if name == "witness":
            if p == math.inf:
                continue
            _, x0 = v_p(base, p)
            row = dp[base.index(x0)]
            scale = witness_lipschitz_constant(base, n, p)
            evaluators.append(lambda pts, row=row, scale=scale: row[pts].sum(axis=1) / scale)
        elif name == "anchor":
            for j in range(count):
                size = 1 + j % 3
                anchors = _chunk_sample(base, n, size, seed, 2, j)

                def ev(pts, anchors=anchors):
                    parts = np.stack([dp[pts, a[None, :]] for a in anchors], axis=0)
                    if p == math.inf:
                        return parts.max(axis=2).min(axis=0)
                    sums = parts.sum(axis=2)
                    return (sums.min(axis=0)) ** (1.0 / p)

                evaluators.append(ev)
        else:
            raise BadParam(f"unknown family {name!r}")
    if not evaluators:
        return 0.0
    # the best candidate is chosen after sampling, so the deviation bound must hold for all of them
    miss = (1.0 - confidence) / len(evaluators)
    level = 1.0 - kappa - 2.0 * dkw_epsilon(int(samples), 1.0 - miss)
    if level <= 0:
        return 0.0

    def chunk_values(c):
        pts = _chunk_sample(base, n, c[1], seed, 0, c[0])
        return np.stack([ev(pts) for ev in evaluators], axis=0)

    values = np.concatenate(_map(chunk_values, _chunks(int(samples)), workers), axis=1)
    uniform = np.full(values.shape[1], 1.0 / values.shape[1])
    best = 0.0
    for row in values:
        best = max(best, realdist.partial_diameter(realdist.measure(row, uniform), level))
    return best


# -- net and extension pipeline --------------------------------------------------------------


def net_extension(base: FiniteMMSpace, n: int, p: float, values) -> tuple[list[int], LipschitzWitness, float]:
    """Restrict f on X_p^n to a maximal n^(1/(2p))-net and re-extend it on X_1^n.

    Returns the net (indices into the explicit product), the extension f'
    (Lipschitz constant delta^(1-p) for the l_1 metric) and sup |f - f'|.
    """
    _check_p_finite(p)
    prod_p = product_explicit(base, n, p)
    prod_1 = product_explicit(base, n, 1)
    delta = n ** (1.0 / (2.0 * p))
    net = max_delta_net(list(range(prod_p.k)), prod_p.dist, delta)
    values = np.asarray(values, dtype=float)
    ext = mcshane_extend(prod_1, net, values[net], delta ** (1.0 - p))
    gap = float(np.max(np.abs(values - ext.values)))
    return net, ext, gap
