"""Verification suites shared by the test-suite and ``obsdiam selftest``.

Each suite runs a family of checks of the form ``lhs <= rhs + tol`` and
collects failing cases with enough context (space files, parameters) to
reproduce them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import boxdist, invariants, mmspace, products, realdist

DEFAULT_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    vacuous: int = 0
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed > 0

    def check(self, cond: bool, **case) -> bool:
        if cond:
            self.passed += 1
        else:
            self.failed += 1
            self.failures.append(case)
        return cond

    def line(self, timing: bool = True) -> str:
        verdict = "PASS" if self.ok else "FAIL"
        extra = f", {self.vacuous} vacuous" if self.vacuous else ""
        secs = f" ({self.seconds:.1f}s)" if timing else ""
        return f"[{verdict}] {self.name}: {self.passed} passed, {self.failed} failed{extra}{secs}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - start
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ln(value) against ln(n), zero values dropped."""
    pts = [(math.log(n), math.log(v)) for n, v in zip(ns, values) if v > 0]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def two_point() -> mmspace.FiniteMMSpace:
    return mmspace.generate("k_regular", 2)


def random_space(index: int, max_points: int, seed: int = 0) -> mmspace.FiniteMMSpace:
    k = 2 + index % (max_points - 1)
    return mmspace.generate("random", k, seed=seed * 100_003 + index)


# -- suites ------------------------------------------------------------------------------


@_timed
def sandwich(count: int = 200, kappas=(0.1, 0.2, 0.3), grid_step: float = 0.02, seed: int = 0, tol: float = DEFAULT_TOL):
    """ObsDiam(-2k) <= Sep(k, k) <= ObsDiam(-k/2) on random spaces with at most six points."""
    res = SuiteResult("sandwich")
    for i in range(count):
        space = random_space(i, 6, seed)
        for kappa in kappas:
            low = invariants.obs_diam_bracket(space, 2 * kappa, grid_step).lower
            s = invariants.sep(space, (kappa, kappa), "exact")
            high = invariants.obs_diam_bracket(space, kappa / 2, grid_step).upper
            res.check(
                low - tol <= s <= high + tol,
                space=mmspace.dumps(space),
                kappa=kappa,
                obs_lower_2k=low,
                sep=s,
                obs_upper_half=high,
            )
    return res


@_timed
def exact_values(tol: float = DEFAULT_TOL):
    """Hand-checked values on the two-point space."""
    res = SuiteResult("exact-values")
    t = two_point()
    b = invariants.obs_diam_bracket(t, 0.4, 0.01)
    res.check(b.lower - tol <= 1.0 <= b.upper + tol and b.width <= 0.05 + tol, check="bracket(T,0.4)", bracket=str(b))
    s = invariants.sep(t, (0.5, 0.5), "exact")
    res.check(abs(s - 1.0) <= tol, check="sep(T,0.5,0.5)", value=s)
    a = invariants.concentration(t, 0.5, "exact")
    res.check(abs(a - 0.5) <= tol, check="alpha_T(0.5)", value=a)
    w = products.witness_bound(t, 4, 1, 0.2, merge_tol=0.0).certified_lower
    res.check(abs(w - 2.0) <= tol, check="witness(T,4,1,0.2)", value=w)
    return res


@_timed
def clt_asymptote(n: int = 10_000, kappa: float = 0.2, tol: float = 0.03):
    """Normalised quantile gap of the p = 1 witness against 2 * Phi^-1(kappa)."""
    res = SuiteResult("clt-asymptote")
    t = two_point()
    rep = products.witness_bound(t, n, 1, kappa, merge_tol=0.0)
    target = 2 * realdist.gaussian_tail_inv(kappa)
    res.notes.update(c_n=rep.c_n, target=target)
    res.check(abs(rep.c_n - target) <= tol, check="|c_n - 2 Phi^-1|", c_n=rep.c_n, target=target)
    ratio = rep.certified_lower / math.sqrt(n)
    floor = target * math.sqrt(0.25) * (1 - tol)
    res.check(ratio >= floor, check="certified/sqrt(n)", ratio=ratio, floor=floor)
    return res


@_timed
def upper_consistency(ns=(16, 64, 256, 1024, 4096), ps=(1, 2), kappa: float = 0.2, samples: int = 10_000,
                  confidence: float = 0.99, seed: int = 0, tol: float = DEFAULT_TOL, workers: int = 1):
    """Witness and Monte Carlo lower bounds never exceed the closed-form upper bound."""
    res = SuiteResult("upper-consistency")
    t = two_point()
    for p in ps:
        for n in ns:
            up = products.upper_bound(t, n, p, kappa)
            w = products.witness_bound(t, n, p, kappa).certified_lower
            mc = products.mc_obs_lower(products.ProductHandle(t, n, p), kappa, samples=samples,
                                       seed=seed, confidence=confidence, workers=workers)
            res.check(w <= up + tol, n=n, p=p, witness=w, upper=up)
            res.check(mc <= up + tol, n=n, p=p, mc=mc, upper=up)
    return res


def witness_sweep(ns, p: float, kappa: float = 0.2) -> list[float]:
    t = two_point()
    return [products.witness_bound(t, n, p, kappa).certified_lower for n in ns]


@_timed
def scaling(ns=tuple(16 * 2**i for i in range(9)), kappa: float = 0.2, slope_tol: float = 0.02):
    """Log-log slopes of the witness bound (n^(1/(2p)) growth) and of the upper bound."""
    res = SuiteResult("scaling")
    t = two_point()
    for p in (1, 2):
        target = 1.0 / (2 * p)
        ws = witness_sweep(ns, p, kappa)
        ups = [products.upper_bound(t, n, p, kappa) for n in ns]
        sw, su = loglog_slope(ns, ws), loglog_slope(ns, ups)
        res.notes[f"p={p}"] = {"witness_slope": sw, "upper_slope": su}
        res.check(abs(sw - target) <= slope_tol, p=p, fit="witness", slope=sw, target=target)
        res.check(abs(su - target) <= 1e-12, p=p, fit="upper", slope=su, target=target)
    return res


@_timed
def ledoux(ns=(2, 3, 4), tol: float = 1e-12):
    """Concentration of the l_1 cube against exp(-r^2 / (8 n))."""
    res = SuiteResult("ledoux")
    t = two_point()
    for n in ns:
        cube = products.product_explicit(t, n, 1)
        for r in np.arange(0.5, n + 0.25, 0.5):
            a = invariants.concentration(cube, float(r), "exact")
            bound = math.exp(-(r**2) / (8 * n))
            res.check(a <= bound + tol, n=n, r=float(r), alpha=a, bound=bound)
    return res


@_timed
def net_extension(trials: int = 50, seed: int = 0, tol: float = 1e-12):
    """The net/extension approximation f' stays within 2 delta of f."""
    res = SuiteResult("net-extension")
    base, n, p = mmspace.generate("k_regular", 2), 2, 2
    cube = products.product_explicit(base, n, p)
    delta = n ** (1.0 / (2 * p))
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        size = int(rng.integers(1, cube.k + 1))
        subset = sorted(rng.choice(cube.k, size=size, replace=False).tolist())
        vals = rng.uniform(-2, 2, size=size)
        if size > 1:
            lip = invariants.lipschitz_constant(
                mmspace.new_finite([cube.labels[i] for i in subset], cube.dist[np.ix_(subset, subset)],
                                   np.full(size, 1.0 / size)),
                vals,
            )
            if lip > 1:
                vals = vals / lip
        f = invariants.mcshane_extend(cube, subset, vals, 1.0)
        _, ext, gap = products.net_extension(base, n, p, f.values)
        res.check(f.verify(cube) and gap <= 2 * delta + tol, trial=trial, gap=gap, bound=2 * delta,
                  f=f.values.tolist())
    return res


@_timed
def product_box(tol: float = DEFAULT_TOL):
    """Box distance of squares against n * n! times the base box distance."""
    res = SuiteResult("product-box")
    x = two_point()
    y = mmspace.scale(x, 1.2)
    base = boxdist.box_distance_exact(x, y).value
    bound = boxdist.product_lemma_bound(x, y, 2)
    res.notes.update(base=base, bound=bound)
    for p in (1, 2):
        direct = boxdist.box_distance_exact(products.product_explicit(x, 2, p), products.product_explicit(y, 2, p)).value
        res.check(direct <= 2 * math.factorial(2) * base + tol, p=p, direct=direct, bound=bound)
    return res


@_timed
def concentration_relation(count: int = 100, grid_step: float = 0.02, seed: int = 0, tol: float = DEFAULT_TOL):
    """Both inequalities linking ObsDiam and the concentration function, on grids.

    (a) ObsDiam(-k) <= 2 r* where r* is the least grid radius with alpha(r) <= k/2.
    (b) alpha(r) <= k* where k* is the least grid kappa whose bracket is certified below r.
    Grid points where the right-hand side is undetermined are counted as vacuous.
    """
    res = SuiteResult("concentration-relation")
    kappas = [round(0.05 * i, 2) for i in range(1, 20)]
    for i in range(count):
        space = random_space(i, 5, seed + 1)
        diam = mmspace.stats(space).diameter
        radii = sorted(set(np.round(np.linspace(diam / 20, 1.1 * diam, 22), 12).tolist())
                       | set(np.unique(space.dist[space.dist > 0]).tolist()))
        alpha = {r: invariants.concentration(space, r, "exact") for r in radii}
        brackets = {k: invariants.obs_diam_bracket(space, k, grid_step) for k in kappas}
        for k in kappas:
            good = [r for r in radii if alpha[r] <= k / 2]
            if not good:
                res.vacuous += 1
                continue
            res.check(brackets[k].lower <= 2 * min(good) + tol, part="a", space=mmspace.dumps(space),
                      kappa=k, bracket=str(brackets[k]), r_star=min(good))
        for r in radii:
            below = [k for k in kappas if brackets[k].upper < r]
            if not below:
                res.vacuous += 1
                continue
            res.check(alpha[r] <= min(below) + tol, part="b", space=mmspace.dumps(space), r=r,
                      alpha=alpha[r], kappa_star=min(below))
    return res


@_timed
def circle_bounded(ns=(1, 4, 16, 64), p: float = 2, kappa: float = 0.1, samples: int = 10_000,
                   seed: int = 0, max_slope: float = 0.1, workers: int = 1):
    """Sampled ObsDiam lower bounds for powers of a discretised circle do not grow like n^(1/4)."""
    res = SuiteResult("circle-bounded")
    circle = mmspace.generate("circle", 32)
    vals = [
        products.mc_obs_lower(products.ProductHandle(circle, n, p), kappa, samples=samples, seed=seed, workers=workers)
        for n in ns
    ]
    slope = loglog_slope(ns, vals)
    res.notes.update(values=vals, slope=slope)
    res.check(slope <= max_slope, values=vals, slope=slope, max_slope=max_slope)
    return res


SELFTEST = {
    "sandwich": lambda tol, seed: sandwich(count=40, seed=seed, tol=tol),
    "exact-values": lambda tol, seed: exact_values(tol=tol),
    "scaling": lambda tol, seed: scaling(ns=(16, 64, 256, 1024, 4096), slope_tol=0.02 + tol),
    "ledoux": lambda tol, seed: ledoux(ns=(2, 3), tol=tol),
    "product-box": lambda tol, seed: product_box(tol=tol),
    "net-extension": lambda tol, seed: net_extension(trials=20, seed=seed, tol=tol),
}
