"""Finitely supported probability measures on the real line.

Masses are floats, optionally backed by exact integer counts over a common
denominator.  The exact representation is produced by :func:`convolve_power`
for lattice-valued measures with rational masses and lets quantiles and
partial diameters of large convolution powers be decided without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Sequence

import gmpy2
import numpy as np

from .errors import AlphaOutOfRange, BadParam, KappaOutOfRange, SupportExplosion, ValidationError
from .mmspace import FiniteMMSpace

MASS_TOL = 1e-12
_STANDARD_NORMAL = NormalDist()
DEFAULT_ATOM_CAP = 2_000_000
# Kronecker-substitution integers larger than this fall back to float convolution.
EXACT_BIT_BUDGET = 600_000_000
_MASS_TOL_FRACTION = Fraction(1, 10**12)


@dataclass(frozen=True, eq=False)
class DiscreteRealMeasure:
    atoms: np.ndarray
    masses: np.ndarray
    counts: tuple[int, ...] | None = None
    denominator: int | None = None
    value_error: float = 0.0

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def is_exact(self) -> bool:
        return self.counts is not None


@dataclass(frozen=True)
class QuantilePair:
    alpha_q: float
    beta_q: float
    kappa: float
    uncertainty: float = 0.0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def measure(atoms: Sequence[float], masses: Sequence[float]) -> DiscreteRealMeasure:
    """Build a measure, sorting atoms and merging exact duplicates."""
    v = np.asarray(atoms, dtype=float)
    m = np.asarray(masses, dtype=float)
    if v.shape != m.shape or v.ndim != 1 or len(v) == 0:
        raise ValidationError("atoms and masses must be equal-length nonempty vectors")
    if np.any(m <= 0):
        raise ValidationError("masses must be positive")
    if abs(float(m.sum()) - 1.0) > MASS_TOL:
        raise ValidationError(f"masses sum to {float(m.sum())!r}")
    uniq, inv = np.unique(v, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv, m)
    return DiscreteRealMeasure(_frozen(uniq), _frozen(merged))


def pushforward(space: FiniteMMSpace, f) -> DiscreteRealMeasure:
    values = np.asarray(f, dtype=float)
    if values.shape != (space.k,):
        raise BadParam(f"function has {values.shape} values for a {space.k}-point space")
    return measure(values, space.weights)


# -- mass thresholds ----------------------------------------------------------


def _prefix(nu: DiscreteRealMeasure):
    """Prefix sums P (len m+1) and a comparison ``reaches(S, level)``."""
    if nu.is_exact:
        prefix = [0]
        acc = 0
        for c in nu.counts:
            acc += c
            prefix.append(acc)
        den = nu.denominator

        def need(level: float) -> int:
            q = (Fraction(level) - _MASS_TOL_FRACTION) * den
            return math.ceil(q)

        return prefix, need
    prefix = np.concatenate([[0.0], np.cumsum(nu.masses)])

    def need(level: float) -> float:
        return level - MASS_TOL

    return prefix, need


def partial_diameter(nu: DiscreteRealMeasure, alpha: float) -> float:
    """Smallest diameter of a set carrying mass >= alpha.

    Sets are restricted to interval hulls of atoms, which loses nothing on the
    real line.
    """
    if alpha > 1 + MASS_TOL:
        raise AlphaOutOfRange(f"alpha must be <= 1, got {alpha!r}")
    if alpha <= 0:
        return 0.0
    prefix, need = _prefix(nu)
    threshold = need(alpha)
    v = nu.atoms
    m = len(v)
    best = math.inf
    j = 0
    for i in range(m):
        if j < i:
            j = i
        while j < m and prefix[j + 1] - prefix[i] < threshold:
            j += 1
        if j == m:
            break
        best = min(best, float(v[j] - v[i]))
        if best == 0.0:
            break
    if best == math.inf:
        # only reachable when alpha sits within tolerance above the total mass
        best = float(v[-1] - v[0])
    return best


def mean(nu: DiscreteRealMeasure) -> float:
    return float(np.dot(nu.masses, nu.atoms))


def variance(nu: DiscreteRealMeasure) -> float:
    mu = mean(nu)
    return float(np.dot(nu.masses, (nu.atoms - mu) ** 2))


# -- convolution powers -------------------------------------------------------


def _rational_masses(nu: DiscreteRealMeasure):
    if nu.is_exact:
        return list(nu.counts), nu.denominator
    fracs = []
    for m in nu.masses:
        fr = Fraction(float(m)).limit_denominator(10**6)
        if abs(float(fr) - float(m)) > 1e-15:
            return None
        fracs.append(fr)
    if sum(fracs) != 1:
        return None
    den = math.lcm(*(fr.denominator for fr in fracs))
    return [int(fr * den) for fr in fracs], den


def _lattice(nu: DiscreteRealMeasure):
    """Return (offset, step, integer indices, representation error) or None."""
    v = nu.atoms
    a0 = float(v[0])
    if len(v) == 1:
        return a0, 1.0, np.zeros(1, dtype=np.int64), 0.0
    gaps = np.diff(v)
    step = float(gaps.min())
    idx_f = (v - a0) / step
    if not idx_f[-1] <= 100_000:
        return None
    idx = np.rint(idx_f).astype(np.int64)
    recon = a0 + idx * step
    err = float(np.max(np.abs(recon - v)))
    if err > 1e-9 * max(1.0, float(np.max(np.abs(v)))):
        return None
    return a0, step, idx, err


def _kronecker_power(idx: np.ndarray, counts: list[int], den: int, n: int) -> list[int]:
    span = int(idx[-1])
    coeff_bits = n * den.bit_length() + 2
    nbytes = (coeff_bits + 7) // 8
    shift = 8 * nbytes
    poly = gmpy2.mpz(0)
    for i, c in zip(idx.tolist(), counts):
        poly += gmpy2.mpz(c) << (shift * i)
    power = poly**n
    width = span * n + 1
    raw = int(power).to_bytes(nbytes * width, "little")
    return [int.from_bytes(raw[i * nbytes : (i + 1) * nbytes], "little") for i in range(width)]


def _merge_sorted(v: np.ndarray, m: np.ndarray, tol: float):
    if tol == 0:
        keep = np.concatenate([[True], np.diff(v) > 0])
        starts = np.flatnonzero(keep)
        return v[starts], np.add.reduceat(m, starts)
    out_v, out_m = [], []
    start = 0
    n = len(v)
    while start < n:
        end = start + 1
        while end < n and v[end] - v[start] <= tol:
            end += 1
        mass = float(m[start:end].sum())
        out_v.append(float(np.dot(v[start:end], m[start:end]) / mass))
        out_m.append(mass)
        start = end
    return np.array(out_v), np.array(out_m)


def convolve_power(
    nu: DiscreteRealMeasure,
    n: int,
    merge_tol: float = 1e-12,
    max_atoms: int = DEFAULT_ATOM_CAP,
) -> DiscreteRealMeasure:
    """Law of the sum of ``n`` independent copies of ``nu``.

    Lattice-supported measures with rational masses are convolved exactly in
    integer arithmetic; other lattice measures by float polynomial powering;
    anything else by iterated convolution with atoms within ``merge_tol``
    merged.  ``value_error`` bounds how far any reported atom may sit from a
    true atom of the sum.
    """
    if int(n) != n or n < 1:
        raise BadParam(f"n must be a positive integer, got {n!r}")
    if merge_tol < 0:
        raise BadParam("merge_tol must be nonnegative")
    n = int(n)
    if n == 1:
        return nu
    lat = _lattice(nu)
    if lat is not None:
        a0, step, idx, rep_err = lat
        width = int(idx[-1]) * n + 1
        if width > max_atoms:
            raise SupportExplosion(f"{width} lattice atoms exceed the cap {max_atoms}")
        grid = n * a0 + step * np.arange(width)
        value_error = n * (nu.value_error + rep_err)
        rational = _rational_masses(nu)
        if rational is not None:
            counts, den = rational
            if width * (n * den.bit_length() + 8) <= EXACT_BIT_BUDGET:
                out = _kronecker_power(idx, counts, den, n)
                total = den**n
                keep = [i for i, c in enumerate(out) if c]
                exact = tuple(out[i] for i in keep)
                masses = np.array([c / total for c in exact])
                return DiscreteRealMeasure(
                    _frozen(grid[keep]), _frozen(masses), exact, total, value_error
                )
        base = np.zeros(int(idx[-1]) + 1)
        base[idx] = nu.masses
        result = np.ones(1)
        power = base
        e = n
        while e:
            if e & 1:
                result = np.convolve(result, power)
            e >>= 1
            if e:
                power = np.convolve(power, power)
        keep = result > 0
        return DiscreteRealMeasure(_frozen(grid[keep]), _frozen(result[keep]), value_error=value_error)

    v, m = nu.atoms, nu.masses
    for _ in range(n - 1):
        if len(v) * len(nu) > 50 * max_atoms:
            raise SupportExplosion(f"intermediate support {len(v) * len(nu)} too large")
        sv = (v[:, None] + nu.atoms[None, :]).ravel()
        sm = (m[:, None] * nu.masses[None, :]).ravel()
        order = np.argsort(sv, kind="stable")
        v, m = _merge_sorted(sv[order], sm[order], merge_tol)
        if len(v) > max_atoms:
            raise SupportExplosion(f"{len(v)} atoms exceed the cap {max_atoms}")
    value_error = n * nu.value_error + (n - 1) * merge_tol
    return DiscreteRealMeasure(_frozen(v), _frozen(m), value_error=value_error)


# -- quantiles ----------------------------------------------------------------


def quantile_pair(nu: DiscreteRealMeasure, kappa: float) -> QuantilePair:
    """Least atom with CDF >= kappa and greatest atom with upper tail >= kappa."""
    if not 0 < kappa < 0.5:
        raise KappaOutOfRange(f"kappa must lie in (0, 1/2), got {kappa!r}")
    prefix, need = _prefix(nu)
    threshold = need(kappa)
    m = len(nu)
    total = prefix[m]
    lo = next(i for i in range(m) if prefix[i + 1] >= threshold)
    hi = next(j for j in range(m - 1, -1, -1) if total - prefix[j] >= threshold)
    return QuantilePair(float(nu.atoms[lo]), float(nu.atoms[hi]), kappa, nu.value_error)


# -- standard Gaussian tail -----------------------------------------------------


def gaussian_tail(r: float) -> float:
    """Upper-tail mass of the standard normal distribution beyond ``r``."""
    return 0.5 * math.erfc(r / math.sqrt(2.0))


def gaussian_tail_inv(kappa: float) -> float:
    """Solve ``gaussian_tail(x) == kappa``, i.e. the standard normal quantile at 1 - kappa."""
    if not 0 < kappa < 1:
        raise KappaOutOfRange(f"kappa must lie in (0, 1), got {kappa!r}")
    return 0.0 - _STANDARD_NORMAL.inv_cdf(kappa)
