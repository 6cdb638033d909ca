"""Finite metric measure spaces: construction, validation, generators and file I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AsymmetricMatrix,
    BadParam,
    DuplicateZeroDistance,
    NonpositiveScale,
    NonpositiveWeight,
    NonProbabilityWeights,
    ParseError,
    TriangleViolation,
    ValidationError,
)

TRIANGLE_TOL = 1e-9
WEIGHT_SUM_TOL = 1e-12
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteMMSpace:
    """A finite set of labelled points with a metric and a probability measure.

    Instances are immutable; the arrays are flagged read-only.  Build them with
    :func:`new_finite`, which validates every metric and measure invariant.
    """

    labels: tuple[str, ...]
    dist: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return len(self.labels)

    def index(self, point) -> int:
        """Resolve a label or an integer index to an index."""
        if isinstance(point, (int, np.integer)) and not isinstance(point, bool):
            if 0 <= point < self.k:
                return int(point)
            raise KeyError(point)
        return self.labels.index(point)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteMMSpace):
            return NotImplemented
        return (
            self.labels == other.labels
            and np.array_equal(self.dist, other.dist)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash((self.labels, self.dist.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        return f"FiniteMMSpace(k={self.k}, diameter={float(self.dist.max()):.6g})"


@dataclass(frozen=True)
class SpaceStats:
    diameter: float
    min_positive_distance: float
    point_count: int


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _make(labels, dist, weights) -> FiniteMMSpace:
    return FiniteMMSpace(tuple(str(x) for x in labels), _freeze(dist), _freeze(weights))


def _check_triangle(d: np.ndarray) -> None:
    k = d.shape[0]
    worst = 0.0
    worst_triple = None
    for m in range(k):
        excess = d - (d[:, m][:, None] + d[m, :][None, :])
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[i, j] > worst:
            worst = float(excess[i, j])
            worst_triple = (int(i), int(m), int(j))
    if worst > TRIANGLE_TOL:
        i, m, j = worst_triple
        raise TriangleViolation(
            f"d[{i},{j}]={d[i, j]!r} exceeds d[{i},{m}]+d[{m},{j}]={d[i, m] + d[m, j]!r} "
            f"by {worst:.3g} (worst triple {worst_triple})"
        )


def new_finite(labels: Sequence, dist, weights, *, check_triangle: bool = True) -> FiniteMMSpace:
    """Validate and build a :class:`FiniteMMSpace`.

    ``check_triangle=False`` is reserved for constructions that are metric by
    construction (l_p products); everything else is always checked.
    """
    labels = [str(x) for x in labels]
    d = np.asarray(dist, dtype=float)
    w = np.asarray(weights, dtype=float)
    k = len(labels)
    if k < 1:
        raise ValidationError("a space needs at least one point")
    if len(set(labels)) != k:
        raise ValidationError("labels must be distinct")
    if d.shape != (k, k):
        raise ValidationError(f"distance matrix has shape {d.shape}, expected {(k, k)}")
    if w.shape != (k,):
        raise ValidationError(f"weights have shape {w.shape}, expected {(k,)}")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(w))):
        raise ValidationError("non-finite entries")
    asym = np.abs(d - d.T)
    if asym.max() > SYMMETRY_TOL:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise AsymmetricMatrix(f"d[{i},{j}]={d[i, j]!r} but d[{j},{i}]={d[j, i]!r}")
    if np.abs(np.diag(d)).max() > SYMMETRY_TOL:
        raise ValidationError("nonzero diagonal entry")
    if d.min() < 0:
        raise ValidationError("negative distance")
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    off = d + np.eye(k)
    if k > 1 and off.min() <= 0:
        i, j = np.unravel_index(np.argmin(off), off.shape)
        raise DuplicateZeroDistance(f"distinct points {labels[i]!r} and {labels[j]!r} at distance 0")
    if np.any(w <= 0):
        i = int(np.argmin(w))
        raise NonpositiveWeight(f"weight of {labels[i]!r} is {w[i]!r}")
    if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
        raise NonProbabilityWeights(f"weights sum to {float(w.sum())!r}")
    if check_triangle and k > 2:
        _check_triangle(d)
    return _make(labels, d, w)


def scale(space: FiniteMMSpace, t: float) -> FiniteMMSpace:
    if not t > 0 or not math.isfinite(t):
        raise NonpositiveScale(f"scale factor must be positive, got {t!r}")
    if t == 1:
        return space
    return _make(space.labels, space.dist * t, space.weights)


def stats(space: FiniteMMSpace) -> SpaceStats:
    d = space.dist
    if space.k == 1:
        return SpaceStats(0.0, 0.0, 1)
    off = d[~np.eye(space.k, dtype=bool)]
    return SpaceStats(float(d.max()), float(off.min()), space.k)


# -- generators -------------------------------------------------------------


def _labels(k: int) -> list[str]:
    if k <= 26:
        return [chr(ord("a") + i) for i in range(k)]
    return [f"p{i}" for i in range(k)]


def _cycle_hops(m: int) -> np.ndarray:
    i = np.arange(m)
    hops = np.abs(i[:, None] - i[None, :])
    return np.minimum(hops, m - hops).astype(float)


def _shortest_path_closure(d: np.ndarray) -> np.ndarray:
    d = d.copy()
    for m in range(d.shape[0]):
        d = np.minimum(d, d[:, m][:, None] + d[m, :][None, :])
    return d


def generate(kind: str, params=None, seed: int | None = None) -> FiniteMMSpace:
    """Build a named family member.

    ``params`` is a single number or a sequence: ``k_regular(k)``,
    ``two_point(d)``, ``cycle_graph(m)``, ``circle(m)``, ``random(k)``.
    """
    if params is None:
        params = ()
    elif not isinstance(params, (list, tuple)):
        params = (params,)
    if not params:
        raise BadParam(f"{kind} needs a size or distance parameter")
    first = params[0]

    def as_int(v, lo, name):
        if float(v) != int(v) or int(v) < lo:
            raise BadParam(f"{kind}: {name} must be an integer >= {lo}, got {v!r}")
        return int(v)

    if kind == "k_regular":
        k = as_int(first, 1, "k")
        d = np.ones((k, k)) - np.eye(k)
        return new_finite(_labels(k), d, np.full(k, 1.0 / k))
    if kind == "two_point":
        dd = float(first)
        if not dd > 0:
            raise BadParam(f"two_point distance must be positive, got {first!r}")
        return new_finite(_labels(2), [[0.0, dd], [dd, 0.0]], [0.5, 0.5])
    if kind == "cycle_graph":
        m = as_int(first, 3, "m")
        return new_finite(_labels(m), _cycle_hops(m), np.full(m, 1.0 / m))
    if kind == "circle":
        m = as_int(first, 3, "m")
        return new_finite(_labels(m), _cycle_hops(m) * (2.0 * math.pi / m), np.full(m, 1.0 / m))
    if kind == "random":
        k = as_int(first, 1, "k")
        rng = np.random.default_rng(0 if seed is None else seed)
        raw = rng.uniform(0.1, 1.0, size=(k, k))
        raw = np.triu(raw, 1)
        raw = raw + raw.T
        d = _shortest_path_closure(raw)
        w = rng.uniform(0.05, 1.0, size=k)
        return new_finite(_labels(k), d, w / w.sum())
    raise BadParam(f"unknown generator kind {kind!r}")


def parse_generator(text: str, seed: int | None = None) -> FiniteMMSpace:
    """Parse ``kind:param[,param...]`` as used on the command line."""
    kind, _, rest = text.partition(":")
    params = []
    for tok in filter(None, rest.split(",")):
        try:
            params.append(int(tok))
        except ValueError:
            try:
                params.append(float(tok))
            except ValueError:
                raise BadParam(f"bad generator parameter {tok!r} in {text!r}") from None
    return generate(kind.strip(), params, seed=seed)


# -- file format ------------------------------------------------------------


def _num(x: float) -> str:
    return format(float(x), ".17g")


def dumps(space: FiniteMMSpace) -> str:
    rows = ",\n    ".join("[" + ", ".join(_num(v) for v in row) + "]" for row in space.dist)
    return (
        "{\n"
        f'  "labels": {json.dumps(list(space.labels))},\n'
        f'  "distance": [\n    {rows}\n  ],\n'
        f'  "weights": [{", ".join(_num(v) for v in space.weights)}]\n'
        "}\n"
    )


def loads(text: str) -> FiniteMMSpace:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    for key in ("labels", "distance", "weights"):
        if key not in obj:
            raise ParseError(f"missing field {key!r}")
        if not isinstance(obj[key], list):
            raise ParseError(f"field {key!r} must be an array")
    labels, dist, weights = obj["labels"], obj["distance"], obj["weights"]
    k = len(labels)
    if not all(isinstance(x, str) for x in labels):
        raise ParseError("field 'labels' must contain strings")
    if len(dist) != k:
        raise ParseError(f"field 'distance': {len(dist)} rows for {k} labels")
    for i, row in enumerate(dist):
        if not isinstance(row, list) or len(row) != k:
            raise ParseError(f"field 'distance' row {i}: expected {k} numbers")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise ParseError(f"field 'distance' row {i}: non-numeric entry")
    if len(weights) != k or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in weights
    ):
        raise ParseError(f"field 'weights': expected {k} numbers")
    return new_finite(labels, dist, weights)


def save(space: FiniteMMSpace, path) -> None:
    Path(path).write_text(dumps(space), encoding="utf-8")


def load(path) -> FiniteMMSpace:
    return loads(Path(path).read_text(encoding="utf-8"))
