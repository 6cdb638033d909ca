import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obsdiam import boxdist, mmspace, products
from obsdiam.errors import BadParam, Unsupported

from conftest import spaces


def test_exact_examples(T):
    assert boxdist.box_distance_exact(T, T).value == 0
    assert boxdist.box_distance_exact(T, mmspace.scale(T, 1.2)).value == pytest.approx(0.2)
    r = boxdist.box_distance_exact(T, mmspace.scale(T, 3))
    assert r.value == 0.5 and r.discarded_mass == 0.5
    with pytest.raises(Unsupported):
        boxdist.box_distance_exact(T, mmspace.generate("k_regular", 3))
    with pytest.raises(Unsupported):
        boxdist.box_distance_exact(T, mmspace.generate("random", 2, seed=1))


def test_upper_examples(T):
    x = mmspace.generate("random", 5, seed=4)
    assert boxdist.box_distance_upper(x, x).value == pytest.approx(0, abs=1e-12)
    assert boxdist.box_distance_upper(T, mmspace.scale(T, 1.2)).value <= 0.2 + 1e-9
    y = mmspace.generate("random", 3, seed=5)
    assert boxdist.box_distance_upper(x, y).value <= max(mmspace.stats(x).diameter, mmspace.stats(y).diameter) + 1e-9


def test_lemma_bound(T):
    y = mmspace.scale(T, 1.2)
    assert boxdist.product_lemma_bound(T, T, 3) == 0
    assert boxdist.product_lemma_bound(T, y, 2) == pytest.approx(0.8)
    assert boxdist.product_lemma_bound(T, y, 1) == pytest.approx(boxdist.box_distance_exact(T, y).value)
    with pytest.raises(BadParam):
        boxdist.product_lemma_bound(T, y, 0)


def test_parameterization(T):
    par = boxdist.AtomParameterization.of(mmspace.generate("k_regular", 4), order=[2, 0, 1, 3])
    assert [par.point_at(s) for s in (0.0, 0.3, 0.6, 0.99)] == [2, 0, 1, 3]


def _uniform(k, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, size=(k, 2))
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    return mmspace.new_finite([chr(97 + i) for i in range(k)], d, np.full(k, 1 / k))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10**6), st.integers(0, 10**6))
def test_box_symmetry_and_triangle(k, s1, s2):
    x, y, z = _uniform(k, s1), _uniform(k, s2), _uniform(k, s1 + s2 + 1)
    xy = boxdist.box_distance_exact(x, y).value
    assert xy == pytest.approx(boxdist.box_distance_exact(y, x).value)
    assert xy <= boxdist.box_distance_exact(x, z).value + boxdist.box_distance_exact(z, y).value + 1e-12
    assert xy <= boxdist.box_distance_upper(x, y).value + 1e-12


def _fractional_brute(x, y, m):
    """Search layouts on a grid of m equal cells: each cell maps to one atom of X and one of Y."""
    k = x.k
    assert m % k == 0
    per = m // k
    best = math.inf
    # fix X's cell assignment (atoms consecutive); permute Y's cell labels
    cells_x = [i for i in range(k) for _ in range(per)]
    seen = set()
    for cells_y in itertools.permutations(cells_x):
        if cells_y in seen:
            continue
        seen.add(cells_y)
        for mask in range(1 << m):
            kept = [c for c in range(m) if not mask >> c & 1]
            disc = (m - len(kept)) / m
            if disc >= best:
                continue
            worst = 0.0
            for a in kept:
                for b in kept:
                    worst = max(worst, abs(x.dist[cells_x[a], cells_x[b]] - y.dist[cells_y[a], cells_y[b]]))
            best = min(best, max(disc, worst))
    return best


@pytest.mark.parametrize("seed", range(4))
def test_whole_atom_discards_match_fractional_grid(seed):
    """Splitting atoms into halves never beats the bijection search."""
    x, y = _uniform(2, seed), _uniform(2, seed + 100)
    assert _fractional_brute(x, y, 4) >= boxdist.box_distance_exact(x, y).value - 1e-12
    x3, y3 = _uniform(3, seed), _uniform(3, seed + 100)
    assert _fractional_brute(x3, y3, 6) >= boxdist.box_distance_exact(x3, y3).value - 1e-12


def test_product_box_within_bound(T):
    y = mmspace.scale(T, 1.2)
    for p in (1, 2):
        direct = boxdist.box_distance_exact(products.product_explicit(T, 2, p), products.product_explicit(y, 2, p))
        assert direct.value <= boxdist.product_lemma_bound(T, y, 2) + 1e-9


@settings(max_examples=20, deadline=None)
@given(spaces(max_points=4), spaces(max_points=4))
def test_upper_is_symmetric(x, y):
    assert boxdist.box_distance_upper(x, y).value == pytest.approx(boxdist.box_distance_upper(y, x).value)
