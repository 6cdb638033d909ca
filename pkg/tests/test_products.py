import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obsdiam import invariants as inv
from obsdiam import mmspace, products
from obsdiam.errors import BadBudget, BadParam, BadTuple, DegenerateBase, KappaOutOfRange, TooLarge
from obsdiam.products import ProductHandle

from conftest import spaces


def test_product_explicit(T):
    p1 = products.product_explicit(T, 2, 1)
    assert p1.k == 4
    i, j = p1.index("a,a"), p1.index("b,b")
    assert p1.dist[i, j] == 2
    np.testing.assert_allclose(p1.weights, 0.25)
    p2 = products.product_explicit(T, 2, 2)
    assert p2.dist[p2.index("a,a"), p2.index("b,b")] == pytest.approx(math.sqrt(2))
    x = mmspace.generate("random", 4, seed=1)
    one = products.product_explicit(x, 1, 3)
    np.testing.assert_allclose(one.dist, x.dist)
    np.testing.assert_allclose(one.weights, x.weights)


def test_handle_validation(T):
    with pytest.raises(BadParam):
        ProductHandle(T, 0, 1)
    with pytest.raises(BadParam):
        ProductHandle(T, 2, 0.5)
    with pytest.raises(TooLarge):
        ProductHandle(T, 20, 1, mode="explicit")


def test_product_metric():
    line = mmspace.new_finite("abcde", np.abs(np.subtract.outer(range(5), range(5))), [0.2] * 5)
    assert products.product_metric(ProductHandle(line, 3, 1), "aaa", "bab") == 2
    assert products.product_metric(ProductHandle(line, 2, 2), (0, 0), (3, 4)) == 5
    assert products.product_metric(ProductHandle(line, 2, math.inf), ("a", "a"), ("b", "c")) == 2
    with pytest.raises(BadTuple):
        products.product_metric(ProductHandle(line, 2, 1), (0,), (1, 1))


def test_sampling(T):
    h = ProductHandle(T, 1, 1)
    s = products.sample_product(h, 100_000, seed=1)
    assert abs((s[:, 0] == 0).mean() - 0.5) <= 0.01
    with pytest.raises(BadBudget):
        products.sample_product(h, 0)
    h5 = ProductHandle(mmspace.generate("random", 5, seed=2), 7, 2)
    a = products.sample_product(h5, 5000, seed=3)
    np.testing.assert_array_equal(a, products.sample_product(h5, 5000, seed=3))
    np.testing.assert_array_equal(a, products.sample_product(h5, 5000, seed=3, workers=4))
    assert not np.array_equal(a, products.sample_product(h5, 5000, seed=4))


def test_v_p(T):
    assert products.v_p(T, 1) == (0.25, "a")
    assert products.v_p(T, 2) == (0.25, "a")
    assert products.v_p(mmspace.generate("k_regular", 1), 1) == (0.0, "a")


def test_witness_examples(T):
    r = products.witness_bound(T, 4, 1, 0.2, merge_tol=0)
    assert r.certified_lower == 2 and r.basepoint == "a"
    r = products.witness_bound(T, 4, 2, 0.2)
    assert (r.alpha_n, r.beta_n, r.certified_lower) == (1, 3, 1)
    assert products.witness_bound(T, 1, 1, 0.4).certified_lower == 1
    with pytest.raises(DegenerateBase):
        products.witness_bound(mmspace.generate("k_regular", 1), 4, 1, 0.2)


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_witness_below_exact_brackets(T, n, p):
    """The certified value never exceeds what an exact oracle allows on the explicit product."""
    kappa = 0.2
    rep = products.witness_bound(T, n, p, kappa)
    prod = products.product_explicit(T, n, p)
    if p == 1:
        assert rep.certified_lower <= inv.obs_diam_bracket(prod, kappa, 0.02).upper + 1e-9
    else:
        assert rep.certified_lower <= inv.sep(prod, (kappa, kappa)) + 1e-9


@settings(max_examples=25, deadline=None)
@given(spaces(max_points=4), st.integers(1, 3), st.sampled_from([1.0, 2.0, 3.0]))
def test_witness_lipschitz_constant(x, n, p):
    if x.k < 2 or x.k**n > 64:
        return
    prod = products.product_explicit(x, n, p)
    _, x0 = products.v_p(x, p)
    row = x.dist[x.index(x0)] ** p
    grid = np.array(np.meshgrid(*[range(x.k)] * n, indexing="ij")).reshape(n, -1).T
    f = row[grid].sum(axis=1)
    assert inv.lipschitz_constant(prod, f) <= products.witness_lipschitz_constant(x, n, p) + 1e-9


def test_upper_bound(T):
    assert products.upper_bound(T, 1, 1, 0.2) == pytest.approx(4 * math.sqrt(2 * math.log(10)))
    assert products.upper_bound(T, 1, 1, 0.2) == pytest.approx(8.5830, abs=1e-3)
    assert products.upper_bound(T, 100, 1, 0.2) == pytest.approx(10 * products.upper_bound(T, 1, 1, 0.2))
    assert products.upper_bound(mmspace.scale(T, 3), 5, 2, 0.2) == pytest.approx(3 * products.upper_bound(T, 5, 2, 0.2))
    assert products.upper_constant(0.2, 2) == pytest.approx(4 + 4 * math.sqrt(2 * math.log(10)))


def test_asymptotic_lower(T):
    assert products.asymptotic_lower(T, 1, 0.1) == pytest.approx(1.2816, abs=1e-3)
    assert products.asymptotic_lower(T, 2, 0.1) == pytest.approx(0.8005, abs=1e-3)
    assert products.asymptotic_lower(T, 1, 0.5) == 0
    with pytest.raises(KappaOutOfRange):
        products.asymptotic_lower(T, 1, 0.6)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 8.0), st.sampled_from([0.05, 0.1, 0.3]))
def test_asymptotic_constant_power_mean(p, kappa):
    # on T the p > 1 constant is the p-th root of the p = 1 constant divided by p
    T = mmspace.generate("k_regular", 2)
    c1 = products.asymptotic_lower(T, 1, kappa)
    assert products.asymptotic_lower(T, p, kappa) == pytest.approx((c1 / p) ** (1 / p))


def test_mc_obs_lower(T):
    h = ProductHandle(T, 1, 1)
    assert products.mc_obs_lower(h, 0.4, samples=100_000, seed=0) >= 0.99
    assert products.mc_obs_lower(ProductHandle(T, 9, 1), 0.999) == 0
    h16 = ProductHandle(T, 16, 2)
    a = products.mc_obs_lower(h16, 0.2, samples=4000, seed=5)
    assert a == products.mc_obs_lower(h16, 0.2, samples=4000, seed=5)
    assert a == products.mc_obs_lower(h16, 0.2, samples=4000, seed=5, workers=3)
    assert a <= products.upper_bound(T, 16, 2, 0.2)
    with pytest.raises(BadBudget):
        products.mc_obs_lower(h, 0.2, samples=10)


def test_dkw_epsilon():
    assert products.dkw_epsilon(10_000, 0.99) == pytest.approx(math.sqrt(math.log(200) / 20_000))


def test_net_extension_gap(T):
    rng = np.random.default_rng(0)
    prod2 = products.product_explicit(T, 2, 2)
    for _ in range(10):
        f = inv.mcshane_extend(prod2, [int(rng.integers(4))], [rng.uniform(-1, 1)]).values
        net, ext, gap = products.net_extension(T, 2, 2, f)
        assert gap <= 2 * 2 ** 0.25 + 1e-12
        assert set(net) <= set(range(4))
