import math

import numpy as np
import pytest

from effdimlab import targets as tg


LIB_CASES = [(kind, d, beta) for kind in tg.LIBRARY
             for d, beta in [(1, 1.5), (2, 2.0), (3, 2.5)]]


@pytest.mark.parametrize("kind,d,beta", LIB_CASES)
def test_partials_match_finite_differences(kind, d, beta):
    target = tg.make_target(kind, d, beta)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-0.8, 0.8, size=(200, d))
    h = 1e-5
    for i in range(d):
        alpha = tuple(1 if j == i else 0 for j in range(d))
        e = np.zeros(d)
        e[i] = h
        fd = (target.evaluate(xs + e) - target.evaluate(xs - e)) / (2 * h)
        assert np.max(np.abs(fd - target.partial(alpha, xs))) < 1e-6


@pytest.mark.parametrize("kind,d,beta", LIB_CASES)
def test_second_partials_match_finite_differences(kind, d, beta):
    if int(math.floor(beta)) < 2:
        pytest.skip("degree below two")
    target = tg.make_target(kind, d, beta)
    rng = np.random.default_rng(1)
    xs = rng.uniform(-0.5, 0.5, size=(50, d))
    h = 1e-4
    alpha = tuple(2 if j == 0 else 0 for j in range(d))
    e = np.zeros(d)
    e[0] = h
    fd = (target.evaluate(xs + e) - 2 * target.evaluate(xs) + target.evaluate(xs - e)) / h ** 2
    assert np.max(np.abs(fd - target.partial(alpha, xs))) < 1e-5


@pytest.mark.parametrize("kind,d,beta", LIB_CASES)
def test_bounded_by_one_and_norm_certificate(kind, d, beta):
    target = tg.make_target(kind, d, beta)
    assert target.declared_norm <= 1.0
    rng = np.random.default_rng(2)
    xs = rng.uniform(-1, 1, size=(20000, d))
    assert np.max(np.abs(target.evaluate(xs))) <= 1.0
    # sampled Hoelder quotient of the top derivatives stays under the norm
    q = target.degree
    gamma = beta - q
    ys = rng.uniform(-1, 1, size=(20000, d))
    gaps = np.max(np.abs(xs - ys), axis=1)
    keep = gaps > 1e-9
    worst = 0.0
    for alpha in tg.all_multi_indices(d, q):
        if sum(alpha) != q:
            continue
        diff = np.abs(target.partial(alpha, xs) - target.partial(alpha, ys))[keep]
        quot = diff / gaps[keep] ** gamma if gamma > 0 else diff
        worst = max(worst, float(quot.max()))
    sup_part = max(
        float(np.max(np.abs(target.partial(alpha, xs))))
        for alpha in tg.all_multi_indices(d, q)
    )
    assert sup_part + worst <= 1.0 + 1e-9


def test_constant_target():
    t = tg.make_target("constant", 2, 1.5, value=0.3)
    xs = np.random.default_rng(3).uniform(-1, 1, size=(10, 2))
    assert np.all(t.evaluate(xs) == 0.3)
    assert np.all(t.partial((1, 0), xs) == 0.0)


def test_taylor_coefficients_constant_and_linear():
    t = tg.make_target("linear", 2, 1.5)
    coeffs = tg.taylor_coefficients(t, np.array([0.2, -0.1]))
    xs = np.random.default_rng(4).uniform(-1, 1, size=(50, 2))
    poly = tg.taylor_polynomial(t, np.array([0.2, -0.1]), xs)
    # linear targets equal their own degree-1 Taylor polynomial
    assert np.max(np.abs(poly - t.evaluate(xs))) < 1e-12
    assert set(map(sum, coeffs)) == {0, 1}


def test_embed_target_uses_leading_coordinates():
    base = tg.make_target("sine", 2, 1.5)
    lifted = tg.embed_target(base, 5)
    rng = np.random.default_rng(5)
    xs = rng.uniform(-1, 1, size=(100, 5))
    assert np.allclose(lifted.evaluate(xs), base.evaluate(xs[:, :2]))
    assert np.all(lifted.partial((0, 0, 1, 0, 0), xs) == 0.0)
    inner = lifted.partial((1, 0, 0, 0, 0), xs)
    assert np.allclose(inner, base.partial((1, 0), xs[:, :2]))


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        tg.make_target("mystery", 2, 1.5)
