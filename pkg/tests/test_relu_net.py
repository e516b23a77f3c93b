import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from effdimlab.relu_net import (
    ClassBoundInput,
    NetworkSize,
    ReluNetwork,
    class_covering_bound,
    compose,
    identity_network,
    parallel,
    size_of,
)


def random_net(rng, input_dim, output_dim, depth, width=4):
    dims = [input_dim] + [width] * (depth - 1) + [output_dim]
    return ReluNetwork(
        [(rng.normal(size=(dims[i + 1], dims[i])), rng.normal(size=dims[i + 1]))
         for i in range(depth)]
    )


def test_single_layer_identity_affine():
    net = ReluNetwork([(np.array([[1.0]]), np.array([0.0]))])
    assert net.evaluate([3.0])[0] == 3.0


def test_two_layer_identity_exact_on_negatives():
    net = identity_network(1, 2)
    assert net.evaluate([-2.0])[0] == -2.0


def test_evaluate_shape_error():
    net = ReluNetwork([(np.eye(2), np.zeros(2))])
    with pytest.raises(ValueError):
        net.evaluate([1.0, 2.0, 3.0])


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        ReluNetwork([(np.eye(2), np.zeros(2)), (np.ones((1, 3)), np.zeros(1))])


def test_evaluate_deterministic():
    rng = np.random.default_rng(0)
    net = random_net(rng, 3, 2, 3)
    x = rng.normal(size=3)
    a = net.evaluate(x)
    b = net.evaluate(x)
    assert np.array_equal(a, b)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_compose_matches_sequential_evaluation(seed, li, lo):
    rng = np.random.default_rng(seed)
    inner = random_net(rng, 2, 3, li)
    outer = random_net(rng, 3, 1, lo)
    comp = compose(outer, inner)
    assert comp.depth == li + lo
    for _ in range(5):
        x = rng.normal(size=2) * 3.0
        want = outer.evaluate(inner.evaluate(x))
        got = comp.evaluate(x)
        assert np.max(np.abs(got - want)) <= 1e-10


def test_compose_depth_and_size_accounting():
    rng = np.random.default_rng(7)
    inner = random_net(rng, 2, 3, 2)
    outer = random_net(rng, 3, 1, 2)
    comp = compose(outer, inner)
    assert comp.depth == inner.depth + outer.depth
    wi, bi = inner.layers[-1]
    wo, _ = outer.layers[0]
    junction_extra = wi.nnz + np.count_nonzero(bi) + wo.nnz
    assert (
        size_of(comp).nonzeros_K
        == size_of(inner).nonzeros_K + size_of(outer).nonzeros_K + junction_extra
    )


def test_compose_dimension_mismatch():
    rng = np.random.default_rng(1)
    with pytest.raises(ValueError):
        compose(random_net(rng, 3, 1, 1), random_net(rng, 2, 2, 1))


def test_parallel_concatenates_and_pads():
    rng = np.random.default_rng(2)
    shallow = random_net(rng, 2, 1, 1)
    deep = random_net(rng, 2, 2, 3)
    par = parallel([shallow, deep])
    assert par.depth == 3
    for _ in range(10):
        x = rng.normal(size=2)
        want = np.concatenate([shallow.evaluate(x), deep.evaluate(x)])
        assert np.max(np.abs(par.evaluate(x) - want)) <= 1e-10


def test_parallel_copies_scale_nonzeros():
    rng = np.random.default_rng(3)
    net = random_net(rng, 2, 1, 2)
    k1 = size_of(net).nonzeros_K
    par = parallel([net] * 5)
    assert size_of(par).nonzeros_K == 5 * k1


def test_parallel_then_sum_equals_pointwise_sum():
    rng = np.random.default_rng(4)
    f = random_net(rng, 2, 1, 2)
    g = random_net(rng, 2, 1, 2)
    summed = compose(ReluNetwork([(np.ones((1, 2)), np.zeros(1))]), parallel([f, g]))
    for _ in range(20):
        x = rng.normal(size=2)
        want = f.evaluate(x)[0] + g.evaluate(x)[0]
        assert abs(summed.evaluate(x)[0] - want) <= 1e-10


def test_size_of_zero_layer():
    net = ReluNetwork([(np.zeros((2, 2)), np.zeros(2))])
    s = size_of(net)
    assert s.nonzeros_K == 0
    assert s.depth_L == 1
    assert s.max_weight_B == 0.0


def test_size_counts_are_bounded_by_dense_counts():
    rng = np.random.default_rng(5)
    net = random_net(rng, 3, 2, 3)
    s = size_of(net)
    dense = sum(w.shape[0] * w.shape[1] + b.shape[0] for w, b in net.layers)
    assert s.nonzeros_K <= dense


def test_json_round_trip_bit_exact():
    rng = np.random.default_rng(6)
    net = random_net(rng, 3, 2, 3)
    clone = ReluNetwork.from_json(net.to_json())
    for (w1, b1), (w2, b2) in zip(net.layers, clone.layers):
        assert np.array_equal(w1.toarray(), w2.toarray())
        assert np.array_equal(b1, b2)
    doc = json.loads(net.to_json())
    assert set(doc) == {"layers"}
    assert set(doc["layers"][0]) == {"w", "b"}


def test_covering_bound_zero_k():
    inp = ClassBoundInput(delta=0.5, tau=0.0, r_s=1.0,
                          size=NetworkSize(2, 1.0, 0), ambient_d=3)
    assert class_covering_bound(inp) == 0.0


def test_covering_bound_hand_value():
    inp = ClassBoundInput(delta=1.0, tau=0.0, r_s=1.0,
                          size=NetworkSize(1, 1.0, 1), ambient_d=1)
    assert math.isclose(class_covering_bound(inp), math.log(2.0), rel_tol=1e-12)


def test_covering_bound_hand_values_grid():
    # independent re-derivation of the formula at assorted points
    cases = [
        (0.5, 0.01, 2.0, 3, 2.0, 17, 4),
        (1.0, 0.2, 1.5, 2, 3.0, 5, 2),
        (0.9, 0.0, 1.0, 4, 1.5, 40, 6),
        (2.0, 0.5, 2.5, 1, 4.0, 3, 1),
        (0.8, 0.1, 3.0, 5, 1.2, 100, 3),
        (1.5, 0.25, 1.0, 2, 2.0, 9, 2),
        (0.7, 0.05, 2.0, 3, 1.1, 21, 5),
        (1.2, 0.3, 4.0, 2, 5.0, 2, 2),
        (3.0, 1.0, 1.7, 3, 2.2, 14, 3),
        (0.6, 0.0, 2.4, 4, 1.9, 33, 2),
    ]
    for delta, tau, r_s, L, B, K, d in cases:
        expected = K * math.log(
            2.0 ** L * math.sqrt(d * L) * K ** (L / 2.0) * B ** L * r_s
            / math.sqrt(delta ** 2 - 4.0 * tau)
        )
        got = class_covering_bound(
            ClassBoundInput(delta, tau, r_s, NetworkSize(L, B, K), d)
        )
        assert math.isclose(got, max(0.0, expected), rel_tol=1e-12)


def test_covering_bound_monotone_in_k_b_and_delta():
    base = dict(delta=0.5, tau=0.01, r_s=2.0, ambient_d=3)
    ks = [5, 10, 20, 40]
    vals = [class_covering_bound(ClassBoundInput(size=NetworkSize(3, 2.0, k), **base))
            for k in ks]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    bs = [1.0, 2.0, 4.0, 8.0]
    vals = [class_covering_bound(ClassBoundInput(size=NetworkSize(3, b, 10), **base))
            for b in bs]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    deltas = [0.3, 0.5, 1.0, 2.0]
    vals = [class_covering_bound(
        ClassBoundInput(delta=dl, tau=0.01, r_s=2.0, ambient_d=3,
                        size=NetworkSize(3, 2.0, 10)))
        for dl in deltas]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_covering_bound_undefined_domain():
    inp = ClassBoundInput(delta=0.2, tau=0.02, r_s=1.0,
                          size=NetworkSize(1, 1.0, 3), ambient_d=1)
    with pytest.raises(ValueError):
        class_covering_bound(inp)


def test_networks_immutable():
    net = identity_network(2, 2)
    with pytest.raises(AttributeError):
        net.layers = ()
    assert not net.layers[0][1].flags.writeable
