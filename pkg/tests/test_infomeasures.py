import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsynth import infomeasures as im

from oracles import cond_renyi_entropy_sum, kl_sum, renyi_div_sum, renyi_entropy_sum

# H_2(Y|X) = -log(0.5 * 1 + 0.5 * 0.5) but the average of per-row entropies is 0.5 log 2
NON_CHAIN_JOINT = np.array([[0.5, 0.0], [0.25, 0.25]])


def pmf_pair(n):
    def build(seed):
        rng = np.random.default_rng(seed)
        # floored masses keep log P/Q bounded, which the small-order limit needs
        return 0.9 * rng.dirichlet(np.ones(n)) + 0.1 / n, 0.9 * rng.dirichlet(np.ones(n)) + 0.1 / n

    return st.integers(0, 2**31).map(build)


def test_kl_examples():
    assert im.kl_div([0.3, 0.7], [0.3, 0.7]) == 0
    assert im.kl_div([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert im.kl_div([0.5, 0.5], [0.25, 0.75]) == pytest.approx(kl_sum([0.5, 0.5], [0.25, 0.75]), abs=1e-15)
    assert im.kl_div([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_renyi_div_examples():
    assert im.renyi_div([0.2, 0.8], [0.2, 0.8], 0.7) == pytest.approx(0, abs=1e-15)
    assert im.renyi_div([0.5, 0.5], [0.25, 0.75], 1) == pytest.approx(math.log(4 / 3), abs=1e-15)
    for s in (0.1, 1.0, 3.0):
        assert im.renyi_div([1, 0], [0.5, 0.5], s) == pytest.approx(math.log(2))
    assert im.renyi_div([0.5, 0.5], [0.0, 1.0], 0.5) == math.inf
    assert im.renyi_div([0.5, 0.5], [0.25, 0.75], 0) == im.kl_div([0.5, 0.5], [0.25, 0.75])
    with pytest.raises(ValueError):
        im.renyi_div([0.5, 0.5], [0.5, 0.5], -0.1)


def test_renyi_div_matches_termwise(rng):
    for _ in range(30):
        P, Q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        s = rng.uniform(0.05, 2)
        assert im.renyi_div(P, Q, s) == pytest.approx(renyi_div_sum(P, Q, s), rel=1e-12)


def test_cond_renyi_div_examples(rng):
    K = rng.dirichlet(np.ones(3), size=2)
    assert im.cond_renyi_div(K, K, [0.4, 0.6], 0.5) == pytest.approx(0, abs=1e-15)
    K2 = rng.dirichlet(np.ones(3), size=2)
    assert im.cond_renyi_div(K, K2, [0.0, 1.0], 0.5) == pytest.approx(im.renyi_div(K[1], K2[1], 0.5))
    P = rng.dirichlet(np.ones(2))
    J1, J2 = P[:, None] * K, P[:, None] * K2
    assert im.cond_renyi_div(K, K2, P, 0.3) == pytest.approx(renyi_div_sum(J1.ravel(), J2.ravel(), 0.3), rel=1e-12)
    assert im.cond_kl_div(K, K2, P) == pytest.approx(kl_sum(J1.ravel(), J2.ravel()), rel=1e-12)


def test_renyi_entropy_examples():
    for s in (0.2, 1.0):
        assert im.renyi_entropy(np.full(5, 0.2), s) == pytest.approx(math.log(5))
    assert im.renyi_entropy([0, 1, 0], 0.5) == 0
    assert im.renyi_entropy([0.3, 0.7], 1) == pytest.approx(-math.log(0.09 + 0.49), abs=1e-15)
    assert im.renyi_entropy([0.3, 0.7], 0) == pytest.approx(im.entropy([0.3, 0.7]))


def test_cond_renyi_entropy_examples(rng):
    P, Q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
    assert im.cond_renyi_entropy(np.outer(P, Q), 0, 0.7) == pytest.approx(im.renyi_entropy(Q, 0.7), abs=1e-12)
    det = np.zeros((3, 3))
    det[np.arange(3), [2, 0, 1]] = P
    assert im.cond_renyi_entropy(det, 0, 0.5) == 0
    J = rng.dirichlet(np.ones(4)).reshape(2, 2)
    assert im.cond_renyi_entropy(J, 0, 0.5) == pytest.approx(cond_renyi_entropy_sum(J, 0.5), rel=1e-12)
    assert im.cond_renyi_entropy(J.T, 1, 0.5) == pytest.approx(cond_renyi_entropy_sum(J, 0.5), rel=1e-12)


def test_per_symbol_renyi_examples():
    J = np.array([[0.25, 0.25, 0.0], [0.0, 0.2, 0.0], [0.1, 0.1, 0.1]])
    assert im.per_symbol_renyi(J, 0, 0.5) == pytest.approx(math.log(2))
    assert im.per_symbol_renyi(J, 1, 0.5) == 0
    assert im.per_symbol_renyi(J, 2, 0.5) == pytest.approx(math.log(3))
    with pytest.raises(ValueError):
        im.per_symbol_renyi(np.array([[0.0, 0.0], [0.5, 0.5]]), 0, 0.5)


def test_non_chain_rule_counterexample():
    s = 1.0
    joint = im.cond_renyi_entropy(NON_CHAIN_JOINT, 0, s)
    avg = sum(NON_CHAIN_JOINT[x].sum() * im.per_symbol_renyi(NON_CHAIN_JOINT, x, s) for x in range(2))
    assert joint == pytest.approx(-math.log(0.75))
    assert avg == pytest.approx(0.5 * math.log(2))
    assert abs(joint - avg) > 1e-6


def test_mutual_info_examples(rng):
    assert im.mutual_info(np.outer([0.3, 0.7], [0.5, 0.5])) == pytest.approx(0, abs=1e-15)
    assert im.mutual_info(np.diag([0.5, 0.5])) == pytest.approx(math.log(2))
    J = rng.dirichlet(np.ones(6)).reshape(2, 3)
    prod = np.outer(J.sum(1), J.sum(0))
    assert im.mutual_info(J) == pytest.approx(kl_sum(J.ravel(), prod.ravel()), abs=1e-12)


def test_cond_mutual_info_markov_chain(rng):
    # X -> Y -> Z gives I(X; Z | Y) = 0
    P = rng.dirichlet(np.ones(2))
    K1, K2 = rng.dirichlet(np.ones(3), size=2), rng.dirichlet(np.ones(2), size=3)
    J = np.einsum("x,xy,yz->xyz", P, K1, K2)
    assert im.cond_mutual_info(J, 0, 2, 1) == pytest.approx(0, abs=1e-12)
    assert im.cond_mutual_info(J, 0, 1, 2) > 0


@settings(max_examples=50, deadline=None)
@given(pmf_pair(4))
def test_renyi_limit_is_kl(pq):
    P, Q = pq
    assert abs(im.renyi_div(P, Q, 1e-4) - im.kl_div(P, Q)) <= 1e-3


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.25, 0.5, 1.0]))
def test_renyi_data_processing(seed, s):
    rng = np.random.default_rng(seed)
    P, Q = rng.dirichlet(np.ones(6)).reshape(2, 3), rng.dirichlet(np.ones(6)).reshape(2, 3)
    assert im.renyi_div(P, Q, s) >= im.renyi_div(P.sum(1), Q.sum(1), s) - 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 3.0))
def test_independence_additivity(seed, s):
    rng = np.random.default_rng(seed)
    P, Q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
    assert abs(im.renyi_entropy(np.outer(P, Q), s) - im.renyi_entropy(P, s) - im.renyi_entropy(Q, s)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 3.0))
def test_independent_z_conditional_additivity(seed, s):
    rng = np.random.default_rng(seed)
    J = rng.dirichlet(np.ones(6)).reshape(2, 3)
    Z = rng.dirichlet(np.ones(2))
    JZ = J[:, :, None] * Z
    lhs = im.cond_renyi_entropy(JZ, 0, s)
    assert abs(lhs - im.cond_renyi_entropy(J, 0, s) - im.renyi_entropy(Z, s)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(pmf_pair(3))
def test_renyi_monotone_in_order(pq):
    P, Q = pq
    vals = [im.renyi_div(P, Q, s) for s in (0.0, 0.1, 0.5, 1.0, 2.0)]
    assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 2.0))
def test_renyi_entropy_range(seed, s):
    P = np.random.default_rng(seed).dirichlet(np.ones(5))
    h = im.renyi_entropy(P, s)
    assert 0 <= h <= math.log(5) + 1e-12
    assert h == pytest.approx(renyi_entropy_sum(P, s), rel=1e-12)
