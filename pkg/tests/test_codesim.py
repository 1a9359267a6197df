import itertools
import json
import math

import numpy as np
import pytest
from scipy import stats

from seqsynth import codesim as cs
from seqsynth import infomeasures as im
from seqsynth import probkit as pk
from seqsynth.codesim.codebooks import random_binning, truncated_law

from builders import broadcast_spec, interactive_spec, kern, p2p_spec
from oracles import broadcast_path_divergence, digits, p2p_path_divergence


# --- codebook primitives --------------------------------------------------


def test_n_bins():
    assert cs.n_bins(1, 0.0) == 1
    assert cs.n_bins(1, math.log(2)) == 2
    assert cs.n_bins(2, math.log(2)) == 4
    assert cs.n_bins(1, 0.5) == 2
    with pytest.raises(ValueError):
        cs.n_bins(1, -1.0)


def test_seq_power_matches_symbolwise_product(rng):
    K = kern(rng, 2, 3, 2)  # two inputs, one output
    K2 = cs.seq_power(K, 2)
    assert K2.shape == (4, 9, 4)
    for a, b, c in itertools.product(range(4), range(9), range(4)):
        a_, b_, c_ = digits(a, 2, 2), digits(b, 3, 2), digits(c, 2, 2)
        want = K[a_[0], b_[0], c_[0]] * K[a_[1], b_[1], c_[1]]
        assert K2[a, b, c] == pytest.approx(want, abs=1e-15)
    P = rng.dirichlet(np.ones(3))
    assert np.allclose(cs.seq_power(P, 3), pk.product_extension(P, 3))


def test_truncated_law_is_typical():
    law, fb = truncated_law([0.5, 0.5], 2, 0.1)
    assert not fb and np.allclose(law, [0, 0.5, 0.5, 0])
    law, fb = truncated_law([0.3, 0.7], 1, 0.25)
    assert fb and np.allclose(law, [0, 1])


def test_sample_codebooks_deterministic(rng):
    spec = p2p_spec(rng, N=2, K=3)
    a, b = cs.sample_codebooks(spec), cs.sample_codebooks(spec)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    c = cs.sample_codebooks(spec, seed=spec.seed + 1)
    assert json.dumps(a.to_json()) != json.dumps(c.to_json())


def test_zero_rate_single_bin(rng):
    spec = p2p_spec(rng, N=2, K=2, R=0.0)
    books = cs.sample_codebooks(spec)
    assert spec.bins == 1
    assert all(np.all(b.table == 0) for b in books.binning)


def test_bin_occupancy_uniform():
    rng = np.random.default_rng(0)
    counts = np.zeros(3)
    for _ in range(1000):
        t = random_binning(rng, (2, 2), 3).table
        counts += np.bincount(t.ravel(), minlength=3)
    assert stats.chisquare(counts).pvalue > 0.01


def test_codewords_are_typical(rng):
    spec = p2p_spec(rng, N=2, K=2, eps=0.6)
    spec.Q_U = np.array([0.5, 0.5])
    books = cs.sample_codebooks(spec)
    for w in books.words:
        for idx in w.words:
            assert pk.is_typical(digits(idx, 2, 2), spec.Q_U, 0.6)


def test_capacity_error_names_dimension(rng):
    spec = p2p_spec(rng, N=12, K=2)
    with pytest.raises(pk.CapacityError) as err:
        cs.exact_induced_divergence(spec)
    assert err.value.what


# --- point-to-point exactness ---------------------------------------------


@pytest.mark.parametrize("N,K", [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2)])
def test_p2p_matches_path_sum(N, K):
    rng = np.random.default_rng([N, K])
    spec = p2p_spec(rng, N=N, K=K, seed=N * 10 + K)
    books = cs.sample_codebooks(spec)
    rep = cs.exact_induced_divergence(spec, books)
    assert rep.total == pytest.approx(p2p_path_divergence(spec, books), abs=1e-9)
    assert rep.decomposition_gap <= 1e-9
    assert rep.blocks[0].mi_term == 0
    assert rep.blocks[0].divergence_term == pytest.approx(rep.details["first_block_reference"], abs=1e-12)
    for b in rep.blocks[1:]:
        assert b.markov_cmi <= 1e-9


def test_single_block_is_first_block(rng):
    spec = p2p_spec(rng, N=2, K=1)
    rep = cs.exact_induced_divergence(spec)
    want = 2 * im.cond_kl_div(np.tile(spec.QhatY, (2, 1)), spec.pi_YgX, spec.pi_X)
    assert rep.total == pytest.approx(want, abs=1e-12)


def test_uncoupled_output_block(rng):
    spec = p2p_spec(rng, N=2, K=2)
    Q_Y = rng.dirichlet([1, 1])
    spec.Q_YgBU = np.broadcast_to(Q_Y, (2, 2, 2)).copy()
    rep = cs.exact_induced_divergence(spec)
    want = 2 * im.cond_kl_div(np.tile(Q_Y, (2, 1)), spec.pi_YgX, spec.pi_X)
    assert rep.blocks[1].divergence_term == pytest.approx(want, abs=1e-12)
    assert rep.blocks[1].mi_term == pytest.approx(0, abs=1e-12)


def test_seeded_reports_identical(rng):
    spec = p2p_spec(rng, N=2, K=3)
    a, b = cs.exact_induced_divergence(spec), cs.exact_induced_divergence(spec)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == ",".join(cs.CSV_COLUMNS)


def test_expected_divergence(rng):
    spec = p2p_spec(rng, N=1, K=2)
    one = cs.expected_divergence_over_codebooks(spec, 1, seed=4)
    books = cs.sample_codebooks(spec, seed=cs.diagnostics._replicate_seed(4, 0))
    assert one.mean == cs.exact_induced_divergence(spec, books).total
    avg = cs.expected_divergence_over_codebooks(spec, 40, seed=4)
    assert avg.minimum <= avg.mean
    half = cs.expected_divergence_over_codebooks(spec, 20, seed=4)
    assert np.array_equal(half.values, avg.values[:20])
    # stderr scales like 1/sqrt(n)
    assert 0.4 < avg.stderr / half.stderr < 1.0


# --- bin uniformity -------------------------------------------------------


def test_uniformity_single_bin(rng):
    spec = p2p_spec(rng, N=2, K=3, R=0.0)
    u = cs.m_uniformity_diagnostic(spec)
    assert np.isnan(u[0])
    assert np.allclose(u[1:], 0, atol=1e-15)


def test_uniformity_adversarial_table(rng):
    spec = p2p_spec(rng, N=1, K=2, R=math.log(3))
    books = cs.sample_codebooks(spec)
    books.binning[1] = cs.BinningCodebook(np.zeros_like(books.binning[1].table), 3)
    assert cs.m_uniformity_diagnostic(spec, books)[1] == pytest.approx(math.log(3))


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0])
def test_uniformity_below_binning_bound(s, rng):
    # average over every binning table of block 2; block 1 feeds (uniform B, W) independent of (X, Y)
    spec = p2p_spec(rng, N=1, K=2, R=math.log(2), nw=3)
    books = cs.sample_codebooks(spec)
    vals = []
    for flat in itertools.product(range(2), repeat=2 * 3):
        books.binning[1] = cs.BinningCodebook(np.array(flat).reshape(2, 3), 2)
        vals.append(cs.m_uniformity_diagnostic(spec, books)[1])
    H = math.log(2) + im.renyi_entropy(spec.P_W, s)
    bound = math.log1p(math.exp(-s * (H - spec.R))) / s
    assert np.mean(vals) <= bound + 1e-12
    assert bound <= math.exp(-s * (H - spec.R)) / s


# --- rate windows and symbol-wise schemes ---------------------------------


def test_rate_window_independent_u(rng):
    B = kern(rng, 2, 2)
    Y = kern(rng, 2, 2)
    win = cs.rate_window([0.4, 0.6], np.stack([B, B], axis=1), np.stack([Y, Y], axis=1), [0.3, 0.7], [0.5, 0.5])
    assert win.lower == pytest.approx(0, abs=1e-12)


def test_rate_window_deterministic_b_is_empty(rng):
    Q_B = np.zeros((2, 2, 2))
    for x, u in itertools.product(range(2), repeat=2):
        Q_B[x, u, (x + u) % 2] = 1
    win = cs.rate_window(rng.dirichlet([1, 1]), Q_B, kern(rng, 2, 2, 2), [0.5, 0.5], [1.0])
    assert win.upper == pytest.approx(0, abs=1e-12)
    assert win.empty and not win.contains(0.1)


def test_relaxed_window_inside_shannon_window():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        spec = p2p_spec(rng)
        win = cs.spec_rate_window(spec, s=1e-3, eps=1e-3)
        lo, hi = win.relaxed
        assert lo >= win.lower - 1e-12 and hi <= win.upper + 1e-12
        assert abs(lo - win.lower) < 1e-2 and abs(hi - win.upper) < 1e-2


def test_run_symbolwise(rng):
    pi_X, pi = rng.dirichlet([1, 1, 1]), kern(rng, 3, 2)
    assert cs.run_symbolwise(np.eye(3), pi, pi_X, pi, n=5) == pytest.approx(0, abs=1e-15)
    B, Y = kern(rng, 3, 2), kern(rng, 2, 2)
    K = pk.condition(np.asarray(pk.compose(pi_X, B)) @ Y, 0).rows
    assert cs.run_symbolwise(B, Y, pi_X, pi, n=3) == pytest.approx(3 * im.cond_kl_div(K, pi, pi_X), rel=1e-12)


def test_sampled_diagnostics_do_not_estimate_kl(rng):
    spec = p2p_spec(rng, N=2, K=3)
    rep = cs.sampled_bin_diagnostics(spec, 200, seed=1)
    assert rep.method == "monte-carlo" and math.isnan(rep.total)
    assert rep.samples == 200
    assert np.isnan(rep.m_uniformity[0]) and np.all(rep.m_uniformity[1:] >= 0)
    again = cs.sampled_bin_diagnostics(spec, 200, seed=1)
    assert np.array_equal(again.m_uniformity[1:], rep.m_uniformity[1:])


# --- broadcast ------------------------------------------------------------


def test_broadcast_single_block(rng):
    spec = broadcast_spec(rng, N=1, K=1)
    rep = cs.exact_broadcast_divergence(spec)
    q = np.outer(spec.QhatY, spec.QhatZ).ravel()
    want = im.cond_kl_div(np.tile(q, (2, 1)), spec.pi_YZgX.reshape(2, -1), spec.pi_X)
    assert rep.total == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("K", [2, 3])
def test_broadcast_matches_path_sum(K):
    rng = np.random.default_rng([7, K])
    spec = broadcast_spec(rng, N=1, K=K, seed=K)
    books = cs.build_broadcast_scheme(spec)
    rep = cs.exact_broadcast_divergence(spec, books)
    assert rep.total == pytest.approx(broadcast_path_divergence(spec, books), abs=1e-9)
    assert rep.decomposition_gap <= 1e-9
    assert rep.blocks[0].divergence_term == pytest.approx(rep.details["first_block_reference"], abs=1e-12)


def test_broadcast_without_second_layer_is_p2p(rng):
    base = p2p_spec(rng, N=2, K=2)
    spec = cs.BroadcastSchemeSpec(
        N=2, K=2, R=base.R, Rhat=0.0,
        Q_UUh=base.Q_U[:, None],
        Q_BgXUUh=base.Q_BgXU[:, :, None, :],
        Q_YgBUUh=base.Q_YgBU[:, :, None, :],
        Q_ZgBU=np.ones((2, 2, 1)),
        P_W=base.P_W, P_What=[1.0],
        pi_X=base.pi_X, pi_YZgX=base.pi_YgX[:, :, None],
        QhatY=base.QhatY, QhatZ=[1.0], eps=base.eps, seed=base.seed,
    )
    books = cs.build_broadcast_scheme(spec)
    pbooks = cs.P2PCodebooks(books.binning, [cs.ResolvCodebook(w.words) for w in books.words])
    a = cs.exact_broadcast_divergence(spec, books).total
    b = cs.exact_induced_divergence(base, pbooks).total
    assert a == pytest.approx(b, abs=1e-12)


def test_broadcast_rate_region(rng):
    reg = cs.broadcast_rate_region(broadcast_spec(rng))
    assert reg["R_lower"] <= reg["sum_lower"] + 1e-12
    assert set(reg) >= {"R_upper", "Rhat_upper", "empty", "inside"}


# --- interactive ----------------------------------------------------------


def test_interactive_single_block(rng):
    spec = interactive_spec(rng, N=2, K=1)
    rep = cs.exact_interactive_divergence(spec)
    y, z = spec.first_yz
    want = -2 * np.sum(spec.pi_SX * np.log(spec.pi_YZgSX[:, :, y, z]))
    assert rep.total == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("N,K", [(1, 2), (1, 3), (2, 2)])
def test_interactive_reduction_is_exact(N, K):
    rng = np.random.default_rng([11, N, K])
    spec = interactive_spec(rng, N=N, K=K, seed=K)
    rep = cs.exact_interactive_divergence(spec)
    assert rep.details["reduction_gap"] <= 1e-12
    p2p, books = cs.reduce_interactive_to_p2p(spec)
    assert rep.total == pytest.approx(cs.exact_induced_divergence(p2p, books).total, abs=1e-12)
    assert rep.decomposition_gap <= 1e-9


def test_interactive_degenerate_side_matches_p2p(rng):
    spec = interactive_spec(rng, N=1, K=2, ns=1, nz=1)
    p2p, books = cs.reduce_interactive_to_p2p(spec)
    assert p2p.pi_YgX.shape == (2, 2)
    a = cs.exact_interactive_divergence(spec).total
    assert a == pytest.approx(cs.exact_induced_divergence(p2p, books).total, abs=1e-12)
