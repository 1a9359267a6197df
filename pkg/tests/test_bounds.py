import json
import math
import warnings

import numpy as np
import pytest

from seqsynth import bounds as bd
from seqsynth import infomeasures as im

FAST = bd.OptimizerSettings(restarts=6)
SMALL = bd.AuxShape(U_size=4, V_size=2)


def bsc(p):
    return np.array([[1 - p, p], [p, 1 - p]])


def random_target(rng, nx=2, ny=2, nb=2, H_W=0.0):
    return bd.P2PTarget(rng.dirichlet(np.ones(nx)), rng.dirichlet(np.ones(ny), size=nx), nb, H_W)


# --- closed forms and assumptions -----------------------------------------


def test_assumption_examples(rng):
    assert bd.check_assumption1(random_target(rng))
    assert not bd.check_assumption1(bd.P2PTarget([0.5, 0.5], np.eye(2)))
    assert bd.check_assumption1(bd.P2PTarget([0.5, 0.5], bsc(0.1)))


def test_lemma1_examples():
    assert bd.lemma1_upper_bound(bd.P2PTarget([0.3, 0.7], [[0.2, 0.8], [0.0, 1.0]])) == pytest.approx(
        -0.3 * math.log(0.8)
    )
    assert bd.lemma1_upper_bound(bd.P2PTarget([0.4, 0.6], [[0.0, 1.0], [0.0, 1.0]])) == 0
    assert bd.lemma1_upper_bound(bd.P2PTarget([0.5, 0.5], bsc(0.1))) == pytest.approx(-math.log(0.09) / 2)
    with pytest.raises(ValueError):
        bd.lemma1_upper_bound(bd.P2PTarget([0.5, 0.5], np.eye(2)))


def test_gibbs_output_law_is_minimizer(rng):
    for _ in range(5):
        t = random_target(rng, 3, 3)
        q, val = bd.gibbs_output_law(t.pi_X, t.pi_YgX)
        assert im.cond_kl_div(np.tile(q, (3, 1)), t.pi_YgX, t.pi_X) == pytest.approx(val, abs=1e-12)
        for _ in range(50):
            r = rng.dirichlet(np.ones(3))
            assert im.cond_kl_div(np.tile(r, (3, 1)), t.pi_YgX, t.pi_X) >= val - 1e-12


def test_target_validation():
    with pytest.raises(ValueError):
        bd.P2PTarget([0.5, 0.5], bsc(0.1), B_size=0)
    with pytest.raises(ValueError):
        bd.P2PTarget([0.5, 0.5], bsc(0.1), H_W=1.0, W_size=2)
    with pytest.raises(ValueError):
        bd.OptimizerSettings(restarts=0)
    assert bd.p2p_shape(bd.P2PTarget([0.5, 0.5], bsc(0.1))) == bd.AuxShape(8, 2)


# --- psi and delta --------------------------------------------------------


def test_psi_independent_target_is_zero(rng):
    row = rng.dirichlet([1, 1, 1])
    t = bd.P2PTarget([0.3, 0.7], np.tile(row, (2, 1)))
    for tt in (0.0, 0.4):
        assert bd.psi(t, tt, SMALL, FAST).value == pytest.approx(0, abs=1e-9)


def test_psi_below_threshold_is_infinite(rng):
    t = random_target(rng)
    res = bd.psi(t, -math.log(2) - 0.01, SMALL, FAST)
    assert res.value == math.inf and res.argmin is None
    assert res.diagnostics


def test_psi_below_constant_output_cap(rng):
    for _ in range(3):
        t = random_target(rng)
        cap = bd.lemma1_upper_bound(t)
        for tt in (-math.log(2) + 0.05, -0.3, 0.0):
            assert bd.psi(t, tt, SMALL, FAST).value <= cap + 1e-12


def test_delta_bsc_below_symbolwise():
    t = bd.P2PTarget([0.5, 0.5], bsc(0.1))
    d = bd.delta_p2p(t, SMALL, FAST)
    assert d.value <= bd.delta_symbolwise(t, FAST).value + 1e-12
    assert d.value <= bd.lemma1_upper_bound(t) + 1e-12


def test_feasibility_certificate(rng):
    t = random_target(rng, H_W=0.1)
    res = bd.delta_p2p(t, SMALL, FAST)
    obj, slack = bd.evaluate_p2p(t, res.argmin, t.H_W)
    assert obj == pytest.approx(res.value, abs=1e-12)
    assert slack >= -1e-9 and res.constraint_slack >= -1e-9
    json.dumps(res.to_json())


def test_relabeling_symmetry(rng):
    t = random_target(rng)
    res = bd.psi(t, -0.2, SMALL, FAST)
    f = res.argmin.factors
    perm_u, perm_v = rng.permutation(4), rng.permutation(2)
    g = {
        "P_UV": f["P_UV"][perm_u][:, perm_v],
        "P_BgXUV": f["P_BgXUV"][:, perm_u][:, :, perm_v],
        "P_YgBUV": f["P_YgBUV"][:, perm_u][:, :, perm_v],
    }
    a = bd.evaluate_p2p(t, res.argmin, -0.2)
    b = bd.evaluate_p2p(t, bd.FeasiblePoint("p2p", g), -0.2)
    assert a[0] == pytest.approx(b[0], abs=1e-9) and a[1] == pytest.approx(b[1], abs=1e-9)


def test_restart_monotonicity(rng):
    t = random_target(rng)
    vals = [bd.psi(t, -0.3, SMALL, bd.OptimizerSettings(restarts=r)).value for r in (2, 4, 8)]
    assert vals[0] >= vals[1] >= vals[2]


def test_psi_curve_properties(rng):
    t = random_target(rng)
    grid = [0.2, -0.5, -0.2, 0.2, 1.0, 0.6]
    curve = bd.psi_curve(t, grid, SMALL, FAST)
    assert [c[0] for c in curve] == grid
    assert curve[0][1] == curve[3][1]
    vals = [v for _, v in sorted(curve)]
    assert all(a >= b - 1e-6 for a, b in zip(vals, vals[1:]))
    results = bd.psi_curve_results(t, grid, SMALL, FAST)
    assert [r.value for _, r in results] == [v for _, v in curve]


def test_psi_stabilizes_for_large_t(rng):
    t = random_target(rng, 3, 2)
    a, b = bd.psi_curve(t, [4.0, 8.0], SMALL, FAST)
    assert a[1] == pytest.approx(b[1], abs=1e-6)


def test_t_min_bracket():
    t = bd.P2PTarget([0.5, 0.5], bsc(0.1))
    br = bd.t_min_estimate(t, SMALL, FAST, grid=(-10.0, 0.0), tol=0.05)
    assert -10 < br.lo < br.hi <= 0
    assert br.hi - br.lo <= 0.05
    assert br.lo >= -math.log(2) - 0.05
    ind = bd.P2PTarget([0.5, 0.5], [[0.3, 0.7], [0.3, 0.7]])
    one = bd.t_min_estimate(ind, SMALL, FAST, grid=(0.0, 1.0))
    assert one.one_sided == "all-feasible"


def test_constraint_near_threshold_is_flagged():
    t = bd.P2PTarget([0.5, 0.5], bsc(0.1))
    res = bd.psi(t, -math.log(2), SMALL, FAST)
    assert any("threshold" in d for d in res.diagnostics)


def test_assumption_warning():
    t = bd.P2PTarget([0.5, 0.5], np.eye(2))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        bd.delta_p2p(t, SMALL, FAST)
    assert any("reachable" in str(x.message) for x in w)


# --- symbol-wise ----------------------------------------------------------


def test_symbolwise_relay_is_zero(rng):
    t = random_target(rng, 2, 3, nb=3)
    res = bd.delta_symbolwise(t, FAST)
    assert res.value == pytest.approx(0, abs=1e-12)
    v, P_BgX, P_YgB = res
    assert bd.evaluate_symbolwise(t.pi_X, t.pi_YgX, P_BgX, P_YgB) == pytest.approx(v, abs=1e-15)


def test_symbolwise_binary_relay_reaches_binary_outputs(rng):
    # |B| = |Y| = 2 can realize any binary-output channel
    t = random_target(rng, 3, 2)
    assert bd.delta_symbolwise(t, FAST).value <= 1e-6


def test_symbolwise_matches_grid_oracle():
    from oracles import symbolwise_grid

    rng = np.random.default_rng(21)
    t = random_target(rng, 3, 3)
    grid, polished = symbolwise_grid(t.pi_X, t.pi_YgX)
    v = bd.delta_symbolwise(t).value
    assert v <= grid + 1e-9
    assert abs(v - polished) <= 1e-3


# --- broadcast and interactive --------------------------------------------

BSHAPE = bd.AuxShape(U_size=2, V_size=2, Uhat_size=2)


def test_broadcast_independent_target_zero(rng):
    q = rng.dirichlet(np.ones(4)).reshape(2, 2)
    t = bd.BroadcastTarget([0.4, 0.6], np.stack([q, q]))
    lo, up = bd.delta_broadcast_pair(t, BSHAPE, FAST)
    assert lo.value == pytest.approx(0, abs=1e-9) and up.value == pytest.approx(0, abs=1e-9)


def test_broadcast_pair_ordering(rng):
    for _ in range(2):
        t = bd.BroadcastTarget(rng.dirichlet([1, 1]), rng.dirichlet(np.ones(4), size=2).reshape(2, 2, 2))
        lo, up = bd.delta_broadcast_pair(t, BSHAPE, FAST)
        assert lo.value <= up.value + 1e-9
        q = np.outer(*bd.product_output_law(t.pi_X, t.pi_YZgX)[:2]).ravel()
        cap = im.cond_kl_div(np.tile(q, (2, 1)), t.pi_YZgX.reshape(2, -1), t.pi_X)
        assert up.value <= cap + 1e-9


def test_broadcast_vacuous_constraints(rng):
    # Y and Z conditionally independent given X: relaying X through B is exact once H_W is large
    qy, qz = rng.dirichlet([1, 1], size=2), rng.dirichlet([1, 1], size=2)
    t = bd.BroadcastTarget([0.5, 0.5], np.einsum("xy,xz->xyz", qy, qz), H_W=5.0, H_What=5.0)
    assert bd.delta_broadcast(t, "lower", BSHAPE, FAST).value <= 1e-6


def test_broadcast_bad_variant(rng):
    t = bd.BroadcastTarget([0.5, 0.5], np.ones((2, 2, 2)) / 4)
    with pytest.raises(ValueError):
        bd.delta_broadcast(t, "middle", BSHAPE, FAST)


def test_interactive_independent_zero(rng):
    q = rng.dirichlet(np.ones(4)).reshape(2, 2)
    t = bd.InteractiveTarget(rng.dirichlet(np.ones(4)).reshape(2, 2), np.broadcast_to(q, (2, 2, 2, 2)))
    assert bd.delta_interactive(t, bd.AuxShape(2, 2), FAST).value == pytest.approx(0, abs=1e-9)


def test_interactive_below_constant_output(rng):
    t = bd.InteractiveTarget(rng.dirichlet(np.ones(4)).reshape(2, 2), rng.dirichlet(np.ones(4), size=(2, 2)).reshape(2, 2, 2, 2))
    assert bd.delta_interactive(t, bd.AuxShape(2, 2), FAST).value <= bd.interactive_constant_bound(t) + 1e-12


def test_interactive_degenerate_matches_p2p(rng):
    t = bd.InteractiveTarget(np.array([[0.4, 0.6]]), rng.dirichlet([1, 1], size=2).reshape(1, 2, 2, 1), 2, 2, 0.0)
    m = bd.match_interactive_p2p(t, bd.AuxShape(2, 2), FAST)
    assert m.gap <= 1e-4
    p = bd.interactive_to_p2p_target(t)
    assert p.H_W == pytest.approx(math.log(2))
