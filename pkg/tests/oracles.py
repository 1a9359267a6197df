"""Independent reference implementations used only by the tests.

These deliberately avoid the library's tensor machinery: every oracle is
a plain loop over symbols or paths, so agreement with the vectorized code
is meaningful.
"""

import itertools
import math
from collections import defaultdict

import numpy as np


def digits(idx, base, n):
    """Sequence index -> tuple of symbols, first symbol most significant."""
    out = []
    for _ in range(n):
        idx, r = divmod(int(idx), base)
        out.append(r)
    return tuple(reversed(out))


def undigits(seq, base):
    v = 0
    for a in seq:
        v = v * base + int(a)
    return v


# ---------------------------------------------------------------------------
# information measures, termwise


def kl_sum(P, Q):
    tot = 0.0
    for p, q in zip(P, Q):
        if p > 0:
            if q == 0:
                return math.inf
            tot += p * math.log(p / q)
    return tot


def renyi_div_sum(P, Q, s):
    acc = 0.0
    for p, q in zip(P, Q):
        if p > 0:
            if q == 0:
                return math.inf
            acc += p ** (1 + s) * q ** (-s)
    return math.log(acc) / s


def renyi_entropy_sum(P, s):
    return -math.log(sum(p ** (1 + s) for p in P if p > 0)) / s


def cond_renyi_entropy_sum(J, s):
    """H_{1+s}(Y|X) for a 2-D joint ``J[x, y]`` (average inside the log)."""
    acc = 0.0
    for row in J:
        px = sum(row)
        if px > 0:
            acc += px * sum((p / px) ** (1 + s) for p in row if p > 0)
    return -math.log(acc) / s


# ---------------------------------------------------------------------------
# symbol-by-symbol grid search


def simplex_grid(n, step):
    """All points of the n-simplex grid with coordinates in multiples of step."""
    m = int(round(1 / step))
    pts = [c for c in itertools.product(range(m + 1), repeat=n - 1) if sum(c) <= m]
    return np.array([list(c) + [m - sum(c)] for c in pts], float) / m


def _symbolwise_objective(pi_X, pi, enc0, d0, d1):
    tot = 0.0
    for x in range(len(pi_X)):
        out = enc0[x] * d0 + (1 - enc0[x]) * d1
        tot += pi_X[x] * kl_sum(out, pi[x])
    return tot


def _sticks(v):
    rest, out = 1.0, []
    for c in v:
        out.append(rest * c)
        rest *= 1 - c
    return np.array(out + [rest])


def _unstick(d):
    rest, out = 1.0, []
    for c in d[:-1]:
        out.append(c / rest if rest > 1e-15 else 0.5)
        rest -= c
    return np.clip(out, 0.0, 1.0)


def symbolwise_grid(pi_X, pi_YgX, step=0.02, polish=10):
    """Grid minimum of D(P_{B|X} P_{Y|B} || pi | pi_X) for binary B.

    For a fixed decoder the objective separates over x, so each encoder
    row P(B=0|x) is searched on its own 1-D grid while the two decoder
    rows are searched jointly on the simplex grid.  This is an exhaustive
    search of the full product grid.

    Returns ``(grid_min, polished_min)``: the best ``polish`` grid cells
    are refined with a box-constrained quasi-Newton search (stick-breaking
    coordinates), which removes the grid's discretization error.
    """
    from scipy.optimize import minimize

    pi_X = np.asarray(pi_X, float)
    pi = np.asarray(pi_YgX, float)
    nx, ny = pi.shape
    D = simplex_grid(ny, step)  # decoder row candidates
    a = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    cands = []
    with np.errstate(divide="ignore", invalid="ignore"):
        logpi = np.log(pi)
        for i, d0 in enumerate(D):
            d1 = D[i:]  # the pair (d0, d1) and (d1, d0) give the same set of outputs
            out = a[None, :, None] * d0 + (1 - a)[None, :, None] * d1[:, None, :]  # (n1, A, Y)
            tot = np.zeros(d1.shape[0])
            arg = np.zeros((d1.shape[0], nx), dtype=int)
            for x in range(nx):
                if pi_X[x] == 0:
                    continue
                terms = np.where(out > 0, out * (np.log(out) - logpi[x]), 0.0)
                terms = np.where((out > 0) & (pi[x] == 0), np.inf, terms)
                per = terms.sum(axis=-1)
                arg[:, x] = per.argmin(axis=1)
                tot += pi_X[x] * per.min(axis=1)
            for j in np.argsort(tot)[:polish]:
                cands.append((float(tot[j]), a[arg[j]], d0, d1[j]))
            cands = sorted(cands, key=lambda c: c[0])[:polish]
    grid_min = cands[0][0]

    def f(z):
        enc = z[:nx]
        d0 = _sticks(z[nx : nx + ny - 1])
        d1 = _sticks(z[nx + ny - 1 :])
        v = _symbolwise_objective(pi_X, pi, enc, d0, d1)
        return v if math.isfinite(v) else 1e6

    best = grid_min
    for _, enc, d0, d1 in cands:
        z0 = np.concatenate([enc, _unstick(d0), _unstick(d1)])
        res = minimize(f, z0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * z0.size)
        best = min(best, float(res.fun))
    return grid_min, best


# ---------------------------------------------------------------------------
# scheme path sums


def _divergence_from_paths(joint, pi_X, pi_YgX):
    tot = 0.0
    for key, p in joint.items():
        if p <= 0:
            continue
        ref = 1.0
        for x, y in key:
            ref *= pi_X[x] * pi_YgX[x][y]
        if ref == 0:
            return math.inf
        tot += p * math.log(p / ref)
    return tot


def p2p_path_divergence(spec, books):
    """Enumerate every per-symbol path (x, w, b, y) of all blocks."""
    N, K = spec.N, spec.K
    nx, nu, nb = spec.Q_BgXU.shape
    ny = spec.Q_YgBU.shape[2]
    nw = spec.P_W.size
    per_block = list(itertools.product(
        itertools.product(range(nx), repeat=N),
        itertools.product(range(nw), repeat=N),
        itertools.product(range(nb), repeat=N),
        itertools.product(range(ny), repeat=N),
    ))
    joint = defaultdict(float)
    for path in itertools.product(per_block, repeat=K):
        p = 1.0
        for k, (x, w, b, y) in enumerate(path):
            for t in range(N):
                p *= spec.pi_X[x[t]] * spec.P_W[w[t]]
            if k == 0:
                for t in range(N):
                    p *= spec.QhatY[y[t]] / nb
            else:
                _, wp, bp, _ = path[k - 1]
                m = books.binning[k].table[undigits(bp, nb), undigits(wp, nw)]
                u = digits(books.words[k].words[m], nu, N)
                for t in range(N):
                    p *= spec.Q_BgXU[x[t], u[t], b[t]] * spec.Q_YgBU[b[t], u[t], y[t]]
            if p == 0:
                break
        if p > 0:
            joint[tuple((x, y) for x, _, _, y in path)] += p
    flat_pi = {}
    for xs in itertools.product(range(nx), repeat=N):
        flat_pi[xs] = math.prod(spec.pi_X[a] for a in xs)
    ref_kernel = {
        (xs, ys): math.prod(spec.pi_YgX[a, c] for a, c in zip(xs, ys))
        for xs in itertools.product(range(nx), repeat=N)
        for ys in itertools.product(range(ny), repeat=N)
    }
    tot = 0.0
    for key, p in joint.items():
        ref = 1.0
        for xs, ys in key:
            ref *= flat_pi[xs] * ref_kernel[(xs, ys)]
        if ref == 0:
            return math.inf
        tot += p * math.log(p / ref)
    return tot


def broadcast_path_divergence(spec, books):
    """Path sum for the broadcast scheme at block length N = 1."""
    assert spec.N == 1
    K = spec.K
    nx, nu, nh, nb = spec.Q_BgXUUh.shape
    ny, nz = spec.Q_YgBUUh.shape[3], spec.Q_ZgBU.shape[2]
    nw, nwh = spec.P_W.size, spec.P_What.size
    per_block = list(itertools.product(range(nx), range(nw), range(nwh), range(nb), range(ny), range(nz)))
    joint = defaultdict(float)
    for path in itertools.product(per_block, repeat=K):
        p = 1.0
        for k, (x, w, wh, b, y, z) in enumerate(path):
            p *= spec.pi_X[x] * spec.P_W[w] * spec.P_What[wh]
            if k == 0:
                p *= spec.QhatY[y] * spec.QhatZ[z] / nb
            else:
                bp, wp = path[k - 1][3], path[k - 1][1]
                m = books.binning[k].table[bp, wp]
                mh = books.index[k].table[wh]
                u = books.words[k].words[m]
                uh = books.words[k].satellites[m, mh]
                p *= spec.Q_BgXUUh[x, u, uh, b] * spec.Q_YgBUUh[b, u, uh, y] * spec.Q_ZgBU[b, u, z]
            if p == 0:
                break
        if p > 0:
            joint[tuple((x, (y, z)) for x, _, _, _, y, z in path)] += p
    kern = {x: {(y, z): spec.pi_YZgX[x, y, z] for y in range(ny) for z in range(nz)} for x in range(nx)}
    return _divergence_from_paths(joint, spec.pi_X, kern)
