"""Rate windows, codebook averages and other scheme diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import infomeasures as im
from ..probkit import check_capacity
from . import engine
from .codebooks import block_rng, n_bins
from .schemes import P2PSchemeSpec, exact_induced_divergence, sample_codebooks


@dataclass
class RateWindow:
    """Shannon window ``(lower, upper)`` and its Rényi relaxation."""

    lower: float
    upper: float
    relaxed: tuple

    @property
    def empty(self):
        return not self.lower < self.upper

    @property
    def relaxed_empty(self):
        return not self.relaxed[0] < self.relaxed[1]

    def contains(self, R, relaxed=False):
        lo, hi = self.relaxed if relaxed else (self.lower, self.upper)
        return lo < R < hi


def scheme_joint(Q_U, Q_BgXU, Q_YgBU, pi_X):
    """Single-letter law ``Q(u, x, b, y)``."""
    return np.einsum("u,x,xub,buy->uxby", Q_U, pi_X, Q_BgXU, Q_YgBU)


def rate_window(Q_U, Q_BgXU, Q_YgBU, pi_X, P_W, s=0.5, eps=0.1):
    """Admissible binning rates for a single-letter choice.

    Shannon window: ``I(U; XY) < R < H(W) + H(B | X Y U)``.
    Relaxed window: ``(1 + eps) D_{1+s}(Q_{XY|U} || Q_{XY} | Q_U) < R <
    (1 - eps) sum_u Q(u) H_{1+s}(B | X Y, U = u) + H_{1+s}(W)``.
    """
    if s <= 0:
        raise ValueError("s must be positive for the relaxed window")
    J = scheme_joint(np.asarray(Q_U, float), np.asarray(Q_BgXU, float), np.asarray(Q_YgBU, float), np.asarray(pi_X, float))
    nu, nx, nb, ny = J.shape
    J_uxy = J.sum(axis=2)  # (U, X, Y)
    lower = im.mutual_info(J_uxy, a=0)
    H_B = im.cond_entropy(np.transpose(J, (0, 1, 3, 2)).reshape(-1, nb), given=0)
    upper = im.entropy(P_W) + H_B

    q_u = J_uxy.sum(axis=(1, 2))
    q_xy = J_uxy.sum(axis=0).ravel()
    rows = J_uxy.reshape(nu, -1) / np.where(q_u > 0, q_u, 1.0)[:, None]
    d = im.cond_renyi_div(rows, np.broadcast_to(q_xy, rows.shape), q_u, s)
    h = 0.0
    for u in np.flatnonzero(q_u > 0):
        cond = np.transpose(J[u], (0, 2, 1)).reshape(-1, nb) / q_u[u]
        h += q_u[u] * im.cond_renyi_entropy(cond, given=0, s=s)
    relaxed = ((1 + eps) * d, (1 - eps) * h + im.renyi_entropy(P_W, s))
    return RateWindow(float(lower), float(upper), (float(relaxed[0]), float(relaxed[1])))


def spec_rate_window(spec: P2PSchemeSpec, s=0.5, eps=0.1):
    return rate_window(spec.Q_U, spec.Q_BgXU, spec.Q_YgBU, spec.pi_X, spec.P_W, s, eps)


@dataclass
class CodebookAverage:
    """Average of a per-codebook quantity over sampled codebooks."""

    mean: float
    stderr: float
    minimum: float
    values: np.ndarray

    def __iter__(self):
        return iter((self.mean, self.stderr))


def _average(values):
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return CodebookAverage(float(v.mean()), se, float(v.min()), v)


def expected_divergence_over_codebooks(spec: P2PSchemeSpec, n_codebooks, seed=None):
    """Mean +- stderr of the exact total divergence over sampled codebooks.

    Replicate ``i`` uses codebooks drawn with seed ``(seed, i)`` so the
    result does not depend on how many replicates are requested.
    """
    seed = spec.seed if seed is None else seed
    vals = []
    for i in range(int(n_codebooks)):
        books = sample_codebooks(spec, seed=_replicate_seed(seed, i))
        vals.append(exact_induced_divergence(spec, books).total)
    return _average(vals)


def _replicate_seed(seed, i):
    return int(np.random.default_rng([int(seed), int(i), 7]).integers(0, 2**63 - 1))


def m_uniformity_diagnostic(spec: P2PSchemeSpec, codebooks=None):
    """Per-block divergence of the extracted bin from uniform.

    Entry ``k`` (``k >= 2``) is ``D(P_{M_k | X_{k-1} Y_{k-1} U_{k-1}} || Unif)``
    averaged over the previous block's law; block 1 has no extracted bin
    and reports ``nan``.
    """
    rep = exact_induced_divergence(spec, codebooks)
    return rep.m_uniformity


def average_m_uniformity(spec: P2PSchemeSpec, n_codebooks, seed=None, block=2):
    """Codebook average of the block-``block`` uniformity diagnostic."""
    seed = spec.seed if seed is None else seed
    vals = []
    for i in range(int(n_codebooks)):
        books = sample_codebooks(spec, seed=_replicate_seed(seed, i))
        vals.append(m_uniformity_diagnostic(spec, books)[block - 1])
    return _average(vals)


def run_symbolwise(P_BgX, P_YgB, pi_X, pi_YgX, n=1):
    """Divergence of a symbol-by-symbol scheme over ``n`` symbols.

    The scheme is memoryless, so the ``n``-symbol divergence is
    ``n D(P_{Y|X} || pi_{Y|X} | pi_X)`` with ``P_{Y|X} = P_{B|X} P_{Y|B}``.
    """
    K = np.asarray(P_BgX, float) @ np.asarray(P_YgB, float)
    return int(n) * im.cond_kl_div(K, np.asarray(pi_YgX, float), np.asarray(pi_X, float))


def sampled_bin_diagnostics(spec: P2PSchemeSpec, n_traj, seed, codebooks=None):
    """Trajectory sampling for specs too large for the exact engine.

    Draws ``n_traj`` independent runs of the scheme symbol by symbol and
    reports, per block, the empirical bin occupancy's plug-in divergence
    from uniform and the mean per-symbol target log-loss ``-log pi(y|x)``.
    No divergence between induced and target laws is estimated: plug-in
    estimates of that quantity are biased at feasible sample sizes.
    """
    sz = spec.sizes
    N, K, M = spec.N, spec.K, spec.bins
    books = codebooks if codebooks is not None else sample_codebooks(spec, seed)
    rng = np.random.default_rng([int(seed), 99])
    nb, nw, nu = sz["B"], sz["W"], sz["U"]
    bw = nb ** np.arange(N - 1, -1, -1)
    ww = nw ** np.arange(N - 1, -1, -1)
    u_digits = nu ** np.arange(N - 1, -1, -1)
    counts = np.zeros((K, M))
    logloss = np.zeros(K)
    for _ in range(int(n_traj)):
        b_prev = w_prev = None
        for k in range(K):
            x = rng.choice(sz["X"], size=N, p=spec.pi_X)
            if k == 0:
                b = rng.integers(0, nb, size=N)
                y = rng.choice(sz["Y"], size=N, p=spec.QhatY)
            else:
                m = books.binning[k].table[b_prev @ bw, w_prev @ ww]
                counts[k, m] += 1
                u = (books.words[k].words[m] // u_digits) % nu
                b = np.array([rng.choice(nb, p=spec.Q_BgXU[x[t], u[t]]) for t in range(N)])
                y = np.array([rng.choice(sz["Y"], p=spec.Q_YgBU[b[t], u[t]]) for t in range(N)])
            w = rng.choice(nw, size=N, p=spec.P_W)
            with np.errstate(divide="ignore"):
                logloss[k] -= np.log(spec.pi_YgX[x, y]).mean()
            b_prev, w_prev = b, w
    records = []
    for k in range(K):
        rec = engine.BlockRecord(k + 1, float("nan"), float("nan"))
        if k >= 1:
            emp = counts[k] / counts[k].sum()
            rec.m_uniformity = im.kl_div(emp, np.full(M, 1.0 / M))
        records.append(rec)
    rep = engine.SimReport(
        method="monte-carlo",
        N=N,
        K=K,
        total=float("nan"),
        blocks=records,
        bins=M,
        samples=int(n_traj),
        typical_fallback=books.used_fallback,
        decomposition_gap=float("nan"),
        details={"mean_target_logloss": (logloss / max(int(n_traj), 1)).tolist()},
    )
    return rep
