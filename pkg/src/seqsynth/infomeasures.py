"""Shannon and Rényi entropies and divergences (natural logarithms).

Every divergence sums over the support of its first argument only and
returns ``np.inf`` when absolute continuity fails.  Rényi quantities are
parameterized by ``s`` with order ``1 + s``; ``s == 0`` dispatches to the
Shannon/KL formula rather than a numerical limit.

Conditional Rényi entropy follows the "averaged inside the log"
convention::

    H_{1+s}(Y|X) = -(1/s) log sum_x P(x) sum_y P(y|x)^{1+s}

which, unlike the Shannon case, is *not* the P_X-average of the per-symbol
entropies H_{1+s}(Y|X=x).
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .probkit import AlphabetMismatch, JointDist, Kernel

__all__ = [
    "kl_div",
    "renyi_div",
    "cond_kl_div",
    "cond_renyi_div",
    "entropy",
    "renyi_entropy",
    "cond_entropy",
    "cond_renyi_entropy",
    "per_symbol_renyi",
    "mutual_info",
    "cond_mutual_info",
]


def _check_order(s):
    s = float(s)
    if not s >= 0:
        raise ValueError(f"Renyi parameter s must be >= 0, got {s}")
    return s


def _pair(P, Q):
    p = np.asarray(P, dtype=float)
    q = np.asarray(Q, dtype=float)
    if p.shape != q.shape:
        raise AlphabetMismatch(f"shapes {p.shape} and {q.shape} differ")
    return p.ravel(), q.ravel()


def kl_div(P, Q):
    """D(P||Q) in nats; ``inf`` if P is not absolutely continuous w.r.t. Q."""
    p, q = _pair(P, Q)
    supp = p > 0
    if np.any(q[supp] <= 0):
        return np.inf
    ps, qs = p[supp], q[supp]
    return max(float(np.sum(ps * (np.log(ps) - np.log(qs)))), 0.0)


def renyi_div(P, Q, s):
    """Rényi divergence of order 1+s.

    Parameters
    ----------
    P, Q : array_like
        Probability mass functions of identical shape.
    s : float
        Non-negative; ``s == 0`` returns :func:`kl_div`.
    """
    s = _check_order(s)
    if s == 0:
        return kl_div(P, Q)
    p, q = _pair(P, Q)
    supp = p > 0
    if np.any(q[supp] <= 0):
        return np.inf
    ps, qs = p[supp], q[supp]
    terms = (1 + s) * np.log(ps) - s * np.log(qs)
    return max(float(logsumexp(terms)) / s, 0.0)


def _cond_joints(K1, K2, P):
    r1 = np.asarray(K1, dtype=float)
    r2 = np.asarray(K2, dtype=float)
    p = np.asarray(P, dtype=float)
    if r1.shape != r2.shape or r1.shape[:-1] != p.shape:
        raise AlphabetMismatch(f"kernels {r1.shape}, {r2.shape} vs input law {p.shape}")
    for K in (K1, K2):
        if isinstance(K, Kernel) and np.any((p > 0) & ~K.defined):
            raise ValueError("kernel row undefined on the support of the input law")
    return p[..., None] * r1, p[..., None] * r2


def cond_kl_div(K1, K2, P):
    """D(K1||K2 | P) = D(P K1 || P K2)."""
    return kl_div(*_cond_joints(K1, K2, P))


def cond_renyi_div(K1, K2, P, s):
    """D_{1+s}(K1||K2 | P) = D_{1+s}(P K1 || P K2)."""
    return renyi_div(*_cond_joints(K1, K2, P), s)


def entropy(P):
    p = np.asarray(P, dtype=float).ravel()
    p = p[p > 0]
    return max(float(-np.sum(p * np.log(p))), 0.0)


def renyi_entropy(P, s):
    """H_{1+s}(P) = -(1/s) log sum P^{1+s}; Shannon entropy at s == 0."""
    s = _check_order(s)
    if s == 0:
        return entropy(P)
    p = np.asarray(P, dtype=float).ravel()
    p = p[p > 0]
    return max(-float(logsumexp((1 + s) * np.log(p))) / s, 0.0)


def _split(J, given):
    """Reshape J to a 2-D array (given-flat, rest-flat)."""
    pmf = np.asarray(J, dtype=float)
    if isinstance(given, (int, np.integer, str)):
        given = (given,)
    if isinstance(J, JointDist):
        given = tuple(J.axis(g) for g in given)
    given = tuple(sorted({int(g) % pmf.ndim for g in given}))
    rest = tuple(a for a in range(pmf.ndim) if a not in given)
    moved = np.transpose(pmf, given + rest)
    n_given = int(np.prod([pmf.shape[a] for a in given])) if given else 1
    return moved.reshape(n_given, -1)


def cond_entropy(J, given=0):
    """H(rest | given) for a joint tensor; ``given`` names axes (index or label)."""
    m = _split(J, given)
    return max(entropy(m) - entropy(m.sum(axis=1)), 0.0)


def cond_renyi_entropy(J, given=0, s=1.0):
    """H_{1+s}(rest | given) with the averaged-inside-the-log convention."""
    s = _check_order(s)
    if s == 0:
        return cond_entropy(J, given)
    m = _split(J, given)
    px = m.sum(axis=1)
    rows = px > 0
    m, px = m[rows], px[rows]
    # sum_x P(x) sum_y P(y|x)^{1+s} = sum_{x,y} P(x,y)^{1+s} P(x)^{-s}
    mask = m > 0
    logs = (1 + s) * np.log(np.where(mask, m, 1.0)) - s * np.log(px)[:, None]
    val = -float(logsumexp(logs[mask])) / s
    return max(val, 0.0)


def per_symbol_renyi(J, x, s, given=0):
    """H_{1+s}(Y | X = x): Rényi entropy of the conditional row at ``x``."""
    m = _split(J, given)
    if isinstance(x, tuple):
        x = int(np.ravel_multi_index(x, np.asarray(J).shape[: len(x)]))
    row = m[int(x)]
    total = row.sum()
    if total <= 0:
        raise ValueError(f"conditional row {x} is undefined (zero mass)")
    return renyi_entropy(row / total, s)


def mutual_info(J, a=0, b=None):
    """I(A;B) for a joint tensor.  ``b`` defaults to every other axis."""
    pmf = np.asarray(J, dtype=float)
    if b is None:
        m = _split(J, a)
    else:
        m = _split(_keep(J, a, b), 0)
    pa, pb = m.sum(axis=1), m.sum(axis=0)
    return max(entropy(pa) + entropy(pb) - entropy(m), 0.0) if pmf.size else 0.0


def _as_axes(J, idx):
    if isinstance(idx, (int, np.integer, str)):
        idx = (idx,)
    if isinstance(J, JointDist):
        return tuple(J.axis(i) for i in idx)
    return tuple(int(i) for i in idx)


def _keep(J, *groups):
    """Joint of disjoint axis groups, one flattened tensor axis per group."""
    pmf = np.asarray(J, dtype=float)
    groups = [_as_axes(J, g) for g in groups]
    used = [ax for g in groups for ax in g]
    if len(set(used)) != len(used):
        raise ValueError("axis groups must be disjoint")
    drop = tuple(ax for ax in range(pmf.ndim) if ax not in used)
    sub = np.transpose(pmf.sum(axis=drop, keepdims=True), tuple(used) + drop)
    shape = [int(np.prod([pmf.shape[ax] for ax in g])) for g in groups]
    return sub.reshape(shape)


def cond_mutual_info(J, a, b, given):
    """I(A;B | C) = H(A|C) - H(A|BC) for disjoint axis groups."""
    t = _keep(J, a, b, given)
    ac = t.sum(axis=1)  # (A, C)
    return max(cond_entropy(ac, 1) - cond_entropy(t, (1, 2)), 0.0)
