"""Brute-force checks of the one-shot random-binning and resolvability bounds.

Each verifier enumerates *every* realization of the random code with its
exact probability, computes the left-hand side ``E_C exp(s D_{1+s}(...))``
exactly, and compares it with the closed-form right-hand side built from
:mod:`seqsynth.infomeasures`.  The bounds are theorems for ``s`` in
``(0, 1]``, so a negative slack beyond rounding means a bug.

Verifiers

* :func:`pa_verify`: random binning of ``X`` with side information ``Y``;
* :func:`resolv_verify` / :func:`cond_resolv_verify`: random codebook
  driving a channel, plain and with conditioning variables ``(A, B)``;
* :func:`superpos_verify` / :func:`cond_superpos_verify`: two-layer
  superposition codebook, including the three intermediate terms of the
  standard proof.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import infomeasures as im
from .probkit import check_capacity

__all__ = [
    "PAInstance",
    "ResolvInstance",
    "CondResolvInstance",
    "SuperposInstance",
    "CondSuperposInstance",
    "VerifierReport",
    "pa_verify",
    "resolv_verify",
    "cond_resolv_verify",
    "superpos_verify",
    "cond_superpos_verify",
    "random_instance",
    "verify",
    "verify_batch",
]


def _check_s(s):
    s = float(s)
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    return s


def _norm(p, axis=None):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("negative probability")
    tot = p.sum(axis=axis, keepdims=axis is not None)
    return p / tot


@dataclass
class VerifierReport:
    """Exact left side, bound, and slack of one lemma instance.

    ``checks`` lists every inequality that was tested as
    ``(name, lhs, rhs)``; the headline inequality is always first.
    ``details`` carries auxiliary quantities (Rényi exponents, their
    Shannon counterparts, sub-terms).
    """

    lemma: str
    lhs_exact: float
    rhs_bound: float
    enumeration_size: int
    checks: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def slack(self):
        return self.rhs_bound - self.lhs_exact

    @property
    def min_slack(self):
        if not self.checks:
            return self.slack
        return min(rhs - lhs for _, lhs, rhs in self.checks)

    def ok(self, tol=1e-12):
        return self.min_slack >= -tol

    def to_json(self):
        d = asdict(self)
        d["slack"] = self.slack
        d["min_slack"] = self.min_slack
        return d


# ---------------------------------------------------------------------------
# instances


@dataclass
class PAInstance:
    """Joint ``P_XY`` (rows x, columns y), binning rate ``R`` (nats) and order ``s``."""

    P_XY: np.ndarray
    R: float
    s: float = 1.0

    def __post_init__(self):
        self.P_XY = _norm(self.P_XY)
        self.s = _check_s(self.s)
        if self.P_XY.ndim != 2:
            raise ValueError("P_XY must be 2-D")
        if self.R < 0:
            raise ValueError("R must be nonnegative")

    @property
    def bins(self):
        # guard against exp(log M) landing a hair above the integer M
        return max(1, int(math.ceil(math.exp(self.R) - 1e-9)))


@dataclass
class ResolvInstance:
    """Codebook of ``|W|`` codewords drawn i.i.d. from ``P_X``, used through ``P_{Y|X}``."""

    P_W: np.ndarray
    P_X: np.ndarray
    P_YgX: np.ndarray
    Q_Y: np.ndarray
    s: float = 1.0

    def __post_init__(self):
        self.P_W = _norm(self.P_W)
        self.P_X = _norm(self.P_X)
        self.P_YgX = _norm(self.P_YgX, axis=-1)
        self.Q_Y = _norm(self.Q_Y)
        self.s = _check_s(self.s)


@dataclass
class CondResolvInstance:
    """``P_AW`` (A, W), ``P_B``, ``P_X``, ``P_{Y|XB}`` as (X, B, Y), ``Q_{Y|B}`` as (B, Y)."""

    P_AW: np.ndarray
    P_B: np.ndarray
    P_X: np.ndarray
    P_YgXB: np.ndarray
    Q_YgB: np.ndarray
    s: float = 1.0

    def __post_init__(self):
        self.P_AW = _norm(self.P_AW)
        self.P_B = _norm(self.P_B)
        self.P_X = _norm(self.P_X)
        self.P_YgXB = _norm(self.P_YgXB, axis=-1)
        self.Q_YgB = _norm(self.Q_YgB, axis=-1)
        self.s = _check_s(self.s)


@dataclass
class SuperposInstance:
    """``P_WWh`` (W, Wh), ``P_XXh`` (X, Xh), ``P_{Y|X Xh}`` (X, Xh, Y), ``Q_Y``."""

    P_WWh: np.ndarray
    P_XXh: np.ndarray
    P_YgXXh: np.ndarray
    Q_Y: np.ndarray
    s: float = 1.0

    def __post_init__(self):
        self.P_WWh = _norm(self.P_WWh)
        self.P_XXh = _norm(self.P_XXh)
        self.P_YgXXh = _norm(self.P_YgXXh, axis=-1)
        self.Q_Y = _norm(self.Q_Y)
        self.s = _check_s(self.s)


@dataclass
class CondSuperposInstance:
    """``P_AWWh`` (A, W, Wh), ``P_B``, ``P_XXh``, ``P_{Y|X Xh B}`` (X, Xh, B, Y), ``Q_{Y|B}``."""

    P_AWWh: np.ndarray
    P_B: np.ndarray
    P_XXh: np.ndarray
    P_YgXXhB: np.ndarray
    Q_YgB: np.ndarray
    s: float = 1.0

    def __post_init__(self):
        self.P_AWWh = _norm(self.P_AWWh)
        self.P_B = _norm(self.P_B)
        self.P_XXh = _norm(self.P_XXh)
        self.P_YgXXhB = _norm(self.P_YgXXhB, axis=-1)
        self.Q_YgB = _norm(self.Q_YgB, axis=-1)
        self.s = _check_s(self.s)


# ---------------------------------------------------------------------------
# helpers


def _renyi_sum(P, Q, s):
    """sum_y P^{1+s} Q^{-s} over the last axis, restricted to P > 0 (inf if Q = 0 there)."""
    P = np.asarray(P, dtype=float)
    Q = np.broadcast_to(np.asarray(Q, dtype=float), P.shape)
    pos = P > 0
    if np.any(pos & (Q <= 0)):
        return np.full(P.shape[:-1], np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, P ** (1 + s) * np.where(pos, Q, 1.0) ** (-s), 0.0)
    return terms.sum(axis=-1)


def _ordered_sum(weights, contrib, order):
    """sum_c weights[c] * contrib[c, o] with either summation order."""
    contrib = np.asarray(contrib, dtype=float).reshape(len(weights), -1)
    if order == "codebooks":
        return float(np.sum(weights * contrib.sum(axis=1)))
    if order == "outcomes":
        return float(np.sum(weights @ contrib))
    raise ValueError("order must be 'codebooks' or 'outcomes'")


def _all_assignments(n_values, n_slots):
    """All maps from n_slots positions into range(n_values), shape (n_values**n_slots, n_slots)."""
    check_capacity("codebook enumeration", n_values**n_slots * max(n_slots, 1))
    if n_slots == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices((n_values,) * n_slots).reshape(n_slots, -1).T.astype(np.int64)


def _shannon_cond_abc(out, Q, P_A, P_B, weights):
    """E_C sum_{a,b} P(a) P(b) D(out[c, a, b] || Q[b]) for out of shape (C, A, B, Y)."""
    total = 0.0
    for a in np.flatnonzero(P_A > 0):
        for b in np.flatnonzero(P_B > 0):
            total += P_A[a] * P_B[b] * _shannon_cond_div(out[:, a, b], Q[b], weights)
    return total


def _shannon_cond_div(rows, Q, weights):
    """sum_c weights[c] D(rows[c] || Q[c])."""
    rows = np.asarray(rows).reshape(len(weights), -1)
    Q = np.broadcast_to(np.asarray(Q), np.asarray(rows).shape)
    return float(sum(w * im.kl_div(r, q) for w, r, q in zip(weights, rows, Q) if w > 0))


# ---------------------------------------------------------------------------
# privacy amplification


def pa_verify(inst: PAInstance, order="codebooks"):
    """Random binning of X into ``ceil(e^R)`` bins, side information Y.

    LHS ``E_f sum_y P(y) sum_m P(m|y,f)^{1+s} M^s`` over all ``M^|X|``
    equally likely tables; RHS ``1 + exp(-s (H_{1+s}(X|Y) - R))``.  When
    ``e^R`` is not an integer the uniform reference uses ``ceil(e^R)``
    bins while the RHS uses the real ``R`` (so the bound may then fail).
    """
    P = inst.P_XY
    s = inst.s
    nx, ny = P.shape
    M = inst.bins
    check_capacity("binning tables", M**nx * nx * ny)
    tables = _all_assignments(M, nx)  # (T, X)
    onehot = np.zeros((tables.shape[0], nx, M))
    np.put_along_axis(onehot, tables[:, :, None], 1.0, axis=2)
    P_my = np.einsum("xy,txm->tym", P, onehot)  # joint of (Y, M) per table
    p_y = P.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        P_mgy = np.where(p_y[None, :, None] > 0, P_my / np.where(p_y > 0, p_y, 1.0)[None, :, None], 0.0)
    contrib = p_y[None, :] * _renyi_sum(P_mgy, np.full(M, 1.0 / M), s)  # (T, Y)
    weights = np.full(tables.shape[0], 1.0 / tables.shape[0])
    lhs = _ordered_sum(weights, contrib, order)
    H = im.cond_renyi_entropy(P, given=1, s=s)
    rhs = 1.0 + math.exp(-s * (H - inst.R))
    shannon = float(np.sum(weights * [im.cond_kl_div(P_mgy[t], np.full((ny, M), 1.0 / M), p_y) for t in range(len(weights))]))
    return VerifierReport(
        "privacy_amplification",
        lhs,
        rhs,
        int(tables.shape[0]),
        [("bound", lhs, rhs)],
        {
            "bins": M,
            "R": inst.R,
            "s": s,
            "renyi_entropy_XgY": H,
            "shannon_entropy_XgY": im.cond_entropy(P, given=1),
            "lhs_divergence": math.log(lhs) / s,
            "lhs_shannon_divergence": shannon,
        },
    )


# ---------------------------------------------------------------------------
# resolvability


def _resolv_core(P_W, P_X, K, Q, s, order):
    """Exact E_C sum_y P(y|C)^{1+s} Q(y)^{-s}; returns lhs, weights, outputs."""
    nw, nx = P_W.size, P_X.size
    check_capacity("codebooks", nx**nw * nw * K.shape[-1])
    books = _all_assignments(nx, nw)  # (C, W)
    weights = np.prod(P_X[books], axis=1)
    out = np.einsum("w,cwy->cy", P_W, K[books])  # P(y | C)
    lhs = _ordered_sum(weights, _renyi_sum_terms(out, Q, s), order)
    return lhs, weights, out


def _renyi_sum_terms(P, Q, s):
    P = np.asarray(P, dtype=float)
    Q = np.broadcast_to(np.asarray(Q, dtype=float), P.shape)
    pos = P > 0
    if np.any(pos & (Q <= 0)):
        return np.where(pos & (Q <= 0), np.inf, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos, P ** (1 + s) * np.where(pos, Q, 1.0) ** (-s), 0.0)


def _resolv_rhs(P_W, P_X, K, Q, s):
    d_cond = im.cond_renyi_div(K, np.broadcast_to(Q, K.shape), P_X, s)
    P_Y = P_X @ K
    d_marg = im.renyi_div(P_Y, Q, s)
    H_W = im.renyi_entropy(P_W, s)
    t1 = math.exp(s * d_cond - s * H_W)
    t2 = math.exp(s * d_marg)
    return t1, t2, {"renyi_div_YgX": d_cond, "renyi_div_Y": d_marg, "renyi_entropy_W": H_W}


def resolv_verify(inst: ResolvInstance, order="codebooks"):
    """Random codebook ``{X(w)}`` i.i.d. ``P_X``; output law ``sum_w P_W(w) P(y|X(w))`` vs ``Q_Y``."""
    s = inst.s
    K = inst.P_YgX
    lhs, weights, out = _resolv_core(inst.P_W, inst.P_X, K, inst.Q_Y, s, order)
    t1, t2, det = _resolv_rhs(inst.P_W, inst.P_X, K, inst.Q_Y, s)
    det.update(
        {
            "s": s,
            "rhs_term1": t1,
            "rhs_term2": t2,
            "shannon_div_YgX": im.cond_kl_div(K, np.broadcast_to(inst.Q_Y, K.shape), inst.P_X),
            "shannon_div_Y": im.kl_div(inst.P_X @ K, inst.Q_Y),
            "shannon_entropy_W": im.entropy(inst.P_W),
            "lhs_divergence": math.log(lhs) / s,
            "lhs_shannon_divergence": _shannon_cond_div(out, inst.Q_Y, weights),
        }
    )
    return VerifierReport("resolvability", lhs, t1 + t2, int(len(weights)), [("bound", lhs, t1 + t2)], det)


def cond_resolv_verify(inst: CondResolvInstance, order="codebooks"):
    """Conditional resolvability with ``(A, W) ~ P_AW`` and independent ``B ~ P_B``.

    The LHS is computed twice: by direct enumeration over codebooks and
    ``(a, b)``, and as the ``P_A P_B`` average of plain resolvability runs
    with ``P_W <- P_{W|A=a}``, ``P_{Y|X} <- P_{Y|X,B=b}``, ``Q <- Q_{Y|B=b}``.
    """
    s = inst.s
    P_AW, P_B, P_X = inst.P_AW, inst.P_B, inst.P_X
    K, Q = inst.P_YgXB, inst.Q_YgB  # (X, B, Y), (B, Y)
    na, nw = P_AW.shape
    nx, nb, ny = K.shape
    P_A = P_AW.sum(axis=1)
    P_WgA = P_AW / np.where(P_A > 0, P_A, 1.0)[:, None]
    check_capacity("codebooks", nx**nw * na * nb * ny)
    books = _all_assignments(nx, nw)
    weights = np.prod(P_X[books], axis=1)
    # P(y | a, b, C) = sum_w P(w|a) K[x_w, b, y]
    out = np.einsum("aw,cwby->caby", P_WgA, K[books])
    terms = _renyi_sum_terms(out, Q[None, None], s)  # (C, A, B, Y)
    terms = terms * (P_A[None, :, None, None] * P_B[None, None, :, None])
    lhs_direct = _ordered_sum(weights, terms, order)

    lhs_red, rhs_red = 0.0, 0.0
    for a in range(na):
        if P_A[a] == 0:
            continue
        for b in range(nb):
            if P_B[b] == 0:
                continue
            sub = resolv_verify(ResolvInstance(P_WgA[a], P_X, K[:, b, :], Q[b], s), order)
            lhs_red += P_A[a] * P_B[b] * sub.lhs_exact
            rhs_red += P_A[a] * P_B[b] * sub.rhs_bound

    KB = np.transpose(K, (1, 0, 2))  # (B, X, Y)
    P_XB = np.outer(P_B, P_X)
    d_cond = im.cond_renyi_div(KB, np.broadcast_to(Q[:, None, :], KB.shape), P_XB, s)
    P_YgB = np.einsum("x,bxy->by", P_X, KB)
    d_marg = im.cond_renyi_div(P_YgB, Q, P_B, s)
    H_WgA = im.cond_renyi_entropy(P_AW, given=0, s=s)
    t1 = math.exp(s * d_cond - s * H_WgA)
    t2 = math.exp(s * d_marg)
    rhs = t1 + t2
    checks = [
        ("bound", lhs_direct, rhs),
    ]
    return VerifierReport(
        "conditional_resolvability",
        lhs_direct,
        rhs,
        int(len(weights) * na * nb),
        checks,
        {
            "s": s,
            "lhs_reduction": lhs_red,
            "rhs_reduction": rhs_red,
            "reduction_gap": max(abs(lhs_direct - lhs_red), abs(rhs - rhs_red)),
            "rhs_term1": t1,
            "rhs_term2": t2,
            "renyi_entropy_WgA": H_WgA,
            "lhs_divergence": math.log(lhs_direct) / s,
            "lhs_shannon_divergence": _shannon_cond_abc(out, Q, P_A, P_B, weights),
        },
    )


# ---------------------------------------------------------------------------
# superposition


def _superpos_books(P_XXh):
    """Enumerate (x_w, xh_{w,wh}) codebooks: yields callable building arrays for given |W|, |Wh|."""
    P_X = P_XXh.sum(axis=1)
    P_XhgX = P_XXh / np.where(P_X > 0, P_X, 1.0)[:, None]
    P_XhgX[P_X == 0] = 1.0 / P_XXh.shape[1]
    return P_X, P_XhgX


def _superpos_terms(P_WWh, P_XXh, K, Q, s):
    """Per-codebook LHS summand and the three proof terms.

    ``K`` is (X, Xh, Y) and ``Q`` broadcastable to (Y,).
    Returns (weights, lhs_c, L1_c, L2_c, L3_c) with ``*_c`` of shape (C,).
    """
    nw, nwh = P_WWh.shape
    nx, nxh, ny = K.shape
    P_X, P_XhgX = _superpos_books(P_XXh)
    n_books = (nx * nxh**nwh) ** nw
    check_capacity("superposition codebooks", n_books * nw * nwh * ny)
    xs = _all_assignments(nx, nw)  # (Cx, W)
    xhs = _all_assignments(nxh, nw * nwh).reshape(-1, nw, nwh)  # (Ch, W, Wh)
    cx, ch = len(xs), len(xhs)
    X = np.repeat(xs, ch, axis=0)  # (C, W)
    XH = np.tile(xhs, (cx, 1, 1))  # (C, W, Wh)
    Xb = np.broadcast_to(X[:, :, None], XH.shape)
    weights = np.prod(P_X[X], axis=1) * np.prod(P_XhgX[Xb, XH], axis=(1, 2))
    F = K[Xb, XH]  # (C, W, Wh, Y): P(y | f_C(w, wh))
    Qs = np.asarray(Q, dtype=float) ** (-s)
    pw = P_WWh[None, :, :, None]
    term = pw * F  # P(w, wh) P(y | f(w, wh))
    total = term.sum(axis=(1, 2))  # P(y | C)
    lhs_c = (_renyi_sum_terms(total, Q, s)).sum(axis=-1)
    L1_c = ((term ** (1 + s)) * Qs).sum(axis=(1, 2, 3))
    same_w = term.sum(axis=2, keepdims=True)  # sum over wh' of P(w, wh') P(y|f(w, wh'))
    inner2 = np.maximum(same_w - term, 0.0)
    L2_c = (term * inner2**s * Qs).sum(axis=(1, 2, 3))
    inner3 = np.maximum(total[:, None, None, :] - same_w, 0.0)
    L3_c = (term * inner3**s * Qs).sum(axis=(1, 2, 3))
    return weights, lhs_c, L1_c, L2_c, L3_c, (weights, total)


def _superpos_closed(P_WWh, P_XXh, K, Q, s):
    P_X = P_XXh.sum(axis=1)
    nx, nxh, ny = K.shape
    Qb = np.broadcast_to(Q, K.shape)
    d1 = im.cond_renyi_div(K, Qb, P_XXh, s)
    P_XhgX = _superpos_books(P_XXh)[1]
    K_X = np.einsum("xh,xhy->xy", P_XhgX, K)
    d2 = im.cond_renyi_div(K_X, np.broadcast_to(Q, K_X.shape), P_X, s)
    P_Y = np.einsum("xh,xhy->y", P_XXh, K)
    d3 = im.renyi_div(P_Y, Q, s)
    H12 = im.renyi_entropy(P_WWh, s)
    H1 = im.renyi_entropy(P_WWh.sum(axis=1), s)
    return (
        math.exp(s * d1 - s * H12),
        math.exp(s * d2 - s * H1),
        math.exp(s * d3),
        {"renyi_div_YgXXh": d1, "renyi_div_YgX": d2, "renyi_div_Y": d3, "renyi_entropy_WWh": H12, "renyi_entropy_W": H1},
    )


def superpos_verify(inst: SuperposInstance, order="codebooks"):
    """Two-layer codebook ``X(w)`` i.i.d. ``P_X``, ``Xh(w, wh)`` i.i.d. ``P_{Xh|X}(.|X(w))``.

    Checks the lemma and the three intermediate inequalities of its proof:
    ``LHS <= L1 + L2 + L3``, ``L1 = c1`` (tested as two inequalities),
    ``L2 <= c2`` and ``L3 <= c3`` where ``c1 + c2 + c3`` is the lemma's RHS.
    """
    s = inst.s
    weights, lhs_c, L1_c, L2_c, L3_c, (w, total) = _superpos_terms(inst.P_WWh, inst.P_XXh, inst.P_YgXXh, inst.Q_Y, s)
    lhs = _ordered_sum(weights, lhs_c, order)
    L1, L2, L3 = (float(weights @ v) for v in (L1_c, L2_c, L3_c))
    c1, c2, c3, det = _superpos_closed(inst.P_WWh, inst.P_XXh, inst.P_YgXXh, inst.Q_Y, s)
    rhs = c1 + c2 + c3
    scale = max(1.0, abs(c1))
    checks = [
        ("bound", lhs, rhs),
        ("lhs_le_L1_L2_L3", lhs, L1 + L2 + L3),
        ("L1_le_closed", L1, c1 + 1e-13 * scale),
        ("closed_le_L1", c1, L1 + 1e-13 * scale),
        ("L2_le_closed", L2, c2),
        ("L3_le_closed", L3, c3),
    ]
    det.update(
        {"s": s, "L1": L1, "L2": L2, "L3": L3, "closed1": c1, "closed2": c2, "closed3": c3,
         "lhs_divergence": math.log(lhs) / s,
         "lhs_shannon_divergence": _shannon_cond_div(total, inst.Q_Y, weights)}
    )
    return VerifierReport("superposition", lhs, rhs, int(len(weights)), checks, det)


def cond_superpos_verify(inst: CondSuperposInstance, order="codebooks"):
    """Conditional superposition bound with ``(A, W, Wh) ~ P_AWWh`` and independent ``B``.

    As :func:`cond_resolv_verify`, the LHS is computed both by direct
    enumeration and as the ``P_A P_B`` average of per-``(a, b)``
    superposition runs; the L-terms are averaged the same way.
    """
    s = inst.s
    P_AWWh, P_B, P_XXh = inst.P_AWWh, inst.P_B, inst.P_XXh
    K, Q = inst.P_YgXXhB, inst.Q_YgB  # (X, Xh, B, Y), (B, Y)
    na, nw, nwh = P_AWWh.shape
    nx, nxh, nb, ny = K.shape
    P_A = P_AWWh.sum(axis=(1, 2))
    P_WWhgA = P_AWWh / np.where(P_A > 0, P_A, 1.0)[:, None, None]

    # direct enumeration: same codebooks for every (a, b)
    P_X, P_XhgX = _superpos_books(P_XXh)
    check_capacity("superposition codebooks", (nx * nxh**nwh) ** nw * na * nb * nw * nwh * ny)
    xs = _all_assignments(nx, nw)
    xhs = _all_assignments(nxh, nw * nwh).reshape(-1, nw, nwh)
    X = np.repeat(xs, len(xhs), axis=0)
    XH = np.tile(xhs, (len(xs), 1, 1))
    Xb = np.broadcast_to(X[:, :, None], XH.shape)
    weights = np.prod(P_X[X], axis=1) * np.prod(P_XhgX[Xb, XH], axis=(1, 2))
    F = K[Xb, XH]  # (C, W, Wh, B, Y)
    out = np.einsum("awh,cwhby->caby", P_WWhgA, F)  # P(y | a, b, C)
    terms = _renyi_sum_terms(out, Q[None, None], s) * (P_A[None, :, None, None] * P_B[None, None, :, None])
    lhs_direct = _ordered_sum(weights, terms, order)

    lhs_red = rhs_red = L1 = L2 = L3 = 0.0
    for a in range(na):
        if P_A[a] == 0:
            continue
        for b in range(nb):
            if P_B[b] == 0:
                continue
            sub = superpos_verify(SuperposInstance(P_WWhgA[a], P_XXh, K[:, :, b, :], Q[b], s), order)
            wgt = P_A[a] * P_B[b]
            lhs_red += wgt * sub.lhs_exact
            rhs_red += wgt * sub.rhs_bound
            L1 += wgt * sub.details["L1"]
            L2 += wgt * sub.details["L2"]
            L3 += wgt * sub.details["L3"]

    # closed form with conditional quantities
    KB = np.transpose(K, (2, 0, 1, 3))  # (B, X, Xh, Y)
    P_BXXh = P_B[:, None, None] * P_XXh[None]
    d1 = im.cond_renyi_div(KB, np.broadcast_to(Q[:, None, None, :], KB.shape), P_BXXh, s)
    K_XB = np.einsum("xh,bxhy->bxy", P_XhgX, KB)
    d2 = im.cond_renyi_div(K_XB, np.broadcast_to(Q[:, None, :], K_XB.shape), np.outer(P_B, P_X), s)
    P_YgB = np.einsum("xh,bxhy->by", P_XXh, KB)
    d3 = im.cond_renyi_div(P_YgB, Q, P_B, s)
    H12 = im.cond_renyi_entropy(P_AWWh, given=0, s=s)
    H1 = im.cond_renyi_entropy(P_AWWh.sum(axis=2), given=0, s=s)
    c1, c2, c3 = math.exp(s * d1 - s * H12), math.exp(s * d2 - s * H1), math.exp(s * d3)
    rhs = c1 + c2 + c3
    checks = [
        ("bound", lhs_direct, rhs),
        ("lhs_le_L1_L2_L3", lhs_direct, L1 + L2 + L3),
        ("L1_le_closed", L1, c1 * (1 + 1e-13)),
        ("closed_le_L1", c1, L1 * (1 + 1e-13)),
        ("L2_le_closed", L2, c2),
        ("L3_le_closed", L3, c3),
    ]
    return VerifierReport(
        "conditional_superposition",
        lhs_direct,
        rhs,
        int(len(weights) * na * nb),
        checks,
        {"s": s, "lhs_reduction": lhs_red, "rhs_reduction": rhs_red,
         "reduction_gap": max(abs(lhs_direct - lhs_red), abs(rhs - rhs_red)), "L1": L1, "L2": L2, "L3": L3,
         "closed1": c1, "closed2": c2, "closed3": c3, "lhs_divergence": math.log(lhs_direct) / s,
         "lhs_shannon_divergence": _shannon_cond_abc(out, Q, P_A, P_B, weights)},
    )


# ---------------------------------------------------------------------------
# random micro instances and batches

LEMMAS = ("pa", "resolv", "cond_resolv", "superpos", "cond_superpos")


def _dir(rng, *shape):
    n = shape[-1]
    return rng.dirichlet(np.ones(n), size=shape[:-1]) if len(shape) > 1 else rng.dirichlet(np.ones(n))


def _pick_s(rng):
    return float(rng.choice([0.25, 0.5, 1.0, rng.uniform(0.05, 1.0)]))


def random_instance(kind, rng, s=None):
    """Random micro instance of the given lemma (alphabets of size 1-3)."""
    s = _pick_s(rng) if s is None else s
    if kind == "pa":
        nx, ny = rng.integers(2, 4), rng.integers(1, 4)
        M = int(rng.integers(1, 4))
        return PAInstance(_dir(rng, nx * ny).reshape(nx, ny), math.log(M), s)
    if kind == "resolv":
        nw, nx, ny = rng.integers(1, 4), rng.integers(2, 4), rng.integers(2, 4)
        return ResolvInstance(_dir(rng, nw), _dir(rng, nx), _dir(rng, nx, ny), _dir(rng, ny), s)
    if kind == "cond_resolv":
        na, nw, nb = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 3)
        nx, ny = 2, rng.integers(2, 4)
        return CondResolvInstance(
            _dir(rng, na * nw).reshape(na, nw), _dir(rng, nb), _dir(rng, nx), _dir(rng, nx, nb, ny), _dir(rng, nb, ny), s
        )
    if kind == "superpos":
        nw, nwh = rng.integers(1, 3), rng.integers(1, 3)
        return SuperposInstance(
            _dir(rng, nw * nwh).reshape(nw, nwh), _dir(rng, 4).reshape(2, 2), _dir(rng, 2, 2, 2), _dir(rng, 2), s
        )
    if kind == "cond_superpos":
        na, nb = rng.integers(1, 3), rng.integers(1, 3)
        nw, nwh = rng.integers(1, 3), rng.integers(1, 3)
        return CondSuperposInstance(
            _dir(rng, na * nw * nwh).reshape(na, nw, nwh),
            _dir(rng, nb),
            _dir(rng, 4).reshape(2, 2),
            _dir(rng, 2, 2, nb, 2),
            _dir(rng, nb, 2),
            s,
        )
    raise ValueError(f"unknown lemma {kind!r}; expected one of {LEMMAS}")


_VERIFIERS = {
    "pa": (PAInstance, pa_verify),
    "resolv": (ResolvInstance, resolv_verify),
    "cond_resolv": (CondResolvInstance, cond_resolv_verify),
    "superpos": (SuperposInstance, superpos_verify),
    "cond_superpos": (CondSuperposInstance, cond_superpos_verify),
}


def verify(kind, inst, order="codebooks"):
    return _VERIFIERS[kind][1](inst, order)


def verify_batch(kind, n, seed, s=None):
    """Verify ``n`` random instances; instance ``i`` uses ``default_rng([seed, i])``."""
    reports = []
    for i in range(int(n)):
        rng = np.random.default_rng([int(seed), i])
        reports.append(verify(kind, random_instance(kind, rng, s)))
    return reports


def instance_to_json(inst):
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(inst).items()}


def instance_from_json(kind, obj):
    cls = _VERIFIERS[kind][0]
    if isinstance(obj, str):
        obj = json.loads(obj)
    return cls(**{k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in obj.items()})
