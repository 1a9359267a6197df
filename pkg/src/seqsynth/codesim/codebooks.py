"""Random codebooks of the block schemes and sequence-level kernels.

Sequences of length ``N`` over an alphabet of size ``a`` are stored as
integer indices in ``[0, a**N)`` with the first symbol most significant,
matching :func:`seqsynth.probkit.product_extension`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..probkit import (
    EmptyTypicalSet,
    check_capacity,
    conditional_typical_mask,
    product_extension,
    sequences,
    typical_mask,
)


def n_bins(N, R):
    """``ceil(e^{N R})`` bins; the small guard keeps ``R = log(m)`` exact."""
    if R < 0:
        raise ValueError("rate must be nonnegative")
    return max(1, int(math.ceil(math.exp(N * R) - 1e-9)))


def seq_power(arr, N):
    """N-fold memoryless extension applied to every axis.

    ``arr[a, b, ..., o]`` becomes ``out[a^N, b^N, ..., o^N]`` with
    ``out = prod_t arr[a_t, b_t, ..., o_t]``.  Works for pmfs, joint pmfs
    and kernels alike.
    """
    arr = np.asarray(arr, dtype=float)
    check_capacity("sequence kernel", arr.size**N)
    nd = arr.ndim
    out = np.ones((1,) * nd)
    for _ in range(N):
        prod = np.multiply.outer(out, arr)
        order = [ax for i in range(nd) for ax in (i, nd + i)]
        shape = [out.shape[i] * arr.shape[i] for i in range(nd)]
        out = prod.transpose(order).reshape(shape)
    return out


def truncated_law(Q, N, eps):
    """Typical-set truncation of ``Q^N``; returns (pmf, used_fallback)."""
    mask, fb = typical_mask(Q, N, eps, fallback=True)
    base = np.asarray(product_extension(Q, N))
    trunc = np.where(mask, base, 0.0)
    tot = trunc.sum()
    if tot <= 0:
        raise EmptyTypicalSet("truncated law has no mass")
    return trunc / tot, fb


def truncated_conditional_law(Q_UUh, u_idx, N, eps):
    """``Q_{Uh|U}^N(.|u)`` restricted to sequences jointly typical with ``u``."""
    Q = np.asarray(Q_UUh, dtype=float)
    nu, nh = Q.shape
    u_seq = sequences(nu, N)[u_idx]
    q_u = Q.sum(axis=1)
    cond = np.where(q_u[:, None] > 0, Q / np.where(q_u > 0, q_u, 1.0)[:, None], 1.0 / nh)
    base = np.ones(1)
    for a in u_seq:
        base = np.kron(base, cond[a])
    mask, fb = conditional_typical_mask(Q, u_seq, eps, fallback=True)
    trunc = np.where(mask, base, 0.0)
    tot = trunc.sum()
    if tot <= 0:
        # typical continuations all have zero conditional mass; fall back to the raw product law
        return base / base.sum(), True
    return trunc / tot, fb


@dataclass
class BinningCodebook:
    """Bin index ``table[b, w]`` (or ``table[a, b, w]``) in ``[0, bins)``."""

    table: np.ndarray
    bins: int

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)
        if self.table.size and (self.table.min() < 0 or self.table.max() >= self.bins):
            raise ValueError("bin index out of range")

    def bin_mass(self, P_W_N, in_law=None):
        """``G[b, m] = sum_w P_W(w) [table[b, w] == m]`` (extra leading axes kept).

        With ``in_law`` over the leading axes, returns the law of the bin.
        """
        t = self.table
        G = np.zeros(t.shape[:-1] + (self.bins,))
        idx = np.indices(t.shape[:-1])
        for w, pw in enumerate(P_W_N):
            if pw > 0:
                np.add.at(G, tuple(idx) + (t[..., w],), pw)
        if in_law is None:
            return G
        return np.tensordot(np.asarray(in_law), G, axes=G.ndim - 1)

    def to_json(self):
        return {"bins": int(self.bins), "table": self.table.tolist()}


@dataclass
class IndexCodebook:
    """Bin table ``table[w]`` for the second-layer index (no channel input)."""

    table: np.ndarray
    bins: int

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)

    def index_law(self, P_N):
        out = np.zeros(self.bins)
        np.add.at(out, self.table, np.asarray(P_N))
        return out

    def to_json(self):
        return {"bins": int(self.bins), "table": self.table.tolist()}


@dataclass
class ResolvCodebook:
    """Codeword ``words[m]`` (a sequence index) for each bin ``m``."""

    words: np.ndarray
    used_fallback: bool = False

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.int64)

    def to_json(self):
        return {"words": self.words.tolist(), "used_fallback": bool(self.used_fallback)}


@dataclass
class SuperpositionCodebook:
    """Cloud centres ``words[m]`` and satellites ``satellites[m, mh]``."""

    words: np.ndarray
    satellites: np.ndarray
    used_fallback: bool = False

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.int64)
        self.satellites = np.asarray(self.satellites, dtype=np.int64)

    def to_json(self):
        return {
            "words": self.words.tolist(),
            "satellites": self.satellites.tolist(),
            "used_fallback": bool(self.used_fallback),
        }


def block_rng(seed, block, stream):
    """Independent generator keyed by (seed, block, stream)."""
    return np.random.default_rng([int(seed), int(block), int(stream)])


def random_binning(rng, index_shape, bins):
    check_capacity("binning table", int(np.prod(index_shape)))
    return BinningCodebook(rng.integers(0, bins, size=index_shape), bins)


def random_words(rng, law, count, used_fallback=False):
    law = np.asarray(law, dtype=float)
    return ResolvCodebook(rng.choice(law.size, size=count, p=law / law.sum()), used_fallback)
