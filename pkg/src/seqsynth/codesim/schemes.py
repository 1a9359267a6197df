"""Point-to-point, broadcast and interactive block schemes.

Each scheme has a spec dataclass, a codebook sampler and a builder of the
per-block laws consumed by :func:`seqsynth.codesim.engine.run_blocks`.

Block 1 follows the warm-up of the schemes: the link symbols are i.i.d.
uniform and independent of the input, the output block is drawn from a
fixed product law (the Gibbs minimizer for point-to-point, the best
product law for broadcast, a constant admissible pair for interactive).
From block 2 on, the state ``m_k`` is the bin of ``(link block, common
randomness block)`` of the previous block, and selects the codeword.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .. import infomeasures as im
from ..bounds import best_constant_output, gibbs_output_law, product_output_law
from ..probkit import check_capacity, product_extension, sequences
from . import engine
from .codebooks import (
    BinningCodebook,
    IndexCodebook,
    ResolvCodebook,
    SuperpositionCodebook,
    block_rng,
    n_bins,
    random_binning,
    random_words,
    seq_power,
    truncated_conditional_law,
    truncated_law,
)

__all__ = [
    "P2PSchemeSpec",
    "BroadcastSchemeSpec",
    "InteractiveSchemeSpec",
    "P2PCodebooks",
    "BroadcastCodebooks",
    "sample_codebooks",
    "build_broadcast_scheme",
    "sample_interactive_codebooks",
    "exact_induced_divergence",
    "exact_broadcast_divergence",
    "exact_interactive_divergence",
    "reduce_interactive_to_p2p",
    "interactive_joint_law",
    "p2p_joint_law",
    "interactive_reduction_gap",
]


def _arr(x, axis=-1):
    a = np.asarray(x, dtype=float)
    if np.any(a < 0):
        raise ValueError("negative probability")
    s = a.sum(axis=axis, keepdims=True)
    if np.any(s <= 0):
        raise ValueError("row with zero mass")
    return a / s


def _check_blocks(N, K):
    if int(N) < 1 or int(K) < 1:
        raise ValueError("N and K must be >= 1")


# ---------------------------------------------------------------------------
# point-to-point


@dataclass
class P2PSchemeSpec:
    """Point-to-point scheme.

    Arrays: ``Q_U (U,)``, ``Q_BgXU (X, U, B)``, ``Q_YgBU (B, U, Y)``,
    ``P_W (W,)``, ``pi_X (X,)``, ``pi_YgX (X, Y)``.  ``QhatY`` defaults to
    the minimizer of ``D(Q_Y || pi_{Y|X} | pi_X)``.
    """

    N: int
    K: int
    R: float
    Q_U: np.ndarray
    Q_BgXU: np.ndarray
    Q_YgBU: np.ndarray
    P_W: np.ndarray
    pi_X: np.ndarray
    pi_YgX: np.ndarray
    QhatY: Optional[np.ndarray] = None
    eps: float = 0.25
    seed: int = 0

    def __post_init__(self):
        _check_blocks(self.N, self.K)
        self.N, self.K = int(self.N), int(self.K)
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        self.Q_U = _arr(self.Q_U)
        self.Q_BgXU = _arr(self.Q_BgXU)
        self.Q_YgBU = _arr(self.Q_YgBU)
        self.P_W = _arr(self.P_W)
        self.pi_X = _arr(self.pi_X)
        self.pi_YgX = _arr(self.pi_YgX)
        nx, nu, nb = self.Q_BgXU.shape
        if self.Q_U.size != nu or self.pi_X.size != nx or self.Q_YgBU.shape[:2] != (nb, nu):
            raise ValueError("alphabet sizes are inconsistent")
        if self.pi_YgX.shape != (nx, self.Q_YgBU.shape[2]):
            raise ValueError("target kernel shape does not match (X, Y)")
        if self.QhatY is None:
            q, val = gibbs_output_law(self.pi_X, self.pi_YgX)
            if q is None:
                raise ValueError("no output law has finite divergence from the target")
            self.QhatY = q
        else:
            self.QhatY = _arr(self.QhatY)

    @property
    def sizes(self):
        nx, nu, nb = self.Q_BgXU.shape
        return {"X": nx, "U": nu, "B": nb, "Y": self.Q_YgBU.shape[2], "W": self.P_W.size}

    @property
    def bins(self):
        return n_bins(self.N, self.R)


@dataclass
class P2PCodebooks:
    """``binning[k]`` maps (B-block, W-block) of block k-1 to the bin used in block k.

    Entry ``k = 0`` (block 1) is drawn but unused, as block 1 has a
    constant state.  ``words[k]`` is the codeword table of block ``k``.
    """

    binning: list
    words: list
    used_fallback: bool = False

    def to_json(self):
        return {
            "binning": [b.to_json() for b in self.binning],
            "words": [w.to_json() for w in self.words],
            "used_fallback": self.used_fallback,
        }


def sample_codebooks(spec: P2PSchemeSpec, seed=None):
    """Independent binning tables and codeword tables for blocks 1..K.

    Deterministic in ``seed`` (default ``spec.seed``); block ``k`` uses
    generator streams keyed by ``(seed, k)``.
    """
    seed = spec.seed if seed is None else seed
    sz = spec.sizes
    N, M = spec.N, spec.bins
    check_capacity("binning codebook", M * (sz["B"] * sz["W"]) ** N)
    law, fb = truncated_law(spec.Q_U, N, spec.eps)
    binning, words = [], []
    for k in range(spec.K):
        binning.append(random_binning(block_rng(seed, k, 0), (sz["B"] ** N, sz["W"] ** N), M))
        words.append(random_words(block_rng(seed, k, 1), law, M, fb))
    return P2PCodebooks(binning, words, fb)


def _p2p_parts(spec):
    N = spec.N
    return (
        seq_power(spec.Q_BgXU, N),  # (X^N, U^N, B^N)
        seq_power(spec.Q_YgBU, N),  # (B^N, U^N, Y^N)
        np.asarray(product_extension(spec.P_W, N)),
    )


def p2p_block_laws(spec: P2PSchemeSpec, books: P2PCodebooks):
    """Block laws ``L_k[m, u, x, y, m_next]`` of the point-to-point scheme."""
    sz = spec.sizes
    N, K, M = spec.N, spec.K, spec.bins
    QB, QY, PW = _p2p_parts(spec)
    nxn, nun, nbn = QB.shape
    nyn = QY.shape[2]
    check_capacity("block law", M * nun * nxn * nyn * M * nbn)

    def next_mass(k):
        # G[b, m'] for the state handed to block k + 1 (0-based k)
        if k + 1 >= K:
            return np.ones((nbn, 1))
        return books.binning[k + 1].bin_mass(PW)

    laws = []
    # block 1: uniform link block, fixed output law, constant codeword
    G = next_mass(0)
    link = np.full(nbn, 1.0 / nbn)
    out = np.asarray(product_extension(spec.QhatY, N))
    L1 = np.zeros((1, nun, nxn, nyn, G.shape[1]))
    L1[0, 0] = np.broadcast_to((out[:, None] * (link @ G)[None, :])[None], (nxn, nyn, G.shape[1]))
    laws.append(L1)
    for k in range(1, K):
        G = next_mass(k)
        L = np.zeros((M, nun, nxn, nyn, G.shape[1]))
        for m in range(M):
            u = books.words[k].words[m]
            L[m, u] = np.einsum("xb,by,bn->xyn", QB[:, u, :], QY[:, u, :], G)
        laws.append(L)
    return laws


def _p2p_reference(spec):
    N = spec.N
    return np.asarray(product_extension(spec.pi_X, N)), seq_power(spec.pi_YgX, N)


def exact_induced_divergence(spec: P2PSchemeSpec, codebooks: Optional[P2PCodebooks] = None):
    """Exact divergence of the point-to-point scheme for fixed codebooks.

    Returns a :class:`~seqsynth.codesim.engine.SimReport` with the
    per-block mutual-information and divergence terms, the Markov-chain
    check and the uniformity of the extracted bin.
    """
    books = sample_codebooks(spec) if codebooks is None else codebooks
    pi_in, ref = _p2p_reference(spec)
    laws = p2p_block_laws(spec, books)
    total, recs, _ = engine.run_blocks(pi_in, ref, laws)
    return engine.make_report(
        "exact",
        spec.N,
        spec.K,
        total,
        recs,
        bins=spec.bins,
        typical_fallback=books.used_fallback,
        details={"first_block_reference": spec.N * im.cond_kl_div(
            np.broadcast_to(spec.QhatY, spec.pi_YgX.shape), spec.pi_YgX, spec.pi_X)},
    )


def p2p_joint_law(spec, codebooks):
    """Law of ``(x_1, y_1, ..., x_K, y_K)`` (sequence indices per block)."""
    pi_in, ref = _p2p_reference(spec)
    return engine.run_blocks(pi_in, ref, p2p_block_laws(spec, codebooks), markov=False, uniformity=False)[2]


# ---------------------------------------------------------------------------
# broadcast


@dataclass
class BroadcastSchemeSpec:
    """Broadcast scheme with a superposition codebook.

    Arrays: ``Q_UUh (U, Uh)``, ``Q_BgXUUh (X, U, Uh, B)``,
    ``Q_YgBUUh (B, U, Uh, Y)``, ``Q_ZgBU (B, U, Z)``, ``P_W``, ``P_What``,
    ``pi_X``, ``pi_YZgX (X, Y, Z)``.
    """

    N: int
    K: int
    R: float
    Rhat: float
    Q_UUh: np.ndarray
    Q_BgXUUh: np.ndarray
    Q_YgBUUh: np.ndarray
    Q_ZgBU: np.ndarray
    P_W: np.ndarray
    P_What: np.ndarray
    pi_X: np.ndarray
    pi_YZgX: np.ndarray
    QhatY: Optional[np.ndarray] = None
    QhatZ: Optional[np.ndarray] = None
    eps: float = 0.25
    seed: int = 0

    def __post_init__(self):
        _check_blocks(self.N, self.K)
        self.N, self.K = int(self.N), int(self.K)
        if self.R < 0 or self.Rhat < 0:
            raise ValueError("rates must be nonnegative")
        self.Q_UUh = _arr(self.Q_UUh, axis=None)
        self.Q_BgXUUh = _arr(self.Q_BgXUUh)
        self.Q_YgBUUh = _arr(self.Q_YgBUUh)
        self.Q_ZgBU = _arr(self.Q_ZgBU)
        self.P_W = _arr(self.P_W)
        self.P_What = _arr(self.P_What)
        self.pi_X = _arr(self.pi_X)
        self.pi_YZgX = _arr(self.pi_YZgX, axis=(1, 2))
        nx, nu, nh, nb = self.Q_BgXUUh.shape
        if self.Q_UUh.shape != (nu, nh) or self.Q_YgBUUh.shape[:3] != (nb, nu, nh):
            raise ValueError("alphabet sizes are inconsistent")
        if self.Q_ZgBU.shape[:2] != (nb, nu) or self.pi_YZgX.shape != (nx, self.Q_YgBUUh.shape[3], self.Q_ZgBU.shape[2]):
            raise ValueError("alphabet sizes are inconsistent")
        if self.QhatY is None or self.QhatZ is None:
            qy, qz, val = product_output_law(self.pi_X, self.pi_YZgX)
            if qy is None:
                raise ValueError("no product output law has finite divergence from the target")
            self.QhatY, self.QhatZ = qy, qz
        self.QhatY = _arr(self.QhatY)
        self.QhatZ = _arr(self.QhatZ)

    @property
    def sizes(self):
        nx, nu, nh, nb = self.Q_BgXUUh.shape
        return {
            "X": nx, "U": nu, "Uh": nh, "B": nb,
            "Y": self.Q_YgBUUh.shape[3], "Z": self.Q_ZgBU.shape[2],
            "W": self.P_W.size, "Wh": self.P_What.size,
        }

    @property
    def bins(self):
        return n_bins(self.N, self.R)

    @property
    def bins_hat(self):
        return n_bins(self.N, self.Rhat)


@dataclass
class BroadcastCodebooks:
    binning: list
    index: list
    words: list
    used_fallback: bool = False

    def to_json(self):
        return {
            "binning": [b.to_json() for b in self.binning],
            "index": [b.to_json() for b in self.index],
            "words": [w.to_json() for w in self.words],
            "used_fallback": self.used_fallback,
        }


def build_broadcast_scheme(spec: BroadcastSchemeSpec, seed=None):
    """Sample the two binning tables and the superposition codebook of every block."""
    seed = spec.seed if seed is None else seed
    sz = spec.sizes
    N, M, Mh = spec.N, spec.bins, spec.bins_hat
    check_capacity("binning codebook", M * (sz["B"] * sz["W"]) ** N + Mh * sz["Wh"] ** N)
    law_u, fb = truncated_law(spec.Q_UUh.sum(axis=1), N, spec.eps)
    sat_laws = {}
    binning, index, words = [], [], []
    for k in range(spec.K):
        binning.append(random_binning(block_rng(seed, k, 0), (sz["B"] ** N, sz["W"] ** N), M))
        tab = block_rng(seed, k, 2).integers(0, Mh, size=sz["Wh"] ** N)
        index.append(IndexCodebook(tab, Mh))
        rng = block_rng(seed, k, 1)
        centres = rng.choice(law_u.size, size=M, p=law_u)
        sats = np.zeros((M, Mh), dtype=np.int64)
        for m, u in enumerate(centres):
            if u not in sat_laws:
                sat_laws[u] = truncated_conditional_law(spec.Q_UUh, u, N, spec.eps)
            law, fbu = sat_laws[u]
            fb = fb or fbu
            sats[m] = rng.choice(law.size, size=Mh, p=law)
        words.append(SuperpositionCodebook(centres, sats, fb))
    return BroadcastCodebooks(binning, index, words, fb)


def broadcast_block_laws(spec: BroadcastSchemeSpec, books: BroadcastCodebooks):
    """Block laws ``L_k[m, (u, uh), x, (y, z), m_next]``."""
    N, K, M = spec.N, spec.K, spec.bins
    QB = seq_power(spec.Q_BgXUUh, N)  # (X^N, U^N, Uh^N, B^N)
    QY = seq_power(spec.Q_YgBUUh, N)  # (B^N, U^N, Uh^N, Y^N)
    QZ = seq_power(spec.Q_ZgBU, N)  # (B^N, U^N, Z^N)
    PW = np.asarray(product_extension(spec.P_W, N))
    PWh = np.asarray(product_extension(spec.P_What, N))
    nxn, nun, nhn, nbn = QB.shape
    nyn, nzn = QY.shape[3], QZ.shape[2]
    check_capacity("block law", M * nun * nhn * nxn * nyn * nzn * M * nbn)

    def next_mass(k):
        if k + 1 >= K:
            return np.ones((nbn, 1))
        return books.binning[k + 1].bin_mass(PW)

    laws = []
    G = next_mass(0)
    link = np.full(nbn, 1.0 / nbn)
    out = np.outer(product_extension(spec.QhatY, N), product_extension(spec.QhatZ, N)).ravel()
    L1 = np.zeros((1, nun * nhn, nxn, nyn * nzn, G.shape[1]))
    L1[0, 0] = np.broadcast_to((out[:, None] * (link @ G)[None, :])[None], L1.shape[2:])
    laws.append(L1)
    for k in range(1, K):
        G = next_mass(k)
        L = np.zeros((M, nun * nhn, nxn, nyn * nzn, G.shape[1]))
        p_mh = books.index[k].index_law(PWh)
        for m in range(M):
            u = books.words[k].words[m]
            for mh in np.flatnonzero(p_mh > 0):
                uh = books.words[k].satellites[m, mh]
                blk = np.einsum("xb,by,bz,bn->xyzn", QB[:, u, uh, :], QY[:, u, uh, :], QZ[:, u, :], G)
                L[m, u * nhn + uh] += p_mh[mh] * blk.reshape(nxn, nyn * nzn, -1)
        laws.append(L)
    return laws


def exact_broadcast_divergence(spec: BroadcastSchemeSpec, codebooks: Optional[BroadcastCodebooks] = None):
    """Exact divergence of the broadcast scheme; the (Y, Z) block is the output."""
    books = build_broadcast_scheme(spec) if codebooks is None else codebooks
    N = spec.N
    pi_in = np.asarray(product_extension(spec.pi_X, N))
    ref = seq_power(spec.pi_YZgX, N)
    ref = ref.reshape(ref.shape[0], -1)
    total, recs, _ = engine.run_blocks(pi_in, ref, broadcast_block_laws(spec, books))
    PWh = np.asarray(product_extension(spec.P_What, N))
    index_unif = [
        im.kl_div(b.index_law(PWh), np.full(b.bins, 1.0 / b.bins)) for b in books.index
    ]
    QY = np.broadcast_to(spec.QhatY[:, None], spec.pi_YZgX.shape[1:])
    QZ = np.broadcast_to(spec.QhatZ[None, :], spec.pi_YZgX.shape[1:])
    q = (QY * QZ).ravel()
    first = N * im.cond_kl_div(np.broadcast_to(q, (spec.pi_X.size, q.size)), spec.pi_YZgX.reshape(spec.pi_X.size, -1), spec.pi_X)
    return engine.make_report(
        "exact",
        N,
        spec.K,
        total,
        recs,
        bins=spec.bins,
        typical_fallback=books.used_fallback,
        details={"bins_hat": spec.bins_hat, "index_uniformity": index_unif, "first_block_reference": first},
    )


def broadcast_rate_region(spec: BroadcastSchemeSpec):
    """Shannon rate constraints of the broadcast scheme for ``(R, Rhat)``.

    Returns a dict with the three interval endpoints and whether the
    spec's rates satisfy them (``empty`` when no rate pair exists).
    """
    nx, nu, nh, nb = spec.Q_BgXUUh.shape
    J = np.einsum(
        "uh,x,xuhb,buhy,buz->uhxbyz",
        spec.Q_UUh, spec.pi_X, spec.Q_BgXUUh, spec.Q_YgBUUh, spec.Q_ZgBU,
    )
    I_U = im.mutual_info(J, a=(0,), b=(2, 4, 5))
    I_UUh = im.mutual_info(J, a=(0, 1), b=(2, 4, 5))
    H_B = im.cond_entropy(np.moveaxis(J, 3, -1).reshape(-1, nb), given=0)
    H_W, H_Wh = im.entropy(spec.P_W), im.entropy(spec.P_What)
    upper = H_W + H_B
    empty = not (I_U < upper and I_UUh < H_Wh + upper)
    inside = I_U < spec.R < upper and spec.Rhat < H_Wh and I_UUh < spec.R + spec.Rhat
    return {"R_lower": I_U, "R_upper": upper, "Rhat_upper": H_Wh, "sum_lower": I_UUh, "empty": empty, "inside": inside}


# ---------------------------------------------------------------------------
# interactive


@dataclass
class InteractiveSchemeSpec:
    """Two-way scheme: Alice sees S and sends A, Bob sees X and sends B.

    Arrays: ``Q_U (U,)``, ``Q_AgSU (S, U, A)``, ``Q_BgXU (X, U, B)``,
    ``Q_YgABU (A, B, U, Y)``, ``Q_ZgABU (A, B, U, Z)``, ``P_W``,
    ``pi_SX (S, X)``, ``pi_YZgSX (S, X, Y, Z)``.  The first output block is
    a constant admissible pair ``first_yz`` (default: the admissible pair
    of smallest divergence).
    """

    N: int
    K: int
    R: float
    Q_U: np.ndarray
    Q_AgSU: np.ndarray
    Q_BgXU: np.ndarray
    Q_YgABU: np.ndarray
    Q_ZgABU: np.ndarray
    P_W: np.ndarray
    pi_SX: np.ndarray
    pi_YZgSX: np.ndarray
    first_yz: Optional[tuple] = None
    eps: float = 0.25
    seed: int = 0

    def __post_init__(self):
        _check_blocks(self.N, self.K)
        self.N, self.K = int(self.N), int(self.K)
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        self.Q_U = _arr(self.Q_U)
        self.Q_AgSU = _arr(self.Q_AgSU)
        self.Q_BgXU = _arr(self.Q_BgXU)
        self.Q_YgABU = _arr(self.Q_YgABU)
        self.Q_ZgABU = _arr(self.Q_ZgABU)
        self.P_W = _arr(self.P_W)
        self.pi_SX = _arr(self.pi_SX, axis=None)
        self.pi_YZgSX = _arr(self.pi_YZgSX, axis=(2, 3))
        ns, nu, na = self.Q_AgSU.shape
        nx, _, nb = self.Q_BgXU.shape
        if self.Q_U.size != nu or self.Q_BgXU.shape[1] != nu or self.pi_SX.shape != (ns, nx):
            raise ValueError("alphabet sizes are inconsistent")
        if self.Q_YgABU.shape[:3] != (na, nb, nu) or self.Q_ZgABU.shape[:3] != (na, nb, nu):
            raise ValueError("alphabet sizes are inconsistent")
        ny, nz = self.Q_YgABU.shape[3], self.Q_ZgABU.shape[3]
        if self.pi_YZgSX.shape != (ns, nx, ny, nz):
            raise ValueError("target kernel shape does not match (S, X, Y, Z)")
        if self.first_yz is None:
            try:
                idx, _ = best_constant_output(self.pi_SX, self.pi_YZgSX.reshape(ns * nx, -1))
            except ValueError:
                raise ValueError("no (y, z) pair is admissible for every (s, x)") from None
            self.first_yz = (idx // nz, idx % nz)
        self.first_yz = (int(self.first_yz[0]), int(self.first_yz[1]))

    @property
    def sizes(self):
        ns, nu, na = self.Q_AgSU.shape
        nx, _, nb = self.Q_BgXU.shape
        return {
            "S": ns, "X": nx, "U": nu, "A": na, "B": nb,
            "Y": self.Q_YgABU.shape[3], "Z": self.Q_ZgABU.shape[3], "W": self.P_W.size,
        }

    @property
    def bins(self):
        return n_bins(self.N, self.R)


def sample_interactive_codebooks(spec: InteractiveSchemeSpec, seed=None):
    """Binning tables indexed ``[a-block, b-block, w-block]`` and codeword tables."""
    seed = spec.seed if seed is None else seed
    sz = spec.sizes
    N, M = spec.N, spec.bins
    check_capacity("binning codebook", M * (sz["A"] * sz["B"] * sz["W"]) ** N)
    law, fb = truncated_law(spec.Q_U, N, spec.eps)
    binning, words = [], []
    for k in range(spec.K):
        binning.append(random_binning(block_rng(seed, k, 0), (sz["A"] ** N, sz["B"] ** N, sz["W"] ** N), M))
        words.append(random_words(block_rng(seed, k, 1), law, M, fb))
    return P2PCodebooks(binning, words, fb)


def interactive_block_laws(spec: InteractiveSchemeSpec, books: P2PCodebooks):
    """Block laws with input ``(s-block, x-block)`` and output ``(y-block, z-block)``."""
    N, K, M = spec.N, spec.K, spec.bins
    QA = seq_power(spec.Q_AgSU, N)  # (S^N, U^N, A^N)
    QB = seq_power(spec.Q_BgXU, N)  # (X^N, U^N, B^N)
    QY = seq_power(spec.Q_YgABU, N)  # (A^N, B^N, U^N, Y^N)
    QZ = seq_power(spec.Q_ZgABU, N)
    PW = np.asarray(product_extension(spec.P_W, N))
    nsn, nun, nan_ = QA.shape
    nxn, _, nbn = QB.shape
    nyn, nzn = QY.shape[3], QZ.shape[3]
    check_capacity("block law", M * nun * nsn * nxn * nyn * nzn * M * nan_ * nbn)

    def next_mass(k):
        if k + 1 >= K:
            return np.ones((nan_, nbn, 1))
        return books.binning[k + 1].bin_mass(PW)

    laws = []
    G = next_mass(0)
    link = np.full((nan_, nbn), 1.0 / (nan_ * nbn))
    y0, z0 = spec.first_yz
    sy = sum(y0 * spec.sizes["Y"] ** (N - 1 - t) for t in range(N))
    sz_ = sum(z0 * spec.sizes["Z"] ** (N - 1 - t) for t in range(N))
    out = np.zeros(nyn * nzn)
    out[sy * nzn + sz_] = 1.0
    L1 = np.zeros((1, nun, nsn * nxn, nyn * nzn, G.shape[-1]))
    L1[0, 0] = np.broadcast_to((out[:, None] * np.einsum("ab,abn->n", link, G)[None, :])[None], L1.shape[2:])
    laws.append(L1)
    for k in range(1, K):
        G = next_mass(k)
        L = np.zeros((M, nun, nsn * nxn, nyn * nzn, G.shape[-1]))
        for m in range(M):
            u = books.words[k].words[m]
            blk = np.einsum("sa,xb,aby,abz,abn->sxyzn", QA[:, u, :], QB[:, u, :], QY[:, :, u, :], QZ[:, :, u, :], G)
            L[m, u] = blk.reshape(nsn * nxn, nyn * nzn, -1)
        laws.append(L)
    return laws


def _interactive_reference(spec):
    N = spec.N
    pi_in = seq_power(spec.pi_SX, N).ravel()
    ref = seq_power(spec.pi_YZgSX, N)
    return pi_in, ref.reshape(pi_in.size, -1)


def exact_interactive_divergence(spec: InteractiveSchemeSpec, codebooks: Optional[P2PCodebooks] = None, check_reduction=True):
    """Exact divergence of the interactive scheme.

    With ``check_reduction`` the point-to-point scheme obtained by merging
    the two senders and the two receivers is evaluated as well, and the
    sup-norm distance between the two joint laws is stored in
    ``details["reduction_gap"]``.
    """
    books = sample_interactive_codebooks(spec) if codebooks is None else codebooks
    pi_in, ref = _interactive_reference(spec)
    total, recs, joint = engine.run_blocks(pi_in, ref, interactive_block_laws(spec, books))
    ns, nx = spec.pi_SX.shape
    y0, z0 = spec.first_yz
    first = spec.N * -float(np.sum(spec.pi_SX * np.log(spec.pi_YZgSX[:, :, y0, z0])))
    details = {"first_yz": list(spec.first_yz), "first_block_reference": first}
    if check_reduction:
        details["reduction_gap"] = interactive_reduction_gap(spec, books, joint)
    return engine.make_report("exact", spec.N, spec.K, total, recs, bins=spec.bins, typical_fallback=books.used_fallback, details=details)


def interactive_joint_law(spec, codebooks):
    pi_in, ref = _interactive_reference(spec)
    return engine.run_blocks(pi_in, ref, interactive_block_laws(spec, codebooks), markov=False, uniformity=False)[2]


def _pair_to_composite(n1, n2, N):
    """perm[c] = i1 * n2^N + i2 for the composite sequence c over pairs (n1 x n2)."""
    seqs = sequences(n1 * n2, N)
    first, second = np.divmod(seqs, n2)
    w1 = n1 ** np.arange(N - 1, -1, -1)
    w2 = n2 ** np.arange(N - 1, -1, -1)
    return (first @ w1) * n2**N + second @ w2


def reduce_interactive_to_p2p(spec: InteractiveSchemeSpec, codebooks: Optional[P2PCodebooks] = None):
    """Point-to-point spec and codebooks that synthesize the same law.

    The merged sender sees ``(s, x)`` and emits ``(a, b)`` through
    ``Q_{A|SU} Q_{B|XU}``; the merged receiver emits ``(y, z)`` through
    ``Q_{Y|ABU} Q_{Z|ABU}``.  Binning tables are re-indexed from
    ``(a-block, b-block)`` to blocks of ``(a, b)`` pairs, and the first
    output block is the same constant pair.
    """
    books = sample_interactive_codebooks(spec) if codebooks is None else codebooks
    sz = spec.sizes
    ns, nx, nu, na, nb, ny, nz = (sz[k] for k in ("S", "X", "U", "A", "B", "Y", "Z"))
    Q_B = np.einsum("sua,xub->sxuab", spec.Q_AgSU, spec.Q_BgXU).reshape(ns * nx, nu, na * nb)
    Q_Y = np.einsum("abuy,abuz->abuyz", spec.Q_YgABU, spec.Q_ZgABU).reshape(na * nb, nu, ny * nz)
    first = np.zeros(ny * nz)
    first[spec.first_yz[0] * nz + spec.first_yz[1]] = 1.0
    p2p = P2PSchemeSpec(
        N=spec.N, K=spec.K, R=spec.R, Q_U=spec.Q_U, Q_BgXU=Q_B, Q_YgBU=Q_Y, P_W=spec.P_W,
        pi_X=spec.pi_SX.ravel(), pi_YgX=spec.pi_YZgSX.reshape(ns * nx, ny * nz),
        QhatY=first, eps=spec.eps, seed=spec.seed,
    )
    perm = _pair_to_composite(na, nb, spec.N)
    nan_, nbn = na**spec.N, nb**spec.N
    binning = []
    for b in books.binning:
        flat = b.table.reshape(nan_ * nbn, -1)
        binning.append(BinningCodebook(flat[perm], b.bins))
    return p2p, P2PCodebooks(binning, list(books.words), books.used_fallback)


def interactive_reduction_gap(spec, codebooks, joint=None):
    """Sup-norm distance between the interactive law and the reduced point-to-point law."""
    if joint is None:
        joint = interactive_joint_law(spec, codebooks)
    p2p, pbooks = reduce_interactive_to_p2p(spec, codebooks)
    red = p2p_joint_law(p2p, pbooks)
    sz = spec.sizes
    perm_in = _pair_to_composite(sz["S"], sz["X"], spec.N)
    perm_out = _pair_to_composite(sz["Y"], sz["Z"], spec.N)
    n_in, n_out = perm_in.size, perm_out.size
    J = joint.reshape((n_in, n_out) * spec.K)
    idx = [perm_in if i % 2 == 0 else perm_out for i in range(2 * spec.K)]
    J = J[np.ix_(*idx)]
    return float(np.max(np.abs(J.ravel() - red)))
