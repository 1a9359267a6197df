"""Finite-alphabet probability substrate.

Distributions, stochastic kernels and dense joint tensors, plus the
product/typicality helpers used by the coding-scheme simulator.  Symbols
are always the integers ``0..size-1``; sequences of length ``n`` are
indexed lexicographically with the first symbol most significant, which
is the order produced by ``np.kron`` and ``np.ravel_multi_index``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: Largest number of dense cells any routine will materialize.
CAPACITY = 10**7
#: Input sums may deviate from one by this much before being rejected.
INPUT_TOL = 1e-9


class CapacityError(ValueError):
    """Raised when an object would exceed :data:`CAPACITY` cells."""

    def __init__(self, what, cells, limit=CAPACITY):
        self.what = what
        self.cells = cells
        self.limit = limit
        super().__init__(f"{what}: {cells} cells exceeds capacity {limit}")


class AlphabetMismatch(ValueError):
    pass


class EmptyTypicalSet(ValueError):
    pass


def check_capacity(what, cells, limit=CAPACITY):
    if cells > limit:
        raise CapacityError(what, int(cells), limit)


def _normalized(arr, axis=None, what="pmf"):
    arr = np.array(arr, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise ValueError(f"{what} has non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{what} has negative mass")
    total = arr.sum(axis=axis, keepdims=axis is not None)
    if np.any(np.abs(total - 1.0) > INPUT_TOL):
        raise ValueError(f"{what} does not sum to one (got {np.ravel(total)[:4]})")
    arr = arr / total
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Alphabet:
    size: int
    label: str = ""

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValueError("alphabet size must be >= 1")


class Dist:
    """Probability mass function over ``Alphabet(size)``.

    Immutable; ``np.asarray(d)`` gives the (read-only) pmf vector.
    """

    __slots__ = ("alphabet", "pmf")

    def __init__(self, pmf, label=""):
        pmf = _normalized(np.ravel(pmf))
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "alphabet", Alphabet(pmf.size, label))

    def __setattr__(self, name, value):
        raise AttributeError("Dist is immutable")

    def __array__(self, dtype=None, copy=None):
        return self.pmf if dtype is None else self.pmf.astype(dtype)

    def __len__(self):
        return self.pmf.size

    def __repr__(self):
        return f"Dist({np.array2string(self.pmf, precision=4)}, label={self.alphabet.label!r})"

    @property
    def size(self):
        return self.pmf.size

    def support(self):
        return np.flatnonzero(self.pmf > 0)

    @classmethod
    def uniform(cls, size, label=""):
        return cls(np.full(size, 1.0 / size), label)

    @classmethod
    def point(cls, size, index, label=""):
        pmf = np.zeros(size)
        pmf[index] = 1.0
        return cls(pmf, label)

    def to_json(self):
        return {"alphabet": self.size, "pmf": self.pmf.tolist()}

    @classmethod
    def from_json(cls, obj, label=""):
        if isinstance(obj, str):
            obj = json.loads(obj)
        pmf = obj["pmf"]
        if "alphabet" in obj and int(obj["alphabet"]) != len(pmf):
            raise AlphabetMismatch(f"alphabet {obj['alphabet']} but pmf has {len(pmf)} entries")
        return cls(pmf, label)


class JointDist:
    """Dense pmf tensor; one tensor axis per component alphabet."""

    __slots__ = ("pmf", "labels")

    def __init__(self, pmf, labels=None):
        pmf = _normalized(pmf)
        if labels is None:
            labels = tuple(f"X{i}" for i in range(pmf.ndim))
        labels = tuple(labels)
        if len(labels) != pmf.ndim:
            raise ValueError("one label per tensor axis required")
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "labels", labels)

    def __setattr__(self, name, value):
        raise AttributeError("JointDist is immutable")

    def __array__(self, dtype=None, copy=None):
        return self.pmf if dtype is None else self.pmf.astype(dtype)

    def __repr__(self):
        return f"JointDist(shape={self.pmf.shape}, labels={self.labels})"

    @property
    def shape(self):
        return self.pmf.shape

    def axis(self, label_or_index):
        if isinstance(label_or_index, str):
            return self.labels.index(label_or_index)
        return int(label_or_index)


class Kernel:
    """Conditional pmf ``K(y | x_1, ..., x_k)``.

    ``rows`` has shape ``(*input_sizes, output_size)``.  ``defined`` marks
    which input tuples carry a valid row; undefined rows (produced by
    conditioning on a zero-mass event) hold zeros and must never receive
    positive weight.
    """

    __slots__ = ("rows", "defined", "input_labels", "output_label")

    def __init__(self, rows, defined=None, input_labels=None, output_label="Y"):
        rows = np.array(rows, dtype=float)
        if rows.ndim < 2:
            raise ValueError("kernel rows need at least 2 dimensions")
        in_shape = rows.shape[:-1]
        if defined is None:
            defined = np.ones(in_shape, dtype=bool)
        defined = np.array(defined, dtype=bool).reshape(in_shape)
        if np.any(rows < 0) or np.any(~np.isfinite(rows)):
            raise ValueError("kernel has negative or non-finite mass")
        sums = rows.sum(axis=-1)
        if np.any(np.abs(sums[defined] - 1.0) > INPUT_TOL):
            raise ValueError("kernel rows must sum to one")
        rows = np.where(defined[..., None], rows / np.where(sums > 0, sums, 1.0)[..., None], 0.0)
        rows.flags.writeable = False
        defined.flags.writeable = False
        if input_labels is None:
            input_labels = tuple(f"X{i}" for i in range(len(in_shape)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "defined", defined)
        object.__setattr__(self, "input_labels", tuple(input_labels))
        object.__setattr__(self, "output_label", output_label)

    def __setattr__(self, name, value):
        raise AttributeError("Kernel is immutable")

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def __repr__(self):
        return f"Kernel(inputs={self.input_sizes}, output={self.output_size})"

    @property
    def input_sizes(self):
        return self.rows.shape[:-1]

    @property
    def output_size(self):
        return self.rows.shape[-1]

    def row(self, *x):
        if not self.defined[x]:
            raise ValueError(f"row {x} is undefined")
        return Dist(self.rows[x], self.output_label)

    def to_json(self):
        return {"rows": self.rows.tolist()}

    @classmethod
    def from_json(cls, obj, output_label="Y"):
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["rows"], output_label=output_label)


def as_pmf(p):
    return np.asarray(p, dtype=float)


def product_extension(P, n):
    """n-fold i.i.d. extension; sequence index order is lexicographic."""
    p = as_pmf(P)
    if n < 1:
        raise ValueError("n must be positive")
    check_capacity("product_extension", p.size**n)
    out = np.ones(1)
    for _ in range(n):
        out = np.kron(out, p)
    label = getattr(getattr(P, "alphabet", None), "label", "")
    return Dist(out, f"{label}^{n}" if label else "")


def kernel_power(K, n):
    """n-fold memoryless extension of a single-input kernel (rows indexed by x^n)."""
    rows = np.asarray(K, dtype=float)
    if rows.ndim != 2:
        raise ValueError("kernel_power expects a single-input kernel")
    check_capacity("kernel_power", rows.size**n)
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(out, rows)
    return out


def compose(P, K):
    """Joint ``J(x, y) = P(x) K(y|x)``."""
    p = as_pmf(P)
    rows = np.asarray(K, dtype=float)
    if rows.shape[:-1] != p.shape:
        raise AlphabetMismatch(f"kernel inputs {rows.shape[:-1]} vs distribution {p.shape}")
    if isinstance(K, Kernel) and np.any((p > 0) & ~K.defined):
        raise ValueError("kernel row undefined on the support of P")
    labels = None
    if isinstance(P, JointDist):
        labels = P.labels + ((K.output_label,) if isinstance(K, Kernel) else ("Y",))
    elif isinstance(P, Dist) and isinstance(K, Kernel):
        labels = (P.alphabet.label or "X", K.output_label)
    return JointDist(p[..., None] * rows, labels)


def _axes(J, idx):
    if isinstance(idx, (int, str)):
        idx = (idx,)
    if isinstance(J, JointDist):
        return tuple(sorted({J.axis(i) for i in idx}))
    return tuple(sorted({int(i) for i in idx}))


def marginal(J, keep):
    """Sum out every axis not in ``keep``; Dist for one kept axis."""
    pmf = np.asarray(J, dtype=float)
    keep = _axes(J, keep)
    if not keep:
        raise ValueError("keep must be nonempty")
    drop = tuple(a for a in range(pmf.ndim) if a not in keep)
    out = pmf.sum(axis=drop)
    labels = J.labels if isinstance(J, JointDist) else tuple(f"X{i}" for i in range(pmf.ndim))
    kept_labels = tuple(labels[a] for a in keep)
    if len(keep) == 1:
        return Dist(out, kept_labels[0])
    return JointDist(out, kept_labels)


def condition(J, given):
    """Kernel of the remaining axes (flattened) given the ``given`` axes."""
    pmf = np.asarray(J, dtype=float)
    given = _axes(J, given)
    rest = tuple(a for a in range(pmf.ndim) if a not in given)
    if not rest:
        raise ValueError("nothing left to condition")
    moved = np.moveaxis(pmf, given + rest, tuple(range(pmf.ndim)))
    g_shape = moved.shape[: len(given)]
    flat = moved.reshape(g_shape + (-1,))
    mass = flat.sum(axis=-1)
    defined = mass > 0
    rows = np.where(defined[..., None], flat / np.where(defined, mass, 1.0)[..., None], 0.0)
    labels = J.labels if isinstance(J, JointDist) else tuple(f"X{i}" for i in range(pmf.ndim))
    return Kernel(
        rows,
        defined,
        input_labels=tuple(labels[a] for a in given),
        output_label="".join(labels[a] for a in rest),
    )


# --- typicality -----------------------------------------------------------


def sequences(size, n):
    """All length-n sequences over ``range(size)`` in lexicographic order."""
    check_capacity("sequence enumeration", size**n * n)
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((size,) * n).reshape(n, -1).T
    return np.ascontiguousarray(grids, dtype=np.int64)


def empirical_type(seq, size):
    seq = np.asarray(seq, dtype=np.int64)
    counts = np.apply_along_axis(np.bincount, -1, seq.reshape(-1, seq.shape[-1]), minlength=size)
    return (counts / seq.shape[-1]).reshape(seq.shape[:-1] + (size,))


def max_relative_deviation(types, q):
    """max_a |T(a) - Q(a)| / Q(a); infinite if T puts mass where Q has none."""
    q = as_pmf(q)
    types = np.asarray(types, dtype=float)
    dev = np.abs(types - q)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(q > 0, dev / np.where(q > 0, q, 1.0), np.where(dev > 0, np.inf, 0.0))
    return rel.max(axis=-1)


def is_typical(seq, Q, eps):
    """Robust typicality: |T(a) - Q(a)| <= eps Q(a) for every symbol a."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = as_pmf(Q)
    t = empirical_type(np.asarray(seq), q.size)
    return bool(max_relative_deviation(t, q) <= eps + 1e-12)


class TypicalSet:
    """Robust-typical set of length-N sequences for ``Q``."""

    def __init__(self, Q, N, eps):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.q = as_pmf(Q)
        self.N = int(N)
        self.eps = float(eps)

    def __contains__(self, seq):
        seq = np.asarray(seq)
        if seq.shape != (self.N,):
            return False
        return is_typical(seq, self.q, self.eps)

    def deviations(self):
        seqs = sequences(self.q.size, self.N)
        return max_relative_deviation(empirical_type(seqs, self.q.size), self.q)

    def mask(self):
        """Boolean membership over all |alphabet|^N sequences (lex order)."""
        return self.deviations() <= self.eps + 1e-12

    def sequences(self):
        return sequences(self.q.size, self.N)[self.mask()]

    def probability(self):
        """Q^N(typical set)."""
        return float(np.asarray(product_extension(self.q, self.N))[self.mask()].sum())


def typical_set(Q, N, eps):
    return TypicalSet(Q, N, eps)


def typical_mask(Q, N, eps, fallback=False):
    """Membership mask and whether the closest-type fallback was used.

    With ``fallback`` an empty typical set is replaced by the set of
    sequences whose type has minimal max-relative deviation from Q.
    """
    ts = TypicalSet(Q, N, eps)
    dev = ts.deviations()
    mask = dev <= eps + 1e-12
    if mask.any():
        return mask, False
    if not fallback:
        raise EmptyTypicalSet(f"no {eps}-typical sequences of length {N}")
    best = dev.min()
    if not np.isfinite(best):
        raise EmptyTypicalSet("Q has no sequences of finite deviation")
    return dev <= best + 1e-12, True


def truncated_typical_dist(Q, N, eps, fallback=False):
    """Q^N restricted to the typical set and renormalized."""
    mask, _ = typical_mask(Q, N, eps, fallback=fallback)
    base = np.asarray(product_extension(Q, N))
    trunc = np.where(mask, base, 0.0)
    total = trunc.sum()
    if total <= 0:
        raise EmptyTypicalSet("typical set has zero probability")
    return Dist(trunc / total)


def conditional_typical_mask(Q_joint, u_seq, eps, fallback=False):
    """Sequences v^N jointly typical with a fixed u^N under Q_UV.

    Returns (mask over |V|^N sequences, used_fallback).
    """
    q = np.asarray(Q_joint, dtype=float)
    nu, nv = q.shape
    u_seq = np.asarray(u_seq, dtype=np.int64)
    N = u_seq.size
    vs = sequences(nv, N)
    pair = u_seq[None, :] * nv + vs
    dev = max_relative_deviation(empirical_type(pair, nu * nv), q.ravel())
    mask = dev <= eps + 1e-12
    if mask.any():
        return mask, False
    if not fallback:
        raise EmptyTypicalSet("no jointly typical continuation")
    best = dev.min()
    if not np.isfinite(best):
        raise EmptyTypicalSet("u sequence outside support of Q_U")
    return dev <= best + 1e-12, True


# --- misc -----------------------------------------------------------------


def random_dist(rng, size, alpha=1.0):
    return rng.dirichlet(np.full(size, alpha))


def random_kernel(rng, in_shape, out_size, alpha=1.0):
    in_shape = tuple(np.atleast_1d(in_shape))
    return rng.dirichlet(np.full(out_size, alpha), size=in_shape)


def seq_index(seq, size):
    """Lexicographic index of a sequence (first symbol most significant)."""
    idx = 0
    for a in seq:
        idx = idx * size + int(a)
    return idx


def index_seq(idx, size, n):
    out = []
    for _ in range(n):
        idx, r = divmod(idx, size)
        out.append(r)
    return tuple(reversed(out))


def all_tuples(sizes: Sequence[int]) -> Iterable[tuple]:
    return itertools.product(*(range(s) for s in sizes))
