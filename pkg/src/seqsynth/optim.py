"""Penalty-augmented block projected gradient over products of stochastic factors.

A :class:`FactorModel` describes a joint law over named finite axes as a
product of conditional factors ``P(out | parents)``, some fixed and some
free.  The objective and constraints are linear combinations of marginal
Shannon entropies plus one linear term ``E[L]``; this covers every
single-letter expression in :mod:`seqsynth.bounds`.

Free factors are stored in *natural* layout ``(R, *parents, *outputs)``
where ``R`` is the restart batch.  Each restart carries its own step size
and is frozen once converged, so the trajectory of restart ``r`` does not
depend on which other restarts share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .probkit import check_capacity

# cells materialized at once when batching restarts
_BATCH_CELLS = 1_000_000
_LOG_FLOOR = 1e-300


def project_simplex(v):
    """Euclidean projection of each row of ``v`` (last axis) onto the simplex.

    Sort-based algorithm; exact up to rounding.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    w = np.maximum(v - theta, 0.0)
    # renormalize away rounding so rows sum to one exactly-ish
    return w / w.sum(axis=-1, keepdims=True)


@dataclass
class Factor:
    name: str
    out: tuple
    par: tuple = ()
    fixed: np.ndarray | None = None  # natural layout without batch axis


@dataclass
class FactorModel:
    """Joint law, objective and constraints over named axes.

    ``obj_terms`` and each constraint's ``terms`` are lists of
    ``(coefficient, axes)`` pairs meaning ``coefficient * H(axes)``.
    ``linear`` is ``(axes, L)`` meaning ``E[L(axes)]`` with ``L`` in the
    canonical order of ``axes``; infinite entries are allowed.
    A constraint ``(terms, const)`` reads ``sum c H + const <= 0``.
    """

    axes: tuple
    sizes: dict
    factors: list
    obj_terms: list
    linear: tuple | None = None
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        self.axes = tuple(self.axes)
        self.shape = tuple(int(self.sizes[a]) for a in self.axes)
        self.cells = int(np.prod(self.shape))
        check_capacity("optimizer joint tensor", self.cells)
        self._layout = {}
        for f in self.factors:
            names = tuple(f.par) + tuple(f.out)
            pos = [self.axes.index(n) for n in names]
            perm = tuple(int(i) for i in np.argsort(pos))
            bshape = tuple(self.sizes[a] if a in names else 1 for a in self.axes)
            self._layout[f.name] = (names, perm, bshape)
        subsets = set()
        for _, S in self.obj_terms:
            subsets.add(self._canon(S))
        for terms, _ in self.constraints:
            for _, S in terms:
                subsets.add(self._canon(S))
        if self.linear is not None:
            lin_axes = self._canon(self.linear[0])
            L = np.asarray(self.linear[1], dtype=float)
            L = np.transpose(L, [tuple(self.linear[0]).index(a) for a in lin_axes])
            self._lin_axes = lin_axes
            self._lin = L.reshape(tuple(self.sizes[a] if a in lin_axes else 1 for a in self.axes))
            subsets.add(lin_axes)
        else:
            self._lin_axes = None
            self._lin = None
        self._subsets = sorted(subsets, key=lambda S: (len(S), S))

    # -- layout helpers --------------------------------------------------
    def _canon(self, S):
        return tuple(a for a in self.axes if a in set(S))

    def free_factors(self):
        return [f for f in self.factors if f.fixed is None]

    def natural_shape(self, f):
        return tuple(self.sizes[a] for a in tuple(f.par) + tuple(f.out))

    def to_broadcast(self, f, arr):
        """(R, natural...) -> (R, broadcast over canonical axes)."""
        names, perm, bshape = self._layout[f.name]
        R = arr.shape[0]
        return np.transpose(arr, (0,) + tuple(p + 1 for p in perm)).reshape((R,) + bshape)

    def to_natural(self, f, barr):
        names, perm, bshape = self._layout[f.name]
        R = barr.shape[0]
        sizes_canon = [self.sizes[names[p]] for p in perm]
        arr = barr.reshape([R] + sizes_canon)
        inv = np.argsort(perm)
        return np.transpose(arr, (0,) + tuple(int(i) + 1 for i in inv))

    def _marginals(self, J):
        """All needed marginals, each summed from its smallest computed superset."""
        full = tuple(self.axes)
        done = {full: J}
        for S in sorted(self._subsets, key=lambda S: -len(S)):
            if S in done:
                continue
            src = min((T for T in done if set(S) <= set(T)), key=len)
            drop = tuple(i + 1 for i, a in enumerate(self.axes) if a in src and a not in S)
            done[S] = done[src].sum(axis=drop, keepdims=True)
        return done

    def _sum_to(self, arr, keep_axes):
        drop = tuple(i + 1 for i, a in enumerate(self.axes) if a not in keep_axes)
        return arr.sum(axis=drop, keepdims=True)

    # -- evaluation ------------------------------------------------------
    def _broadcasts(self, state, R):
        out = {}
        for f in self.factors:
            if f.fixed is None:
                out[f.name] = self.to_broadcast(f, state[f.name])
            else:
                fixed = np.broadcast_to(f.fixed, (1,) + self.natural_shape(f))
                out[f.name] = self.to_broadcast(f, fixed)
        return out

    def _joint(self, bc, skip=None):
        J = None
        for name, arr in bc.items():
            if name == skip:
                continue
            J = arr if J is None else J * arr
        return J

    def measures(self, state, lin_clip=None):
        """Objective and constraint values per restart (exact entropies)."""
        R = next(iter(state.values())).shape[0]
        bc = self._broadcasts(state, R)
        J = np.broadcast_to(self._joint(bc), (R,) + self.shape)
        marg = self._marginals(J)
        H = {S: _entropy_batch(m) for S, m in marg.items()}
        obj = np.zeros(R)
        for c, S in self.obj_terms:
            obj = obj + c * H[self._canon(S)]
        if self._lin is not None:
            obj = obj + _expect(marg[self._lin_axes], self._lin, lin_clip)
        cons = []
        for terms, const in self.constraints:
            g = np.full(R, float(const))
            for c, S in terms:
                g = g + c * H[self._canon(S)]
            cons.append(g)
        return obj, np.array(cons).reshape(len(cons), R), (bc, J, marg)

    def penalized(self, state, rho, obj_weight, lin_clip, tight, power=2):
        obj, cons, cache = self.measures(state, lin_clip)
        viol = np.maximum(cons + tight, 0.0)
        return obj_weight * obj + rho * (viol**power).sum(axis=0), obj, cons, cache

    def gradients(self, state, rho, obj_weight, lin_clip, tight, cache, cons, power=2, only=None):
        bc, J, marg = cache
        R = J.shape[0]
        viol = np.maximum(cons + tight, 0.0)  # (C, R)
        dviol = 2 * viol if power == 2 else (viol > 0).astype(float)
        weights = {}
        for c, S in self.obj_terms:
            S = self._canon(S)
            weights[S] = weights.get(S, 0.0) + obj_weight * c
        for j, (terms, _) in enumerate(self.constraints):
            for c, S in terms:
                S = self._canon(S)
                weights[S] = weights.get(S, 0.0) + rho * dviol[j] * c
        G = np.zeros((R,) + self.shape)
        for S, w in weights.items():
            w = np.broadcast_to(np.asarray(w, dtype=float), (R,)).reshape((R,) + (1,) * len(self.shape))
            if not np.any(w):
                continue
            G = G - w * np.log(np.maximum(marg[S], _LOG_FLOOR))
        if self._lin is not None and obj_weight:
            G = G + obj_weight * np.minimum(self._lin, lin_clip)
        grads, masses = {}, {}
        for f in self.free_factors():
            if only is not None and f.name != only:
                continue
            rest = np.broadcast_to(self._joint(bc, skip=f.name), (R,) + self.shape)
            names = self._layout[f.name][0]
            g = self._sum_to(G * rest, names)
            m = self._sum_to(rest, names)
            grads[f.name] = self.to_natural(f, g)
            mass = self.to_natural(f, m)
            out_axes = tuple(range(mass.ndim - len(f.out), mass.ndim))
            masses[f.name] = mass.mean(axis=out_axes, keepdims=True)
        return grads, masses


def _entropy_batch(m):
    R = m.shape[0]
    flat = m.reshape(R, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(flat > 0, flat * np.log(np.where(flat > 0, flat, 1.0)), 0.0)
    return -terms.sum(axis=1)


def _expect(marg, L, clip):
    if clip is not None:
        L = np.minimum(L, clip)
    R = marg.shape[0]
    with np.errstate(invalid="ignore"):
        prod = np.where(marg > 0, marg * L, 0.0)
    return prod.reshape(R, -1).sum(axis=1)


@dataclass
class RunSettings:
    penalties: tuple = (1.0, 10.0, 100.0, 1e3, 1e4, 1e5)
    max_iters: int = 60
    tol: float = 1e-10
    window: int = 10
    lin_clip: float = 60.0
    tight: float = 1e-8
    polish_iters: int = 400


def random_state(model, R, seed, offset=0):
    """Dirichlet(1) rows for every free factor; restart r uses rng([seed, offset + r])."""
    state = {f.name: np.empty((R,) + model.natural_shape(f)) for f in model.free_factors()}
    for r in range(R):
        rng = np.random.default_rng([int(seed), int(offset + r)])
        for f in model.free_factors():
            shp = model.natural_shape(f)
            n_out = int(np.prod([model.sizes[a] for a in f.out]))
            n_rows = int(np.prod(shp)) // n_out
            state[f.name][r] = rng.dirichlet(np.ones(n_out), size=n_rows).reshape(shp)
    return state


def _project_factor(model, f, arr):
    R = arr.shape[0]
    n_out = int(np.prod([model.sizes[a] for a in f.out]))
    return project_simplex(arr.reshape(-1, n_out)).reshape(arr.shape)


def _step_factor(model, f, state, grad, mass, eta):
    scale = np.where(mass > 1e-300, 1.0 / np.maximum(mass, 1e-300), 0.0)
    direction = grad * scale
    eta_b = eta.reshape((-1,) + (1,) * (direction.ndim - 1))
    return _project_factor(model, f, state[f.name] - eta_b * direction)


def optimize(model, state, settings=None, obj_weight=1.0):
    """Run the penalty schedule then a feasibility polish on a restart batch.

    Restarts are processed in chunks that keep the working tensors small;
    the result for each restart does not depend on the chunking.
    Returns the final state (same layout as ``state``).
    """
    settings = settings or RunSettings()
    R = next(iter(state.values())).shape[0]
    chunk = max(1, _BATCH_CELLS // max(model.cells, 1))
    out = {k: np.empty_like(v) for k, v in state.items()}
    for lo in range(0, R, chunk):
        sub = {k: v[lo : lo + chunk].copy() for k, v in state.items()}
        sub = _optimize_batch(model, sub, settings, obj_weight)
        for k in out:
            out[k][lo : lo + chunk] = sub[k]
    return out


def _optimize_batch(model, state, settings, obj_weight):
    R = next(iter(state.values())).shape[0]
    free = model.free_factors()
    if not free:
        return state
    has_cons = bool(model.constraints)
    schedule = settings.penalties if has_cons else (0.0,)
    eta = {f.name: np.ones(R) for f in free}
    for rho in schedule:
        state = _descend(model, state, free, eta, rho, obj_weight, settings, settings.max_iters)
    if has_cons:
        state = _polish(model, state, free, settings)
    return state


def _merge(model, state, ok, new, cur):
    """Combine two evaluations restart-by-restart (``ok`` picks ``new``)."""
    R = ok.size
    pen = np.where(ok, new[0], cur[0])
    obj = np.where(ok, new[1], cur[1])
    cons = np.where(ok[None, :], new[2], cur[2])
    sel = ok.reshape((R,) + (1,) * len(model.shape))
    J = np.where(sel, new[3][1], cur[3][1])
    marg = {S: np.where(sel, m, cur[3][2][S]) for S, m in new[3][2].items()}
    bc = model._broadcasts(state, R)
    return pen, obj, cons, (bc, J, marg)


def _descend(model, state, free, eta, rho, obj_weight, st, iters, polish=False):
    R = next(iter(state.values())).shape[0]
    active = np.ones(R, dtype=bool)
    hist = []
    power = 1 if polish else 2
    args = (rho, obj_weight, st.lin_clip, st.tight, power)
    cur = model.penalized(state, *args)
    for _ in range(iters):
        if not active.any():
            break
        for f in free:
            pen, obj, cons, cache = cur
            grads, masses = model.gradients(state, rho, obj_weight, st.lin_clip, st.tight, cache, cons, power, only=f.name)
            trial = _step_factor(model, f, state, grads[f.name], masses[f.name], eta[f.name])
            cand = dict(state)
            cand[f.name] = trial
            new = model.penalized(cand, *args)
            pen_new = new[0]
            decrease = ((state[f.name] - trial) * grads[f.name]).reshape(R, -1).sum(axis=1)
            ok = active & np.isfinite(pen_new) & (pen_new <= pen - 1e-4 * np.maximum(decrease, 0.0))
            sel = ok.reshape((-1,) + (1,) * (trial.ndim - 1))
            state[f.name] = np.where(sel, trial, state[f.name])
            cur = _merge(model, state, ok, new, cur)
            if polish:
                active &= ~np.all(cur[2] + st.tight <= 0, axis=0)
            eta[f.name] = np.where(
                ok,
                np.minimum(eta[f.name] * 1.5, 1e6),
                np.where(active, np.maximum(eta[f.name] * 0.5, 1e-14), eta[f.name]),
            )
        pen, obj, cons, _ = cur
        if polish:
            active &= ~np.all(cons + st.tight <= 0, axis=0)
            continue
        hist.append(pen)
        if len(hist) > st.window:
            old = hist[-1 - st.window]
            conv = np.abs(old - pen) <= st.tol * (1.0 + np.abs(pen))
            active &= ~conv
    return state


def _polish(model, state, free, st):
    """Reduce constraint violation only, until each restart is strictly feasible."""
    R = next(iter(state.values())).shape[0]
    eta = {f.name: np.full(R, 1e-7) for f in free}
    return _descend(model, state, free, eta, 1.0, 0.0, st, st.polish_iters, polish=True)
