"""Single-letter divergence bounds for sequential channel synthesis.

Every bound here is a minimum of a conditional KL divergence over
auxiliary distributions subject to entropy constraints.  They are all
solved by :mod:`seqsynth.optim` (multi-start penalty method), and every
reported value is *certified*: the returned argmin is re-evaluated with
the exact routines of :mod:`seqsynth.infomeasures`, and only points whose
constraint slack is at least ``-settings.slack_tol`` are accepted.  A
returned value is therefore an upper bound on the true minimum; the
optimizer makes no global-optimality claim.

Problems covered

* point-to-point ``psi(t)``: channel ``X -> B -> Y`` with auxiliary
  ``(U, V)`` and constraint ``H(U|V) <= H(BU|XYV) + t``;
  ``delta_p2p = psi(H(W))``;
* the symbol-by-symbol bound ``delta_symbolwise``;
* the broadcast lower/upper bounds (``delta_broadcast``);
* the interactive bound with two encoders (``delta_interactive``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import infomeasures as im
from .optim import Factor, FactorModel, RunSettings, optimize, random_state

# ---------------------------------------------------------------------------
# targets, shapes, settings


def _pmf(p):
    arr = np.asarray(p, dtype=float)
    return arr / arr.sum()


def _rows(k):
    arr = np.asarray(k, dtype=float)
    return arr / arr.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class P2PTarget:
    """Target channel ``pi(y|x)`` with input law ``pi(x)``.

    ``H_W`` is the entropy (nats) of the common randomness per symbol and
    ``B_size`` the size of the relay alphabet.
    """

    pi_X: np.ndarray
    pi_YgX: np.ndarray
    B_size: int = 2
    H_W: float = 0.0
    W_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "pi_X", _pmf(self.pi_X))
        object.__setattr__(self, "pi_YgX", _rows(self.pi_YgX))
        if self.pi_YgX.shape[0] != self.pi_X.size:
            raise ValueError("pi_YgX must have one row per input symbol")
        if int(self.B_size) < 1:
            raise ValueError("B_size must be positive")
        if self.H_W < 0:
            raise ValueError("H_W must be nonnegative")
        if self.W_size is not None and self.H_W > math.log(self.W_size) + 1e-12:
            raise ValueError("H_W exceeds log of the declared common-randomness alphabet")

    @property
    def X_size(self):
        return self.pi_X.size

    @property
    def Y_size(self):
        return self.pi_YgX.shape[1]

    def with_H_W(self, H_W):
        return replace(self, H_W=float(H_W), W_size=None)


@dataclass(frozen=True)
class BroadcastTarget:
    """Target ``pi(y, z | x)`` stored as an ``(X, Y, Z)`` array."""

    pi_X: np.ndarray
    pi_YZgX: np.ndarray
    B_size: int = 2
    H_W: float = 0.0
    H_What: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pi_X", _pmf(self.pi_X))
        arr = np.asarray(self.pi_YZgX, dtype=float)
        if arr.ndim != 3 or arr.shape[0] != self.pi_X.size:
            raise ValueError("pi_YZgX must have shape (X, Y, Z)")
        object.__setattr__(self, "pi_YZgX", arr / arr.sum(axis=(1, 2), keepdims=True))

    @property
    def sizes(self):
        return (self.pi_X.size,) + self.pi_YZgX.shape[1:]


@dataclass(frozen=True)
class InteractiveTarget:
    """Target ``pi(y, z | s, x)`` stored as ``(S, X, Y, Z)``; ``pi_SX`` is ``(S, X)``."""

    pi_SX: np.ndarray
    pi_YZgSX: np.ndarray
    A_size: int = 2
    B_size: int = 2
    H_W: float = 0.0

    def __post_init__(self):
        sx = np.asarray(self.pi_SX, dtype=float)
        object.__setattr__(self, "pi_SX", sx / sx.sum())
        arr = np.asarray(self.pi_YZgSX, dtype=float)
        if arr.ndim != 4 or arr.shape[:2] != sx.shape:
            raise ValueError("pi_YZgSX must have shape (S, X, Y, Z)")
        object.__setattr__(self, "pi_YZgSX", arr / arr.sum(axis=(2, 3), keepdims=True))

    @property
    def sizes(self):
        return self.pi_YZgSX.shape


@dataclass(frozen=True)
class AuxShape:
    """Auxiliary alphabet sizes; ``None`` means the theorem's cardinality bound."""

    U_size: int | None = None
    V_size: int | None = None
    Uhat_size: int | None = None


def p2p_shape(target, shape=None):
    shape = shape or AuxShape()
    nx, ny = target.X_size, target.Y_size
    return AuxShape(shape.U_size or 2 * nx * ny, shape.V_size or 2)


def broadcast_shape(target, shape=None, variant="lower"):
    shape = shape or AuxShape()
    nx, ny, nz = target.sizes
    nb = target.B_size
    U = shape.U_size or 3 * (nx * ny * nz + 1)
    extra = 0 if variant == "lower" else 1
    Uh = shape.Uhat_size or U * (nb * nx * ny * nz + extra)
    return AuxShape(U, shape.V_size or 3, Uh)


def interactive_shape(target, shape=None):
    shape = shape or AuxShape()
    ns, nx, ny, nz = target.sizes
    return AuxShape(shape.U_size or 2 * ns * nx * ny * nz, shape.V_size or 2)


@dataclass(frozen=True)
class OptimizerSettings:
    restarts: int = 32
    max_iters: int = 60
    penalty_schedule: tuple = (1.0, 10.0, 100.0, 1e3, 1e4, 1e5)
    tol: float = 1e-10
    seed: int = 0
    slack_tol: float = 1e-9
    tight: float = 1e-8

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def run_settings(self):
        return RunSettings(
            penalties=tuple(self.penalty_schedule),
            max_iters=int(self.max_iters),
            tol=float(self.tol),
            tight=float(self.tight),
        )


# ---------------------------------------------------------------------------
# feasible points and results


@dataclass
class FeasiblePoint:
    """Named auxiliary factors in natural layout (parents first, output last).

    Point-to-point: ``P_UV (U,V)``, ``P_BgXUV (X,U,V,B)``, ``P_YgBUV (B,U,V,Y)``.
    Broadcast adds ``Uhat`` and ``P_ZgBUV``; interactive uses ``P_AgSUV``,
    ``P_BgXUV``, ``P_YgABUV``, ``P_ZgABUV``.
    """

    kind: str
    factors: dict

    def __getattr__(self, name):
        factors = self.__dict__.get("factors", {})
        if name in factors:
            return factors[name]
        raise AttributeError(name)

    def to_json(self):
        return {"kind": self.kind, "factors": {k: np.asarray(v).tolist() for k, v in sorted(self.factors.items())}}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["kind"], {k: np.asarray(v, dtype=float) for k, v in obj["factors"].items()})


@dataclass
class BoundResult:
    """Certified optimum of one bound.

    Unpacks as ``value, argmin``.
    """

    value: float
    argmin: FeasiblePoint | None
    constraint_slack: float = float("nan")
    restarts_used: int = 0
    candidates: int = 0
    feasible_candidates: int = 0
    best_index: int = -1
    diagnostics: list = field(default_factory=list)

    def __iter__(self):
        yield self.value
        yield self.argmin

    def to_json(self):
        return {
            "value": _json_float(self.value),
            "argmin": None if self.argmin is None else self.argmin.to_json(),
            "constraint_slack": _json_float(self.constraint_slack),
            "restarts_used": self.restarts_used,
            "candidates": self.candidates,
            "feasible_candidates": self.feasible_candidates,
            "best_index": self.best_index,
            "diagnostics": list(self.diagnostics),
        }


def _json_float(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


@dataclass
class SymbolwiseResult:
    value: float
    P_BgX: np.ndarray
    P_YgB: np.ndarray
    restarts_used: int = 0

    def __iter__(self):
        yield self.value
        yield self.P_BgX
        yield self.P_YgB

    def to_json(self):
        return {
            "value": _json_float(self.value),
            "P_BgX": self.P_BgX.tolist(),
            "P_YgB": self.P_YgB.tolist(),
            "restarts_used": self.restarts_used,
        }


# ---------------------------------------------------------------------------
# assumption checks and closed forms


def _admissible_columns(pi_in, kernel_flat):
    supp = np.asarray(pi_in).ravel() > 0
    return np.all(kernel_flat[supp] > 0, axis=0)


def check_assumption1(target):
    """True iff some output column is positive on the whole input support."""
    return bool(_admissible_columns(target.pi_X, target.pi_YgX).any())


def check_broadcast_assumption(target):
    nx = target.pi_X.size
    return bool(_admissible_columns(target.pi_X, target.pi_YZgX.reshape(nx, -1)).any())


def check_interactive_assumption(target):
    ns, nx, ny, nz = target.sizes
    return bool(_admissible_columns(target.pi_SX, target.pi_YZgSX.reshape(ns * nx, -1)).any())


def _constant_output_costs(pi_in, kernel_flat):
    """-sum_x pi(x) log K(c|x) per output column c (inf when inadmissible)."""
    p = np.asarray(pi_in).ravel()
    supp = p > 0
    with np.errstate(divide="ignore"):
        logs = np.log(kernel_flat[supp])
    return -(p[supp][:, None] * logs).sum(axis=0)


def lemma1_upper_bound(target):
    """Value of the constant-output feasible point: min_y -sum_x pi(x) log pi(y|x).

    Raises ``ValueError`` when no output symbol is admissible.
    """
    costs = _constant_output_costs(target.pi_X, target.pi_YgX)
    if not np.isfinite(costs).any():
        raise ValueError("no output symbol has positive probability under every input")
    return float(costs.min())


def best_constant_output(pi_in, kernel_flat):
    costs = _constant_output_costs(pi_in, kernel_flat)
    if not np.isfinite(costs).any():
        raise ValueError("no admissible constant output")
    idx = int(np.argmin(costs))
    return idx, float(costs[idx])


def gibbs_output_law(pi_X, pi_YgX):
    """Minimizer of D(Q_Y || pi_{Y|X} | pi_X) over Q_Y, and the minimum.

    The objective equals D(Q || g) - log Z with g(y) proportional to
    exp(sum_x pi(x) log pi(y|x)), so the minimizer is g and the minimum is
    -log Z.
    """
    costs = _constant_output_costs(pi_X, np.asarray(pi_YgX, dtype=float).reshape(np.asarray(pi_X).size, -1))
    finite = np.isfinite(costs)
    if not finite.any():
        return None, math.inf
    shift = costs[finite].min()
    w = np.where(finite, np.exp(-(costs - shift)), 0.0)
    Z = w.sum()
    return w / Z, float(shift - math.log(Z))


def product_output_law(pi_X, pi_YZgX, iters=2000, tol=1e-14):
    """Minimize D(Q_Y Q_Z || pi_{YZ|X} | pi_X) over product laws.

    Alternating exact minimization: for fixed Q_Z the optimal Q_Y is a
    Gibbs law, and symmetrically.  Each step cannot increase the
    objective; returns ``(Q_Y, Q_Z, value)``.
    """
    p = np.asarray(pi_X, dtype=float)
    pi = np.asarray(pi_YZgX, dtype=float)
    supp = p > 0
    with np.errstate(divide="ignore"):
        logpi = np.log(pi[supp])
    avg = np.einsum("x,xyz->yz", p[supp], logpi)  # -inf where inadmissible
    ny, nz = avg.shape
    admissible = np.isfinite(avg)
    if not admissible.any():
        return None, None, math.inf
    # start from the best constant pair, then alternate
    y0, z0 = np.unravel_index(np.argmax(np.where(admissible, avg, -np.inf)), avg.shape)
    qy = np.zeros(ny)
    qy[y0] = 1.0
    qz = np.zeros(nz)
    qz[z0] = 1.0

    def value(qy, qz):
        q = np.outer(qy, qz)
        m = q > 0
        if np.any(~admissible & m):
            return math.inf
        return float(np.sum(q[m] * (np.log(q[m]) - avg[m])))

    best = value(qy, qz)
    for _ in range(iters):
        # Q_Y given Q_Z: exponent sum_z qz(z) avg(y, z) (inf-safe)
        with np.errstate(invalid="ignore"):
            ey = np.where(qz[None, :] > 0, avg * qz[None, :], 0.0).sum(axis=1)
        qy = _softmax(ey)
        with np.errstate(invalid="ignore"):
            ez = np.where(qy[:, None] > 0, avg * qy[:, None], 0.0).sum(axis=0)
        qz = _softmax(ez)
        val = value(qy, qz)
        if best - val < tol:
            best = min(best, val)
            break
        best = val
    return qy, qz, best


def _softmax(e):
    finite = np.isfinite(e)
    m = e[finite].max()
    w = np.where(finite, np.exp(e - m), 0.0)
    return w / w.sum()


# ---------------------------------------------------------------------------
# model builders


def _neglog(k):
    with np.errstate(divide="ignore"):
        return -np.log(np.asarray(k, dtype=float))


def _p2p_model(target, shape, t):
    nx, ny = target.X_size, target.Y_size
    sizes = {"X": nx, "U": shape.U_size, "V": shape.V_size, "B": target.B_size, "Y": ny}
    factors = [
        Factor("pi_X", ("X",), (), fixed=target.pi_X),
        Factor("P_UV", ("U", "V")),
        Factor("P_BgXUV", ("B",), ("X", "U", "V")),
        Factor("P_YgBUV", ("Y",), ("B", "U", "V")),
    ]
    obj = [(-1.0, "XVY"), (1.0, "XV")]
    cons = [([(1.0, "UV"), (-1.0, "V"), (-1.0, "XUVBY"), (1.0, "XVY")], -float(t))]
    return FactorModel(("X", "U", "V", "B", "Y"), sizes, factors, obj, (("X", "Y"), _neglog(target.pi_YgX)), cons)


def _symbolwise_model(pi_X, pi_YgX, B_size):
    nx, ny = pi_YgX.shape
    sizes = {"X": nx, "B": B_size, "Y": ny}
    factors = [
        Factor("pi_X", ("X",), (), fixed=pi_X),
        Factor("P_BgX", ("B",), ("X",)),
        Factor("P_YgB", ("Y",), ("B",)),
    ]
    obj = [(-1.0, "XY"), (1.0, "X")]
    return FactorModel(("X", "B", "Y"), sizes, factors, obj, (("X", "Y"), _neglog(pi_YgX)))


def _broadcast_model(target, shape, variant):
    nx, ny, nz = target.sizes
    sizes = {"X": nx, "U": shape.U_size, "H": shape.Uhat_size, "V": shape.V_size, "B": target.B_size, "Y": ny, "Z": nz}
    factors = [
        Factor("pi_X", ("X",), (), fixed=target.pi_X),
        Factor("P_UUhV", ("U", "H", "V")),
        Factor("P_BgXUUhV", ("B",), ("X", "U", "H", "V")),
        Factor("P_YgBUUhV", ("Y",), ("B", "U", "H", "V")),
        Factor("P_ZgBUV", ("Z",), ("B", "U", "V")),
    ]
    obj = [(-1.0, "XVYZ"), (1.0, "XV")]
    c1 = [(1.0, "UV"), (-1.0, "V"), (-1.0, "XUVBYZ"), (1.0, "XVYZ")]
    if variant == "upper":
        # + I(B; Uhat | X Y Z U V)
        c1 += [(1.0, "XUVBYZ"), (-1.0, "XUVYZ"), (-1.0, "XUHVBYZ"), (1.0, "XUHVYZ")]
    c2 = [(1.0, "UHV"), (-1.0, "V"), (-1.0, "XUHVBYZ"), (1.0, "XVYZ")]
    cons = [(c1, -target.H_W), (c2, -(target.H_W + target.H_What))]
    lin = (("X", "Y", "Z"), _neglog(target.pi_YZgX))
    return FactorModel(("X", "U", "H", "V", "B", "Y", "Z"), sizes, factors, obj, lin, cons)


def _interactive_model(target, shape):
    ns, nx, ny, nz = target.sizes
    sizes = {"S": ns, "X": nx, "U": shape.U_size, "V": shape.V_size, "A": target.A_size, "B": target.B_size, "Y": ny, "Z": nz}
    factors = [
        Factor("pi_SX", ("S", "X"), (), fixed=target.pi_SX),
        Factor("P_UV", ("U", "V")),
        Factor("P_AgSUV", ("A",), ("S", "U", "V")),
        Factor("P_BgXUV", ("B",), ("X", "U", "V")),
        Factor("P_YgABUV", ("Y",), ("A", "B", "U", "V")),
        Factor("P_ZgABUV", ("Z",), ("A", "B", "U", "V")),
    ]
    obj = [(-1.0, "SXVYZ"), (1.0, "SXV")]
    cons = [([(1.0, "UV"), (-1.0, "V"), (-1.0, "SXUVABYZ"), (1.0, "SXVYZ")], -target.H_W)]
    lin = (("S", "X", "Y", "Z"), _neglog(target.pi_YZgSX))
    return FactorModel(("S", "X", "U", "V", "A", "B", "Y", "Z"), sizes, factors, obj, lin, cons)


# ---------------------------------------------------------------------------
# exact evaluation (certification path, independent of the optimizer)


def _divergence(joint_obs, pi_kernel_obs):
    """Sum over the support of joint_obs of P log(P(out|in)/pi(out|in)).

    ``joint_obs`` has shape ``(IN, OUT)`` and ``pi_kernel_obs`` the same shape.
    """
    p_in = joint_obs.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rows = np.where(p_in[:, None] > 0, joint_obs / np.where(p_in > 0, p_in, 1.0)[:, None], 0.0)
    return im.cond_kl_div(rows, pi_kernel_obs, p_in)


def evaluate_p2p(target, point, t):
    """Exact (objective, constraint slack) of a point-to-point feasible point."""
    f = point.factors
    J = np.einsum("x,uv,xuvb,buvy->xuvby", target.pi_X, f["P_UV"], f["P_BgXUV"], f["P_YgBUV"])
    nx, nu, nv, nb, ny = J.shape
    jxvy = J.sum(axis=(1, 3))  # (x, v, y)
    pi_obs = np.broadcast_to(target.pi_YgX[:, None, :], jxvy.shape)
    obj = _divergence(jxvy.reshape(nx * nv, ny), pi_obs.reshape(nx * nv, ny))
    h_u_v = im.cond_entropy(J.sum(axis=(0, 3, 4)), given=1)
    h_bu_xyv = im.cond_entropy(J, given=(0, 2, 4))
    return obj, float(t) + h_bu_xyv - h_u_v


def evaluate_symbolwise(pi_X, pi_YgX, P_BgX, P_YgB):
    return im.cond_kl_div(np.asarray(P_BgX) @ np.asarray(P_YgB), pi_YgX, pi_X)


def evaluate_broadcast(target, point, variant):
    """Exact objective and the two constraint slacks of a broadcast point."""
    f = point.factors
    J = np.einsum(
        "x,uhv,xuhvb,buhvy,buvz->xuhvbyz",
        target.pi_X, f["P_UUhV"], f["P_BgXUUhV"], f["P_YgBUUhV"], f["P_ZgBUV"],
    )
    nx, nu, nh, nv, nb, ny, nz = J.shape
    jxvyz = J.sum(axis=(1, 2, 4))
    pi_obs = np.broadcast_to(target.pi_YZgX[:, None], jxvyz.shape)
    obj = _divergence(jxvyz.reshape(nx * nv, ny * nz), pi_obs.reshape(nx * nv, ny * nz))
    h_u_v = im.cond_entropy(J.sum(axis=(0, 2, 4, 5, 6)), given=1)
    h_uh_v = im.cond_entropy(J.sum(axis=(0, 4, 5, 6)), given=2)
    Jn = J.sum(axis=2)  # x u v b y z
    h_bu_xyzv = im.cond_entropy(Jn, given=(0, 2, 4, 5))
    h_buh_xyzv = im.cond_entropy(J, given=(0, 3, 5, 6))
    lhs1 = h_u_v
    if variant == "upper":
        lhs1 += im.cond_mutual_info(J, 4, 2, (0, 5, 6, 1, 3))
    s1 = target.H_W + h_bu_xyzv - lhs1
    s2 = target.H_W + target.H_What + h_buh_xyzv - h_uh_v
    return obj, (s1, s2)


def evaluate_interactive(target, point):
    f = point.factors
    J = np.einsum(
        "sx,uv,suva,xuvb,abuvy,abuvz->sxuvabyz",
        target.pi_SX, f["P_UV"], f["P_AgSUV"], f["P_BgXUV"], f["P_YgABUV"], f["P_ZgABUV"],
    )
    ns, nx, nu, nv, na, nb, ny, nz = J.shape
    jsxvyz = J.sum(axis=(2, 4, 5))
    pi_obs = np.broadcast_to(target.pi_YZgSX[:, :, None], jsxvyz.shape)
    obj = _divergence(jsxvyz.reshape(ns * nx * nv, ny * nz), pi_obs.reshape(ns * nx * nv, ny * nz))
    h_u_v = im.cond_entropy(J.sum(axis=(0, 1, 4, 5, 6, 7)), given=1)
    h_abu = im.cond_entropy(J, given=(0, 1, 3, 6, 7))
    return obj, target.H_W + h_abu - h_u_v


# ---------------------------------------------------------------------------
# generic solve


def _stack_points(model, points):
    state = {}
    for f in model.free_factors():
        state[f.name] = np.stack([np.asarray(p.factors[f.name], dtype=float) for p in points])
    return state


def _points_from_state(kind, model, state):
    R = next(iter(state.values())).shape[0]
    return [FeasiblePoint(kind, {k: v[r].copy() for k, v in state.items()}) for r in range(R)]


def _solve(kind, model, evaluate, settings, warm_points=(), exact_points=(), diagnostics=None):
    """Optimize random + warm restarts and certify every candidate.

    Candidate order (used for tie-breaking): random restarts, optimized warm
    starts, then the unoptimized exact points.
    """
    diagnostics = [] if diagnostics is None else diagnostics
    R = settings.restarts
    state = random_state(model, R, settings.seed)
    warm_points = [p for p in warm_points if p is not None]
    if warm_points:
        ws = _stack_points(model, warm_points)
        state = {k: np.concatenate([state[k], ws[k]]) for k in state}
    final = optimize(model, state, settings.run_settings())
    candidates = _points_from_state(kind, model, final) + [p for p in exact_points if p is not None]
    best, best_val, best_slack, n_feas = -1, math.inf, float("nan"), 0
    for i, p in enumerate(candidates):
        obj, slack = evaluate(p)
        slack_min = float(np.min(slack)) if np.ndim(slack) else float(slack)
        if slack_min < -settings.slack_tol or not np.isfinite(obj):
            continue
        n_feas += 1
        if obj < best_val:
            best, best_val, best_slack = i, float(obj), slack_min
    if best < 0:
        diagnostics.append("no certified-feasible candidate found; value reported as +inf")
        return BoundResult(math.inf, None, float("nan"), R + len(warm_points), len(candidates), 0, -1, diagnostics)
    return BoundResult(
        best_val, candidates[best], best_slack, R + len(warm_points), len(candidates), n_feas, best, diagnostics
    )


def _point_mass(shape):
    arr = np.zeros(shape)
    arr[(0,) * len(shape)] = 1.0
    return arr


def _uniform_rows(shape):
    return np.full(shape, 1.0 / shape[-1])


def _onehot_rows(shape, idx):
    arr = np.zeros(shape)
    arr[..., idx] = 1.0
    return arr


# ---------------------------------------------------------------------------
# symbol-wise bound

_SYMBOLWISE_CACHE = {}
SYMBOLWISE_RESTART_FACTOR = 8


def delta_symbolwise(target, settings=None):
    """Best symbol-by-symbol scheme ``X -> B -> Y``; returns ``(value, P_BgX, P_YgB)``.

    Multi-start local minimization of D(P_{Y|X} || pi_{Y|X} | pi_X) over
    the two kernels.  Closed-form candidates (relay ``B = X`` when
    ``|B| >= |X|``, best constant-output law) are always included.  The
    problem is tiny but has many local minima, so it runs
    ``SYMBOLWISE_RESTART_FACTOR`` times the configured number of restarts.
    """
    settings = settings or OptimizerSettings()
    key = (target.pi_X.tobytes(), target.pi_YgX.tobytes(), target.pi_YgX.shape, int(target.B_size), settings)
    if key in _SYMBOLWISE_CACHE:
        return _SYMBOLWISE_CACHE[key]
    nx, ny = target.pi_YgX.shape
    nb = int(target.B_size)
    model = _symbolwise_model(target.pi_X, target.pi_YgX, nb)
    warm = []
    q, _ = gibbs_output_law(target.pi_X, target.pi_YgX)
    if q is not None:
        warm.append({"P_BgX": _onehot_rows((nx, nb), 0), "P_YgB": np.tile(q, (nb, 1))})
    if nb >= nx:
        relay = np.zeros((nx, nb))
        relay[np.arange(nx), np.arange(nx)] = 1.0
        rows = np.vstack([target.pi_YgX, np.tile(target.pi_YgX[0], (nb - nx, 1))])
        warm.append({"P_BgX": relay, "P_YgB": rows})
    state = random_state(model, SYMBOLWISE_RESTART_FACTOR * settings.restarts, settings.seed)
    if warm:
        state = {k: np.concatenate([state[k], np.stack([w[k] for w in warm])]) for k in state}
    final = optimize(model, state, settings.run_settings())
    R = final["P_BgX"].shape[0]
    cands = [(final["P_BgX"][r], final["P_YgB"][r]) for r in range(R)] + [(w["P_BgX"], w["P_YgB"]) for w in warm]
    vals = [evaluate_symbolwise(target.pi_X, target.pi_YgX, a, b) for a, b in cands]
    best = int(np.argmin(vals))
    res = SymbolwiseResult(float(vals[best]), cands[best][0].copy(), cands[best][1].copy(), R)
    _SYMBOLWISE_CACHE[key] = res
    return res


# ---------------------------------------------------------------------------
# point-to-point


def _p2p_lemma1_point(target, shape):
    y, _ = best_constant_output(target.pi_X, target.pi_YgX)
    nx, ny, nb = target.X_size, target.Y_size, target.B_size
    U, V = shape.U_size, shape.V_size
    return FeasiblePoint(
        "p2p",
        {
            "P_UV": _point_mass((U, V)),
            "P_BgXUV": _uniform_rows((nx, U, V, nb)),
            "P_YgBUV": _onehot_rows((nb, U, V, ny), y),
        },
    )


def _p2p_symbolwise_point(target, shape, sw):
    nx, ny, nb = target.X_size, target.Y_size, target.B_size
    U, V = shape.U_size, shape.V_size
    return FeasiblePoint(
        "p2p",
        {
            "P_UV": _point_mass((U, V)),
            "P_BgXUV": np.broadcast_to(sw.P_BgX[:, None, None, :], (nx, U, V, nb)).copy(),
            "P_YgBUV": np.broadcast_to(sw.P_YgB[:, None, None, :], (nb, U, V, ny)).copy(),
        },
    )


def _fit_p2p_point(point, shape):
    """Re-embed a p2p point into ``shape`` (pads with zero-mass symbols, or compresses supports)."""
    f = point.factors
    P = np.asarray(f["P_UV"])
    u_keep = np.flatnonzero(P.sum(axis=1) > 0)
    v_keep = np.flatnonzero(P.sum(axis=0) > 0)
    if u_keep.size > shape.U_size or v_keep.size > shape.V_size:
        return None
    u_idx = np.concatenate([u_keep, np.setdiff1d(np.arange(P.shape[0]), u_keep)])[: shape.U_size]
    v_idx = np.concatenate([v_keep, np.setdiff1d(np.arange(P.shape[1]), v_keep)])[: shape.V_size]

    def take(arr, u_ax, v_ax):
        arr = np.asarray(arr)
        arr = _take_pad(arr, u_idx, u_ax, shape.U_size)
        return _take_pad(arr, v_idx, v_ax, shape.V_size)

    P_UV = take(P, 0, 1)
    return FeasiblePoint(
        "p2p",
        {
            "P_UV": P_UV / P_UV.sum(),
            "P_BgXUV": _fill_rows(take(f["P_BgXUV"], 1, 2)),
            "P_YgBUV": _fill_rows(take(f["P_YgBUV"], 1, 2)),
        },
    )


def _take_pad(arr, idx, axis, size):
    out = np.take(arr, idx, axis=axis)
    if out.shape[axis] < size:
        pad = [(0, 0)] * arr.ndim
        pad[axis] = (0, size - out.shape[axis])
        out = np.pad(out, pad)
    return out


def _fill_rows(k):
    """Replace all-zero rows (padding) with uniform rows."""
    k = np.array(k, dtype=float)
    s = k.sum(axis=-1, keepdims=True)
    return np.where(s > 0, k / np.where(s > 0, s, 1.0), 1.0 / k.shape[-1])


def psi(target, t, shape=None, settings=None, warm_starts=(), symbolwise=None):
    """Constrained minimum psi(t) for the point-to-point problem.

    Parameters
    ----------
    target : P2PTarget
    t : float
        Right-hand-side offset of the entropy constraint (nats).
    shape : AuxShape, optional
        Auxiliary alphabet sizes (defaults to the cardinality bounds).
    settings : OptimizerSettings, optional
    warm_starts : sequence of FeasiblePoint
        Extra initial points; each is also certified as-is.

    Returns
    -------
    BoundResult
        Unpacks as ``(value, argmin)``.  ``value`` is ``inf`` when the
        constraint cannot be met (for ``t < -log|B|`` this is provable).
    """
    settings = settings or OptimizerSettings()
    shape = p2p_shape(target, shape)
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    diags = []
    floor = -math.log(target.B_size)
    if t < floor - settings.slack_tol:
        diags.append(f"t={t:.6g} below -log|B|={floor:.6g}: H(U|V)-H(BU|XYV) >= -log|B| makes the constraint infeasible")
        return BoundResult(math.inf, None, float("nan"), 0, 0, 0, -1, diags)
    if abs(t - floor) < 10 * settings.tol or abs(t - floor) < 1e-6:
        diags.append("t is at the infeasibility threshold; the value there may differ from the limit from the right")
    model = _p2p_model(target, shape, t)
    exact = []
    if check_assumption1(target):
        exact.append(_p2p_lemma1_point(target, shape))
    sw = symbolwise if symbolwise is not None else delta_symbolwise(target, settings)
    exact.append(_p2p_symbolwise_point(target, shape, sw))
    fitted = [_fit_p2p_point(p, shape) for p in warm_starts]
    exact.extend(p for p in fitted if p is not None)
    return _solve("p2p", model, lambda p: evaluate_p2p(target, p, t), settings, exact, exact, diags)


def delta_p2p(target, shape=None, settings=None, warm_starts=()):
    """Point-to-point bound at ``t = H(W)``."""
    if not check_assumption1(target):
        warnings.warn("reachability assumption fails: no output symbol is reachable from every input", stacklevel=2)
    return psi(target, target.H_W, shape, settings, warm_starts)


def psi_curve(target, t_grid, shape=None, settings=None):
    """psi on a grid; returns ``[(t, value), ...]`` in input order.

    Points are solved in ascending ``t`` and every earlier argmin is
    offered as a warm start, so the curve is nonincreasing by
    construction (an argmin feasible at ``t`` stays feasible for larger ``t``).
    """
    settings = settings or OptimizerSettings()
    shape = p2p_shape(target, shape)
    grid = [float(t) for t in t_grid]
    sw = delta_symbolwise(target, settings)
    done, carried = {}, []
    for t in sorted(set(grid)):
        res = psi(target, t, shape, settings, warm_starts=carried, symbolwise=sw)
        done[t] = res
        if res.argmin is not None:
            carried = [res.argmin]
    return [(t, done[t].value) for t in grid]


def psi_curve_results(target, t_grid, shape=None, settings=None):
    """Like :func:`psi_curve` but returns the full :class:`BoundResult` per point."""
    settings = settings or OptimizerSettings()
    shape = p2p_shape(target, shape)
    sw = delta_symbolwise(target, settings)
    done, carried = {}, []
    for t in sorted(set(float(t) for t in t_grid)):
        res = psi(target, t, shape, settings, warm_starts=carried, symbolwise=sw)
        done[t] = res
        if res.argmin is not None:
            carried = [res.argmin]
    return [(float(t), done[float(t)]) for t in t_grid]


@dataclass
class TMinBracket:
    lo: float
    hi: float
    one_sided: str | None = None  # "all-feasible" or "all-infeasible"

    def __iter__(self):
        yield self.lo
        yield self.hi


def t_min_estimate(target, shape=None, settings=None, grid=(-10.0, 0.0), tol=1e-3):
    """Bracket the threshold below which psi is infinite.

    Evaluates psi on ``grid`` (sorted), then bisects between the last
    infeasible and first feasible grid point until the bracket is narrower
    than ``tol``.  If the grid is entirely feasible (or infeasible) the
    bracket is one-sided with ``lo = -inf`` (or ``hi = inf``).
    """
    settings = settings or OptimizerSettings()
    grid = [float(t) for t in grid]
    if grid != sorted(grid):
        raise ValueError("grid must be sorted")
    feas = [math.isfinite(psi(target, t, shape, settings).value) for t in grid]
    if all(feas):
        return TMinBracket(-math.inf, grid[0], "all-feasible")
    if not any(feas):
        return TMinBracket(grid[-1], math.inf, "all-infeasible")
    first = feas.index(True)
    lo = max(t for t, f in zip(grid[:first], feas[:first]) if not f) if first > 0 else -math.inf
    hi = grid[first]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if math.isfinite(psi(target, mid, shape, settings).value):
            hi = mid
        else:
            lo = mid
    return TMinBracket(lo, hi, None)


# ---------------------------------------------------------------------------
# broadcast


def _broadcast_const_point(target, shape):
    nx, ny, nz = target.sizes
    idx, _ = best_constant_output(target.pi_X, target.pi_YZgX.reshape(nx, -1))
    y, z = divmod(idx, nz)
    U, H, V, nb = shape.U_size, shape.Uhat_size, shape.V_size, target.B_size
    return FeasiblePoint(
        "broadcast",
        {
            "P_UUhV": _point_mass((U, H, V)),
            "P_BgXUUhV": _uniform_rows((nx, U, H, V, nb)),
            "P_YgBUUhV": _onehot_rows((nb, U, H, V, ny), y),
            "P_ZgBUV": _onehot_rows((nb, U, V, nz), z),
        },
    )


def _broadcast_symbolwise_point(target, shape, settings):
    """X -> B -> (Y, Z) with constant auxiliaries, Y and Z conditionally independent given B."""
    nx, ny, nz = target.sizes
    nb = target.B_size
    sizes = {"X": nx, "B": nb, "Y": ny, "Z": nz}
    factors = [
        Factor("pi_X", ("X",), (), fixed=target.pi_X),
        Factor("P_BgX", ("B",), ("X",)),
        Factor("P_YgB", ("Y",), ("B",)),
        Factor("P_ZgB", ("Z",), ("B",)),
    ]
    model = FactorModel(("X", "B", "Y", "Z"), sizes, factors, [(-1.0, "XYZ"), (1.0, "X")], (("X", "Y", "Z"), _neglog(target.pi_YZgX)))
    R = max(4, settings.restarts // 4)
    final = optimize(model, random_state(model, R, settings.seed), settings.run_settings())
    best, best_val = 0, math.inf
    for r in range(R):
        pyz = np.einsum("xb,by,bz->xyz", final["P_BgX"][r], final["P_YgB"][r], final["P_ZgB"][r])
        val = im.cond_kl_div(pyz.reshape(nx, -1), target.pi_YZgX.reshape(nx, -1), target.pi_X)
        if val < best_val:
            best, best_val = r, val
    U, H, V = shape.U_size, shape.Uhat_size, shape.V_size
    return FeasiblePoint(
        "broadcast",
        {
            "P_UUhV": _point_mass((U, H, V)),
            "P_BgXUUhV": np.broadcast_to(final["P_BgX"][best][:, None, None, None, :], (nx, U, H, V, nb)).copy(),
            "P_YgBUUhV": np.broadcast_to(final["P_YgB"][best][:, None, None, None, :], (nb, U, H, V, ny)).copy(),
            "P_ZgBUV": np.broadcast_to(final["P_ZgB"][best][:, None, None, :], (nb, U, V, nz)).copy(),
        },
    )


def delta_broadcast(target, variant="lower", shape=None, settings=None, warm_starts=()):
    """Broadcast bound; ``variant='lower'`` or ``'upper'`` (extra I(B;Uhat|XYZUV) in the first constraint).

    Returns a certified :class:`BoundResult`.  Warm starts must already
    have the requested shape.
    """
    if variant not in ("lower", "upper"):
        raise ValueError("variant must be 'lower' or 'upper'")
    if not check_broadcast_assumption(target):
        warnings.warn("broadcast assumption fails: no (y, z) pair is reachable from every input", stacklevel=2)
    settings = settings or OptimizerSettings()
    shape = broadcast_shape(target, shape, variant)
    model = _broadcast_model(target, shape, variant)
    exact = []
    if check_broadcast_assumption(target):
        exact.append(_broadcast_const_point(target, shape))
    exact.append(_broadcast_symbolwise_point(target, shape, settings))
    exact.extend(p for p in warm_starts if p is not None and _shape_matches(model, p))
    return _solve("broadcast", model, lambda p: evaluate_broadcast(target, p, variant), settings, exact, exact)


def _shape_matches(model, point):
    return all(
        np.shape(point.factors.get(f.name)) == model.natural_shape(f) for f in model.free_factors()
    )


def delta_broadcast_pair(target, shape=None, settings=None):
    """Lower and upper broadcast bounds on a common shape.

    The upper problem is solved first and its argmin (feasible for the
    lower problem, whose constraint set is larger) seeds the lower one,
    so ``lower.value <= upper.value`` holds for every paired run.
    """
    settings = settings or OptimizerSettings()
    shape = broadcast_shape(target, shape, "upper")
    upper = delta_broadcast(target, "upper", shape, settings)
    lower = delta_broadcast(target, "lower", shape, settings, warm_starts=[upper.argmin])
    return lower, upper


# ---------------------------------------------------------------------------
# interactive


def _interactive_const_point(target, shape):
    ns, nx, ny, nz = target.sizes
    idx, _ = best_constant_output(target.pi_SX, target.pi_YZgSX.reshape(ns * nx, -1))
    y, z = divmod(idx, nz)
    U, V, na, nb = shape.U_size, shape.V_size, target.A_size, target.B_size
    return FeasiblePoint(
        "interactive",
        {
            "P_UV": _point_mass((U, V)),
            "P_AgSUV": _uniform_rows((ns, U, V, na)),
            "P_BgXUV": _uniform_rows((nx, U, V, nb)),
            "P_YgABUV": _onehot_rows((na, nb, U, V, ny), y),
            "P_ZgABUV": _onehot_rows((na, nb, U, V, nz), z),
        },
    )


def interactive_constant_bound(target):
    """Value of the constant-(y, z) feasible point (min over admissible pairs)."""
    ns, nx, ny, nz = target.sizes
    return best_constant_output(target.pi_SX, target.pi_YZgSX.reshape(ns * nx, -1))[1]


def delta_interactive(target, shape=None, settings=None, warm_starts=()):
    """Interactive bound with encoders ``S -> A`` and ``X -> B`` and decoders ``(A,B) -> Y, Z``."""
    if not check_interactive_assumption(target):
        warnings.warn("interactive assumption fails: no (y, z) pair is reachable from every input", stacklevel=2)
    settings = settings or OptimizerSettings()
    shape = interactive_shape(target, shape)
    model = _interactive_model(target, shape)
    exact = []
    if check_interactive_assumption(target):
        exact.append(_interactive_const_point(target, shape))
    exact.extend(p for p in warm_starts if p is not None and _shape_matches(model, p))
    return _solve("interactive", model, lambda p: evaluate_interactive(target, p), settings, exact, exact)


# ---------------------------------------------------------------------------
# matching interactive problems with degenerate S, Z to point-to-point ones


def interactive_to_p2p_target(target):
    """Point-to-point target equivalent to an interactive one with |S| = |Z| = 1.

    The first encoder's output A carries no information about the source,
    so it acts as extra common randomness: the matched point-to-point
    problem has ``H_W + log|A|``.
    """
    ns, nx, ny, nz = target.sizes
    if ns != 1 or nz != 1:
        raise ValueError("matching requires degenerate S and Z")
    return P2PTarget(target.pi_SX[0], target.pi_YZgSX[0, :, :, 0], target.B_size, target.H_W + math.log(target.A_size))


def interactive_point_to_p2p(point, target):
    """Map an interactive point to a p2p point with auxiliary ``(U, A)`` of size ``U * |A|``."""
    f = point.factors
    P_UV = np.asarray(f["P_UV"])
    U, V = P_UV.shape
    na = target.A_size
    P_A = np.asarray(f["P_AgSUV"])[0]  # (U, V, A)
    P_UAV = np.einsum("uv,uva->uav", P_UV, P_A).reshape(U * na, V)
    P_B = np.asarray(f["P_BgXUV"])  # (X, U, V, B)
    nx, nb = P_B.shape[0], P_B.shape[-1]
    P_BgX = np.broadcast_to(P_B[:, :, None], (nx, U, na, V, nb)).reshape(nx, U * na, V, nb)
    P_Y = np.asarray(f["P_YgABUV"])  # (A, B, U, V, Y)
    P_YgB = np.transpose(P_Y, (1, 2, 0, 3, 4)).reshape(nb, U * na, V, -1)
    return FeasiblePoint("p2p", {"P_UV": P_UAV, "P_BgXUV": P_BgX.copy(), "P_YgBUV": P_YgB.copy()})


def p2p_point_to_interactive(point, target, shape):
    """Map a p2p point to an interactive one: uniform A ignored by the decoder.

    Returns ``None`` when the p2p auxiliary support does not fit ``shape``.
    """
    fitted = _fit_p2p_point(point, AuxShape(shape.U_size, shape.V_size))
    if fitted is None:
        return None
    f = fitted.factors
    U, V = shape.U_size, shape.V_size
    na = target.A_size
    P_Y = np.asarray(f["P_YgBUV"])  # (B, U, V, Y)
    nb, ny = P_Y.shape[0], P_Y.shape[-1]
    return FeasiblePoint(
        "interactive",
        {
            "P_UV": f["P_UV"],
            "P_AgSUV": _uniform_rows((1, U, V, na)),
            "P_BgXUV": f["P_BgXUV"],
            "P_YgABUV": np.broadcast_to(P_Y[None], (na, nb, U, V, ny)).copy(),
            "P_ZgABUV": np.ones((na, nb, U, V, 1)),
        },
    )


@dataclass
class MatchReport:
    interactive: BoundResult
    p2p: BoundResult
    independent_gap: float

    @property
    def gap(self):
        return abs(self.interactive.value - self.p2p.value)


def match_interactive_p2p(target, shape=None, settings=None):
    """Solve an interactive problem with degenerate S, Z and its matched p2p problem.

    Each problem is first solved on its own (``independent_gap`` records
    the difference), then each is re-solved seeded with the other's
    mapped argmin so both sides see the best point either run found.
    """
    settings = settings or OptimizerSettings()
    ishape = interactive_shape(target, shape)
    pshape = AuxShape(ishape.U_size * target.A_size, ishape.V_size)
    ptarget = interactive_to_p2p_target(target)
    r_int = delta_interactive(target, ishape, settings)
    r_p2p = psi(ptarget, ptarget.H_W, pshape, settings)
    independent = abs(r_int.value - r_p2p.value)
    seeds_p = [interactive_point_to_p2p(r_int.argmin, target)] if r_int.argmin is not None else []
    r_p2p = psi(ptarget, ptarget.H_W, pshape, settings, warm_starts=seeds_p + ([r_p2p.argmin] if r_p2p.argmin else []))
    seeds_i = [p2p_point_to_interactive(r_p2p.argmin, target, ishape)] if r_p2p.argmin is not None else []
    seeds_i.append(r_int.argmin)
    r_int = delta_interactive(target, ishape, settings, warm_starts=seeds_i)
    return MatchReport(r_int, r_p2p, independent)
