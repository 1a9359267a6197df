"""Command-line driver.

Subcommands read a JSON config, write JSON (sorted keys, with the resolved
config and seed embedded) and CSV files into ``--out``, and exit with

* 0 on success,
* 2 on a configuration error,
* 3 when a computation would exceed the capacity guard,
* 4 on an internal assertion (including a one-shot bound violation).

CSV columns per subcommand are fixed by :data:`CSV_COLUMNS`.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bounds as bd
from . import codesim as cs
from . import oneshot
from .probkit import CapacityError

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_INTERNAL = 0, 2, 3, 4

CSV_COLUMNS = {
    "bounds": ("name", "value", "constraint_slack", "restarts_used"),
    "psi-curve": ("t", "value", "constraint_slack", "restarts_used"),
    "simulate": ("replicate",) + cs.CSV_COLUMNS,
    "verify": ("index", "lemma", "s", "lhs", "rhs", "slack", "min_slack", "ok"),
    "sweep": ("param", "value", "metric", "mean", "stderr", "minimum", "n"),
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config helpers


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config, overrides):
    """Apply ``key.sub=value`` overrides; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(config)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        parts = key.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _parse_value(val)
    return cfg


def load_config(path, overrides=()):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return apply_overrides(cfg, overrides)


def _need(cfg, key):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def _build(factory, kwargs, what):
    try:
        return factory(**{k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in kwargs.items()})
    except CapacityError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {what}: {e}") from None


def _settings(cfg, seed):
    s = dict(cfg.get("settings", {}))
    if "penalty_schedule" in s:
        s["penalty_schedule"] = tuple(s["penalty_schedule"])
    s["seed"] = seed
    try:
        return bd.OptimizerSettings(**s)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid settings: {e}") from None


def _shape(cfg):
    try:
        return bd.AuxShape(**cfg.get("shape", {}))
    except TypeError as e:
        raise ConfigError(f"invalid shape: {e}") from None


_TARGETS = {"p2p": bd.P2PTarget, "symbolwise": bd.P2PTarget, "broadcast": bd.BroadcastTarget, "interactive": bd.InteractiveTarget}
_SCHEMES = {"p2p": cs.P2PSchemeSpec, "broadcast": cs.BroadcastSchemeSpec, "interactive": cs.InteractiveSchemeSpec}


def _target(cfg, kind):
    if kind not in _TARGETS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {sorted(_TARGETS)}")
    return _build(_TARGETS[kind], _need(cfg, "target"), "target")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_outputs(out_dir, stem, payload, columns, rows):
    os.makedirs(out_dir, exist_ok=True)
    jpath = os.path.join(out_dir, f"{stem}.json")
    with open(jpath, "w") as fh:
        json.dump(_clean(payload), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
    cpath = os.path.join(out_dir, f"{stem}.csv")
    with open(cpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return jpath, cpath


def _clean(obj):
    """JSON-safe copy: numpy to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _header(cfg, seed, command):
    return {"command": command, "config": cfg, "seed": seed}


def _map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# subcommands


def cmd_bounds(cfg, seed, out, jobs=1):
    kind = cfg.get("kind", "p2p")
    target = _target(cfg, kind)
    settings = _settings(cfg, seed)
    shape = _shape(cfg)
    results = {}
    if kind == "p2p":
        t = cfg.get("t")
        results["psi" if t is not None else "delta"] = bd.psi(target, float(t) if t is not None else target.H_W, shape, settings)
        if cfg.get("symbolwise", False):
            results["symbolwise"] = bd.delta_symbolwise(target, settings)
    elif kind == "symbolwise":
        results["symbolwise"] = bd.delta_symbolwise(target, settings)
    elif kind == "broadcast":
        variant = cfg.get("variant", "pair")
        if variant == "pair":
            results["lower"], results["upper"] = bd.delta_broadcast_pair(target, shape, settings)
        elif variant in ("lower", "upper"):
            results[variant] = bd.delta_broadcast(target, variant, shape, settings)
        else:
            raise ConfigError(f"unknown broadcast variant {variant!r}")
    else:
        results["interactive"] = bd.delta_interactive(target, shape, settings)
    rows = []
    for name, res in results.items():
        if isinstance(res, bd.SymbolwiseResult):
            rows.append((name, res.value, float("nan"), res.restarts_used))
        else:
            rows.append((name, res.value, res.constraint_slack, res.restarts_used))
    payload = _header(cfg, seed, "bounds")
    payload["results"] = {k: v.to_json() for k, v in results.items()}
    return write_outputs(out, "bounds", payload, CSV_COLUMNS["bounds"], rows), 0


def _grid(cfg):
    g = _need(cfg, "t_grid")
    if isinstance(g, dict):
        try:
            return [float(x) for x in np.linspace(g["start"], g["stop"], int(g["num"]))]
        except KeyError as e:
            raise ConfigError(f"t_grid needs start, stop and num ({e} missing)") from None
    return [float(x) for x in g]


def cmd_psi_curve(cfg, seed, out, jobs=1):
    target = _target(cfg, "p2p")
    settings = _settings(cfg, seed)
    res = bd.psi_curve_results(target, _grid(cfg), _shape(cfg), settings)
    rows = [(t, r.value, r.constraint_slack, r.restarts_used) for t, r in res]
    payload = _header(cfg, seed, "psi-curve")
    payload["curve"] = [{"t": t, **r.to_json()} for t, r in res]
    return write_outputs(out, "psi_curve", payload, CSV_COLUMNS["psi-curve"], rows), 0


def _scheme_spec(cfg, seed):
    scheme = cfg.get("scheme", "p2p")
    if scheme not in _SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {sorted(_SCHEMES)}")
    spec_cfg = dict(_need(cfg, "spec"))
    spec_cfg["seed"] = seed
    return scheme, _build(_SCHEMES[scheme], spec_cfg, f"{scheme} spec")


def _simulate_one(args):
    scheme, spec, seed = args
    if scheme == "p2p":
        return cs.exact_induced_divergence(spec, cs.sample_codebooks(spec, seed))
    if scheme == "broadcast":
        return cs.exact_broadcast_divergence(spec, cs.build_broadcast_scheme(spec, seed))
    return cs.exact_interactive_divergence(spec, cs.sample_interactive_codebooks(spec, seed))


def _replicate_seeds(seed, n):
    return [int(np.random.default_rng([int(seed), i, 7]).integers(0, 2**63 - 1)) for i in range(n)]


def cmd_simulate(cfg, seed, out, jobs=1, seed_given=True):
    scheme, spec = _scheme_spec(cfg, seed)
    mode = cfg.get("mode", "exact")
    payload = _header(cfg, seed, "simulate")
    rows = []
    if mode == "exact":
        n = int(cfg.get("n_codebooks", 1))
        reps = _map(_simulate_one, [(scheme, spec, s) for s in _replicate_seeds(seed, n)], jobs)
        for i, r in enumerate(reps):
            assert r.decomposition_gap <= 1e-9, f"decomposition identity off by {r.decomposition_gap}"
            rows.extend([(i,) + tuple(row) for row in r.csv_rows()])
        totals = np.array([r.total for r in reps])
        payload["reports"] = [r.to_json() for r in reps]
        payload["summary"] = {
            "mean_total": float(totals.mean()),
            "stderr_total": float(totals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            "min_total": float(totals.min()),
            "mean_normalized": float(totals.mean() / (spec.N * spec.K)),
        }
    elif mode == "sampled":
        if not seed_given:
            raise ConfigError("sampled mode requires --seed")
        if scheme != "p2p":
            raise ConfigError("sampled mode is available for the point-to-point scheme only")
        r = cs.sampled_bin_diagnostics(spec, int(cfg.get("n_traj", 1000)), seed)
        rows.extend([(0,) + tuple(row) for row in r.csv_rows()])
        payload["reports"] = [r.to_json()]
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    return write_outputs(out, "simulate", payload, CSV_COLUMNS["simulate"], rows), 0


def _verify_one(args):
    lemma, i, seed, s = args
    rng = np.random.default_rng([int(seed), i])
    rep = oneshot.verify(lemma, oneshot.random_instance(lemma, rng, s))
    return rep


def cmd_verify(cfg, seed, out, jobs=1):
    lemmas = cfg.get("lemma", "pa")
    lemmas = list(oneshot.LEMMAS) if lemmas == "all" else ([lemmas] if isinstance(lemmas, str) else list(lemmas))
    for lem in lemmas:
        if lem not in oneshot.LEMMAS:
            raise ConfigError(f"unknown lemma {lem!r}; expected one of {oneshot.LEMMAS}")
    n = int(cfg.get("n", 100))
    s = cfg.get("s")
    tol = float(cfg.get("tol", 1e-12))
    rows, reports = [], []
    for lem in lemmas:
        reps = _map(_verify_one, [(lem, i, seed, s) for i in range(n)], jobs)
        for i, r in enumerate(reps):
            rows.append((i, lem, r.details["s"], r.lhs_exact, r.rhs_bound, r.slack, r.min_slack, r.ok(tol)))
            reports.append(r.to_json())
    violations = sum(1 for r in rows if not r[-1])
    payload = _header(cfg, seed, "verify")
    payload["violations"] = violations
    payload["reports"] = reports
    paths = write_outputs(out, "verify", payload, CSV_COLUMNS["verify"], rows)
    print(f"violations: {violations}")
    return paths, (EXIT_INTERNAL if violations else 0)


_SWEEP_METRICS = ("total", "normalized", "m_uniformity")


def _sweep_one(args):
    scheme, spec, metric, block, seeds = args
    vals = []
    for s in seeds:
        rep = _simulate_one((scheme, spec, s))
        if metric == "m_uniformity":
            vals.append(rep.blocks[block - 1].m_uniformity)
        else:
            vals.append(getattr(rep, metric))
    return vals


def cmd_sweep(cfg, seed, out, jobs=1):
    scheme = cfg.get("scheme", "p2p")
    param = _need(cfg, "param")
    values = _need(cfg, "values")
    metric = cfg.get("metric", "normalized")
    if metric not in _SWEEP_METRICS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {_SWEEP_METRICS}")
    n = int(cfg.get("n_codebooks", 1))
    block = int(cfg.get("block", 2))
    tasks = []
    for v in values:
        sub = copy.deepcopy(cfg)
        sub.setdefault("spec", {})[param] = v
        _, spec = _scheme_spec(sub, seed)
        if metric == "m_uniformity" and not 2 <= block <= spec.K:
            raise ConfigError("m_uniformity needs 2 <= block <= K")
        tasks.append((scheme, spec, metric, block, _replicate_seeds(seed, n)))
    results = _map(_sweep_one, tasks, jobs)
    rows = []
    for v, vals in zip(values, results):
        a = np.asarray(vals, dtype=float)
        se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
        rows.append((param, v, metric, float(a.mean()), se, float(a.min()), a.size))
    payload = _header(cfg, seed, "sweep")
    payload["rows"] = [dict(zip(CSV_COLUMNS["sweep"], r)) for r in rows]
    return write_outputs(out, "sweep", payload, CSV_COLUMNS["sweep"], rows), 0


COMMANDS = {
    "bounds": cmd_bounds,
    "psi-curve": cmd_psi_curve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser():
    p = argparse.ArgumentParser(prog="seqsynth", description="Sequential channel synthesis bounds, scheme simulation and lemma checks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="seed (overrides the config's seed)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="override a config entry (dotted keys)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
        seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
        if seed < 0:
            raise ConfigError("seed must be nonnegative")
        cfg = dict(cfg, seed=seed)
        fn = COMMANDS[args.command]
        if args.command == "simulate":
            (jpath, cpath), code = fn(cfg, seed, args.out, args.jobs, seed_given=args.seed is not None)
        else:
            (jpath, cpath), code = fn(cfg, seed, args.out, args.jobs)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as e:
        print(f"capacity exceeded: {e.what} needs {e.cells} cells (limit {e.limit})", file=sys.stderr)
        return EXIT_CAPACITY
    except AssertionError as e:
        print(f"internal assertion failed: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    print(jpath)
    print(cpath)
    return code


if __name__ == "__main__":
    sys.exit(main())
