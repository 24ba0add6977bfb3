"""Command-line front end.

Exit status: 0 on success, 2 for configuration or input errors, 3 when a
numerical guard trips.  State indices in every output file are 1-based.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .embedding import build_embedded, embedded_filter
from .estimate import estimate
from .filter import INIT_MODES, run_filter
from .model import (BUNDLED_MODELS, ModelError, NumericalGuardError, load_bundled,
                    load_model)
from .simulate import simulate
from .smoother import run_smoother

EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3


class InputError(Exception):
    pass


def fmt(x) -> str:
    return f"{float(x):.17g}"


def _json_value(x):
    if isinstance(x, np.ndarray):
        return [_json_value(v) for v in x]
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, (np.integer, int)):
        return int(x)
    x = float(x)
    return None if math.isnan(x) else x


def read_model(source: str):
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in BUNDLED_MODELS:
            raise InputError(f"unknown builtin model {name!r}; choose from {', '.join(BUNDLED_MODELS)}")
        return load_bundled(name)
    if not Path(source).is_file():
        raise InputError(f"model file not found: {source}")
    return load_model(source)


def read_observations(path: str) -> np.ndarray:
    """Observations from a CSV with a ``y`` column, or a headerless single column."""
    if path != "-" and not Path(path).is_file():
        raise InputError(f"observations file not found: {path}")
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no observations")
    header = [c.strip() for c in rows[0]]
    if "y" in header:
        col, rows = header.index("y"), rows[1:]
    elif len(header) == 1:
        col = 0
    else:
        raise InputError(f"{path}: expected a 'y' column")
    try:
        y = np.array([float(r[col]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: unparsable observation ({exc})") from exc
    if y.size == 0:
        raise InputError(f"{path}: no observations")
    if not np.all(np.isfinite(y)):
        raise InputError(f"{path}: observations must be finite")
    return y


@contextmanager
def _output(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _need_obs(obs):
    if obs is None:
        raise InputError("model config has no 'observation' section")
    return obs


def cmd_simulate(args) -> int:
    model, obs = read_model(args.model)
    if args.horizon < 0:
        raise InputError("--horizon must be >= 0")
    path = simulate(model, obs, args.horizon, args.seed)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "state", "h"] + (["y"] if obs is not None else []))
        for k in range(path.horizon + 1):
            row = [k, int(path.states[k]) + 1, int(path.sojourn_clock[k])]
            if obs is not None:
                row.append(fmt(path.observations[k]))
            w.writerow(row)
    return EXIT_OK


def cmd_filter(args) -> int:
    model, obs = read_model(args.model)
    obs = _need_obs(obs)
    y = read_observations(args.obs)
    res = run_filter(model, obs, y, init=args.init)
    post = res.posteriors
    N = model.n_states
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "hhat", "map_state"] + [f"post_{i + 1}" for i in range(N)] + ["log_norm"])
        for k in range(y.size):
            w.writerow([k, int(res.h_hat[k]), int(res.map_state[k]) + 1]
                       + [fmt(v) for v in post[k]] + [fmt(res.log_norm[k])])
    return EXIT_OK


def cmd_smooth(args) -> int:
    model, obs = read_model(args.model)
    obs = _need_obs(obs)
    y = read_observations(args.obs)
    _, sp = run_smoother(model, obs, y, init=args.init)
    N = model.n_states
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"smoothed_{i + 1}" for i in range(N)])
        for k in range(y.size):
            w.writerow([k] + [fmt(v) for v in sp.smoothed[k]])
    return EXIT_OK


def cmd_estimate(args) -> int:
    model, obs = read_model(args.model)
    obs = _need_obs(obs)
    y = read_observations(args.obs)
    res = estimate(model, obs, y, init=args.init)
    undefined = [i + 1 for i in res["undefined_states"]]
    doc = {key: _json_value(res[key]) for key in ("a_hat", "N_hat", "J_hat", "c_hat", "d_hat")}
    doc["undefined_states"] = undefined
    with _output(args.out) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if undefined:
        print(f"estimate: states {undefined} were never visited; their re-estimates are null",
              file=sys.stderr)
        return EXIT_GUARD
    return EXIT_OK


def cmd_embed_filter(args) -> int:
    model, obs = read_model(args.model)
    obs = _need_obs(obs)
    y = read_observations(args.obs)
    if args.lognorm_out is None and args.out == "-":
        raise InputError("--lognorm-out is required when writing to stdout")
    side = args.lognorm_out or f"{args.out}.lognorm.csv"
    res = embedded_filter(build_embedded(model), obs, y, init=args.init)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "i", "posterior"])
        for k in range(y.size):
            for i in range(model.n_states):
                w.writerow([k, i + 1, fmt(res.marginals[k, i])])
    with _output(side) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "log_norm"])
        for k in range(y.size):
            w.writerow([k, fmt(res.log_norm[k])])
    return EXIT_OK


def crosscheck(model, obs, y, init: str = "bayes0") -> dict:
    approx = run_filter(model, obs, y, init=init)
    exact = embedded_filter(build_embedded(model), obs, y, init=init)
    tv = 0.5 * np.abs(approx.posteriors - exact.marginals).sum(axis=1)
    return {
        "steps": int(y.size),
        "max_tv": float(tv.max()),
        "mean_tv": float(tv.mean()),
        "argmax_tv": int(tv.argmax()),
        "log_norm_approx": float(approx.log_norm[-1]),
        "log_norm_exact": float(exact.log_norm[-1]),
    }


def cmd_crosscheck(args) -> int:
    model, obs = read_model(args.model)
    obs = _need_obs(obs)
    y = read_observations(args.obs)
    report = crosscheck(model, obs, y, init=args.init)
    with _output(args.out) as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semimarkov",
        description="Simulate, filter, smooth and estimate hidden semi-Markov chains.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, observations=True):
        p.add_argument("--model", required=True,
                       help="model JSON file, or builtin:NAME for a bundled model "
                            f"({', '.join(BUNDLED_MODELS)})")
        p.add_argument("--out", default="-", help="output file (default: stdout)")
        if observations:
            p.add_argument("--obs", required=True,
                           help="observations CSV with a 'y' column ('-' for stdin)")
            p.add_argument("--init", choices=INIT_MODES, default="bayes0",
                           help="bayes0: q_0 = B(y_0) p_0 (default); prior: q_0 = p_0")

    p = sub.add_parser("simulate", help="sample a path; CSV k,state,h[,y]")
    common(p, observations=False)
    p.add_argument("--horizon", type=int, required=True, help="last time index T")
    p.add_argument("--seed", type=int, required=True, help="non-negative RNG seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="forward filter; CSV k,hhat,map_state,post_*,log_norm")
    common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("smooth", help="fixed-interval smoother; CSV k,smoothed_*")
    common(p)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("estimate", help="statistics and re-estimates as JSON")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("embed-filter", help="exact lifted filter; CSV k,i,posterior")
    common(p)
    p.add_argument("--lognorm-out", default=None,
                   help="sidecar CSV k,log_norm (default: OUT.lognorm.csv)")
    p.set_defaults(func=cmd_embed_filter)

    p = sub.add_parser("crosscheck", help="approximate vs exact filter divergence as JSON")
    common(p)
    p.set_defaults(func=cmd_crosscheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "seed", 0) is not None and getattr(args, "seed", 0) < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ModelError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
