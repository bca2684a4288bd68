"""Command-line experiment runner.

    monkeywalk [run] <experiment> [--config PATH] [--seed U64] [--replicas N]
               [--t-grid LIST] [--out DIR] [--workers N] [--plots]
    monkeywalk validate --config PATH

Exit status: 0 when every asserted verdict passes, 1 when one fails,
2 for an invalid config or usage error, 3 when a run crashes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import experiments as ex
from . import svg
from .config import (ALLOWED, EXPERIMENTS, ExperimentConfig, apply_overrides, errors, load_config,
                     validate)
from .kernel import kernel_from_dict, runlen_from_dict
from .parallel import default_workers

DEFAULT_REPLICAS = {"wrrt-oracle": 100_000}


def _kwargs(cfg):
    kw = {**cfg.params, **cfg.tolerances}
    bad = sorted(set(kw) - set(ALLOWED[cfg.experiment]))
    if bad:
        raise ValueError(f"{cfg.experiment} does not take {', '.join(bad)}")
    return kw


def run_experiment(cfg, workers=1):
    """Dispatch a validated config to its experiment; returns the report."""
    kw = _kwargs(cfg)
    name = cfg.experiment
    reps = cfg.replicas if cfg.replicas is not None else DEFAULT_REPLICAS.get(name, 1000)
    if name == "wrrt-oracle":
        return ex.wrrt_oracle_experiment(kw.pop("weights", "constant"), int(kw.pop("n", 4)),
                                         reps, cfg.seed, **kw)
    if name == "profile":
        return ex.profile_experiment(kernel_from_dict(cfg.kernel), runlen_from_dict(cfg.runlen),
                                     cfg.t_grid, reps, cfg.seed, workers, cfg.axis, **kw)
    model = cfg.model()
    if name == "simulate":
        return ex.simulate_experiment(model, cfg.t_grid, reps, cfg.seed, workers, **kw)
    if name == "clt":
        return ex.clt_experiment(model, cfg.t_grid, reps, cfg.seed, workers, **kw)
    if name == "transfer":
        return ex.transfer_experiment(model, cfg.t_grid[0], reps, cfg.seed, workers, **kw)
    if name == "llt":
        return ex.llt_experiment(model, cfg.t_grid, reps, cfg.seed, workers, **kw)
    if name == "occupation":
        return ex.occupation_experiment(model, cfg.t_grid, reps, cfg.seed, workers, **kw)
    if name == "recurrence":
        if "late_threshold" in kw:
            kw["late_threshold"] = tuple(kw["late_threshold"])
        return ex.recurrence_experiment(model, kw.pop("horizon"), reps, cfg.seed, workers, **kw)
    if name == "timechange":
        return ex.timechange_experiment(model, cfg.t_grid, reps, cfg.seed, workers, **kw)
    raise ValueError(f"unknown experiment {name!r}")


# ---------------------------------------------------------------------------
# artifacts

def _num(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def table_csv(rep):
    cols = rep.columns()
    return _csv(cols, [[r.get(c) for c in cols] for r in rep.rows])


def samples_csv(rep):
    """Long-format per-replica draws, or None when the experiment keeps none."""
    s = rep.samples
    if rep.name == "simulate":
        x = s["positions"]
        t = rep.config["t_grid"]
        head = ["replica", "t"] + [f"x{j + 1}" for j in range(x.shape[2])]
        return _csv(head, ([i, t[k], *x[i, k]] for i in range(x.shape[0]) for k in range(x.shape[1])))
    if rep.name in ("clt", "transfer"):
        rows = []
        for t, (a, b) in s.items():
            kinds = ("standardized", "limit") if rep.name == "clt" else ("x", "z")
            rows += [[t, kinds[0], i, v] for i, v in enumerate(a)]
            rows += [[t, kinds[1], i, v] for i, v in enumerate(b)]
        return _csv(["t", "kind", "index", "value"], rows)
    if rep.name == "timechange":
        S = s["S"]
        t = rep.config["t_grid"]
        return _csv(["n_or_t", "value", "weight"],
                    ([t[k], S[i, k], 1.0] for k in range(S.shape[1]) for i in range(S.shape[0])))
    if rep.name == "profile":
        return _csv(["n_or_t", "value", "weight"],
                    ([n, h, m] for n, prof in s.items() for h, m in enumerate(prof)))
    if rep.name == "recurrence":
        return _csv(["replica", "late_return", "last_visit"],
                    ([i, bool(a), b] for i, (a, b) in enumerate(zip(s["late_return"], s["last_visit"]))))
    return None


def report_json(rep, cfg):
    d = rep.to_dict()
    d["provenance"]["run_config"] = cfg.echo()
    return json.dumps(_jsonable(d), indent=2) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def plots(rep):
    """{filename: svg text}: ECDF overlays and trend curves."""
    out = {}
    s = rep.samples
    rows = rep.rows
    if rep.name == "clt" and s:
        t = max(s)
        out["ecdf.svg"] = svg.ecdf_plot({"standardized X(t)": s[t][0], "limit": s[t][1]},
                                        f"clt at t = {t:g}")
    if rep.name == "transfer" and s:
        t = max(s)
        out["ecdf.svg"] = svg.ecdf_plot({"X(t)": s[t][0], "Z(kappa2 s(t))": s[t][1]},
                                        f"transfer at t = {t:g}")
    if rep.name == "timechange" and "direct" in s:
        out["ecdf.svg"] = svg.ecdf_plot({"direct": s["direct"], "composed": s["composed"]},
                                        "X(t) vs Z(S(t))")
    trend = {"clt": ("t", "D"), "llt": ("t", "sup_scaled"), "occupation": ("t", "mean_dist"),
             "profile": ("n", "mean_ks"), "timechange": ("t", "D_normal")}
    if rep.name in trend:
        xk, yk = trend[rep.name]
        pts = [(r[xk], r[yk]) for r in rows if r.get(yk) is not None]
        if pts:
            x, y = zip(*pts)
            out["trend.svg"] = svg.line_plot([(yk, x, y)], f"{rep.name}: {yk}", xk, yk, logx=True)
    if rep.name == "recurrence":
        pts = [(r["window_hi"], r["frac_any"]) for r in rows[:-1]]
        if pts:
            x, y = zip(*pts)
            out["trend.svg"] = svg.line_plot([("fraction with a visit", x, y)],
                                             "visits to 0 per dyadic window", "window end",
                                             "fraction", logx=True)
    return out


def write_artifacts(rep, cfg, out):
    os.makedirs(out, exist_ok=True)
    files = {"report.json": report_json(rep, cfg), "table.csv": table_csv(rep),
             "report.txt": rep.to_text() + "\n"}
    smp = samples_csv(rep)
    if smp is not None:
        files["samples.csv"] = smp
    if rep.name == "timechange" and "direct" in rep.samples:
        t = rep.config["t_grid"][-1]
        files["direct_vs_composed.csv"] = _csv(
            ["t", "kind", "index", "value"],
            [[t, kind, i, v] for kind in ("direct", "composed") for i, v in enumerate(rep.samples[kind])])
    if rep.name == "simulate" and "summaries" in rep.samples:
        files["trajectories.json"] = json.dumps(_jsonable(rep.samples["summaries"]), indent=1) + "\n"
    if rep.name == "wrrt-oracle":
        files["law.json"] = json.dumps({r["tree"]: r["probability"] for r in rep.rows}, indent=1) + "\n"
    if cfg.plots:
        files.update(plots(rep))
    for name, text in files.items():
        with open(os.path.join(out, name), "w", newline="") as fh:
            fh.write(text)
    return sorted(files)


def run(cfg, stdout=None):
    """Validate, run and write artifacts; returns the exit status."""
    stdout = stdout or sys.stdout
    diag = validate(cfg)
    for d in diag:
        print(f"{d.level}: {d.code}: {d.message}", file=sys.stderr)
    if errors(diag):
        return 2
    workers = cfg.workers or default_workers()
    try:
        rep = run_experiment(cfg, workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if cfg.out:
        write_artifacts(rep, cfg, cfg.out)
    print(rep.to_text(), file=stdout)
    return 0 if rep.passed else 1


# ---------------------------------------------------------------------------
# argument parsing

def _grid(s):
    return [float(v) for v in s.replace(";", ",").split(",") if v.strip()]


def _weights(s):
    if s in ex.WEIGHT_FAMILIES:
        return s
    return [float(v) for v in s.split(",")]


def _parser():
    p = argparse.ArgumentParser(prog="monkeywalk", description="Monkey walk experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("validate",):
        q = sub.add_parser(name)
        q.add_argument("--config", help="JSON config file")
        if name == "validate":
            continue
        q.add_argument("--seed", type=int)
        q.add_argument("--replicas", type=int)
        q.add_argument("--t-grid", type=_grid, help="comma separated times (n grid for profile)")
        q.add_argument("--out", help="output directory")
        q.add_argument("--workers", type=int, help="worker processes (default: all cores)")
        q.add_argument("--plots", action="store_true", default=None, help="also write SVG plots")
        if name == "wrrt-oracle":
            q.add_argument("--n", type=int, help="tree size, 2..6")
            q.add_argument("--weights", type=_weights,
                           help="constant | geometric | dominant | comma separated weights")
        if name == "recurrence":
            q.add_argument("--horizon", type=int)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["run"]:
        argv = argv[1:]
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            if not args.config:
                print("error: validate needs --config", file=sys.stderr)
                return 2
            cfg = load_config(args.config)
            diag = validate(cfg)
            print(json.dumps([d.to_dict() for d in diag], indent=2))
            return 2 if errors(diag) else 0
        if args.config:
            cfg = load_config(args.config, args.command)
        else:
            cfg = ExperimentConfig(args.command, replicas=None)
        if cfg.replicas is None and args.replicas is None:
            cfg.replicas = DEFAULT_REPLICAS.get(cfg.experiment, 1000)
        t_grid = args.t_grid
        if t_grid is not None and cfg.experiment == "profile":
            t_grid = [int(v) for v in t_grid]
        apply_overrides(cfg, seed=args.seed, replicas=args.replicas, t_grid=t_grid,
                        out=args.out, workers=args.workers, plots=args.plots,
                        n=getattr(args, "n", None), weights=getattr(args, "weights", None),
                        horizon=getattr(args, "horizon", None))
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
