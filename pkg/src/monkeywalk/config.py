"""Experiment configs: JSON parsing, flag overrides and cross-field validation.

A config is a flat JSON object::

    {"experiment": "clt", "axis": "discrete",
     "kernel": {"family": "mu1", "alpha": 1, "beta": 1},
     "runlen": {"family": "geometric", "q": 0.5},
     "process": {"family": "lazy_srw", "d": 1, "p_lazy": 0.5},
     "t_grid": [1000, 10000], "replicas": 1000, "seed": 1,
     "params": {}, "tolerances": {}}

``validate`` never raises on bad input; it returns every problem it finds as
a ``Diagnostic`` with a stable machine-readable code.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field

from .kernel import Mu2, check_runlen_axis, kernel_from_dict, runlen_from_dict
from .monkey import MonkeyModel
from .process import BrownianMotion, LazySRW, process_from_dict

EXPERIMENTS = ("simulate", "clt", "transfer", "llt", "occupation", "recurrence", "profile",
               "wrrt-oracle", "timechange")

# keyword arguments each experiment accepts from params / tolerances
ALLOWED = {
    "simulate": ("method",),
    "clt": ("limit_draws", "level", "assert_ks", "method"),
    "transfer": ("level", "method"),
    "llt": ("omega_draws", "method"),
    "occupation": ("eps", "limit_draws", "h"),
    "recurrence": ("horizon", "eta", "h", "late_threshold"),
    "profile": ("mean_tol",),
    "timechange": ("method", "compare_direct", "level"),
    "wrrt-oracle": ("n", "weights", "tol", "sum_tol"),
}
WEIGHT_FAMILIES = ("constant", "geometric", "dominant")

PREASYMPTOTIC_T = 1e3


@dataclass
class ExperimentConfig:
    experiment: str
    axis: str = "discrete"
    kernel: dict = field(default_factory=lambda: {"family": "mu1", "alpha": 1.0, "beta": 1.0})
    runlen: dict = field(default_factory=lambda: {"family": "geometric", "q": 0.5})
    process: dict = field(default_factory=lambda: {"family": "lazy_srw", "d": 1})
    x0: list | None = None
    t_grid: list = field(default_factory=list)
    replicas: int | None = 1000
    seed: int = 0
    out: str | None = None
    workers: int | None = None
    plots: bool = False
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def echo(self):
        """The fields that determine the numbers (no output path, no worker count)."""
        d = self.to_dict()
        for k in ("out", "workers", "plots"):
            d.pop(k)
        return d

    def model(self):
        return MonkeyModel(kernel_from_dict(self.kernel), runlen_from_dict(self.runlen),
                           process_from_dict(self.process), self.axis,
                           None if self.x0 is None else tuple(float(v) for v in self.x0))


@dataclass(frozen=True)
class Diagnostic:
    level: str      # "error" or "warning"
    code: str
    message: str

    def to_dict(self):
        return {"level": self.level, "code": self.code, "message": self.message}


_KEYS = set(ExperimentConfig.__dataclass_fields__)


def config_from_dict(d, experiment=None):
    d = copy.deepcopy(d)
    unknown = sorted(set(d) - _KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    if experiment is not None:
        d["experiment"] = experiment
    if "experiment" not in d:
        raise ValueError("config has no experiment name")
    return ExperimentConfig(**d)


def load_config(path, experiment=None):
    with open(path) as fh:
        return config_from_dict(json.load(fh), experiment)


def apply_overrides(cfg, **kw):
    """Flags win over file values; None means 'not given'."""
    for k, v in kw.items():
        if v is None:
            continue
        if k in ("n", "horizon", "weights"):
            cfg.params[k] = v
        else:
            setattr(cfg, k, v)
    return cfg


def _err(code, msg):
    return Diagnostic("error", code, msg)


def _build(diag, code, fn, d):
    try:
        return fn(d)
    except (ValueError, KeyError, TypeError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else f"missing key {exc}"
        diag.append(_err(code, msg))
        return None


def validate(cfg):
    """List of Diagnostics; the config is runnable iff none has level 'error'."""
    diag = []
    if cfg.experiment not in EXPERIMENTS:
        diag.append(_err("unknown_experiment", f"experiment must be one of {', '.join(EXPERIMENTS)}"))
        return diag
    if cfg.axis not in ("discrete", "continuous"):
        diag.append(_err("unknown_axis", f"unknown time axis {cfg.axis!r}"))
    if cfg.replicas is not None and (not isinstance(cfg.replicas, int) or cfg.replicas < 0):
        diag.append(_err("replicas", "replicas must be a nonnegative integer"))
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        diag.append(_err("seed", "seed must be an unsigned 64-bit integer"))
    if cfg.workers is not None and cfg.workers < 1:
        diag.append(_err("workers", "workers must be >= 1"))
    bad = sorted((set(cfg.params) | set(cfg.tolerances)) - set(ALLOWED[cfg.experiment]))
    if bad:
        diag.append(_err("unknown_param", f"{cfg.experiment} does not take {', '.join(bad)}"))

    if cfg.experiment == "wrrt-oracle":
        n = cfg.params.get("n", 4)
        if not isinstance(n, int) or not 2 <= n <= 6:
            diag.append(_err("wrrt_n", "wrrt-oracle enumerates trees with 2 <= n <= 6"))
        w = cfg.params.get("weights")
        if isinstance(w, str):
            if w not in WEIGHT_FAMILIES:
                diag.append(_err("wrrt_weights", f"unknown weight family {w!r}"))
        elif w is not None and (len(w) < n or any(x <= 0 for x in w[:n])):
            diag.append(_err("wrrt_weights", "enumeration needs n positive weights"))
        return diag

    kernel = _build(diag, "kernel", kernel_from_dict, cfg.kernel)
    runlen = _build(diag, "runlen", runlen_from_dict, cfg.runlen)
    if runlen is not None and cfg.axis in ("discrete", "continuous"):
        try:
            check_runlen_axis(runlen, cfg.axis)
        except ValueError as exc:
            diag.append(_err("runlen_axis", str(exc)))
    if runlen is not None and not getattr(runlen, "finite_eighth_moment", False):
        diag.append(_err("runlen_moments", "the run-length law needs E L^8 < infinity"))

    grid = cfg.t_grid if cfg.experiment != "recurrence" else [cfg.params.get("horizon", 0)]
    if not grid or any(not t > 0 for t in grid):
        diag.append(_err("t_grid", "the t/n grid must be nonempty and positive"))
    elif max(grid) < PREASYMPTOTIC_T:
        diag.append(Diagnostic("warning", "preasymptotic",
                               f"max t = {max(grid):g} < {PREASYMPTOTIC_T:g}: limit comparisons "
                               "are preasymptotic"))

    if cfg.experiment == "profile":
        if isinstance(kernel, Mu2) and kernel.delta >= 0.5:
            diag.append(_err("profile_delta", "the profile limit needs delta in (0,1/2) for mu2"))
        return diag

    proc = _build(diag, "process", process_from_dict, cfg.process)
    if proc is None:
        return diag
    if cfg.axis != proc.axis:
        if isinstance(proc, BrownianMotion):
            diag.append(_err("axis_process", "Brownian motion needs the continuous time axis"))
        else:
            diag.append(_err("axis_process", f"{proc.family} needs the discrete time axis"))
    if cfg.x0 is not None and len(cfg.x0) != proc.d:
        diag.append(_err("x0", "x0 has the wrong dimension"))

    ex = cfg.experiment
    if ex == "occupation" and isinstance(kernel, Mu2) and kernel.delta >= 0.5:
        diag.append(_err("occupation_delta",
                         "occupation-measure convergence assumes delta in (0,1/2) when mu = mu2; "
                         f"got delta = {kernel.delta:g}"))
    if ex == "llt":
        if not getattr(proc, "lattice", False):
            diag.append(_err("llt_lattice", "the local limit theorem needs a lattice walk"))
        if proc.family == "heavy_tailed_rw":
            diag.append(_err("llt_f", "the local limit theorem needs f = 1 (finite variance steps)"))
    if ex == "recurrence":
        if not isinstance(proc, (LazySRW, BrownianMotion)):
            diag.append(_err("recurrence_process",
                             "recurrence is defined for the lazy walk or Brownian motion"))
        if cfg.x0 is not None and any(v != 0 for v in cfg.x0):
            diag.append(_err("recurrence_x0", "recurrence needs X(0) = 0"))
        if not isinstance(kernel, Mu2) or kernel.delta != 0.5:
            diag.append(Diagnostic("warning", "recurrence_kernel",
                                   "the recurrence dichotomy is stated for mu2 with delta = 1/2"))
    if ex == "transfer" and len(cfg.t_grid) != 1:
        diag.append(_err("transfer_t", "transfer compares at a single t"))
    return diag


def errors(diag):
    return [d for d in diag if d.level == "error"]
