"""Config-driven experiment runner.

``subfrac run`` executes one experiment (bbm, ms, props or constants) from a
TOML file and/or flags and writes ``sweep.csv``, ``verdicts.json`` and
``manifest.json``. ``subfrac constants`` and ``subfrac props`` are shortcuts.

Exit codes: 0 when every gating verdict passes or is inconclusive, 2 on a
hard fail or numerical divergence, 1 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy
import tomli

from . import __version__
from .asymptotics import (
    BBM_GRID,
    MS_GRID,
    NonConvergentError,
    Verdict,
    bbm_sweep,
    ms_sweep,
    verify_geometry,
    verify_inequalities,
)
from .functionals import gagliardo_sweep, make_field
from .group import GROUPS, get_gauge, get_group
from .orlicz import NotOrliczError, make_orlicz, minkowski_check
from .quadrature import BALL_VOLUME_SPEC, QuadratureSpec, ball_volume, sphere_integral

log = logging.getLogger("subfrac")

EXPERIMENTS = ("bbm", "ms", "props", "constants")
DEFAULT_GAUGE = {"r1": "euclidean", "r2": "euclidean", "r3": "euclidean", "h1": "koranyi"}
PROPS_GRID = (0.3, 0.5, 0.7, 0.9)
CSV_COLUMNS = ("s", "raw_energy", "scaled_energy", "stderr", "near_field", "far_field", "tail_analytic")


class UsageError(Exception):
    """Bad flags, bad config values or unknown identifiers (exit 1)."""


@dataclass
class ExperimentConfig:
    experiment: str = "ms"
    group: str = "r1"
    gauge: str | None = None
    orlicz: dict[str, Any] = dc_field(default_factory=lambda: {"family": "power", "p": 2.0})
    field: dict[str, Any] = dc_field(default_factory=lambda: {"name": "bump", "radius": 1.0})
    quad: dict[str, Any] = dc_field(
        default_factory=lambda: {"samples": 2**16, "seed": 0, "annuli": 1, "r_min": 1e-4, "method": "qmc"}
    )
    s_grid: list[float] | None = None
    output_dir: str = "subfrac-out"
    workers: int | None = None

    def resolved(self) -> ExperimentConfig:
        """Fill per-experiment defaults and validate every field."""
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.group not in GROUPS:
            raise UsageError(f"unknown group {self.group!r}; expected one of {sorted(GROUPS)}")
        gauge = self.gauge or DEFAULT_GAUGE[self.group]
        grid = self.s_grid
        if grid is None:
            grid = {"bbm": BBM_GRID, "ms": MS_GRID, "props": PROPS_GRID}.get(self.experiment, ())
        grid = [float(s) for s in grid]
        if not all(0 < s < 1 for s in grid):
            raise UsageError("s_grid must lie in (0, 1)")
        if len(set(grid)) != len(grid):
            raise UsageError("s_grid has repeated values")
        quad = {"samples": 2**16, "seed": 0, "annuli": 1, "r_min": 1e-4, "method": "qmc", **self.quad}
        unknown = set(quad) - {"samples", "seed", "annuli", "r_min", "method"}
        if unknown:
            raise UsageError(f"unknown quad keys {sorted(unknown)}")
        if int(quad["samples"]) < 1000:
            raise UsageError("quad.samples must be at least 1000")
        out = replace(self, gauge=gauge, s_grid=grid, quad=quad)
        try:
            out.build()
        except (ValueError, NotOrliczError) as exc:
            raise UsageError(str(exc)) from None
        return out

    def spec(self) -> QuadratureSpec:
        q = self.quad
        return QuadratureSpec(
            method=str(q["method"]),
            samples=int(q["samples"]),
            seed=int(q["seed"]),
            r_min=float(q["r_min"]),
            annuli=int(q["annuli"]),
            workers=self.workers,
        )

    def build(self):
        g = get_group(self.group)
        ng = get_gauge(g, self.gauge or DEFAULT_GAUGE[self.group])
        phi = make_orlicz(str(self.orlicz["family"]), float(self.orlicz["p"]))
        u = make_field(str(self.field["name"]), g, ng, self.field.get("radius"))
        return g, ng, phi, u, self.spec()

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("workers")  # results do not depend on the thread count
        return d


# Parsing ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage errors are 1 here
        raise UsageError(message)


def _pair(text: str, key: str, value: str) -> dict[str, Any]:
    name, _, num = text.partition(":")
    if not name:
        raise UsageError(f"bad value {text!r}; expected name[:number]")
    out: dict[str, Any] = {key: name}
    if num:
        try:
            out[value] = float(num)
        except ValueError:
            raise UsageError(f"bad number in {text!r}") from None
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad s grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subfrac", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"subfrac {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="TOML file; flags override its values")
        p.add_argument("--group", help="r1, r2, r3 or h1")
        p.add_argument("--gauge", help="koranyi or euclidean (default depends on the group)")
        p.add_argument("--orlicz", help="family:p, e.g. power:2 or power_log:2")
        p.add_argument("--field", help="name[:radius], e.g. bump:1 or gauss:8")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--annuli", type=int)
        p.add_argument("--r-min", type=float, dest="r_min")
        p.add_argument("--method", choices=("qmc", "grid"))
        p.add_argument("--s-grid", dest="s_grid", help="comma-separated s values")
        p.add_argument("--output-dir", dest="output_dir", type=Path)
        p.add_argument("--workers", type=int, help="thread count (default: SUBFRAC_THREADS or 1)")
        p.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", help="run one experiment")
    common(run)
    run.add_argument("--experiment", choices=EXPERIMENTS)
    common(sub.add_parser("constants", help="print C_b, Q, QC_b and sigma(S)"))
    common(sub.add_parser("props", help="run the inequality and geometry suite"))
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if args.config is not None:
        try:
            data = tomli.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}")
    cfg = ExperimentConfig(**data)
    if args.command != "run":
        cfg.experiment = args.command
    elif args.experiment:
        cfg.experiment = args.experiment
    for name in ("group", "gauge", "workers"):
        if getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if args.orlicz:
        o = _pair(args.orlicz, "family", "p")
        if "p" not in o:
            raise UsageError("--orlicz needs family:p")
        cfg.orlicz = o
    if args.field:
        cfg.field = _pair(args.field, "name", "radius")
    cfg.quad = dict(cfg.quad)
    for name in ("samples", "seed", "annuli", "r_min", "method"):
        if getattr(args, name) is not None:
            cfg.quad[name] = getattr(args, name)
    if args.s_grid:
        cfg.s_grid = _floats(args.s_grid)
    if args.output_dir is not None:
        cfg.output_dir = str(args.output_dir)
    return cfg.resolved()


# Experiments -------------------------------------------------------------------


@dataclass
class Outcome:
    rows: list[dict[str, float]] = dc_field(default_factory=list)
    verdicts: list[Verdict] = dc_field(default_factory=list)
    extra: dict[str, Any] = dc_field(default_factory=dict)
    timings: dict[str, float] = dc_field(default_factory=dict)


class _Timer:
    def __init__(self, timings: dict[str, float], name: str):
        self.timings, self.name = timings, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.timings[self.name] = round(time.perf_counter() - self.t0, 3)


def run_experiment(cfg: ExperimentConfig) -> Outcome:
    g, ng, phi, u, spec = cfg.build()
    out = Outcome()
    with _Timer(out.timings, "ball_volume"):
        cb = ball_volume(g, ng)
    if cfg.experiment in ("bbm", "ms"):
        with _Timer(out.timings, "sweep"):
            if cfg.experiment == "bbm":
                res = bbm_sweep(u, phi, g, ng, cfg.s_grid, spec)
            else:
                res = ms_sweep(u, phi, g, ng, cfg.s_grid, spec, minkowski=minkowski_check(phi).holds)
        out.rows = res.rows()
        out.verdicts = res.verdicts
        out.extra = {
            "regime": res.regime,
            "extrapolated": res.extrapolated,
            "extrapolation_error": res.error,
            "extrapolation_residual": res.extrapolation_residual,
            "targets": res.targets,
            "target_errors": res.target_errors,
        }
        if cfg.experiment == "ms":
            mk = minkowski_check(phi)
            out.extra["minkowski"] = {"holds": mk.holds, "worst_relative_excess": mk.worst, "trials": mk.trials}
    elif cfg.experiment == "props":
        with _Timer(out.timings, "geometry"):
            out.verdicts += verify_geometry(g, ng, spec)
        with _Timer(out.timings, "inequalities"):
            out.verdicts += verify_inequalities(u, phi, g, ng, cfg.s_grid, spec)
        with _Timer(out.timings, "energies"):
            for s, e in zip(cfg.s_grid, gagliardo_sweep(u, phi, cfg.s_grid, g, ng, spec)):
                out.rows.append(dict(s=s, raw_energy=e.total, scaled_energy=e.total, stderr=e.stderr,
                                     near_field=e.near_field, far_field=e.far_field, tail_analytic=e.tail_analytic))
    else:
        with _Timer(out.timings, "sphere"):
            sig = sphere_integral(lambda z: np.ones(len(z)), g, ng, spec)
        out.extra = constants_table(g, ng, cb, sig)
    return out


def constants_table(g, ng, cb, sig) -> dict[str, Any]:
    return {
        "group": g.name,
        "gauge": ng.kind,
        "Q": g.Q,
        "C_b": cb.value,
        "C_b_stderr": cb.stderr,
        "QC_b": g.Q * cb.value,
        "QC_b_stderr": g.Q * cb.stderr,
        "sigma_S": sig.value,
        "sigma_S_stderr": sig.stderr,
    }


# Output ----------------------------------------------------------------------


def _dump(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")


def write_artifacts(cfg: ExperimentConfig, out: Outcome) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "constants":
        _dump(d / "constants.json", out.extra)
    else:
        with open(d / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\r\n")
            w.writeheader()
            for row in out.rows:
                w.writerow({k: repr(float(row[k])) for k in CSV_COLUMNS})
        _dump(d / "verdicts.json", {"verdicts": [v.to_dict() for v in out.verdicts], "summary": out.extra})
    counts = {k: sum(v.status == k for v in out.verdicts) for k in ("pass", "fail", "inconclusive")}
    counts["hard_fail"] = sum(v.hard_fail for v in out.verdicts)
    manifest = {
        "config": cfg.echo(),
        "tool": {"name": "subfrac", "version": __version__},
        "environment": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "timings_seconds": out.timings,
        "cached_constants": {
            "C_b": {
                "value": ball_volume(get_group(cfg.group), get_gauge(cfg.group, cfg.gauge)).value,
                "samples": BALL_VOLUME_SPEC.samples,
                "seed": BALL_VOLUME_SPEC.seed,
            }
        },
        "verdict_summary": counts,
    }
    _dump(d / "manifest.json", manifest)
    return d


def _print_summary(cfg: ExperimentConfig, out: Outcome) -> None:
    if cfg.experiment == "constants":
        c = out.extra
        print(f"group {c['group']} gauge {c['gauge']}  Q = {c['Q']}")
        print(f"C_b     = {c['C_b']:.7f} +/- {c['C_b_stderr']:.1e}")
        print(f"QC_b    = {c['QC_b']:.7f} +/- {c['QC_b_stderr']:.1e}")
        print(f"sigma(S)= {c['sigma_S']:.7f} +/- {c['sigma_S_stderr']:.1e}")
        return
    if "extrapolated" in out.extra:
        print(f"{cfg.experiment}: extrapolated {out.extra['extrapolated']:.6g} +/- {out.extra['extrapolation_error']:.2g}")
    for v in out.verdicts:
        flag = "" if v.gating else " (non-gating)"
        print(f"{v.status.upper():13s} {v.name}{flag} lhs={v.lhs:.6g} rhs={v.rhs:.6g} err={v.error:.2g} {v.params or ''}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        cfg = load_config(args)
    except UsageError as exc:
        print(f"subfrac: error: {exc}", file=sys.stderr)
        return 1
    try:
        out = run_experiment(cfg)
    except (NonConvergentError, FloatingPointError, ArithmeticError) as exc:
        print(f"subfrac: numerical divergence: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"subfrac: error: {exc}", file=sys.stderr)
        return 1
    path = write_artifacts(cfg, out)
    _print_summary(cfg, out)
    log.info("artifacts written to %s", path)
    return 2 if any(v.hard_fail for v in out.verdicts) else 0


if __name__ == "__main__":
    sys.exit(main())
