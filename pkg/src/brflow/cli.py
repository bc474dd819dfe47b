"""``brflow`` command-line interface."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from . import catalog as cat
from .analysis import BasinResult, classify_basin_a9i
from .catalog import ClassParams, EndBehavior
from .errors import BrflowError, ConfigError
from .integrator import IntegratorOptions
from .seeds import Seed, default_horizon, load_seeds, run_and_analyze
from .verification import SUITES, default_seed, run_suite

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNRESOLVED = 2

_CONFIG_KEYS = ("class", "params", "lambdas", "integrator", "outputs", "horizon")
_OUTPUT_KEYS = ("trajectory_csv", "report_json")


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutputSpec:
    trajectory_csv: Optional[str] = None
    report_json: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """A validated ``simulate`` configuration.

    ``class_name`` may be a concrete class or one of the families ``A7``,
    ``A9`` and ``A10``, which pick the sub-case from the data.
    """

    class_name: str
    params: dict = field(default_factory=dict)
    lambdas: Optional[tuple[float, ...]] = None
    integrator: dict = field(default_factory=dict)
    outputs: tuple[OutputSpec, ...] = ()
    horizon: Optional[float] = None

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> RunConfig:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
        return cls.from_mapping(doc, source)

    @classmethod
    def from_mapping(cls, doc, source: str = "<config>") -> RunConfig:
        def fail(where: str, msg: str):
            raise ConfigError(f"{source}: field '{where}': {msg}")

        if not isinstance(doc, dict):
            raise ConfigError(f"{source}: top level must be a JSON object")
        unknown = sorted(set(doc) - set(_CONFIG_KEYS))
        if unknown:
            fail(unknown[0], f"unknown key; allowed keys are {', '.join(_CONFIG_KEYS)}")
        if "class" not in doc:
            fail("class", "missing required key")
        name = doc["class"]
        known = {c.value for c in cat.ClassId} | {"A7", "A9", "A10"}
        if not isinstance(name, str) or name not in known:
            fail("class", f"unknown class {name!r}")

        params = doc.get("params", {})
        if not isinstance(params, dict):
            fail("params", "must be an object")
        for key, value in params.items():
            if key not in ClassParams.__dataclass_fields__:
                fail(f"params.{key}", "unknown parameter")
            if not _is_real(value):
                fail(f"params.{key}", f"must be a real number, got {value!r}")

        lam = doc.get("lambdas")
        if lam is not None:
            if not isinstance(lam, list) or len(lam) != 4 or not all(_is_real(x) for x in lam):
                fail("lambdas", "must be a list of 4 real numbers")
            for i, x in enumerate(lam):
                if not x > 0.0:
                    fail(f"lambdas[{i}]", f"metric coefficients must be positive, got {x}")
            lam = tuple(float(x) for x in lam)

        integ = doc.get("integrator", {})
        if not isinstance(integ, dict):
            fail("integrator", "must be an object")
        for key in integ:
            if key not in IntegratorOptions.__dataclass_fields__:
                fail(f"integrator.{key}", f"unknown option; allowed are {', '.join(IntegratorOptions.__dataclass_fields__)}")

        outs = doc.get("outputs", [])
        if not isinstance(outs, list):
            fail("outputs", "must be a list of objects")
        specs = []
        for i, o in enumerate(outs):
            if not isinstance(o, dict):
                fail(f"outputs[{i}]", "must be an object")
            for key in o:
                if key not in _OUTPUT_KEYS:
                    fail(f"outputs[{i}].{key}", f"unknown key; allowed keys are {', '.join(_OUTPUT_KEYS)}")
                if not isinstance(o[key], str) or not o[key]:
                    fail(f"outputs[{i}].{key}", "must be a non-empty path string")
            specs.append(OutputSpec(**o))

        horizon = doc.get("horizon")
        if horizon is not None and not (_is_real(horizon) and horizon > 0.0):
            fail("horizon", "must be a positive real number")

        cfg = cls(name, {k: float(v) for k, v in params.items()}, lam, dict(integ), tuple(specs),
                  None if horizon is None else float(horizon))
        try:
            cfg.resolve()
            cfg.options()
        except BrflowError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        return cfg

    def resolve(self) -> cat.Resolved:
        lie = self.class_name.startswith("A")
        if lie and self.lambdas is None:
            raise ConfigError(f"field 'lambdas': class {self.class_name} needs 4 initial coefficients")
        if not lie and self.lambdas is not None:
            raise ConfigError(f"field 'lambdas': class {self.class_name} is built from the radii r1/r2, drop 'lambdas'")
        return cat.resolve_class(self.class_name, self.lambdas, ClassParams(**self.params))

    def options(self) -> IntegratorOptions:
        return IntegratorOptions.from_mapping(self.integrator)

    def resolved_dict(self) -> dict:
        """The configuration with defaults and the chosen sub-case filled in."""
        r = self.resolve()
        return {
            "class": self.class_name,
            "resolved_class": r.id.value,
            "frame_permutation": list(r.permutation),
            "params": r.params.as_dict(),
            "lambdas": None if r.init is None else list(r.init.lambdas),
            "initial_metric": list(cat.initial_metric(r.id, r.init, r.params)),
            "integrator": _options_dict(self.options()),
            "horizon": self.horizon if self.horizon is not None else default_horizon(r),
            "outputs": [{k: v for k, v in vars(o).items() if v is not None} for o in self.outputs],
        }


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _options_dict(opts: IntegratorOptions) -> dict:
    return {name: getattr(opts, name) for name in IntegratorOptions.__dataclass_fields__}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_list_classes(as_json: bool, out=None) -> int:
    out = out or sys.stdout
    rows = [
        {
            "class": s.id.value,
            "geometry": s.geometry,
            "group_structure": s.group_structure,
            "predicted_behaviors": [b.value for b in s.predicted_behaviors],
            "params": list(s.param_names),
            "diagonal_condition": s.diagonal_condition,
        }
        for s in cat.catalog()
    ]
    if as_json:
        json.dump({"version": __version__, "classes": rows}, out, indent=2)
        out.write("\n")
        return EXIT_OK
    for r in rows:
        out.write(f"{r['class']:<12} {r['geometry']:<45} {{{', '.join(r['predicted_behaviors'])}}}\n")
        out.write(f"{'':<12} {r['group_structure']}\n")
    return EXIT_OK


def cmd_simulate(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    r = config.resolve()
    traj, report = run_and_analyze(r, config.options(), horizon=config.horizon)
    doc = {"tool": "brflow", "version": __version__, "config": config.resolved_dict(), "report": report.to_dict()}
    for o in config.outputs:
        if o.trajectory_csv:
            traj.to_csv(o.trajectory_csv)
        if o.report_json:
            with open(o.report_json, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(doc, fh, indent=2)
                fh.write("\n")
    t0 = report.t0_estimate
    out.write(f"class {report.class_id.value}: {report.label.value}")
    out.write(f", T0 = {t0.value:.10g}\n" if t0 is not None else f", runs to t = {report.t_end:.6g}\n")
    if report.basin is not None:
        out.write(f"basin {report.basin.label.value}\n")
    return EXIT_UNRESOLVED if report.label is EndBehavior.Unresolved else EXIT_OK


def cmd_verify(scope: str, seed: Optional[int], as_json: bool, out=None) -> int:
    out = out or sys.stdout
    names = SUITES if scope == "all" else (scope,)
    seed = default_seed() if seed is None else seed
    reports = [run_suite(n, seed) for n in names]
    if as_json:
        json.dump({"tool": "brflow", "version": __version__, "seed": seed, "suites": [r.to_dict() for r in reports]}, out, indent=2)
        out.write("\n")
    else:
        for r in reports:
            out.write("\n".join(r.lines()) + "\n")
            out.write(f"[{r.suite}] {'PASS' if r.passed else 'FAIL'}\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ERROR


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    """Ordered map, fanned out over processes when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def parse_grid(specs: Iterable[str]) -> dict[str, np.ndarray]:
    """Parse ``l1=1:3:20,l2=1,l3=0.2:3:20`` into per-axis value arrays.

    ``lo:hi:n`` is an inclusive linear range of ``n`` points; a single number
    fixes the axis.
    """
    axes: dict[str, np.ndarray] = {}
    for spec in specs:
        for part in filter(None, (p.strip() for p in spec.split(","))):
            key, sep, val = part.partition("=")
            key = key.strip()
            if not sep or key not in ("l1", "l2", "l3"):
                raise ConfigError(f"grid entry {part!r}: expected l1=..., l2=... or l3=...")
            try:
                bits = [float(b) for b in val.split(":")]
            except ValueError:
                raise ConfigError(f"grid entry {part!r}: values must be numbers") from None
            if len(bits) == 1:
                axes[key] = np.array(bits)
            elif len(bits) == 3 and bits[2] >= 1 and bits[2] == int(bits[2]):
                axes[key] = np.linspace(bits[0], bits[1], int(bits[2]))
            else:
                raise ConfigError(f"grid entry {part!r}: use lo:hi:n with integer n >= 1")
    missing = [k for k in ("l1", "l2", "l3") if k not in axes]
    if missing:
        raise ConfigError(f"grid is missing axis {', '.join(missing)}")
    for k, v in axes.items():
        if np.any(v <= 0.0):
            raise ConfigError(f"grid axis {k}: coefficients must be positive")
    if axes["l1"].min() < axes["l2"].max():
        raise ConfigError("grid must respect lambda1 >= lambda2 > 0")
    return axes


@dataclass(frozen=True)
class _BasinTask:
    lambdas: tuple[float, float, float, float]
    budget: Optional[float]


def _basin_task(task: _BasinTask) -> BasinResult:
    return classify_basin_a9i(task.lambdas, None, task.budget)


def sweep_basin(axes: dict[str, np.ndarray], lambda4: float, budget: Optional[float], workers: int = 1) -> list[BasinResult]:
    """Basin labels over the grid, in ``l1``-major, then ``l2``, then ``l3`` order."""
    tasks = [
        _BasinTask((float(a), float(b), float(c), float(lambda4)), budget)
        for a in axes["l1"] for b in axes["l2"] for c in axes["l3"]
    ]
    return _map(_basin_task, tasks, workers)


def basin_csv(results: Sequence[BasinResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda1", "lambda2", "lambda3", "lambda4", "label", "decision_time"])
    for r in results:
        dt = "" if r.decision_time is None else f"{r.decision_time:.17g}"
        w.writerow([*(f"{x:.17g}" for x in r.lambdas), r.label.value, dt])
    return buf.getvalue()


def cmd_sweep_basin(grid: Sequence[str], lambda4: float, budget: Optional[float], workers: int, output: Optional[str], out=None) -> int:
    out = out or sys.stdout
    if not lambda4 > 0.0:
        raise ConfigError("lambda4 must be positive")
    if budget is not None and not budget > 0.0:
        raise ConfigError("budget must be positive")
    axes = parse_grid(grid)
    text = basin_csv(sweep_basin(axes, lambda4, budget, workers))
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def _table1_row(seed: Seed) -> dict:
    try:
        _, rep = seed.analyze()
    except (BrflowError, ArithmeticError) as exc:
        return {"seed": seed.id, "class": seed.class_name, "case": seed.case, "observed": None,
                "expected": seed.expected.label, "in_table": False, "error": str(exc)}
    predicted = [b.value for b in rep.predicted]
    return {
        "seed": seed.id,
        "class": rep.class_id.value,
        "case": seed.case,
        "observed": rep.label.value,
        "expected": seed.expected.label,
        "predicted": predicted,
        "in_table": rep.label_predicted,
        "basin": None if rep.basin is None else rep.basin.label.value,
    }


def table1_rows(workers: int = 1, seeds: Sequence[Seed] | None = None) -> list[dict]:
    return _map(_table1_row, list(seeds if seeds is not None else load_seeds()), workers)


def table1_passed(rows: Sequence[dict]) -> bool:
    covered = {r["class"] for r in rows}
    return all(r["in_table"] for r in rows) and covered >= {c.value for c in cat.ClassId}


def cmd_table1(as_json: bool, workers: int, out=None) -> int:
    out = out or sys.stdout
    rows = table1_rows(workers)
    ok = table1_passed(rows)
    missing = sorted({c.value for c in cat.ClassId} - {r["class"] for r in rows})
    if as_json:
        json.dump({"tool": "brflow", "version": __version__, "passed": ok, "missing_classes": missing, "seeds": rows}, out, indent=2)
        out.write("\n")
    else:
        for r in rows:
            status = "PASS" if r["in_table"] else "FAIL"
            note = "" if r["observed"] == r["expected"] else f"  (seed annotated {r['expected']})"
            if r.get("error"):
                note = f"  error: {r['error']}"
            out.write(f"{status}  {r['seed']:<20} {r['class']:<12} observed {r['observed']}{note}\n")
        for c in missing:
            out.write(f"FAIL  no seed for class {c}\n")
        out.write(f"table1: {'PASS' if ok else 'FAIL'} ({sum(r['in_table'] for r in rows)}/{len(rows)} seeds in the predicted sets)\n")
    return EXIT_OK if ok else EXIT_ERROR


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _workers(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("--workers must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brflow", description="Backward Ricci flow on homogeneous 4-geometries.")
    parser.add_argument("--version", action="version", version=f"brflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-classes", help="list every class with its geometry and predicted end behaviors")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("simulate", help="integrate and analyze one run described by a JSON config")
    p.add_argument("--config", required=True, help="path to the run configuration (JSON)")

    p = sub.add_parser("verify", help="run a randomized cross-check suite")
    p.add_argument("--scope", choices=(*SUITES, "all"), default="all")
    p.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="RNG seed (default: $BRFLOW_SEED or built-in)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("sweep-basin", help="A9i basin labels over a grid of initial data (CSV)")
    p.add_argument("--grid", action="append", default=None,
                   help="axes as l1=lo:hi:n,l2=v,l3=lo:hi:n (repeatable; default l1=1:3:20,l2=1,l3=0.2:3:20)")
    p.add_argument("--lambda4", type=float, default=1.0)
    p.add_argument("--budget", type=float, default=None, help="time budget per point (default: run to the singularity)")
    p.add_argument("--output", "-o", default=None, help="CSV path (default: stdout)")
    p.add_argument("--workers", type=_workers, default=os.cpu_count() or 1)

    p = sub.add_parser("table1", help="run the curated seeds and compare labels with the predicted sets")
    p.add_argument("--json", action="store_true")
    p.add_argument("--workers", type=_workers, default=os.cpu_count() or 1)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-classes":
            return cmd_list_classes(args.json)
        if args.command == "simulate":
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
            return cmd_simulate(RunConfig.from_json(text, args.config))
        if args.command == "verify":
            return cmd_verify(args.scope, args.seed, args.json)
        if args.command == "sweep-basin":
            grid = args.grid or ["l1=1:3:20,l2=1,l3=0.2:3:20"]
            return cmd_sweep_basin(grid, args.lambda4, args.budget, args.workers, args.output)
        if args.command == "table1":
            return cmd_table1(args.json, args.workers)
    except ConfigError as exc:
        print(f"brflow: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (BrflowError, OSError) as exc:
        print(f"brflow: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
