"""``lab`` command line: one subcommand per experiment plus ``report``.

Each run writes ``config_<name>.json`` (the resolved configuration, enough to
replay the run), ``results_<name>.json``, the tables and plots of the run and
``summary.txt`` into the output directory. The exit code is 0 iff no check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, LabError
from ..fem import write_function
from ..meshing import write_mesh
from .config import EXPERIMENTS, from_dict, load
from .report import emit_report, write_summary
from .suites import SUITES, Check, RunResult

log = logging.getLogger("lipschitz_lab")


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _domain(text):
    if text in ("square", "lshape"):
        return text
    if text.startswith("sawtooth"):
        return {"sawtooth": int(text[len("sawtooth"):].lstrip(":=") or 1)}
    return {"polygon": text}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random finite element functions")
    common.add_argument("--parallel", action="store_true", default=None,
                        help="run independent k values concurrently")
    common.add_argument("-v", "--verbose", action="store_true")
    for name in EXPERIMENTS:
        q = sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
        q.add_argument("--domain", type=_domain, help="square | lshape | sawtoothK | polygon file")
        q.add_argument("--order", type=int)
        q.add_argument("--h", type=float)
        q.add_argument("--grading", type=float)
        q.add_argument("--s", dest="s_values", type=_floats, help="comma separated s values")
        q.add_argument("--k", dest="k_list", type=_ints, help="comma separated sawtooth k values")
        q.add_argument("--checks", type=lambda t: t.split(","), help="comma separated check names")
        q.add_argument("--n-random", dest="n_random", type=int)
        q.add_argument("--rhs", choices=("one", "sinsin"))
        q.add_argument("--timing", dest="record_timing", action="store_true", default=None,
                       help="record wall-clock times (makes CSV output non-reproducible)")
    r = sub.add_parser("report", parents=[common], help="aggregate results_*.json files into summary.txt")
    r.add_argument("inputs", nargs="*", help="directories holding results_*.json (default: --out)")
    return p


OVERRIDES = ("out", "seed", "parallel", "domain", "order", "h", "grading", "s_values", "k_list", "checks",
             "n_random", "rhs", "record_timing")


def resolve_config(args):
    d = load(args.config) if args.config else {}
    if d.get("name", args.command) != args.command:
        raise LabError(f"config is for {d['name']!r}, not {args.command!r}")
    d["name"] = args.command
    for k in OVERRIDES:
        v = getattr(args, k, None)
        if v is not None:
            d[k] = v
    return from_dict(d)


def _json_default(o):
    try:
        return float(o)
    except (TypeError, ValueError):
        return str(o)


def result_dict(res: RunResult, paths) -> dict:
    return {
        "name": res.name,
        "config": res.config,
        "checks": [dict(name=c.name, verdict=c.verdict, detail=c.detail, values=c.values) for c in res.checks],
        "artifacts": [str(p) for p in paths],
        "passed": res.passed,
    }


def run_experiment(args) -> int:
    cfg = resolve_config(args)
    cfg.build_domain()  # fail early on unreadable or invalid domains
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"config_{cfg.name}.json").write_text(json.dumps(cfg.echo(), indent=2, sort_keys=True) + "\n")
    log.info("running %s on %s", cfg.name, cfg.domain_label())
    res = SUITES[cfg.name](cfg)
    extra = []
    if getattr(res, "mesh", None) is not None:
        extra.append(out / "mesh.txt")
        write_mesh(res.mesh, extra[-1])
    if getattr(res, "solution", None) is not None:
        extra.append(out / "solution.txt")
        write_function(res.solution, extra[-1], "mesh.txt")
    paths = emit_report([res], out) + extra
    (out / f"results_{cfg.name}.json").write_text(
        json.dumps(result_dict(res, paths), indent=2, sort_keys=True, default=_json_default) + "\n")
    for c in res.checks:
        print(f"{res.name:15s} {c.name:22s} {c.verdict:8s} {c.detail}")
    return 0 if res.passed else 1


def run_report(args) -> int:
    out = Path(args.out or "lab_out")
    dirs = [Path(d) for d in args.inputs] or [out]
    results = []
    for d in dirs:
        for f in sorted(d.glob("results_*.json")):
            try:
                data = json.loads(f.read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read {f}: {e}") from e
            checks = [Check(c["name"], c["verdict"], c["detail"], c.get("values", {})) for c in data["checks"]]
            results.append(RunResult(data["name"], data["config"], checks))
    out.mkdir(parents=True, exist_ok=True)
    path = write_summary(out / "summary.txt", results)
    print(path.read_text(), end="")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return run_report(args)
        return run_experiment(args)
    except LabError as e:
        print(f"lab: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
