"""Command line entry point: config ingestion, run orchestration, output files.

Exit codes: 0 success, 2 the flow split, 3 step failure or IO error,
4 configuration error (reported with a line number).
"""

import argparse
import copy
import itertools
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import curve as curve_mod
from . import output
from .config import Numerics
from .errors import ConfigError, NotFound, ShootStalled, SlagflowError
from .floer import PathKit, check_stability, class_of_curve, jordan_holder
from .flow import CSV_COLUMNS, crosscheck, run
from .geometry import phase_profile, weighted_volume
from .polynomial import ComplexPoly
from .slag import local_model_curve, slag_connect, slag_shoot

log = logging.getLogger("slagflow")

EXIT_OK, EXIT_SPLIT, EXIT_FAILURE, EXIT_CONFIG = 0, 2, 3, 4

SECTIONS = {
    "dimension",
    "polynomial",
    "initial_curve",
    "numerics",
    "output",
    "flow",
    "slag",
    "stability",
    "crosscheck",
    "local_model",
}

OUTPUT_DEFAULTS = {"dir": "out", "snapshot_every": 0, "references": True}
FLOW_DEFAULTS = {"formula": "result1", "endpoint_mode": "double_cover"}


# ---------------------------------------------------------------------------
# config


class Config:
    """Parsed config plus the source text for line-numbered diagnostics."""

    def __init__(self, data, text=""):
        self.data = data
        self.text = text

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}", line=0) from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(data, dict):
            raise ConfigError("top level must be an object", line=1)
        cfg = cls(data, text)
        unknown = sorted(set(data) - SECTIONS)
        if unknown:
            raise cfg.error(f"unknown section {unknown[0]!r}", unknown[0])
        return cfg

    def line_of(self, key):
        """1-based line of the first ``"key":`` in the source, or None."""
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else None

    def error(self, message, key=None):
        return ConfigError(message, line=self.line_of(key) if key else None)

    def locate(self, exc):
        """Attach a line number to a ConfigError raised deep in a builder.

        Messages name the section before the offending key, so the last
        token that occurs as a key wins.
        """
        if exc.line is not None:
            return exc
        for token in reversed(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", str(exc))):
            line = self.line_of(token)
            if line is not None:
                exc.line = line
                return exc
        return exc

    def section(self, name, required=False):
        if name not in self.data:
            if required:
                raise ConfigError(f"missing section {name!r}", line=1)
            return {}
        val = self.data[name]
        if not isinstance(val, dict):
            raise self.error(f"section {name!r} must be an object", name)
        return val

    def dimension(self):
        if "dimension" not in self.data:
            raise ConfigError("missing section 'dimension'", line=1)
        n = self.data["dimension"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            raise self.error(f"dimension must be an integer >= 2, got {n!r}", "dimension")
        return n

    def numerics(self):
        return Numerics.from_dict(self.section("numerics"))

    def polynomial(self, numerics):
        return ComplexPoly.from_config(self.section("polynomial", required=True), numerics)

    def initial_curve(self, p, numerics):
        return curve_mod.from_config(self.section("initial_curve", required=True), p, numerics)

    def with_defaults(self, name, defaults):
        merged = dict(defaults)
        merged.update(self.section(name))
        unknown = sorted(set(merged) - set(defaults))
        if unknown:
            raise self.error(f"unknown key {name}.{unknown[0]}", unknown[0])
        return merged


def set_dotted(data, key, value):
    """Return a deep copy of ``data`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(data)
    node = out
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--sweep key {key}: {part} is not a section")
    node[parts[-1]] = value
    return out


def parse_sweep(items):
    """``["a.b=1,2", "c=x"]`` -> list of (label, {key: value}) over the grid."""
    axes = []
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not key or not values:
            raise ConfigError(f"--sweep expects KEY=v1,v2,..., got {item!r}")
        axes.append([(key, _scalar(v)) for v in values.split(",")])
    grid = []
    for combo in itertools.product(*axes):
        label = "_".join(f"{k.replace('.', '-')}={v}" for k, v in combo)
        grid.append((label, dict(combo)))
    return grid


def _scalar(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


# ---------------------------------------------------------------------------
# shared helpers


def _complex(z):
    return [float(np.real(z)), float(np.imag(z))]


def _write_curve(path, c):
    output.write_json(path, c.to_json())


def _connector(p, n, a, b, phi, numerics, half_width=0.25):
    """A constant-phase connector from root a to root b near phase phi, or None."""
    for branch in range(n):
        try:
            c, _ = slag_connect(p, n, a, b, (phi - half_width, phi + half_width), branch, numerics)
            return c
        except (NotFound, ShootStalled):
            continue
    return None


def _references(p, n, curves, numerics, kit):
    refs = []
    seen = set()
    for c in curves:
        if c.left_root is None or c.right_root is None:
            continue
        key = (c.left_root, c.right_root)
        if key in seen:
            continue
        seen.add(key)
        ref = _connector(p, n, *key, class_of_curve(c, p, n, kit).phi, numerics)
        if ref is not None:
            refs.append(ref)
    return refs


def _summary(c, p, n, kit):
    prof = phase_profile(c, p, n)
    entry = {
        "sup_theta": prof.sup,
        "inf_theta": prof.inf,
        "weighted_volume": weighted_volume(c, p, n),
        "points": int(c.points.size),
        "roots": [c.left_root, c.right_root],
    }
    if c.left_root is not None and c.right_root is not None:
        L = class_of_curve(c, p, n, kit)
        entry["phi"] = L.phi
        entry["period"] = _complex(L.period)
    return entry


def _report_tree(report):
    node = {
        "verdict": report.verdict.to_json(),
        "steps": report.steps,
        "rejected": report.rejected,
    }
    if report.children:
        node["children"] = [_report_tree(ch) for ch in report.children]
    return node


def _leaf_failed(report):
    return any(leaf.verdict.kind == "StepFailure" for leaf in report.leaves())


# ---------------------------------------------------------------------------
# subcommands


def cmd_flow(cfg, out, args):
    n = cfg.dimension()
    numerics = cfg.numerics()
    p = cfg.polynomial(numerics)
    c = cfg.initial_curve(p, numerics)
    opts = cfg.with_defaults("output", OUTPUT_DEFAULTS)
    flow_opts = cfg.with_defaults("flow", FLOW_DEFAULTS)
    every = int(opts["snapshot_every"])
    kit = PathKit.for_poly(p)
    refs = _references(p, n, [c], numerics, kit) if opts["references"] and every > 0 else []
    roots = list(p.roots)
    counter = {"steps": 0, "last": None}

    def on_step(prev, cur):
        counter["steps"] += 1
        counter["last"] = cur.curve
        if every > 0 and counter["steps"] % every == 0:
            output.write_svg(out / f"snap_{counter['steps']:06d}.svg", [cur.curve.points], roots, [r.points for r in refs])

    stability = None
    if c.left_root is not None and c.right_root is not None:
        stability = check_stability(c, p, n, numerics.winding_bound, kit).to_json()
    report, finals = run(
        c, p, n, numerics, formula=flow_opts["formula"], endpoint_mode=flow_opts["endpoint_mode"], on_step=on_step
    )
    total = counter["steps"]
    if every > 0 and total > 0 and total % every != 0:
        final_refs = _references(p, n, finals, numerics, kit) if opts["references"] else []
        output.write_svg(
            out / f"snap_{total:06d}.svg", [f.points for f in finals], roots, [r.points for r in final_refs]
        )
    output.write_timeseries(out / "timeseries.csv", report.series)
    if report.children:
        for k, leaf in enumerate(report.leaves()):
            output.write_timeseries(out / f"timeseries_piece_{k}.csv", leaf.series)
    for k, f in enumerate(finals):
        _write_curve(out / f"final_curve_{k}.json", f)
    doc = {
        "command": "flow",
        "dimension": n,
        "polynomial": p.to_config(),
        "roots": [_complex(r) for r in p.roots],
        "numerics": numerics.to_dict(),
        "flow": flow_opts,
        "output": opts,
        "verdict": report.verdict.to_json(),
        "run": _report_tree(report),
        "final": [_summary(f, p, n, kit) for f in finals],
        "stability": stability,
        "csv_columns": list(CSV_COLUMNS),
    }
    output.write_json(out / "report.json", doc)
    log.info("flow verdict %s after %d steps", report.verdict.kind, total)
    if _leaf_failed(report) or report.verdict.kind == "StepFailure":
        return EXIT_FAILURE
    if report.children:
        return EXIT_SPLIT
    return EXIT_OK


def _slag_opts(cfg, defaults):
    return cfg.with_defaults("slag", defaults)


def cmd_slag_shoot(cfg, out, args):
    n = cfg.dimension()
    numerics = cfg.numerics()
    p = cfg.polynomial(numerics)
    opts = _slag_opts(cfg, {"root": 0, "phi": 0.0, "branch": 0, "max_length": None})
    root = curve_mod.root_index(p, opts["root"], "root")
    shot = slag_shoot(p, n, root, float(opts["phi"]), int(opts["branch"]), opts["max_length"], numerics)
    doc = {
        "command": "slag shoot",
        "curve": shot.curve.to_json(),
        "phi_star": shot.phi,
        "branch": shot.branch,
        "captured": shot.captured,
        "stop": shot.reason,
        "numerics": numerics.to_dict(),
    }
    output.write_json(out / "report.json", doc)
    output.write_svg(out / "shot.svg", [shot.curve.points], list(p.roots))
    print(f"stop={shot.reason} captured={shot.captured}")
    return EXIT_OK


def cmd_slag_connect(cfg, out, args):
    n = cfg.dimension()
    numerics = cfg.numerics()
    p = cfg.polynomial(numerics)
    opts = _slag_opts(cfg, {"from": 0, "to": 1, "window": [-0.5, 0.5], "branch": 0, "phi_grid": None})
    roots = list(p.roots)
    doc = {"command": "slag connect", "numerics": numerics.to_dict()}
    if opts["phi_grid"] is not None:
        grid = [float(x) for x in opts["phi_grid"]]
        if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise cfg.error("slag.phi_grid must be increasing with at least two entries", "phi_grid")
        found = []
        for a, b in itertools.permutations(range(len(roots)), 2):
            if a > b:
                continue
            for lo, hi in zip(grid, grid[1:]):
                for branch in range(n):
                    try:
                        c, phi = slag_connect(p, n, a, b, (lo, hi), branch, numerics)
                    except (NotFound, ShootStalled):
                        continue
                    found.append({"from": a, "to": b, "branch": branch, "phi_star": phi, "curve": c.to_json()})
        doc["connectors"] = found
        output.write_svg(
            out / "atlas.svg",
            [],
            roots,
            [np.array([complex(x, y) for x, y in f["curve"]["points"]]) for f in found],
        )
        print(f"connectors found: {len(found)}")
    else:
        a = curve_mod.root_index(p, opts["from"], "from")
        b = curve_mod.root_index(p, opts["to"], "to")
        c, phi = slag_connect(p, n, a, b, tuple(opts["window"]), int(opts["branch"]), numerics)
        doc.update({"curve": c.to_json(), "phi_star": phi, "branch": int(opts["branch"])})
        output.write_svg(out / "atlas.svg", [], roots, [c.points])
        print(f"phi_star={phi!r}")
    output.write_json(out / "report.json", doc)
    return EXIT_OK


def cmd_stability(cfg, out, args):
    n = cfg.dimension()
    numerics = cfg.numerics()
    p = cfg.polynomial(numerics)
    c = cfg.initial_curve(p, numerics)
    bound = int(cfg.section("stability").get("bound", numerics.winding_bound))
    rep = check_stability(c, p, n, bound)
    doc = {"command": "stability", "bound": bound, "numerics": numerics.to_dict(), "stability": rep.to_json()}
    output.write_json(out / "report.json", doc)
    print(f"close_ok={rep.close_ok} vclose_ok={rep.vclose_ok} splittings={len(rep.splittings)}")
    return EXIT_OK


def cmd_decompose(cfg, out, args):
    n = cfg.dimension()
    numerics = cfg.numerics()
    p = cfg.polynomial(numerics)
    c = cfg.initial_curve(p, numerics)
    bound = int(cfg.section("stability").get("bound", numerics.winding_bound))
    kit = PathKit.for_poly(p)
    L = class_of_curve(c, p, n, kit)
    pieces = jordan_holder(L, p, n, bound, numerics, kit)
    doc = {
        "command": "decompose",
        "bound": bound,
        "numerics": numerics.to_dict(),
        "class": L.to_json(),
        "pieces": [piece.to_json() for piece in pieces],
        "stability": check_stability(c, p, n, bound, kit).to_json(),
    }
    output.write_json(out / "report.json", doc)
    print(" ".join(f"{piece.root_pair}:{piece.phi:.6f}" for piece in pieces))
    return EXIT_OK


def cmd_crosscheck(cfg, out, args):
    opts = cfg.with_defaults("crosscheck", {"count": 100, "dimensions": [2, 3, 4, 6], "n_points": 200, "tol": 1e-8})
    seed = args.seed if args.seed is not None else 0
    results = crosscheck(seed, int(opts["count"]), opts["dimensions"], int(opts["n_points"]))
    worst = max(d for _, d in results)
    doc = {
        "command": "crosscheck",
        "seed": seed,
        "options": opts,
        "max_relative_disagreement": worst,
        "per_curve": [{"n": k, "disagreement": d} for k, d in results],
    }
    output.write_json(out / "report.json", doc)
    print(f"max relative velocity disagreement: {worst:.3e}")
    return EXIT_OK if worst < float(opts["tol"]) else EXIT_FAILURE


def cmd_localmodel(cfg, out, args):
    opts = cfg.with_defaults("local_model", {"n": [2, 3, 4, 5, 6], "c": [0.1, 1.0, 10.0], "samples": 200})
    cases = []
    curves = []
    for n in opts["n"]:
        for c in opts["c"]:
            m = local_model_curve(int(n), float(c), int(opts["samples"]))
            cases.append({"n": int(n), "c": float(c), "max_abs_phase": float(np.max(np.abs(m.phase)))})
            curves.append(m.points)
    worst = max(case["max_abs_phase"] for case in cases)
    output.write_json(out / "report.json", {"command": "localmodel", "cases": cases, "max_abs_phase": worst})
    output.write_svg(out / "localmodel.svg", curves, [0j])
    print(f"max |phase|: {worst:.3e}")
    return EXIT_OK


COMMANDS = {
    "flow": cmd_flow,
    "slag shoot": cmd_slag_shoot,
    "slag connect": cmd_slag_connect,
    "stability": cmd_stability,
    "decompose": cmd_decompose,
    "crosscheck": cmd_crosscheck,
    "localmodel": cmd_localmodel,
}


# ---------------------------------------------------------------------------
# dispatch


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--out", help="output directory (default: output.dir from config, else ./out)")
    common.add_argument("--sweep", action="append", default=[], metavar="KEY=v1,v2", help="run over a grid")
    common.add_argument("--seed", type=int, help="seed for randomized checks")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="slagflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("flow", "stability", "decompose", "crosscheck", "localmodel"):
        sub.add_parser(name, parents=[common])
    slag = sub.add_parser("slag")
    slag_sub = slag.add_subparsers(dest="action", required=True)
    for name in ("shoot", "connect"):
        slag_sub.add_parser(name, parents=[common])
    return parser


def _execute(command, data, text, out, args):
    """Run one command on an already-parsed config; returns the exit code."""
    cfg = Config(data, text)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[command](cfg, out, args)
    except ConfigError as exc:
        exc = cfg.locate(exc)
        where = f"line {exc.line}: " if exc.line else ""
        print(f"config error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SlagflowError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def _sweep_job(job):
    command, data, text, out, args = job
    return _execute(command, data, text, Path(out), args)


def dispatch(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    command = args.command if args.command != "slag" else f"slag {args.action}"
    try:
        cfg = Config.load(args.config)
        out = Path(args.out or cfg.section("output").get("dir", OUTPUT_DEFAULTS["dir"]))
        grid = parse_sweep(args.sweep)
    except ConfigError as exc:
        where = f"line {exc.line}: " if exc.line else ""
        print(f"config error: {where}{exc}", file=sys.stderr)
        return EXIT_CONFIG
    if len(grid) <= 1 and not args.sweep:
        return _execute(command, cfg.data, cfg.text, out, args)
    jobs = []
    for label, changes in grid:
        data = cfg.data
        for key, value in changes.items():
            data = set_dotted(data, key, value)
        jobs.append((command, data, json.dumps(data, indent=2), str(out / label), args))
    with ProcessPoolExecutor() as pool:
        codes = list(pool.map(_sweep_job, jobs))
    for (label, _), code in zip(grid, codes):
        print(f"{label}: exit {code}")
    return max(codes)


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
