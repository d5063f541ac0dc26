"""Command-line front end.

Subcommands: validate, compile, sample, verify, solve-linear, report.
Exit codes: 0 pass, 1 domain failure, 2 usage / parse / config failure.
Every failure writes one JSON line to stderr: {"error": code, "message": ...}.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import glue, hk, linear, phases, pointcloud, tropical
from .errors import ConfigError, CurveSyntaxError, GeometryError, SchemaError, TropslagError, UnknownVertex

SCHEMA = 1
PARSE_ERRORS = (CurveSyntaxError, SchemaError, GeometryError, UnknownVertex, ConfigError)

DEFAULTS = {
    "schema": SCHEMA,
    "kahler": "euclidean",
    "theta_hat": math.pi / 2,
    "T_list": [5, 10, 20, 40],
    "free_phases": "seed:0",
    "window": None,
    "grid": 128,
    "jobs": 1,
    "tolerances": {
        "hausdorff_final": 0.05,
        "hausdorff_ratio": 0.3,
        "decay_slope": -0.2,
        "linear_residual": 1e-8,
    },
    "decay_R": [2, 3, 4, 5, 6, 7, 8],
    "linear": {"kappa": 1.0, "h_grid": linear.H_GRID},
}


class UsageError(Exception):
    code = "usage"


@dataclass
class RunConfig:
    kahler: Optional[hk.KahlerData]  # None: Euclidean in the curve's dimension
    theta_hat: float
    T_list: list
    free_phases: object  # list of angles or "seed:N"
    seed: int
    window: Optional[float] = None
    grid: int = 128
    jobs: int = 1
    tolerances: dict = field(default_factory=dict)
    decay_R: list = field(default_factory=list)
    linear: dict = field(default_factory=dict)

    def kahler_for(self, curve) -> hk.KahlerData:
        if self.kahler is None:
            return hk.KahlerData.euclidean(curve.dimension, self.theta_hat)
        return self.kahler

    def phases_for(self, curve) -> list:
        dim = phases.moduli_dimension(curve)
        fp = self.free_phases
        if isinstance(fp, str):
            rng = np.random.default_rng(int(fp.split(":", 1)[1]))
            return [float(x) for x in rng.uniform(0.0, 2 * math.pi, dim)]
        if len(fp) != dim:
            raise ConfigError(f"free_phases has {len(fp)} entries, the curve needs {dim}")
        return [float(x) for x in fp]


def _fraction(x):
    try:
        return Fraction(str(x))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad metric entry {x!r}") from exc


def load_config(path=None, overrides=None) -> RunConfig:
    doc = json.loads(json.dumps(DEFAULTS))
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc.msg} at line {exc.lineno}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        if user.get("schema") != SCHEMA:
            raise ConfigError(f"unsupported config schema {user.get('schema')!r}, expected {SCHEMA}")
        unknown = set(user) - set(DEFAULTS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for k in ("tolerances", "linear"):
            if k in user:
                doc[k].update(user.pop(k))
        doc.update(user)
    for k, v in (overrides or {}).items():
        if v is not None:
            doc[k] = v
    if "seed" not in doc:
        raise ConfigError("a seed is required (config key 'seed' or --seed)")
    try:
        theta = float(doc["theta_hat"])
        if doc["kahler"] == "euclidean":
            kahler = None
            if not (0.0 < theta < math.pi):
                raise ConfigError("theta_hat must lie in (0, pi)")
        else:
            kahler = hk.KahlerData(tuple(tuple(_fraction(x) for x in row) for row in doc["kahler"]), theta)
        T_list = [float(t) for t in doc["T_list"]]
        grid = int(doc["grid"])
        seed = int(doc["seed"])
        jobs = int(doc["jobs"])
    except ConfigError:
        raise
    except TropslagError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not T_list or any(t <= 0 for t in T_list) or any(b <= a for a, b in zip(T_list, T_list[1:])):
        raise ConfigError("T_list must be a nonempty increasing list of positive numbers")
    if grid < 16:
        raise ConfigError("grid resolution must be at least 16")
    fp = doc["free_phases"]
    if isinstance(fp, str):
        if not fp.startswith("seed:") or not fp[5:].lstrip("-").isdigit():
            raise ConfigError("free_phases must be a list of angles or 'seed:N'")
    elif not isinstance(fp, list):
        raise ConfigError("free_phases must be a list of angles or 'seed:N'")
    return RunConfig(kahler, theta, T_list, fp, seed, doc["window"], grid, max(1, jobs),
                     doc["tolerances"], [float(r) for r in doc["decay_R"]], doc["linear"])


# ------------------------------------------------------------ output

def _json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _write(out: Path, name: str, data):
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    if isinstance(data, bytes):
        p.write_bytes(data)
    else:
        p.write_text(data)
    return p


def _tag(T: float) -> str:
    return format(T, "g")


def _fail(code: str, message: str, **extra) -> None:
    rec = {"error": code, "message": message}
    rec.update(extra)
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")


def _sweep(cfg: RunConfig, fn, items):
    """Run ``fn`` over ``items``, in parallel when jobs > 1; results keep
    input order so that the caller is the only writer."""
    if cfg.jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(cfg.jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    curve = tropical.load_curve(args.curve)
    rep = tropical.validate(curve)
    sys.stdout.write(_json(rep.to_dict()))
    if not rep.ok:
        _fail("validation_failed", "; ".join(rep.messages))
        return 1
    return 0


def _matching(curve, cfg, T):
    return glue.build_matching(curve, cfg.kahler_for(curve), T, cfg.phases_for(curve), seed=cfg.seed)


def cmd_compile(args, cfg: RunConfig) -> int:
    curve = tropical.load_curve(args.curve)
    out = Path(args.out)
    data = _sweep(cfg, lambda T: _matching(curve, cfg, T), cfg.T_list)
    for T, d in zip(cfg.T_list, data):
        doc = d.to_dict()
        doc["retries"] = d.assignment.attempts
        _write(out, f"datum_T{_tag(T)}.json", _json(doc))
    return 0


def _cloud(curve, cfg, T):
    d = _matching(curve, cfg, T)
    hw = glue.default_box(curve) if cfg.window is None else float(cfg.window)
    P = np.concatenate([glue.vertex_cloud(d, v, hw, cfg.grid) for v in curve.vertex_ids()])
    return pointcloud.PointCloud(P)


def cmd_sample(args, cfg: RunConfig) -> int:
    curve = tropical.load_curve(args.curve)
    out = Path(args.out)
    clouds = _sweep(cfg, lambda T: _cloud(curve, cfg, T), cfg.T_list)
    for T, c in zip(cfg.T_list, clouds):
        if args.format == "csv":
            _write(out, f"cloud_T{_tag(T)}.csv", pointcloud.to_csv(c))
        elif args.format == "binary":
            _write(out, f"cloud_T{_tag(T)}.bin", pointcloud.to_binary(c))
        else:
            _write(out, f"cloud_T{_tag(T)}.json", _json({"dim": c.dim, "points": c.points}))
    return 0


def _linear_reports(curve, cfg: RunConfig):
    kahler = cfg.kahler_for(curve)
    lin = cfg.linear
    reps = []
    for T in cfg.T_list:
        g = linear.MetricGraph.from_curve(curve, T, kahler.matrix(), h=float(lin["h_grid"]))
        part = linear.build_partition(g)
        A = linear.stiffness(part)
        _, diag = linear.parametrix_solve(g, part, linear.standard_source(g), kappa=float(lin["kappa"]),
                                          tol=float(cfg.tolerances["linear_residual"]))
        rep = json.loads(linear.diagnostics_json(diag))
        rep["T"] = T
        rep["obstruction_constant"] = linear.obstruction_constant(A)
        reps.append(rep)
    return reps


def cmd_solve_linear(args, cfg: RunConfig) -> int:
    curve = tropical.load_curve(args.curve)
    reps = _linear_reports(curve, cfg)
    text = _json({"runs": reps})
    if args.out:
        _write(Path(args.out), "linear.json", text)
    else:
        sys.stdout.write(text)
    return 0


class CriterionFailed(Exception):
    def __init__(self, criterion, message):
        super().__init__(message)
        self.criterion = criterion


def _decay_report(curve, cfg: RunConfig):
    T = cfg.T_list[-1]
    d = _matching(curve, cfg, T)
    rows = []
    for v in curve.vertex_ids():
        m = d.models[v]
        for eid in m.edge_ids:
            facet = m.polygon.facets[m.edge_facet[eid]]
            target = np.exp(1j * m.edge_phase[eid])
            alpha = min(m.roots[facet.index].roots, key=lambda r: abs(r - target))
            pairs = hk.asymptotic_decay(m.poly, facet, alpha, cfg.decay_R)
            rows.append({"vertex": v, "edge": eid, "slope": hk.decay_slope(pairs),
                         "R": [p[0] for p in pairs], "deviation": [p[1] for p in pairs]})
    return rows


def cmd_verify(args, cfg: RunConfig) -> int:
    if len(cfg.T_list) < 3:
        raise ConfigError("verify needs at least three values in T_list")
    curve = tropical.load_curve(args.curve)
    out = Path(args.out)
    tol = cfg.tolerances
    summary = {}

    def stage(name, fn):
        try:
            return fn()
        except PARSE_ERRORS:
            raise
        except TropslagError as exc:
            raise CriterionFailed(name, f"{exc.code}: {exc}") from exc

    try:
        rep = tropical.validate(curve)
        if not rep.ok:
            raise CriterionFailed("validation", "; ".join(rep.messages))
        summary["validation"] = "pass"

        decay = stage("asymptotic_decay", lambda: _decay_report(curve, cfg))
        _write(out, "decay.json", _json({"fits": decay}))
        worst = max(r["slope"] for r in decay)
        if not worst < tol["decay_slope"]:
            raise CriterionFailed("asymptotic_decay", f"slope {worst:.4f} not below {tol['decay_slope']}")
        summary["asymptotic_decay"] = "pass"

        lin = stage("linear_surrogate", lambda: _linear_reports(curve, cfg))
        _write(out, "linear.json", _json({"runs": lin}))
        ratios = [r["contraction_ratio"] for r in lin if r["l_min"] is not None]
        # a ratio below the residual tolerance means one-step convergence;
        # such values are round-off and are not compared
        floor = float(tol["linear_residual"])
        if any(b >= a and b > floor for a, b in zip(ratios, ratios[1:])):
            raise CriterionFailed("linear_surrogate", "contraction ratio does not decrease with T")
        summary["linear_surrogate"] = "pass"

        table = stage("hausdorff", lambda: glue.convergence_test(
            curve, cfg.kahler_for(curve), cfg.phases_for(curve), cfg.T_list, cfg.window, cfg.grid, cfg.seed))
        _write(out, "convergence.csv", table.to_csv())
        d = [r[1] for r in table.rows]
        _write(out, "convergence.json", _json({"rows": table.rows, "details": table.details,
                                                "fitted_rate": table.fitted_rate()}))
        if any(b >= a for a, b in zip(d, d[1:])):
            raise CriterionFailed("hausdorff", "distances are not strictly decreasing")
        if not d[-1] < tol["hausdorff_final"]:
            raise CriterionFailed("hausdorff", f"final distance {d[-1]:.4f} >= {tol['hausdorff_final']}")
        if not d[-1] / d[0] < tol["hausdorff_ratio"]:
            raise CriterionFailed("hausdorff", f"final/first {d[-1] / d[0]:.3f} >= {tol['hausdorff_ratio']}")
        summary["hausdorff"] = "pass"
    except CriterionFailed as exc:
        summary[exc.criterion] = "fail"
        _write(out, "summary.json", _json(summary))
        _fail("criterion_failed", str(exc), criterion=exc.criterion)
        return 1
    _write(out, "summary.json", _json(summary))
    sys.stdout.write(_json(summary))
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"no such directory: {out}")
    lines = []
    s = out / "summary.json"
    if s.exists():
        for k, v in sorted(json.loads(s.read_text()).items()):
            lines.append(f"{k}: {v}")
    c = out / "convergence.csv"
    if c.exists():
        lines.append("convergence:")
        lines += ["  " + ln for ln in c.read_text().splitlines()]
    lj = out / "linear.json"
    if lj.exists():
        for r in json.loads(lj.read_text())["runs"]:
            lines.append(f"linear T={_tag(r['T'])}: ratio={r['contraction_ratio']:.3e} iterations={r['iterations']}")
    dj = out / "decay.json"
    if dj.exists():
        for r in json.loads(dj.read_text())["fits"]:
            lines.append(f"decay {r['vertex']}/{r['edge']}: slope={r['slope']:.4f}")
    if not lines:
        raise UsageError(f"no artifacts in {out}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


# ------------------------------------------------------------ entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tropslag", description="Tropical curves to glued special Lagrangian models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_required=True):
        sp.add_argument("curve")
        sp.add_argument("--config")
        sp.add_argument("--T", type=float, nargs="+")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=out_required)

    sub.add_parser("validate").add_argument("curve")
    common(sub.add_parser("compile"))
    sp = sub.add_parser("sample")
    common(sp)
    sp.add_argument("--format", choices=("csv", "json", "binary"), default="csv")
    common(sub.add_parser("verify"))
    common(sub.add_parser("solve-linear"), out_required=False)
    sub.add_parser("report").add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "report":
            return cmd_report(args)
        cfg = load_config(args.config, {"T_list": args.T, "seed": args.seed})
        handler = {
            "compile": cmd_compile,
            "sample": cmd_sample,
            "verify": cmd_verify,
            "solve-linear": cmd_solve_linear,
        }[args.command]
        return handler(args, cfg)
    except UsageError as exc:
        _fail("usage", str(exc))
        return 2
    except PARSE_ERRORS as exc:
        _fail(exc.code, str(exc))
        return 2
    except OSError as exc:
        _fail("io", str(exc))
        return 2
    except TropslagError as exc:
        _fail(exc.code, str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
