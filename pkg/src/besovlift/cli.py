"""Command-line harness.

Exit codes: 0 success, 2 the lift is obstructed, 3 invalid input, 4 an internal
invariant or acceptance check failed.  Errors are reported as one line of JSON
on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bsvg
from .acceptance import CRITERIA, DEFAULT_SEED, plateau, rng_for
from .besov import Method, diff_seminorm, haar_average_norm, haar_coeff_decompose, haar_coeff_norm
from .counterexamples import (
    NonrestrictionSpec,
    half_indicator,
    nonrestriction,
    nonrestriction_scan,
    random_step_function,
    restriction_scan,
    scan_rows_x,
    scan_to_csv,
    vortex,
)
from .errors import BesovLiftError, DegenerateEdge, ModulusCollapse, ObstructionDetected, ValidationError
from .grid import BesovParams, CircleMap, Domain, GridFunction, make_grid
from .jacobian import TestForm, disintegrate_check, pair_jacobian, plaquette_winding
from .lifting import axis_windings, lift_continuous, lift_dyadic, lift_mollifier

SCHEMA_VERSION = 1
EXIT_OK, EXIT_OBSTRUCTION, EXIT_INVALID, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("besovlift")


class ArgumentError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


@dataclass
class RunConfig:
    command: str
    seed: int = DEFAULT_SEED
    params: BesovParams | None = None
    dim: int | None = None
    level: int | None = None
    domain: Domain = Domain.TORUS
    method: str | None = None
    delta: float = 1.0
    order: int = 1
    inp: str | None = None
    out: str | None = None
    fmt: str = "json"
    extra: dict = field(default_factory=dict)


def _add_params(p, required=False):
    p.add_argument("--s", type=float, required=required)
    p.add_argument("--p", type=float, required=required)
    p.add_argument("--q", default="2", help="summability exponent, or 'inf'")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="besovlift", description="Besov norms, liftings and Jacobians of grid maps")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, io=True):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if io:
            p.add_argument("--in", dest="inp")
            p.add_argument("--out")

    p = sub.add_parser("norm", help="Besov norm estimators on a BSVG file")
    common(p)
    _add_params(p, required=True)
    p.add_argument("--method", choices=[m.value for m in Method] + ["all"], default="all")
    p.add_argument("--order", type=int, default=1, help="difference order M")
    p.add_argument("--delta", type=float, default=1.0)

    p = sub.add_parser("lift", help="lift a circle-valued map")
    common(p)
    _add_params(p)
    p.add_argument("--method", choices=("dyadic", "mollifier", "continuous"), default="dyadic")
    p.add_argument("--eps", type=float, nargs="+", help="mollifier ladder (decreasing)")

    p = sub.add_parser("winding", help="plaquette and axis windings")
    common(p)
    p.add_argument("--nonzero-only", action="store_true")

    p = sub.add_parser("pair", help="pair the Jacobian with a test form")
    common(p)
    p.add_argument("--zeta", help="BSVG file with the test form coefficient")
    p.add_argument("--alpha", type=int, help="index of the pure form (3D)")
    p.add_argument("--center", type=float, nargs="+", help="center of the default plateau test form")
    p.add_argument("--r0", type=float, default=0.15)
    p.add_argument("--r1", type=float, default=0.35)

    p = sub.add_parser("disintegrate", help="compare 3D pairing with slice pairings")
    common(p)
    p.add_argument("--zeta")
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--center", type=float, nargs="+")
    p.add_argument("--r0", type=float, default=0.15)
    p.add_argument("--r1", type=float, default=0.35)

    p = sub.add_parser("gen", help="generate a construction and write it as BSVG")
    common(p)
    p.add_argument("kind", choices=("vortex", "nonrestriction", "step"))
    _add_params(p)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--level", type=int)
    p.add_argument("--domain", choices=("torus", "cube"), default="cube")
    p.add_argument("--center", type=float, nargs=2)
    p.add_argument("--J", type=int, help="last construction level")
    p.add_argument("--j0", type=int, default=4)
    p.add_argument("--log-power", type=float, default=1.0)
    p.add_argument("--spec", help="nonrestriction spec as a JSON file")
    p.add_argument("--blocks", type=int, nargs="+", default=[-1, 0, 1])
    p.add_argument("--coarse-level", type=int, default=3)
    p.add_argument("--half", action="store_true", help="step: the indicator of [0, 1/2)")

    p = sub.add_parser("scan-restriction", help="row statistics of a 2D function")
    common(p)
    _add_params(p)
    p.add_argument("--rows", type=int, nargs="+", help="x cell indices (with --in)")
    p.add_argument("--spec", help="nonrestriction spec JSON (instead of --in)")
    p.add_argument("--J", type=int, nargs="+", help="truncation levels for --spec")
    p.add_argument("--row-count", type=int, default=33)

    p = sub.add_parser("verify", help="run the acceptance suites")
    common(p, io=False)
    p.add_argument("--suite", default="all", help="'all' or comma-separated criterion numbers")
    p.add_argument("--max-level", type=int)
    return ap


def _params(ns, required: bool = True) -> BesovParams | None:
    if getattr(ns, "s", None) is None or getattr(ns, "p", None) is None:
        if required:
            raise ArgumentError("--s and --p are required")
        return None
    q = ns.q
    if isinstance(q, str) and q.strip().lower() not in ("inf", "infinity"):
        try:
            q = float(q)
        except ValueError as exc:
            raise ArgumentError(f"--q must be a number or 'inf', got {ns.q!r}") from exc
    return BesovParams.of(ns.s, ns.p, q)


def parse(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if getattr(ns, "verbose", False):
        logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    cfg = RunConfig(command=ns.command, seed=ns.seed, fmt=ns.format)
    cfg.inp = getattr(ns, "inp", None)
    cfg.out = getattr(ns, "out", None)
    cfg.method = getattr(ns, "method", None)
    cfg.delta = getattr(ns, "delta", 1.0)
    cfg.order = getattr(ns, "order", 1)
    cfg.params = _params(ns, required=ns.command == "norm")
    cfg.extra = vars(ns)
    if ns.command in ("norm", "lift", "winding", "pair", "disintegrate") and not cfg.inp:
        raise ArgumentError(f"{ns.command} needs --in")
    if ns.command == "gen":
        cfg.dim, cfg.level, cfg.domain = ns.dim, ns.level, Domain.parse(ns.domain)
        if not cfg.out:
            raise ArgumentError("gen needs --out")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ArgumentError("--seed must be a 64-bit unsigned integer")
    return cfg


# ---------------------------------------------------------------- output


def _header(cfg: RunConfig) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": cfg.command, "seed": cfg.seed}


def _emit(cfg: RunConfig, payload: dict | None = None, csv_text: str | None = None, stream=None) -> None:
    stream = stream or sys.stdout
    if cfg.fmt == "csv" and csv_text is not None:
        stream.write(f"# seed={cfg.seed}\n")
        stream.write(csv_text)
    else:
        stream.write(json.dumps({**_header(cfg), **(payload or {})}, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _error(code: int, kind: str, message: str, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code, **extra}, default=_json_default) + "\n")
    return code


# ---------------------------------------------------------------- commands


def _load_map(path) -> CircleMap:
    f = bsvg.read(path)
    return CircleMap.of(f)


def cmd_norm(cfg: RunConfig) -> int:
    f = bsvg.read(cfg.inp)
    methods = [m.value for m in Method] if cfg.method == "all" else [cfg.method]
    reports = []
    for m in methods:
        if m == Method.DIFF.value:
            reports.append(diff_seminorm(f, cfg.params, M=cfg.order, delta=cfg.delta))
        elif m == Method.HAAR_AVG.value:
            reports.append(haar_average_norm(f, cfg.params))
        else:
            reports.append(haar_coeff_norm(haar_coeff_decompose(f, cfg.params)))
    if cfg.fmt == "csv":
        text = "".join(r.to_csv() if i == 0 else r.to_csv().split("\n", 1)[1] for i, r in enumerate(reports))
        _emit(cfg, csv_text=text)
    else:
        _emit(cfg, {"reports": [r.to_json() for r in reports]})
    return EXIT_OK


def cmd_lift(cfg: RunConfig) -> int:
    u = _load_map(cfg.inp)
    if cfg.method == "dyadic":
        res = lift_dyadic(u, cfg.params)
    elif cfg.method == "mollifier":
        res = lift_mollifier(u, cfg.extra.get("eps"), cfg.params)
    else:
        res = lift_continuous(u)
    if cfg.out:
        bsvg.write(cfg.out, res.phase)
    _emit(cfg, {"lift": res.to_json()})
    return EXIT_OK


def cmd_winding(cfg: RunConfig) -> int:
    u = _load_map(cfg.inp)
    wf = plaquette_winding(u)
    if cfg.fmt == "csv":
        _emit(cfg, csv_text=wf.to_csv(nonzero_only=cfg.extra.get("nonzero_only", False)))
        return EXIT_OK
    payload = {
        "total_abs": wf.total(),
        "sums": {"".join(map(str, k)): int(v.sum()) for k, v in wf.pairs.items()},
        "nonzero": [{"pair": list(p), "index": list(i), "winding": w} for p, i, w in wf.nonzero()],
    }
    if u.grid.periodic:
        payload["axis_windings"] = list(axis_windings(u))
    _emit(cfg, payload)
    return EXIT_OK


def _test_form(cfg: RunConfig, u: CircleMap) -> TestForm:
    ex = cfg.extra
    if ex.get("zeta"):
        z = bsvg.read(ex["zeta"])
        if u.dim == 2:
            return TestForm.scalar(z)
        return TestForm.pure((ex["alpha"],), z)
    center = ex.get("center") or [0.5] * u.dim
    if len(center) != u.dim:
        raise ArgumentError(f"--center needs {u.dim} coordinates")
    fn = plateau(center, ex.get("r0", 0.15), ex.get("r1", 0.35))
    if u.dim == 2:
        return TestForm.from_function(fn, u.grid)
    if ex.get("alpha") is None:
        raise ArgumentError("--alpha is required in 3D")
    return TestForm.from_function(fn, u.grid, alpha=(ex["alpha"],))


def cmd_pair(cfg: RunConfig) -> int:
    u = _load_map(cfg.inp)
    pr = pair_jacobian(u, _test_form(cfg, u))
    _emit(cfg, {"pairing": pr.to_json()})
    return EXIT_OK


def cmd_disintegrate(cfg: RunConfig) -> int:
    u = _load_map(cfg.inp)
    lhs, rhs = disintegrate_check(u, _test_form(cfg, u), (cfg.extra["alpha"],))
    _emit(cfg, {"lhs": lhs, "rhs": rhs, "equal": lhs == rhs})
    return EXIT_OK


def _spec_from(cfg: RunConfig) -> NonrestrictionSpec:
    ex = cfg.extra
    if ex.get("spec"):
        with open(ex["spec"]) as fh:
            return NonrestrictionSpec.from_json(fh.read())
    if cfg.params is None or ex.get("J") is None:
        raise ArgumentError("nonrestriction needs --spec or --s/--p/--q/--J")
    J = ex["J"][-1] if isinstance(ex["J"], list) else ex["J"]
    return NonrestrictionSpec(cfg.params, J, ex.get("j0", 4), ex.get("log_power", 1.0))


def cmd_gen(cfg: RunConfig) -> int:
    ex = cfg.extra
    kind = ex["kind"]
    meta: dict = {"kind": kind}
    if kind == "vortex":
        grid = make_grid(2, cfg.level or 8, cfg.domain)
        f = vortex(grid, ex.get("center"))
    elif kind == "nonrestriction":
        spec = _spec_from(cfg)
        grid = make_grid(2, cfg.level or spec.grid_level, Domain.CUBE)
        f = nonrestriction(spec, grid, tuple(ex["blocks"]))
        meta["spec"] = spec.to_json()
    else:
        grid = make_grid(cfg.dim, cfg.level or 8, cfg.domain)
        if ex.get("half"):
            f = half_indicator(grid)
        else:
            f = random_step_function(grid, rng_for(cfg.seed, 0), min(ex["coarse_level"], grid.level))
    bsvg.write(cfg.out, f)
    meta.update({"dim": grid.dim, "level": grid.level, "domain": grid.domain.name.lower(), "out": cfg.out})
    _emit(cfg, meta)
    return EXIT_OK


def cmd_scan(cfg: RunConfig) -> int:
    ex = cfg.extra
    if ex.get("spec") or (ex.get("J") and not cfg.inp):
        spec = _spec_from(cfg)
        Js = ex.get("J") or [spec.J]
        table = nonrestriction_scan(spec, Js, scan_rows_x(ex["row_count"]))
        params = spec.params
    else:
        if not cfg.inp:
            raise ArgumentError("scan-restriction needs --in or --spec")
        f = bsvg.read(cfg.inp)
        params = cfg.params or BesovParams.of(0.4, 2, "inf")
        rows = ex.get("rows") or list(range(f.grid.n))
        table = restriction_scan(f, params, rows)
    if cfg.fmt == "csv":
        _emit(cfg, csv_text=scan_to_csv(table))
    else:
        _emit(cfg, {"s": params.s, "p": params.p, "rows": [{"row": r.row, "J": r.J, "running_sup": r.running_sup} for r in table]})
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    suite = cfg.extra.get("suite", "all")
    if suite == "all":
        which = sorted(CRITERIA)
    else:
        try:
            which = [int(x) for x in suite.split(",")]
        except ValueError as exc:
            raise ArgumentError(f"bad --suite {suite!r}") from exc
        bad = [n for n in which if n not in CRITERIA]
        if bad:
            raise ArgumentError(f"unknown criteria {bad}")
    results = []
    for n in which:
        log.info("running criterion %d", n)
        r = CRITERIA[n](seed=cfg.seed, max_level=cfg.extra.get("max_level"))
        results.append(r)
        if cfg.fmt != "json":
            sys.stdout.write(r.line() + "\n")
    if cfg.fmt == "json":
        _emit(cfg, {"results": [r.to_json() for r in results], "passed": all(r.passed for r in results)})
    else:
        passed = sum(r.passed for r in results)
        sys.stdout.write(f"{passed}/{len(results)} criteria passed\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


COMMANDS = {
    "norm": cmd_norm,
    "lift": cmd_lift,
    "winding": cmd_winding,
    "pair": cmd_pair,
    "disintegrate": cmd_disintegrate,
    "gen": cmd_gen,
    "scan-restriction": cmd_scan,
    "verify": cmd_verify,
}


def run(cfg: RunConfig) -> int:
    try:
        return COMMANDS[cfg.command](cfg)
    except ObstructionDetected as exc:
        _emit(cfg, {"obstruction": exc.witness.to_json()})
        return _error(EXIT_OBSTRUCTION, "ObstructionDetected", str(exc), winding=exc.witness.winding)
    except ModulusCollapse as exc:
        return _error(EXIT_OBSTRUCTION, "ModulusCollapse", str(exc), eps=exc.eps, cell=exc.cell)
    except DegenerateEdge as exc:
        return _error(EXIT_INVALID, "DegenerateEdge", str(exc), cell_a=exc.cell_a, cell_b=exc.cell_b)
    except ValidationError as exc:
        return _error(EXIT_INVALID, type(exc).__name__, str(exc))
    except OSError as exc:
        return _error(EXIT_INVALID, "IOError", str(exc))
    except (ArithmeticError, AssertionError, BesovLiftError) as exc:
        return _error(EXIT_INVARIANT, type(exc).__name__, str(exc))


def main(argv=None) -> int:
    try:
        cfg = parse(sys.argv[1:] if argv is None else argv)
    except ValidationError as exc:
        return _error(EXIT_INVALID, type(exc).__name__, str(exc))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
