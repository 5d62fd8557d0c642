"""Command-line front end: certify, solve, scan, verify, curves."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from . import config, core, diamond, fertile, oracle, uniqueness
from .errors import HardCoreError, ParameterError
from .utils import ScanSettings, fmt_float, ordered_map

logger = logging.getLogger(__name__)

MODELS = ("diamond", "stick", "gun", "key", "custom")
SCAN_MODES = ("ti-full", "ising", "periodic", "stick", "gun", "key")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
EXIT_INAPPLICABLE = 3

PARAM_NAMES = ("alpha", "beta", "a", "b", "c", "d")


# -- helpers --------------------------------------------------------------------

def _settings(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {name: getattr(args, name, None) for name in config.VALIDATORS}
    model = args.model if getattr(args, "model", None) in config.MODEL_SECTIONS else None
    return config.load_settings(model, getattr(args, "config", None), overrides)


def _model_params(model: str, settings: Dict[str, Any]) -> Dict[str, float]:
    names = ("alpha", "beta") if model in ("diamond", "stick") else PARAM_NAMES
    params = {}
    for name in names:
        if name in settings:
            params[name] = settings[name]
        elif not (model == "key" and name == "d"):
            raise ParameterError(f"model '{model}' needs --{name}")
    return params


def _matrix(args: argparse.Namespace, settings: Dict[str, Any]) -> core.TransitionMatrix:
    if args.model == "custom":
        if not args.matrix:
            raise ParameterError("model 'custom' needs --matrix '[[...], [...], [...], [...]]'")
        return core.from_json(args.matrix)
    return core.build_matrix(args.model, _model_params(args.model, settings))


def _scan(settings: Dict[str, Any]) -> ScanSettings:
    return ScanSettings(intervals=settings["intervals"])


def _fertile_params(model: str, settings: Dict[str, Any]) -> fertile.FertileParams:
    return fertile.FertileParams(model, k=settings["k"], **_model_params(model, settings))


def _workers(args: argparse.Namespace) -> int:
    return args.threads if getattr(args, "threads", None) else config.thread_count()


@contextlib.contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if not path or path == "-":
        yield sys.stdout
        return
    try:
        stream = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ParameterError(f"cannot write {path}: {exc.strerror or exc}") from exc
    with stream:
        yield stream


def _write_rows(stream: TextIO, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_float(x) if isinstance(x, (float, np.floating)) else x for x in row])


# -- certify ---------------------------------------------------------------------

def cmd_certify(args: argparse.Namespace) -> int:
    settings = _settings(args)
    P = _matrix(args, settings)
    shortcut = uniqueness.degree_shortcut(P.graph)
    if shortcut:
        logger.info("outdegree shortcut: %s", shortcut)
    cert = uniqueness.certify_uniqueness(
        P, settings["k"], tol=settings["tol"], m_max=settings["m_max"],
        grid=settings["theta_grid"], floor=settings["box_floor"])
    json.dump(cert.to_json(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    if cert.verdict is uniqueness.Verdict.PASS:
        return EXIT_OK
    if cert.verdict is uniqueness.Verdict.INAPPLICABLE:
        print(f"certificate inapplicable: {'; '.join(cert.notes)}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    print("failed to certify uniqueness (this does not prove non-uniqueness)", file=sys.stderr)
    return EXIT_FAIL


# -- solve -------------------------------------------------------------------------

def _solve_table(args: argparse.Namespace, settings: Dict[str, Any]) -> Tuple[List[str], List[List[Any]]]:
    model, mode, k = args.model, args.mode, settings["k"]
    scan = _scan(settings)
    if mode == "experimental" or model == "custom":
        P = _matrix(args, settings)
        roots = core.multistart_fixed_points(P, k, starts=settings["starts"], seed=settings["seed"])
        logger.info("experimental multi-start with seed %d", settings["seed"])
        return (["z1", "z2", "z3", "residual"],
                [[z.z1, z.z2, z.z3, core.fixed_point_residual(P, k, z)] for z in roots])
    if model == "diamond":
        p = diamond.DiamondParams(settings["alpha"], settings["beta"], k)
        if mode == "ti":
            sols = diamond.ti_diamond_solutions(p, scan)
            return (["v", "u", "w", "f", "g", "h", "residual"],
                    [[s.v, s.u, s.w, s.f, s.g, s.h, s.residual] for s in sols])
        if mode == "ising":
            roots = diamond.ising_fixed_points(p, scan)
            return (["z", "residual"],
                    [[z, abs(float(diamond.ising_g(z, p)) - z) / max(1.0, z)] for z in roots])
        if mode == "periodic":
            pairs = diamond.periodic_pairs_k2(p) if k == 2 else diamond.periodic_scan_general(p, scan)
            return (["z_even", "z_odd", "residual"], [[q.z_even, q.z_odd, q.residual] for q in pairs])
        raise ParameterError(f"unknown solve mode '{mode}' for diamond")
    if mode != "ti":
        raise ParameterError(f"model '{model}' supports modes ti and experimental")
    p = _fertile_params(model, settings)
    sols = fertile.fertile_solutions(p, scan, settings["epsilon"])
    first = ["v", "u", "w"] if model == "stick" else ["u", "v", "w"]
    rows = [[s.v, s.u, s.w, s.residual] if model == "stick" else [s.u, s.v, s.w, s.residual]
            for s in sols]
    return first + ["residual"], rows


def cmd_solve(args: argparse.Namespace) -> int:
    settings = _settings(args)
    header, rows = _solve_table(args, settings)
    with _output(args.out) as stream:
        _write_rows(stream, header, rows)
    return EXIT_OK


# -- scan --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanGrid:
    """Row-major grid: alpha outer, second axis (beta, or c for gun/key) inner."""

    mode: str
    alpha_range: Tuple[float, float]
    second_range: Tuple[float, float]
    resolution: int
    k: int
    fixed: Dict[str, float]

    def __post_init__(self) -> None:
        if self.mode not in SCAN_MODES:
            raise ParameterError(f"unknown scan mode '{self.mode}'")
        if self.resolution < 2:
            raise ParameterError(f"resolution must be >= 2, got {self.resolution}")
        for lo, hi in (self.alpha_range, self.second_range):
            if not 0.0 < lo < hi < 1.0:
                raise ParameterError(f"range [{lo}, {hi}] must satisfy 0 < lo < hi < 1")

    def header(self) -> List[str]:
        # gun and key rows carry c in the beta column
        return ["alpha", "beta", "criterion", "root_count", "label"]

    def points(self) -> List[Tuple[float, float]]:
        alphas = np.linspace(*self.alpha_range, self.resolution)
        seconds = np.linspace(*self.second_range, self.resolution)
        return [(float(a), float(b)) for a in alphas for b in seconds]


def classify_grid_point(grid: ScanGrid, point: Tuple[float, float], scan: ScanSettings,
                        epsilon: float = config.DEFAULT_KEY_EPSILON) -> core.PointClassification:
    alpha, second = point
    if grid.mode in diamond.DIAMOND_MODES:
        return diamond.classify_point(diamond.DiamondParams(alpha, second, grid.k), grid.mode, scan)
    if grid.mode == "stick":
        return fertile.classify_fertile(fertile.FertileParams("stick", alpha, second, k=grid.k), scan)
    d = 0.0 if grid.mode == "key" else grid.fixed["d"]
    rest = (1.0 - second - d) / 2.0
    try:
        p = fertile.FertileParams(grid.mode, alpha, alpha, a=rest, b=rest, c=second, d=d, k=grid.k)
    except ParameterError:
        return core.PointClassification(alpha, second, grid.mode, float("nan"), 0, "invalid")
    return fertile.classify_fertile(p, scan, epsilon)


def run_scan(grid: ScanGrid, scan: ScanSettings, workers: int = 1,
             epsilon: float = config.DEFAULT_KEY_EPSILON) -> List[core.PointClassification]:
    return ordered_map(lambda pt: classify_grid_point(grid, pt, scan, epsilon), grid.points(), workers)


def cmd_scan(args: argparse.Namespace) -> int:
    settings = _settings(args)
    fixed = {}
    if args.mode == "gun":
        if "d" not in settings:
            raise ParameterError("gun scan needs --d")
        fixed["d"] = settings["d"]
    second = args.c_range if args.mode in ("gun", "key") else args.beta_range
    grid = ScanGrid(args.mode, tuple(args.alpha_range), tuple(second), args.resolution,
                    settings["k"], fixed)
    rows = run_scan(grid, _scan(settings), _workers(args), settings["epsilon"])
    with _output(args.out) as stream:
        _write_rows(stream, grid.header(),
                    [[r.alpha, r.beta, float(r.criterion), r.root_count, r.label] for r in rows])
    logger.info("scan %s: %d points, %d labelled multiple", args.mode, len(rows),
                sum(r.label == "multiple" for r in rows))
    return EXIT_OK


# -- verify ------------------------------------------------------------------------

def _nontrivial_first(fields: List[core.FieldVector]) -> core.FieldVector:
    for z in fields:
        if np.max(np.abs(z.as_array() - 1.0)) > 1e-6:
            return z
    return fields[0] if fields else core.FieldVector.ones()


def _verification_fields(args: argparse.Namespace, settings: Dict[str, Any],
                         P: core.TransitionMatrix) -> Tuple[core.FieldVector, Optional[core.FieldVector]]:
    k, scan = settings["k"], _scan(settings)
    if args.model == "diamond":
        p = diamond.DiamondParams(settings["alpha"], settings["beta"], k)
        if args.periodic:
            pairs = diamond.periodic_pairs_k2(p) if k == 2 else diamond.periodic_scan_general(p, scan)
            if not pairs:
                raise ParameterError("no period-2 pair at these parameters")
            return pairs[0].fields()
        return _nontrivial_first([s.field() for s in diamond.ti_diamond_solutions(p, scan)]), None
    if args.model in fertile.FERTILE_GRAPHS:
        p = _fertile_params(args.model, settings)
        sols = fertile.fertile_solutions(p, scan, settings["epsilon"])
        return _nontrivial_first([s.field(k) for s in sols]), None
    return _nontrivial_first(core.multistart_fixed_points(P, k, settings["starts"], settings["seed"])), None


def cmd_verify(args: argparse.Namespace) -> int:
    settings = _settings(args)
    k = settings["k"]
    P = _matrix(args, settings)
    branching = k + 1 if args.root == "full" else k
    shape = core.TreeShape(k, settings["n"], branching)
    field, odd = _verification_fields(args, settings, P)
    report = oracle.verify_model(P, shape, field, odd, budget=settings["budget"])
    print(f"tree: k={k} depth={shape.depth} root_branching={branching} vertices={shape.vertex_count}")
    print(f"boundary law: ({fmt_float(field.z1)}, {fmt_float(field.z2)}, {fmt_float(field.z3)})")
    print(f"admissible configurations: {report.configurations}")
    print(f"solution residual: {report.solution_residual:.3e}")
    print(f"perturbed residual: {report.perturbed_residual:.3e}")
    print(f"status: {'ok' if report.passed else 'FAILED'}")
    if args.dump:
        tree = oracle.FiniteTree(shape)
        law = oracle.FiniteVolumeLaw(P, oracle.boundary_from_field(tree, field, odd))
        with _output(args.dump) as stream:
            oracle.measure_table_csv(law, tree, stream, settings["budget"])
    return EXIT_OK if report.passed else EXIT_FAIL


# -- curves ------------------------------------------------------------------------

def cmd_curves(args: argparse.Namespace) -> int:
    k = args.k or config.DEFAULT_SETTINGS["k"]
    lo, hi = args.beta_range
    if not 0.0 < lo < hi < 1.0:
        raise ParameterError(f"beta range [{lo}, {hi}] must satisfy 0 < lo < hi < 1")
    rows = []
    for beta in np.linspace(lo, hi, args.resolution):
        beta = float(beta)
        plus = diamond.ti_critical_alphas(beta, k, 1.0)
        minus = diamond.ti_critical_alphas(beta, k, -1.0)
        ising = diamond.ising_critical_alpha(beta, k)
        rows.append([beta, ising if ising < 1.0 else "",
                     plus[0] if plus else "", minus[0] if minus else ""])
    with _output(args.out) as stream:
        _write_rows(stream, ["beta", "ising_alpha", "ti_alpha_plus", "ti_alpha_minus"], rows)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, model_required: bool = True) -> None:
    p.add_argument("--model", choices=MODELS, required=model_required)
    p.add_argument("--matrix", help="JSON array of 4 rows (model 'custom')")
    for name in PARAM_NAMES:
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="branching order")
    p.add_argument("--intervals", type=int, default=None, help="bracket scan intervals")
    p.add_argument("--epsilon", type=float, default=None, help="lower scan end for the key graph")
    p.add_argument("--seed", type=int, default=None, help="multi-start seed (experimental solver)")
    p.add_argument("--starts", type=int, default=None, help="multi-start count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardcore.py",
        description="Gibbs measures of four-state hard-core models on Cayley trees")
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="uniqueness certificate (JSON)")
    _add_common(p)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--m-max", dest="m_max", type=int, default=None)
    p.add_argument("--theta-grid", dest="theta_grid", type=int, default=None)
    p.add_argument("--box-floor", dest="box_floor", type=float, default=None)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("solve", help="fixed points at one parameter point (CSV)")
    _add_common(p)
    p.add_argument("--mode", choices=("ti", "ising", "periodic", "experimental"), default="ti")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scan", help="classify a parameter grid (CSV)")
    _add_common(p, model_required=False)
    p.add_argument("--mode", choices=SCAN_MODES, required=True)
    p.add_argument("--alpha-range", dest="alpha_range", type=float, nargs=2, default=(0.01, 0.99))
    p.add_argument("--beta-range", dest="beta_range", type=float, nargs=2, default=(0.01, 0.99))
    p.add_argument("--c-range", dest="c_range", type=float, nargs=2, default=(0.01, 0.89))
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--threads", type=int, default=None, help=f"workers (default ${config.THREADS_ENV})")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="exact small-tree compatibility check")
    _add_common(p)
    p.add_argument("--n", type=int, default=None, help="tree depth")
    p.add_argument("--root", choices=("full", "half"), default="full",
                   help="root with k+1 (full) or k (half) children")
    p.add_argument("--periodic", action="store_true", help="use a period-2 pair (diamond)")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--dump", help="write the depth-n measure table as CSV")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("curves", help="transition lines of the diamond model (CSV)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--beta-range", dest="beta_range", type=float, nargs=2, default=(0.01, 0.99))
    p.add_argument("--resolution", type=int, default=99)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curves)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "model", None) is None and args.command == "scan":
        args.model = args.mode if args.mode in config.MODEL_SECTIONS else "diamond"
    try:
        return args.func(args)
    except HardCoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
