"""Batch command line: JSON in, JSON or CSV out, exit codes 0/1/2/3."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from .darboux import CurvePoint, gluing_residual, wavefunction
from .divisor_lab import Divisor, compatible_divisor, invert_divisor, make_divisor, toda_from_divisor_flow
from .duality import const_ratios, dual_divisor, dual_pair, product_law_values
from .errors import TodaKPError
from .soliton_data import SolitonData, alpha_coordinates, make_soliton_data, maximal_minors
from .tau_engine import PRECISIONS, TimeVector, as_time, kp_field
from .toda_core import ba_vectors, bruhat_flow, jacobi_matrix
from .verify import CommandConfig, verify_suite

EXIT_OK, EXIT_DOMAIN, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2, 3
PRECISION_ENV = "TODAKP_PRECISION"
SUBCOMMANDS = ("validate", "divisor", "toda", "field", "dual", "invert", "ba", "verify")
INPUT_FIELDS = {
    "kappa": list, "a": list, "k": int, "t": (list, float, int), "grid": str, "seed": int,
    "gamma": list, "delta": list, "zeta": (list, float, int), "trials": int, "n_max": int,
}
VALUE_FLAGS = {"--kappa", "--a", "--t", "--gamma", "--delta", "--zeta", "--grid"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def parse_grid(spec: str) -> dict[str, np.ndarray]:
    """'x=a:b:n,y=a:b:n,t=a:b:n' into axis arrays; omitted axes are the single point 0."""
    axes = {"x": np.zeros(1), "y": np.zeros(1), "t": np.zeros(1)}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, rng = part.partition("=")
        name = name.strip()
        if name not in axes or not rng:
            raise UsageError(f"bad grid axis {part!r}; expected x=lo:hi:count, y=..., t=...")
        bits = rng.split(":")
        if len(bits) != 3:
            raise UsageError(f"grid axis {name} needs lo:hi:count, got {rng!r}")
        try:
            lo, hi, cnt = float(bits[0]), float(bits[1]), int(bits[2])
        except ValueError:
            raise UsageError(f"grid axis {name} has non-numeric bounds {rng!r}")
        if cnt < 1:
            raise UsageError(f"grid axis {name} needs count >= 1")
        axes[name] = np.linspace(lo, hi, cnt)
    return axes


def grid_points(axes: dict[str, np.ndarray]) -> np.ndarray:
    """(x, y, t3) rows with x varying fastest, then y, then t3."""
    T, Y, X = np.meshgrid(axes["t"], axes["y"], axes["x"], indexing="ij")
    return np.column_stack((X.ravel(), Y.ravel(), T.ravel()))


def _join_negative_values(argv: Sequence[str]) -> list[str]:
    """Rewrite '--kappa -1,1' as '--kappa=-1,1' so argparse does not read it as a flag."""
    out, i = [], 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        if tok in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and len(argv[i + 1]) > 1:
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="todakp", description="Line solitons, Toda flows and their spectral divisors.")
    sub = p.add_subparsers(dest="subcommand", parser_class=_Parser)
    sub.required = True
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--input", help="JSON document with fields kappa, a, k, t, grid, seed, ...")
        s.add_argument("--kappa", type=_float_list)
        s.add_argument("--a", type=_float_list, help="positive weights; normalized to sum 1")
        s.add_argument("--k", type=int)
        s.add_argument("--t", type=_float_list, help="times t1,t2,...")
        s.add_argument("--precision", choices=PRECISIONS)
        s.add_argument("--output", help="write here instead of stdout")
        if name == "field":
            s.add_argument("--grid", help="x=lo:hi:n,y=lo:hi:n,t=lo:hi:n")
        if name == "toda":
            s.add_argument("--route", choices=("tau", "bruhat", "divisor-flow"), default="tau")
            s.add_argument("--anchor", type=int, default=1, help="1-based node for the divisor-flow route")
        if name == "invert":
            s.add_argument("--gamma", type=_float_list)
            s.add_argument("--delta", type=_float_list)
        if name == "ba":
            s.add_argument("--zeta", type=_float_list)
        if name == "verify":
            s.add_argument("--seed", type=int)
            s.add_argument("--trials", type=int)
            s.add_argument("--n-max", type=int, dest="n_max")
            s.add_argument("--tol-identity", type=float)
            s.add_argument("--tol-fd", type=float)
            s.add_argument("--tol-gluing", type=float)
            s.add_argument("--tol-richardson", type=float)
            s.add_argument("--no-timing", action="store_true", help="omit runtime for byte-stable reports")
    return p


def load_input(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: top level must be an object")
    for key, val in doc.items():
        if key not in INPUT_FIELDS:
            raise UsageError(f"{path}: unknown field {key!r}")
        want = INPUT_FIELDS[key]
        if isinstance(val, bool) or not isinstance(val, want):
            raise UsageError(f"{path}: field {key!r} has the wrong type ({type(val).__name__})")
        if isinstance(val, list) and not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
            raise UsageError(f"{path}: field {key!r} must be a list of numbers")
    return doc


def _merged(args: argparse.Namespace) -> dict:
    doc = load_input(args.input) if args.input else {}
    for key in INPUT_FIELDS:
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    return doc


def _require(doc: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in doc]
    if missing:
        raise UsageError("missing " + ", ".join(f"--{k.replace('_', '-')}" for k in missing))


def _data(doc: dict) -> SolitonData:
    _require(doc, "kappa", "a")
    return make_soliton_data(doc["kappa"], doc["a"])


def _time(doc: dict) -> TimeVector:
    t = doc.get("t", 0.0)
    return as_time(t if isinstance(t, list) else [t])


def _precision(args) -> str:
    if args.precision:
        return args.precision
    env = os.environ.get(PRECISION_ENV, "standard")
    if env not in PRECISIONS:
        raise UsageError(f"{PRECISION_ENV}={env!r} is not one of {', '.join(PRECISIONS)}")
    return env


def _floats(x) -> list[float]:
    return [float(v) for v in np.atleast_1d(x)]


def divisor_doc(d: Divisor) -> dict:
    return {
        "k": d.k,
        "t": list(d.t.times),
        "gamma": list(d.gammas),
        "delta": list(d.deltas),
        "gamma_ovals": list(d.gamma_ovals),
        "delta_ovals": list(d.delta_ovals),
        "generic": d.generic,
        "collisions": [{"node": j + 1, "gamma_index": gi, "delta_index": di} for j, gi, di in d.collisions],
        "occupancy_before": list(d.assignment.before),
        "occupancy_after": list(d.assignment.after),
    }


def cmd_validate(args, doc):
    data = _data(doc)
    worst = min(min(maximal_minors(data, k).values()) for k in range(1, data.n))
    return {
        "valid": True,
        "n": data.n,
        "kappa": list(data.kappa),
        "a": list(data.a),
        "alpha": list(alpha_coordinates(data).alpha),
        "min_maximal_minor": float(worst),
    }


def cmd_divisor(args, doc):
    data = _data(doc)
    _require(doc, "k")
    return divisor_doc(compatible_divisor(data, doc["k"], _time(doc)))


def cmd_toda(args, doc):
    data = _data(doc)
    t = _time(doc)
    precision = _precision(args)
    if args.route == "bruhat":
        state = bruhat_flow(jacobi_matrix(data, 0.0), t)
    elif args.route == "divisor-flow":
        state = toda_from_divisor_flow(data, args.anchor, t, precision=precision)
    else:
        state = jacobi_matrix(data, t, precision)
    return {
        "route": args.route,
        "t": list(t.times),
        "a": _floats(state.a),
        "b": _floats(state.b),
        "spectrum": _floats(np.sort(state.spectrum())),
    }


def cmd_field(args, doc):
    data = _data(doc)
    _require(doc, "k")
    axes = parse_grid(doc.get("grid", "x=0:0:1"))
    pts = grid_points(axes)
    u = kp_field(data, doc["k"], pts, _time(doc))
    lines = ["x,y,t,u"]
    lines += [",".join("%.17g" % v for v in (*p, w)) for p, w in zip(pts, u)]
    return "\n".join(lines) + "\n"


def cmd_dual(args, doc):
    data = _data(doc)
    _require(doc, "k")
    k = doc["k"]
    pair = dual_pair(data, k)
    return {
        "k": k,
        "dual_k": data.n - k,
        "dual_a": list(pair.dual.a),
        "scale_constant": pair.scale_constant,
        "product_law": _floats(product_law_values(data, pair.dual)),
        "dual_divisor": divisor_doc(dual_divisor(data, k)),
        "const_ratios": {str(j + 1): v for j, v in const_ratios(data, k).items()},
    }


def cmd_invert(args, doc):
    _require(doc, "kappa")
    gam, dl = doc.get("gamma", []), doc.get("delta", [])
    d = make_divisor(doc["kappa"], gam, dl)
    if "k" in doc and doc["k"] != d.k:
        raise UsageError(f"--k {doc['k']} disagrees with {d.k} gamma points")
    data = invert_divisor(doc["kappa"], d)
    return {"k": d.k, "kappa": list(data.kappa), "a": list(data.a), "generic": d.generic}


def cmd_ba(args, doc):
    data = _data(doc)
    _require(doc, "zeta")
    t = _time(doc)
    zetas = doc["zeta"] if isinstance(doc["zeta"], list) else [doc["zeta"]]
    k = doc.get("k", 0)
    precision = _precision(args)
    out = []
    for z in zetas:
        pair = ba_vectors(data, z, t)
        rec = {"zeta": float(z), "psi": _floats(pair.psi), "psi_sigma": _floats(pair.psi_sigma)}
        vals = {}
        for sheet in ("plus", "minus"):
            w = wavefunction(data, k, CurvePoint(sheet, float(z)), t, precision=precision)
            vals[sheet] = None if w.at_pole else w.value
        rec["wavefunction"] = vals
        out.append(rec)
    return {"k": k, "t": list(t.times), "points": out, "gluing_residual": gluing_residual(data, k, t)}


def cmd_verify(args, doc):
    tols = {}
    for name, attr in (("identity", "tol_identity"), ("finite_difference", "tol_fd"),
                       ("gluing", "tol_gluing"), ("richardson", "tol_richardson")):
        v = getattr(args, attr)
        if v is not None:
            tols[name] = v
    cfg = CommandConfig(
        subcommand="verify",
        input_path=args.input,
        kappa=doc.get("kappa"),
        a=doc.get("a"),
        k=doc.get("k"),
        precision=_precision(args),
        seed=doc.get("seed", 42),
        trials=doc.get("trials", 100),
        n_max=doc.get("n_max", 8),
        tolerances=tols,
    )
    if cfg.trials < 1:
        raise UsageError("--trials must be >= 1")
    if cfg.n_max < 2:
        raise UsageError("--n-max must be >= 2")
    report = verify_suite(cfg)
    return report.to_json(include_timing=not args.no_timing) + "\n", report.passed


COMMANDS = {
    "validate": cmd_validate, "divisor": cmd_divisor, "toda": cmd_toda, "field": cmd_field,
    "dual": cmd_dual, "invert": cmd_invert, "ba": cmd_ba, "verify": cmd_verify,
}


def _finite(obj):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_command(argv: Sequence[str]) -> int:
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        doc = _merged(args)
        result = COMMANDS[args.subcommand](args, doc)
        passed = True
        if isinstance(result, tuple):
            result, passed = result
        if not isinstance(result, str):
            result = json.dumps(_finite(result), indent=2, sort_keys=True) + "\n"
        _emit(result, args.output)
        return EXIT_OK if passed else EXIT_VERIFY
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TodaKPError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main(argv: Sequence[str] | None = None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
