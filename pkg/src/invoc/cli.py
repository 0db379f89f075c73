"""Command-line front end.

One command per process: load a problem file, run the requested solve or
probe, and persist results as JSON/CSV.  Every run writes a manifest
recording the command, the problem digest, overrides, and the produced
files; the manifest is the only output containing a timestamp, so result
files are bit-identical across identical runs.

Exit codes: 0 success, 2 validation or file errors, 3 numerical failures
(non-convergence, insufficient path).  Failures leave a machine-readable
error.json in the output directory.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, InsufficientPathError, ValidationError
from .lower import solve_lower
from .model import load_problem, save_problem
from .oracle import grid_search
from .path import extract_candidate, run_path, trace_rows
from .presets import make_box_variant, make_default_problem
from .relax import solve_relaxed
from .stationarity import classify
from .value import sample_segment, value_sample


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):  # before int: bool subclasses int
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(out: Path, name: str, payload) -> str:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    _write_atomic(out / name, text + "\n")
    return name


def _write_csv(out: Path, name: str, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    _write_atomic(out / name, buf.getvalue())
    return name


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")])
    except ValueError as err:
        raise ValidationError(f"cannot parse vector {text!r}: {err}") from None


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ValidationError(f"invalid JSON in {path}: {err}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"expected a JSON object in {path}")
    return data


def _tol_overrides(args) -> dict:
    if getattr(args, "tol", None) is None:
        return {}
    t = float(args.tol)
    return {"feas_tol": t, "stat_tol": t, "comp_tol": t}


# ---------------------------------------------------------------- commands


def _cmd_lower(args, out: Path) -> list[str]:
    spec = load_problem(args.problem)
    if args.x is None:
        raise ValidationError("lower requires --x")
    sol = solve_lower(spec, _parse_vector(args.x), tol=args.tol)
    return [
        _write_json(out, "lower_solution.json", {
            "x": sol.x, "y": sol.y, "u": sol.u, "p": sol.p, "lam": sol.lam,
            "kkt_residual": sol.kkt_residual, "iterations": sol.iterations,
        })
    ]


def _value_rows(spec, args):
    if args.samples is not None:
        if args.samples < 1:
            raise ValidationError("--samples must be at least 1")
        rng = np.random.default_rng(args.seed)
        points = [spec.x_set.sample(rng) for _ in range(args.samples)]
        ts = [float(i) for i in range(len(points))]
        samples = [value_sample(spec, x) for x in points]
        return ts, samples
    if args.x is None:
        raise ValidationError("value requires --x (slice endpoints) or --samples")
    parts = args.x.split(";")
    if len(parts) == 1:
        x0 = x1 = _parse_vector(parts[0])
    elif len(parts) == 2:
        x0, x1 = _parse_vector(parts[0]), _parse_vector(parts[1])
    else:
        raise ValidationError("slice takes at most two endpoints separated by ';'")
    count = args.resolution if args.resolution is not None else 21
    samples = sample_segment(spec, x0, x1, count)
    if len(samples) == 1:
        ts = [0.0]
    else:
        ts = list(np.linspace(0.0, 1.0, len(samples)))
    return ts, samples


def _cmd_value(args, out: Path) -> list[str]:
    spec = load_problem(args.problem)
    ts, samples = _value_rows(spec, args)
    n = spec.n
    header = (
        ["t"] + [f"x{i + 1}" for i in range(n)] + ["phi"]
        + [f"dphi{i + 1}" for i in range(n)]
    )
    rows = [
        [t, *map(float, s.x), s.phi, *map(float, s.grad_phi)]
        for t, s in zip(ts, samples)
    ]
    return [_write_csv(out, "value_slice.csv", header, rows)]


def _relaxed_payload(sol) -> dict:
    return {
        "eps": sol.eps, "x": sol.x, "y": sol.y, "u": sol.u,
        "alpha": sol.alpha, "z": sol.z, "p": sol.p, "lam": sol.lam,
        "upper_value": sol.upper_value, "gap": sol.gap,
        "inner_iterations": sol.inner_iterations,
        "outer_iterations": sol.outer_iterations,
        "converged": sol.converged, "residuals": sol.residuals,
    }


def _cmd_relax(args, out: Path) -> list[str]:
    spec = load_problem(args.problem)
    sol = solve_relaxed(spec, args.eps0, **_tol_overrides(args))
    return [_write_json(out, "relaxed_solution.json", _relaxed_payload(sol))]


def _cmd_path(args, out: Path) -> list[str]:
    spec = load_problem(args.problem)
    trace = run_path(
        spec, eps0=args.eps0, ratio=args.ratio, steps=args.steps,
        **_tol_overrides(args),
    )
    outputs = []
    rows = trace_rows(trace)
    if rows:
        header = list(rows[0].keys())
        outputs.append(_write_csv(
            out, "path_trace.csv", header,
            [[row[k] for k in header] for row in rows],
        ))
    summary = {
        "eps0": trace.eps0, "ratio": trace.ratio, "steps": trace.steps,
        "completed": len(trace.records),
        "deep_enough": trace.deep_enough,
        "multiplier_sup": trace.multiplier_sup,
        "multipliers_bounded": trace.multipliers_bounded,
        "warnings": trace.warnings,
        "failure": trace.failure,
        "limit": trace.limit,
    }
    outputs.append(_write_json(out, "limit.json", summary))
    if trace.failure is not None:
        raise ConvergenceError(
            f"path failed at step {trace.failure['k']} "
            f"(eps {trace.failure['eps']:.3e}): {trace.failure['message']}",
            residuals=trace.failure["residuals"],
        )
    point, multipliers = extract_candidate(trace)
    outputs.append(_write_json(out, "candidate_point.json", point))
    outputs.append(_write_json(out, "candidate_multipliers.json", multipliers))
    return outputs


def _cmd_certify(args, out: Path) -> list[str]:
    spec = load_problem(args.problem)
    point = _load_json(args.point)
    multipliers = _load_json(args.multipliers)
    for key in ("x", "y", "u"):
        if key not in point:
            raise ValidationError(f"point file is missing field {key!r}")
    for key in ("z", "mu", "w", "rho", "xi", "p", "lam"):
        if key not in multipliers:
            raise ValidationError(f"multiplier file is missing field {key!r}")
    tol = args.tol if args.tol is not None else 1e-5
    cert = classify(spec, point, multipliers, tol=tol)
    return [_write_json(out, "certificate.json", cert.as_dict())]


def _cmd_oracle(args, out: Path) -> list[str]:
    spec = load_problem(args.problem)
    result = grid_search(spec, args.resolution, keep_samples=args.landscape)
    outputs = [
        _write_json(out, "oracle.json", {
            "best_x": result.best_x,
            "best_value": result.best_value,
            "sample_count": result.sample_count,
            "resolution": result.resolution,
            "lattice": result.lattice,
        })
    ]
    if result.samples is not None:
        n = spec.n
        header = [f"x{i + 1}" for i in range(n)] + ["value"]
        rows = [list(map(float, row)) for row in result.samples]
        outputs.append(_write_csv(out, "landscape.csv", header, rows))
    return outputs


def _cmd_make_default(args, out: Path) -> list[str]:
    if args.variant == "box":
        spec = make_box_variant()
        name = "box_problem.json"
    else:
        spec = make_default_problem()
        name = "default_problem.json"
    target = out / name
    save_problem(spec, target)
    return [name]


# ---------------------------------------------------------------- plumbing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invoc",
        description=(
            "Inverse-optimal-control toolkit: parametric lower-level solves, "
            "value-function probes, relaxed programs, relaxation paths, "
            "stationarity certification, and brute-force verification."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        if problem:
            p.add_argument("--problem", required=True, help="problem JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="RNG seed")
        p.add_argument("--tol", type=float, default=None, help="tolerance override")

    p = sub.add_parser("lower", help="solve the lower-level problem at one parameter")
    common(p)
    p.add_argument("--x", help="parameter, comma separated")
    p.set_defaults(handler=_cmd_lower)

    p = sub.add_parser("value", help="sample the optimal-value function")
    common(p)
    p.add_argument("--x", help="slice endpoints 'a,b;c,d' (or one point)")
    p.add_argument("--samples", type=int, default=None, help="random sample count")
    p.add_argument("--resolution", type=int, default=None, help="points per slice")
    p.set_defaults(handler=_cmd_value)

    p = sub.add_parser("relax", help="solve one relaxed program")
    common(p)
    p.add_argument("--eps0", type=float, default=1e-3, help="relaxation level")
    p.set_defaults(handler=_cmd_relax)

    p = sub.add_parser("path", help="run the relaxation path and extract a candidate")
    common(p)
    p.add_argument("--eps0", type=float, default=1.0, help="initial relaxation")
    p.add_argument("--ratio", type=float, default=0.5, help="geometric decrease")
    p.add_argument("--steps", type=int, default=20, help="number of decreases")
    p.set_defaults(handler=_cmd_path)

    p = sub.add_parser("certify", help="classify a candidate point")
    common(p)
    p.add_argument("--point", required=True, help="candidate point JSON")
    p.add_argument("--multipliers", required=True, help="multiplier JSON")
    p.set_defaults(handler=_cmd_certify)

    p = sub.add_parser("oracle", help="brute-force search of the reduced objective")
    common(p)
    p.add_argument("--resolution", type=int, default=200, help="lattice resolution")
    p.add_argument(
        "--landscape", action="store_true",
        help="also export every sampled value as CSV",
    )
    p.set_defaults(handler=_cmd_oracle)

    p = sub.add_parser("make-default", help="write the constructed default instance")
    common(p, problem=False)
    p.add_argument(
        "--variant", choices=("default", "box"), default="default",
        help="which shipped instance to write",
    )
    p.set_defaults(handler=_cmd_make_default)

    return parser


def _write_manifest(out: Path, args, outputs: list[str]) -> None:
    skip = {"handler", "command", "out"}
    overrides = {
        k: v for k, v in sorted(vars(args).items())
        if k not in skip and v is not None
    }
    if "problem" in overrides:
        overrides["problem"] = str(overrides["problem"])
    digest = None
    if getattr(args, "problem", None):
        digest = _digest(Path(args.problem))
    elif args.command == "make-default" and outputs:
        digest = _digest(out / outputs[0])
    manifest = {
        "command": args.command,
        "problem_digest": digest,
        "overrides": _jsonable(overrides),
        "tool_version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": getattr(args, "seed", None),
        "outputs": outputs,
    }
    _write_atomic(
        out / "manifest.json",
        json.dumps(manifest, indent=2, sort_keys=True, allow_nan=False) + "\n",
    )


def _write_error(out: Path, err: Exception, code: int) -> None:
    payload = {
        "error": type(err).__name__,
        "message": str(err),
        "exit_code": code,
    }
    residuals = getattr(err, "residuals", None)
    if residuals:
        payload["residuals"] = _jsonable(residuals)
    try:
        _write_atomic(
            out / "error.json",
            json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n",
        )
    except OSError:
        pass


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"error: cannot create output directory: {err}", file=sys.stderr)
        return 2
    try:
        outputs = args.handler(args, out)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        _write_error(out, err, 2)
        return 2
    except (ConvergenceError, InsufficientPathError) as err:
        print(f"error: {err}", file=sys.stderr)
        _write_error(out, err, 3)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        _write_error(out, err, 2)
        return 2
    _write_manifest(out, args, outputs)
    return 0


if __name__ == "__main__":
    sys.exit(main())
