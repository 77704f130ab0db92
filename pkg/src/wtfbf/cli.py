"""Command-line interface: ``wtfbf generate | stats | oracle | replay``.

Exit codes: 0 success, 2 invalid parameters or usage, 3 numerical
non-convergence, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from . import oracle, stats
from ._quadrature import QuadratureError, QuadratureSpec
from .params import GridSpec, ParameterError, validate
from .synthesis import NOISE_CONVENTION, derived_seed, synthesize

log = logging.getLogger("wtfbf")

EXIT_OK, EXIT_PARAMS, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUT_ENV = "WTFBF_OUT"

CSV_COLUMNS = ["population", "mean", "variance", "skewness", "se_mean", "se_variance",
               "se_skewness", "count", "n_values"]
ORACLE_COLUMNS = ["oracle_variance", "quadrature_reference"]


class UsageError(Exception):
    pass


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _params(args):
    beta = None
    if args.beta1 is not None or args.beta2 is not None:
        if args.beta1 is None or args.beta2 is None:
            raise ParameterError("--beta1 and --beta2 must be given together")
        beta = (args.beta1, args.beta2)
    return validate(args.alpha, args.hurst, beta)


def _quad_spec(args) -> QuadratureSpec:
    return QuadratureSpec(octave_min=args.octave_min, octave_max=args.octave_max,
                          nodes_per_cell=args.nodes, target_rel_tol=args.rtol)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(command, args, params, grid, seeds, **extra):
    m = {
        "schema": fio.MANIFEST_SCHEMA,
        "tool_version": __version__,
        "command": command,
        "argv": sys.argv[1:],
        "params": params.to_dict(),
        "resolution": grid.resolution,
        "base_seed": args.seed,
        "seeds": seeds,
        "samples": len(seeds),
        "noise_convention": NOISE_CONVENTION,
        "quadrature": None,
        "created": _now(),
    }
    m.update(extra)
    return m


# --- generate -------------------------------------------------------------------

def _generate(params, grid, base_seed, count, fmt, out: Path, workers=1):
    seeds = [derived_seed(base_seed, i) for i in range(count)]
    files = []
    for i, seed in enumerate(seeds):
        sample = synthesize(params, grid, seed, workers=workers)
        name = f"field_{i:04d}.{fmt}"
        meta = fio.write_field(out / name, sample.values, fmt)
        meta["seed"] = seed
        files.append(meta)
    return seeds, files


def cmd_generate(args) -> int:
    params = _params(args)
    grid = GridSpec(args.size)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    out = _out_dir(args)
    t0 = time.perf_counter()
    seeds, files = _generate(params, grid, args.seed, args.samples, args.format, out, args.workers)
    manifest = _manifest("generate", args, params, grid, seeds, format=args.format, files=files,
                         elapsed_s=time.perf_counter() - t0)
    fio.write_json(out / "manifest.json", manifest)
    log.info("wrote %d field(s) to %s", len(files), out)
    return EXIT_OK


def cmd_replay(args) -> int:
    """Regenerate every field listed in a manifest."""
    m = fio.read_json(args.manifest)
    if m.get("schema") != fio.MANIFEST_SCHEMA:
        raise UsageError(f"unsupported manifest schema {m.get('schema')!r}")
    if m["command"] != "generate":
        raise UsageError("only generate manifests can be replayed")
    p = m["params"]
    beta = (p["beta1"], p["beta2"]) if p["beta1"] is not None else None
    params = validate(p["alpha"], p["hurst"], beta)
    grid = GridSpec(m["resolution"])
    out = _out_dir(args)
    seeds, files = _generate(params, grid, m["base_seed"], m["samples"], m["format"], out)
    if seeds != m["seeds"]:
        raise UsageError("seed derivation differs from the manifest")
    mismatched = [f["path"] for f, g in zip(files, m["files"]) if f["sha256"] != g["sha256"]]
    fio.write_json(out / "manifest.json", dict(m, replayed=_now()))
    if mismatched:
        log.error("replay produced different bytes for: %s", ", ".join(mismatched))
        return EXIT_NUMERIC
    return EXIT_OK


# --- stats ----------------------------------------------------------------------

def moment_report(params, grid, base_seed, count, lag=None, rescale=2, with_oracle=False,
                 q: QuadratureSpec | None = None, workers=1):
    """Moments of the field, increment and rescaled populations of one batch."""
    from .synthesis import synthesize_batch

    m = grid.resolution
    lag = tuple(lag) if lag else (m // 2, m // 2)
    samples = synthesize_batch(params, grid, base_seed, count, workers=workers)
    pops = stats.moment_populations(samples, lag=lag, rescale=rescale)
    rows = []
    comparisons = {}
    for name, arrays in pops.items():
        rep = stats.moments(arrays)
        row = {"population": name, "mean": rep.mean, "variance": rep.variance,
               "skewness": rep.skewness, "se_mean": rep.standard_error_mean,
               "se_variance": rep.standard_error_variance,
               "se_skewness": rep.standard_error_skewness, "count": rep.count,
               "n_values": rep.n_values}
        if with_oracle:
            ov = stats.expected_pooled_variance(params, grid, name, count, lag, rescale)
            if name == "X":
                qr = oracle.variance_quadrature((1.0, 1.0), params, q)
                dv = oracle.discrete_variance(params, grid, (m, m))
            elif name == "dX":
                qr = oracle.increment_variance_quadrature(lag[0] / m, lag[1] / m, params, q)
                dv = oracle.discrete_increment_variance(params, grid, lag)
            else:
                qr = oracle.variance_quadrature((1.0 / rescale, 1.0 / rescale), params, q)
                dv = oracle.discrete_variance(params, grid, (m, m)) * rescale ** (-4 * params.hurst)
            row["oracle_variance"] = ov
            row["quadrature_reference"] = qr.value
            comparisons[name] = {
                "oracle_pooled_variance": ov,
                "oracle_pooled_variance_unit_modulus_noise": ov / 2.0,
                "variance_z": (rep.variance - ov) / rep.standard_error_variance,
                "ratio_to_oracle": rep.variance / ov,
                "quadrature_point_variance": qr.value,
                "quadrature_tolerance": qr.error,
                "discrete_point_variance": dv,
                "discretization_gap": dv / qr.value - 1.0,
            }
        rows.append(row)
    return rows, comparisons, lag


def rows_to_csv(rows, with_oracle=False) -> str:
    cols = CSV_COLUMNS + (ORACLE_COLUMNS if with_oracle else [])
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_stats(args) -> int:
    params = _params(args)
    grid = GridSpec(args.size)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    out = _out_dir(args)
    q = _quad_spec(args)
    rows, comparisons, lag = moment_report(params, grid, args.seed, args.samples, args.lag,
                                          args.rescale, args.oracle, q, args.workers)
    fio.atomic_write(out / "moments.csv", rows_to_csv(rows, args.oracle).encode())
    seeds = [derived_seed(args.seed, i) for i in range(args.samples)]
    summary = _manifest("stats", args, params, grid, seeds, lag=list(lag), rescale=args.rescale,
                        quadrature=q.to_dict() if args.oracle else None,
                        rows=rows, oracle=comparisons)
    fio.write_json(out / "summary.json", summary)
    sys.stdout.write(rows_to_csv(rows, args.oracle))
    return EXIT_OK


# --- oracle ---------------------------------------------------------------------

def cmd_oracle(args) -> int:
    q = _quad_spec(args)
    which = args.which
    result: dict = {"oracle": which, "quadrature": q.to_dict()}
    if which == "fbs":
        r = oracle.fbs_covariance(args.x, args.y or args.x, args.hurst, q)
        result["params"] = {"hurst": args.hurst}
    else:
        params = _params(args)
        result["params"] = params.to_dict()
        if which == "cov":
            r = oracle.covariance_quadrature(args.x, args.y or args.x, params, q)
        elif which == "incvar":
            r = oracle.increment_variance_quadrature(args.h[0], args.h[1], params, q)
        elif which == "c1":
            r = oracle.c1_constant(params, q)
        elif which == "discrete-var":
            grid = GridSpec(args.size)
            value = oracle.discrete_variance(params, grid, args.k)
            r = oracle.QuadratureResult(value, 0.0, [{"exact_sum_terms": (2 * args.size) ** 2}])
        elif which == "exact-sample":
            pts = _point_grid(args.points) if args.points else np.array(args.x).reshape(-1, 2)
            cov = oracle.assemble_covariance(pts, params, q)
            draw = oracle.exact_sample(cov, params, q, args.seed)
            result.update(points=pts, sample=draw, jitter=cov.jitter,
                          covariance_tolerance=cov.max_error, seed=args.seed)
            json.dump(result, sys.stdout, indent=2, default=fio._jsonable)
            sys.stdout.write("\n")
            return EXIT_OK
        else:  # pragma: no cover - argparse restricts choices
            raise UsageError(which)
    result.update(r.to_dict())
    json.dump(result, sys.stdout, indent=2, default=fio._jsonable)
    sys.stdout.write("\n")
    return EXIT_OK


def _point_grid(n):
    t = np.arange(1, n + 1) / n
    return np.array([(a, b) for a in t for b in t])


# --- parser ---------------------------------------------------------------------

def _add_model(p, required=True):
    p.add_argument("--alpha", type=float, required=required)
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)


def _add_quad(p):
    d = QuadratureSpec()
    p.add_argument("--octave-min", type=int, default=d.octave_min)
    p.add_argument("--octave-max", type=int, default=d.octave_max)
    p.add_argument("--nodes", type=int, default=d.nodes_per_cell)
    p.add_argument("--rtol", type=float, default=d.target_rel_tol)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wtfbf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize textures")
    _add_model(g)
    g.add_argument("--size", type=int, default=512, help="grid resolution M")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--samples", type=int, default=1)
    g.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    g.add_argument("--format", choices=("raw", "pgm", "png"), default="raw")
    g.add_argument("--workers", type=int, default=1)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", help="moments of field, increment and rescaled populations")
    _add_model(s)
    s.add_argument("--size", type=int, default=512)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--lag", type=int, nargs=2, metavar=("L1", "L2"))
    s.add_argument("--rescale", type=int, default=2)
    s.add_argument("--oracle", action="store_true", help="add oracle variance columns")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    _add_quad(s)
    s.set_defaults(func=cmd_stats)

    o = sub.add_parser("oracle", help="evaluate an oracle quantity")
    o.add_argument("which", choices=("cov", "incvar", "c1", "discrete-var", "fbs", "exact-sample"))
    o.add_argument("--alpha", type=float, default=0.0)
    o.add_argument("--hurst", type=float, required=True)
    o.add_argument("--beta1", type=float)
    o.add_argument("--beta2", type=float)
    o.add_argument("--x", type=float, nargs="+", default=[1.0, 1.0])
    o.add_argument("--y", type=float, nargs=2)
    o.add_argument("--h", type=float, nargs=2, default=[1.0, 1.0])
    o.add_argument("--size", type=int, default=64)
    o.add_argument("--k", type=int, nargs=2, default=[64, 64])
    o.add_argument("--points", type=int, help="use the n x n grid in (0, 1]^2")
    o.add_argument("--seed", type=int, default=0)
    _add_quad(o)
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("replay", help="regenerate the outputs listed in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out")
    r.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParameterError, UsageError) as exc:
        print(f"wtfbf: error: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except QuadratureError as exc:
        print(f"wtfbf: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"wtfbf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
