"""Command-line driver: quantize, dequantize, eval, ablate, overhead.

Exit codes: 0 success, 2 usage/config error, 3 data error (missing or
malformed inputs, shape mismatches), 4 internal error.  Output files are
written atomically; report files never contain wall-clock times, so
identical configurations and seeds produce byte-identical outputs.
"""

import argparse
import csv
import io
import sys
import time

import numpy as np

from . import container, pipeline, synthetic

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class DataError(Exception):
    """Unreadable or inconsistent input data."""


def _load_tensor(path):
    try:
        return container.read_tensor_file(path)
    except FileNotFoundError as e:
        raise DataError(f"cannot read tensor {path}: {e}") from e
    except (container.TensorFormatError, ValueError) as e:
        raise DataError(f"bad tensor file {path}: {e}") from e


def _load_archive(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise DataError(f"cannot read archive {path}: {e}") from e
    try:
        return container.read_archive(data)
    except container.ArchiveError as e:
        raise DataError(f"bad archive {path}: {e}") from e


def _write_csv(path, rows, fieldnames):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in fieldnames})
    data = buf.getvalue().encode()
    if path:
        container.atomic_write_bytes(path, data)
    else:
        sys.stdout.write(data.decode())


def _run_config(args) -> pipeline.RunConfig:
    cfg = pipeline.RunConfig(
        dim=args.dim, bits=args.bits, group_width=args.group_width,
        eta_basis=args.eta_basis, eta_mu=args.eta_mu, tol=args.tol,
        max_iters=args.max_iters, lam=args.lam, sigma_min=args.sigma_min,
        sigma_max=args.sigma_max, companding=not args.no_companding,
        bit_alloc=not args.no_bit_alloc, fixed_basis=args.fixed_basis,
        rounding=args.rounding, seed=args.seed)
    cfg.validate()
    return cfg


def cmd_quantize(args) -> int:
    cfg = _run_config(args)
    weights = _load_tensor(args.weights)
    calib = _load_tensor(args.calib)
    if weights.shape[1] != calib.shape[0]:
        raise DataError(
            f"calib feature dim {calib.shape[0]} does not match "
            f"weight columns {weights.shape[1]}")
    start = time.perf_counter()
    result = pipeline.quantize_matrix(weights, calib, cfg)
    archive_data = result.archive_bytes()
    elapsed = time.perf_counter() - start
    container.atomic_write_bytes(args.out, archive_data)

    rows = []
    for i, ((codec, _), (a, b), report) in enumerate(
            zip(result.records, result.spans, result.reports)):
        rows.append({
            "group": i, "start_col": a, "cols": b - a, "bits": codec.bits,
            "dim": codec.dim, "mu": codec.mu, "scale": codec.scale,
            "final_loss": report.final_loss, "iterations": report.iterations,
            "converged": report.converged,
            "overhead_pct": container.overhead_report(
                codec.dim, codec.rows, codec.cols, codec.bits),
        })
    if args.report:
        _write_csv(args.report, rows, list(rows[0].keys()))
    archive = container.read_archive(archive_data)
    metrics = pipeline.evaluate(weights, archive, calib)
    print(f"wrote {args.out}: {len(result.records)} groups, "
          f"{len(archive_data)} bytes")
    print(f"mean bits/weight: {result.mean_bits():.4f}  "
          f"overhead: {metrics['overhead_pct']:.3f}%")
    print(f"weight mse: {metrics['weight_mse']:.6g}  "
          f"output mse: {metrics['output_mse']:.6g}  kl: {metrics['kl']:.6g}")
    print(f"wall time: {elapsed:.2f}s")
    return EXIT_OK


def cmd_dequantize(args) -> int:
    archive = _load_archive(args.archive)
    matrix = archive.decode_matrix()
    container.write_tensor_file(args.out, matrix)
    print(f"wrote {args.out}: shape {matrix.shape[0]}x{matrix.shape[1]}")
    return EXIT_OK


def cmd_eval(args) -> int:
    original = _load_tensor(args.original)
    archive = _load_archive(args.archive)
    calib = _load_tensor(args.calib)
    try:
        metrics = pipeline.evaluate(original, archive, calib)
    except ValueError as e:
        raise DataError(str(e)) from e
    for key in ("weight_mse", "output_mse", "kl", "bits_per_weight",
                "overhead_pct", "actual_side_bytes"):
        print(f"{key}: {metrics[key]:.6g}")
    if args.out:
        _write_csv(args.out, [metrics], list(metrics.keys()))
    return EXIT_OK


def cmd_ablate(args) -> int:
    if abs(args.bits - round(args.bits)) > 1e-9:
        raise ValueError("ablation presets use integer bit-widths")
    from .codebook import FitConfig

    cfg = FitConfig(max_iters=args.max_iters, tol=args.tol)
    rows, summaries = synthetic.run_ablation(
        args.preset, seeds=args.seeds, source=args.source, dim=args.dim,
        bits=int(round(args.bits)), base_seed=args.seed, config=cfg)
    fieldnames = sorted({k for r in rows for k in r})
    # stable, readable column order
    lead = [c for c in ("preset", "seed", "arm", "mean_bits") if c in fieldnames]
    fieldnames = lead + [c for c in fieldnames if c not in lead]
    _write_csv(args.out, rows, fieldnames)
    if args.out:
        print(f"wrote {args.out}: {len(rows)} rows")
    for s in summaries:
        verdict = "holds" if s["direction_holds"] else "not significant"
        print(f"{s['preset']}: {s['better']} < {s['worse']} on {s['metric']} in "
              f"{s['wins']}/{s['wins'] + s['losses']} seeds "
              f"({s['ties']} ties), sign-test p={s['pvalue']:.4g} -> {verdict}")
    return EXIT_OK


OVERHEAD_TABLE_DIMS = (8, 16, 32)
OVERHEAD_TABLE_COLS = (128, 256)
OVERHEAD_TABLE_ROWS = 4096
OVERHEAD_TABLE_BITS = (2, 3, 4)


def cmd_overhead(args) -> int:
    if args.paper_table:
        print(f"{'d':>4} {'m':>6} {'n':>6} " +
              " ".join(f"{'b=' + str(b):>6}" for b in OVERHEAD_TABLE_BITS))
        for d in OVERHEAD_TABLE_DIMS:
            for n in OVERHEAD_TABLE_COLS:
                vals = [container.overhead_report(d, OVERHEAD_TABLE_ROWS, n, b)
                        for b in OVERHEAD_TABLE_BITS]
                print(f"{d:>4} {OVERHEAD_TABLE_ROWS:>6} {n:>6} " +
                      " ".join(f"{v:>6.2f}" for v in vals))
        return EXIT_OK
    if None in (args.dim, args.rows, args.cols, args.bits):
        raise ValueError("need --dim, --rows, --cols and --bits (or --paper-table)")
    pct = container.overhead_report(args.dim, args.rows, args.cols, args.bits)
    print(f"d={args.dim} rows={args.rows} cols={args.cols} bits={args.bits} "
          f"overhead={pct:.3f}% (table: {pct:.2f})")
    return EXIT_OK


def _add_run_flags(p):
    p.add_argument("--dim", type=int, default=8, help="lattice dimension d")
    p.add_argument("--bits", type=float, default=2.0,
                   help="target mean bits per weight (may be fractional)")
    p.add_argument("--group-width", type=int, default=128,
                   help="columns per group")
    p.add_argument("--no-bit-alloc", action="store_true",
                   help="uniform bit-widths instead of salience allocation")
    p.add_argument("--no-companding", action="store_true",
                   help="disable the mu-law stage")
    p.add_argument("--fixed-basis", action="store_true",
                   help="keep a scaled identity basis instead of learning one")
    p.add_argument("--rounding", choices=("babai", "gcd"), default="babai")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta-basis", type=float, default=1e-3)
    p.add_argument("--eta-mu", type=float, default=1e-1)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--sigma-min", type=float, default=1e-2)
    p.add_argument("--sigma-max", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glvq",
        description="Grouped lattice vector quantization of weight tensors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="compress a weight tensor into an archive")
    p.add_argument("weights", help="weight tensor (.f32 + .json manifest)")
    p.add_argument("calib", help="calibration features (.f32 + .json manifest)")
    p.add_argument("--out", required=True, help="output .glvq archive path")
    p.add_argument("--report", help="optional per-group CSV report path")
    _add_run_flags(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("dequantize", help="decode an archive back to a tensor")
    p.add_argument("archive", help=".glvq archive path")
    p.add_argument("--out", required=True, help="output tensor path")
    p.set_defaults(func=cmd_dequantize)

    p = sub.add_parser("eval", help="error metrics of an archive vs the original")
    p.add_argument("original", help="original weight tensor")
    p.add_argument("archive", help=".glvq archive path")
    p.add_argument("calib", help="calibration features")
    p.add_argument("--out", help="optional metrics CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="paired ablations on the synthetic suite")
    p.add_argument("--preset", required=True, choices=synthetic.PRESETS)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--source", choices=synthetic.SOURCES, default="student_t")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--bits", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("overhead", help="side-information overhead percentages")
    p.add_argument("--dim", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--paper-table", action="store_true",
                   help="print the full reference table")
    p.set_defaults(func=cmd_overhead)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
