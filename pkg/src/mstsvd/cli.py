"""Command line interface.

Subcommands: denoise, add-noise, metrics, bench, self-test. Exit codes:
0 success, 2 argument errors, 3 I/O errors, 4 internal invariant
violations (including self-test failures).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from .bench import run_bench
from .errors import FormatError, InvariantError
from .imageio import load_global_basis, read_image, save_global_basis, write_image
from .metrics import csv_header, csv_row, metric_block
from .noise import add_awgn, add_awgn_band_ramp, add_stripes
from .pipeline import COLOR, MSI, default_params, denoise, train_basis_for_image
from .selftest import run_selftest
from .transforms import basis_cache_key


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mstsvd",
        description="Patch-grouping transform-domain denoiser for color and multispectral images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("denoise", help="denoise an image")
    d.add_argument("--method", required=True,
                   choices=["mstsvd", "cmstsvd", "twist", "hosvd4d"])
    d.add_argument("--sigma", type=float, required=True, help="noise standard deviation")
    d.add_argument("--gamma", type=float, default=None, help="threshold scale override")
    d.add_argument("--tau", type=float, default=None, help="explicit threshold override")
    d.add_argument("--ps", type=int, default=None, help="patch side")
    d.add_argument("--k", type=int, default=None, help="patches per group")
    d.add_argument("--sr", type=int, default=None, help="search radius")
    d.add_argument("--step", type=int, default=None, help="reference grid stride")
    d.add_argument("--weights", choices=["uniform", "sparsity"], default=None)
    d.add_argument("--threads", type=int, default=1)
    d.add_argument("--seed", type=int, default=0,
                   help="accepted for interface symmetry; denoising is deterministic")
    d.add_argument("--basis-cache", default=None, metavar="DIR",
                   help="directory for cached global bases keyed by image hash and ps")
    d.add_argument("--report", default=None, metavar="PATH",
                   help="write the run report as JSON")
    d.add_argument("input")
    d.add_argument("output")
    d.set_defaults(func=_cmd_denoise)

    a = sub.add_parser("add-noise", help="corrupt an image with seeded noise")
    a.add_argument("--sigma", type=float, required=True)
    a.add_argument("--ramp", default=None, metavar="LO:HI",
                   help="per-band sigma ramp, replaces the flat sigma")
    a.add_argument("--stripes", default=None, metavar="BANDS:AMP",
                   help="comma-separated band list and stripe amplitude, e.g. 3,10:25")
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("input")
    a.add_argument("output")
    a.set_defaults(func=_cmd_add_noise)

    m = sub.add_parser("metrics", help="print the quality metrics CSV row")
    m.add_argument("clean")
    m.add_argument("test")
    m.set_defaults(func=_cmd_metrics)

    b = sub.add_parser("bench", help="run a benchmark matrix from a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", default=None, help="markdown report path override")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("self-test", help="run the structural identity checks")
    s.add_argument("--instances", type=int, default=100)
    s.add_argument("--seed", type=int, default=20240801)
    s.set_defaults(func=_cmd_self_test)
    return parser


def _cmd_denoise(args) -> int:
    img = read_image(args.input)
    kind = COLOR if img.shape[2] <= 3 else MSI
    params = default_params(args.method, kind, args.sigma)
    overrides = {}
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if args.tau is not None:
        overrides["tau"] = args.tau
    if args.ps is not None:
        overrides["ps"] = args.ps
    if args.k is not None:
        overrides["group_size"] = args.k
    if args.sr is not None:
        overrides["search_radius"] = args.sr
    if args.step is not None:
        overrides["step"] = args.step
    if args.weights is not None:
        overrides["weight_mode"] = args.weights
    if overrides:
        params = params.with_overrides(**overrides).validate()

    basis = None
    if args.basis_cache and args.method in ("mstsvd", "cmstsvd"):
        cache_dir = Path(args.basis_cache)
        cache_dir.mkdir(parents=True, exist_ok=True)
        cache_path = cache_dir / f"{basis_cache_key(img, params.ps)}.gbas"
        if cache_path.exists():
            basis = load_global_basis(cache_path)
        else:
            basis = train_basis_for_image(img, params)
            save_global_basis(cache_path, basis)

    out, report = denoise(img, params, threads=args.threads, global_basis=basis)
    write_image(args.output, out)

    print(f"{report.method}: {report.groups} groups in {report.seconds:.2f}s, "
          f"retained fraction {report.retained_fraction:.4f}")
    if args.report:
        payload = asdict(report)
        payload["params"] = asdict(report.params)
        Path(args.report).write_text(json.dumps(payload, indent=2, default=float) + "\n")
    return 0


def _cmd_add_noise(args) -> int:
    img = read_image(args.input)
    if args.ramp is not None:
        lo, _, hi = args.ramp.partition(":")
        out = add_awgn_band_ramp(img, float(lo), float(hi), seed=args.seed)
    else:
        out = add_awgn(img, args.sigma, seed=args.seed)
    if args.stripes is not None:
        spec, _, amp = args.stripes.partition(":")
        bands = [int(b) for b in spec.split(",") if b]
        out = add_stripes(out, bands, float(amp), seed=args.seed + 1)
    write_image(args.output, out)
    return 0


def _cmd_metrics(args) -> int:
    clean = read_image(args.clean)
    test = read_image(args.test)
    t0 = time.perf_counter()
    block = metric_block(clean, test)
    seconds = time.perf_counter() - t0
    print(csv_header())
    print(csv_row("-", "-", block, seconds))
    return 0


def _cmd_bench(args) -> int:
    config = json.loads(Path(args.config).read_text())
    rows, markdown, csv_text = run_bench(config)
    report_path = args.out or config.get("report")
    if report_path:
        Path(report_path).write_text(markdown)
    csv_path = config.get("csv")
    if csv_path:
        Path(csv_path).write_text(csv_text)
    if not report_path:
        sys.stdout.write(markdown)
    failed = sum(r.error is not None for r in rows)
    if failed:
        print(f"{failed} of {len(rows)} runs failed", file=sys.stderr)
    return 0


def _cmd_self_test(args) -> int:
    results = run_selftest(n_instances=args.instances, seed=args.seed)
    for r in results:
        print(r.line())
    if all(r.passed for r in results):
        print(f"self-test passed ({len(results)} checks)")
        return 0
    print("self-test FAILED", file=sys.stderr)
    return 4


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
