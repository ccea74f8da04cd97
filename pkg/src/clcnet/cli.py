"""Command-line entry point: ``clcnet {analyze,optimize,report,run,bench,export-dot}``.

Exit codes: 0 success, 2 a block lacks FCRF, 64 usage error, 65 bad data or
infeasible request.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .cdg import block_cdg, cdg_of_kernel, crf_sizes, export_dot, has_fcrf
from .errors import ClcError, ConstraintError
from .model import build_clcnet, count_macs, forward, init_weights, parse, verify_network_fcrf, with_resolution
from .optimize import CostQuery, cost, fixed_g2_policy, minimize_cost
from .tensor import Tensor4D

EXIT_OK = 0
EXIT_NOT_FCRF = 2
EXIT_USAGE = 64
EXIT_DATA = 65


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ints(text: str, count: int | tuple[int, ...], what: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated integers, got {text!r}") from None
    allowed = count if isinstance(count, tuple) else (count,)
    if len(vals) not in allowed or any(v < 1 for v in vals):
        raise UsageError(f"{what} needs {' or '.join(map(str, allowed))} positive integers, got {text!r}")
    return vals


def _load_config(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e.strerror}") from None
    try:
        return parse(text)
    except ClcError as e:
        raise DataError(f"{path}: {e}") from None


def _block_graph(text: str):
    m, l, n, g1, g2 = _ints(text, 5, "--block")
    try:
        return (m, l, n, g1, g2), block_cdg(m, l, n, g1, g2)
    except ClcError as e:
        raise UsageError(f"invalid block {text!r}: {e}") from None


def cmd_analyze(args) -> int:
    if args.block:
        (m, l, n, g1, g2), cdg = _block_graph(args.block)
        sizes = crf_sizes(cdg)
        ok = has_fcrf(cdg)
        print(f"block M={m} L={l} N={n} g1={g1} g2={g2}")
        if min(sizes) == max(sizes):
            print(f"CRF size: {sizes[0]} of {m} inputs (all {n} outputs)")
        else:
            print(f"CRF sizes: {min(sizes)}..{max(sizes)} of {m} inputs")
        rel = "<=" if g1 * g2 <= l else ">"
        print(f"g1*g2 = {g1 * g2} {rel} L = {l}")
        print(f"FCRF: {'yes' if ok else 'no'}")
        return EXIT_OK if ok else EXIT_NOT_FCRF

    spec = build_clcnet(_load_config(args.config))
    report = verify_network_fcrf(spec)
    width = max(len(b.name) for b in spec.blocks)
    for blk, v in zip(spec.blocks, report.blocks):
        print(f"{blk.name:<{width}}  M={blk.M:<5d} L={blk.L:<5d} N={blk.N:<5d} g1={blk.g1:<4d} g2={blk.g2:<2d} "
              f"CRF {v.crf_min}/{v.in_channels}  FCRF: {'yes' if v.fcrf else 'no'}")
    print(f"{report.fcrf_count}/{len(report.blocks)} blocks FCRF")
    return EXIT_OK if report.all_fcrf else EXIT_NOT_FCRF


def cmd_optimize(args) -> int:
    m, l, n = _ints(args.channels, 3, "--channels")
    if args.area < 1:
        raise UsageError("--area must be >= 1")
    q = CostQuery(m, l, n, args.area)
    try:
        res = fixed_g2_policy(q, args.fix_g2) if args.fix_g2 is not None else minimize_cost(q)
    except ConstraintError as e:
        raise DataError(str(e)) from None
    if args.json:
        print(json.dumps({"M": m, "L": l, "N": n, "A": args.area, "g1": res.g1, "g2": res.g2, "cost": res.cost}))
    else:
        print(f"g1={res.g1} g2={res.g2} cost={res.cost}")
        if args.fix_g2 is None and args.verbose:
            print(f"ungrouped cost={cost(q, 1, 1)}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load_config(args.config)
    rep = count_macs(build_clcnet(cfg))
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2))
    else:
        print(rep.to_text())
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    try:
        spec = with_resolution(cfg, args.resolution) if args.resolution is not None else build_clcnet(cfg)
    except ClcError as e:
        raise DataError(str(e)) from None
    weights = init_weights(spec, args.seed)
    rng = np.random.default_rng(args.seed)
    r = spec.resolution
    x = Tensor4D(rng.standard_normal((1, 3, r, r)))
    trace: list = []
    t0 = time.perf_counter()
    logits = forward(spec, weights, x, trace)
    elapsed = time.perf_counter() - t0
    v = logits.data.reshape(-1)
    summary = {
        "resolution": r,
        "num_logits": int(v.size),
        "argmax": int(np.argmax(v)),
        "max": float(v.max()),
        "min": float(v.min()),
        "mean": float(v.mean()),
        "elapsed_s": elapsed,
        "shapes": [[name, list(shape)] for name, shape in trace],
    }
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(f"input 1x3x{r}x{r}, seed {args.seed}")
        for name, shape in trace:
            print(f"  {name:<8} {'x'.join(map(str, shape))}")
        print(f"logits: {v.size}  argmax={summary['argmax']}  max={summary['max']:.6g}  "
              f"min={summary['min']:.6g}  mean={summary['mean']:.6g}")
        print(f"forward time: {elapsed:.3f} s")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.iters < 1:
        raise UsageError("--iters must be >= 1")
    results = []
    for text in args.kernel:
        try:
            kernel = bench_mod.parse_kernel(text)
        except (ValueError, ClcError) as e:
            raise UsageError(f"bad --kernel {text!r}: {e}") from None
        results.extend(bench_mod.bench_kernel(kernel, args.iters, args.seed))
    if args.json:
        print(json.dumps([r.to_dict() for r in results], indent=2))
    else:
        for r in results:
            print(r.to_text())
    return EXIT_OK


def cmd_export_dot(args) -> int:
    if args.block:
        _, cdg = _block_graph(args.block)
    else:
        try:
            cdg = cdg_of_kernel(bench_mod.parse_kernel(args.kernel).spec)
        except (ValueError, ClcError) as e:
            raise UsageError(f"bad --kernel {args.kernel!r}: {e}") from None
    text = export_dot(cdg)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="clcnet", description="Channel-local convolution analysis and clcNet tooling.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="CRF sizes and FCRF verdicts")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--block", metavar="M,L,N,G1,G2")
    src.add_argument("--config", metavar="FILE")
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("optimize", help="cost-minimising (g1, g2) for a block")
    o.add_argument("--channels", required=True, metavar="M,L,N")
    o.add_argument("--area", type=int, default=9, metavar="A")
    o.add_argument("--fix-g2", type=int, metavar="K")
    o.add_argument("--json", action="store_true")
    o.add_argument("-v", "--verbose", action="store_true")
    o.set_defaults(func=cmd_optimize)

    r = sub.add_parser("report", help="per-layer MAC and parameter counts")
    r.add_argument("--config", required=True, metavar="FILE")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_report)

    run = sub.add_parser("run", help="forward pass with seeded random weights")
    run.add_argument("--config", required=True, metavar="FILE")
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--resolution", type=int)
    run.add_argument("--json", action="store_true")
    run.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="time convolution kernels")
    b.add_argument("--kernel", action="append", required=True,
                   metavar="KIND,m=..,n=..,g=..,k=..,hw=..,stride=..",
                   help="repeatable; KIND is regular, grouped, depthwise or igc")
    b.add_argument("--iters", type=int, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("export-dot", help="write a channel dependency graph as DOT")
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--block", metavar="M,L,N,G1,G2")
    src.add_argument("--kernel", metavar="KIND,m=..,n=..,g=..")
    d.add_argument("--out", metavar="FILE")
    d.set_defaults(func=cmd_export_dot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"clcnet {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ClcError) as e:
        print(f"clcnet {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
