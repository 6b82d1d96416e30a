"""Command-line entry point: ``apml {loss,compare,gradcheck,bench-nnz,gen}``.

Reports are ``key=value`` lines on stdout. Exit codes: 0 success, 1 failed
check under ``--strict``, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from dataclasses import fields

from . import _kernels
from .dense import dense_apml_loss
from .gradients import finite_difference_oracle, grad_full, max_relative_error
from .scaling import DISTRIBUTIONS, generate_cloud, generate_pair, loglog_slope, \
    nnz_scaling_sweep, records_to_csv
from .sparse import sparse_apml_loss
from .types import ApmlConfig, ApmlError, GradMode, Reduction, StabilityMode
from .xyz import format_xyz, read_xyz

DEFAULT_N_LIST = "1024,2048,4096,8192,16384"

_CONFIG_FLAGS = {
    "p_min": float, "delta": float, "eps_g": float, "tau": float, "l_iter": int,
    "eps_stab": float, "eps_dist": float,
    "stability_mode": [m.value for m in StabilityMode],
    "grad_mode": [m.value for m in GradMode],
    "reduction": [m.value for m in Reduction],
}


class UsageError(Exception):
    pass


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    defaults = ApmlConfig()
    group = parser.add_argument_group("loss configuration")
    for name, kind in _CONFIG_FLAGS.items():
        default = getattr(defaults, name)
        if isinstance(kind, list):
            group.add_argument(_flag(name), choices=kind, default=default.value)
        else:
            group.add_argument(_flag(name), type=kind, default=default,
                               help=f"default: {default}")
    group.add_argument("--threads", type=int, default=None,
                       help="kernel threads, 0 = all cores (env APML_THREADS)")


def config_from_args(args) -> ApmlConfig:
    return ApmlConfig(**{f.name: getattr(args, f.name) for f in fields(ApmlConfig)})


def format_config_flags(cfg: ApmlConfig) -> list[str]:
    """Inverse of :func:`config_from_args` on the CLI flag level."""
    out = []
    for name in _CONFIG_FLAGS:
        value = getattr(cfg, name)
        out += [_flag(name), value.value if hasattr(value, "value") else repr(value)]
    return out


def _apply_threads(args) -> int:
    threads = args.threads
    if threads is None:
        env = os.environ.get("APML_THREADS", "0")
        try:
            threads = int(env)
        except ValueError:
            raise UsageError(f"APML_THREADS must be an integer, got {env!r}") from None
    if threads < 0:
        raise UsageError("--threads must be >= 0")
    return _kernels.set_threads(threads)


def _report(out, **items) -> None:
    for key, value in items.items():
        out.write(f"{key}={value!r}\n" if isinstance(value, float) else f"{key}={value}\n")


def cmd_loss(args, out) -> int:
    x, y = read_xyz(args.x), read_xyz(args.y)
    cfg = config_from_args(args)
    fn = dense_apml_loss if args.backend == "dense" else sparse_apml_loss
    res = fn(x, y, cfg)
    _report(out, backend=args.backend, loss=res.loss, nnz=res.nnz,
            clamp_count=res.clamp_count, bytes_plan=res.bytes_plan,
            bytes_peak_estimate=res.bytes_peak_estimate)
    return 0


def cmd_compare(args, out) -> int:
    x, y = read_xyz(args.x), read_xyz(args.y)
    cfg = config_from_args(args)
    dense = dense_apml_loss(x, y, cfg).loss
    sparse = sparse_apml_loss(x, y, cfg)
    diff = abs(sparse.loss - dense)
    rel = diff / abs(dense) if dense != 0 else diff
    ok = rel <= args.tol
    _report(out, dense_loss=dense, sparse_loss=sparse.loss, nnz=sparse.nnz,
            abs_diff=diff, rel_diff=rel, tol=args.tol, result="PASS" if ok else "FAIL")
    return 1 if args.strict and not ok else 0


def cmd_gradcheck(args, out) -> int:
    if args.h < 1e-8:
        print(f"warning: h={args.h} is small enough for cancellation to dominate "
              "the finite differences", file=sys.stderr)
    cfg = config_from_args(args)
    x, y = generate_pair(args.n, args.d, args.seed, args.dist, m=args.m)
    _, grads = grad_full(x, y, cfg)
    fd, kinks = finite_difference_oracle(x, y, cfg, args.h, return_kinks=True)
    err = max_relative_error(grads, fd, kinks)
    envelope = cfg.grad_mode is GradMode.PLAN_DETACHED
    ok = err <= args.tol
    result = "INFO" if envelope else ("PASS" if ok else "FAIL")
    _report(out, mode="envelope mode" if envelope else "full", h=args.h,
            max_rel_error=err, excluded=int(kinks.flat().sum()), tol=args.tol,
            result=result)
    return 1 if args.strict and not envelope and not ok else 0


def _parse_n_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"bad --n-list {text!r}") from None
    if not values or min(values) < 2:
        raise UsageError("--n-list needs point counts >= 2")
    return values


def cmd_bench_nnz(args, out) -> int:
    n_values = _parse_n_list(args.n_list)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    cfg = config_from_args(args)
    fh = open(args.out, "w", encoding="utf-8", newline="")
    with fh:
        progress = None
        if args.verbose:
            def progress(r):
                print(f"n={r.n} trial={r.trial} nnz={r.nnz}", file=sys.stderr)
        records = nnz_scaling_sweep(n_values, args.trials, cfg, args.seed, args.d,
                                    args.dist, progress=progress)
        records_to_csv(records, fh)
    for r in records:
        _report(out, n=r.n, nnz_mean=r.nnz_mean, reduction_ratio=r.reduction_ratio)
    if len(records) >= 2:
        _report(out, slope=loglog_slope(records))
    return 0


def cmd_gen(args, out) -> int:
    if args.n < 1 or args.d < 1:
        raise UsageError("n and d must be positive")
    text = format_xyz(generate_cloud(args.n, args.d, args.seed, args.dist))
    if args.out == "-":
        out.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apml", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("loss", help="evaluate the loss for two XYZ files")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--backend", choices=["dense", "sparse"], default="sparse")
    add_config_flags(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("compare", help="dense vs sparse loss on two XYZ files")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--tol", type=float, default=1e-3, help="relative tolerance")
    p.add_argument("--strict", action="store_true", help="exit 1 on FAIL")
    add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="analytic gradient vs central differences")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="unit_cube_uniform")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--strict", action="store_true", help="exit 1 on FAIL")
    add_config_flags(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench-nnz", help="nnz / memory sweep written as CSV")
    p.add_argument("--n-list", default=DEFAULT_N_LIST)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="unit_cube_uniform")
    p.add_argument("--out", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    add_config_flags(p)
    p.set_defaults(func=cmd_bench_nnz)

    p = sub.add_parser("gen", help="write a seeded random cloud as XYZ")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="unit_cube_uniform")
    p.add_argument("--out", default="-")
    p.add_argument("--threads", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_threads(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=RuntimeWarning)
            return args.func(args, out)
    except (UsageError, ApmlError, OSError) as exc:
        print(f"apml {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
