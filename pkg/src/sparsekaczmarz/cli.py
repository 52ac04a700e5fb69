"""Command-line front end.

Subcommands::

    solve      solve a MatrixMarket system, write trace CSV and solution
    cs-online  compressed sensing with Gaussian rows arriving one at a time
    tomo       TV reconstruction of the phantom from parallel-beam data
    ri         interferometric imaging from rotated Fourier sample blocks

Every subcommand prints one machine-readable line::

    summary,<subcommand>,steps=<k>,residual=<r>,error=<e>,stop_step=<s|none>
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import io as skio
from .control import MODES as CONTROL_MODES
from .control import Control
from .errors import SparseKaczmarzError
from .operators import BlockPartition, RowSystem
from .scenarios import (
    gen_gaussian_cs,
    gen_phantom,
    gen_ri_scenario,
    gen_tomo_system,
    ri_lambda,
)
from .solvers import StopMonitor, Trace, online_run, run, tv_kaczmarz_run
from .stepsize import KINDS as STEPSIZE_KINDS
from .stepsize import StepsizeRule

log = logging.getLogger("sparsekaczmarz")

EXIT_OK, EXIT_INPUT, EXIT_MAX_STEPS = 0, 1, 2


# -- experiment drivers (also used by the acceptance suite) --------------------

@dataclass
class ExperimentResult:
    x: np.ndarray
    trace: Trace
    stop_step: Optional[int]
    x_true: np.ndarray


def cs_online_experiment(n: int = 300, sparsity: int = 10, seed: int = 0,
                         rows: Optional[int] = None, method: str = "kaczmarz",
                         lam: float = 1.0, stepsize: Optional[str] = None,
                         control: str = "cyclic", schedule: int = 50,
                         monitor: Optional[StopMonitor] = None, tail_steps: int = 0,
                         log_every: int = 1) -> ExperimentResult:
    """Stream ``rows`` Gaussian measurements one by one into an online solver.

    ``method="kaczmarz"`` treats every row as its own block (increasing
    cycle sparse Kaczmarz, exact stepsize by default); ``"linbreg"``
    keeps a single growing block (increasing linearized Bregman with the
    dynamic stepsize).
    """
    if method not in ("kaczmarz", "linbreg"):
        raise ValueError(f"unknown method {method!r}")
    rows = default_cs_rows(n) if rows is None else rows
    if rows < 1:
        raise ValueError("need at least one row")
    x_true, stream = gen_gaussian_cs(n, sparsity, seed)
    a0, b0 = next(stream)
    system = RowSystem(n, a0[None, :], [b0])
    blocks = ((a[None, :], [b]) for _, (a, b) in zip(range(rows - 1), stream))
    if stepsize is None:
        stepsize = "exact" if method == "kaczmarz" else "dynamic"
    blocking = "rows" if method == "kaczmarz" else "whole"
    x, tr, stop = online_run(system, blocks, schedule, lam, Control(control, seed=seed),
                             StepsizeRule(stepsize), monitor or StopMonitor(patience=8),
                             blocking=blocking, x_true=x_true, log_every=log_every,
                             tail_steps=tail_steps)
    return ExperimentResult(x, tr, stop, x_true)


def default_cs_rows(n: int) -> int:
    return n // 2 + 20


def tomo_experiment(size: int = 32, n_angles: int = 7, n_bins: int = 45,
                    lam: Optional[float] = None, sweeps: int = 200,
                    lb_steps: int = 100) -> ExperimentResult:
    """TV-Kaczmarz reconstruction of the ``size x size`` phantom."""
    phantom = gen_phantom(size, size)
    system = gen_tomo_system(phantom.shape, n_angles, n_bins).system(phantom)
    if lam is None:
        lam = default_tomo_lambda(phantom)
    u, tr = tv_kaczmarz_run(system, phantom.shape, lam, sweeps, lb_steps, x_true=phantom)
    return ExperimentResult(u, tr, None, phantom)


def default_tomo_lambda(phantom) -> float:
    return 1.5 * float(np.max(phantom))


def ri_experiment(size: int = 32, n_blocks: int = 16, seed: int = 0,
                  samples_per_block: int = 0, lam: Optional[float] = None,
                  schedule: int = 300, control: str = "newest_first_cyclic",
                  stepsize: str = "dynamic", monitor: Optional[StopMonitor] = None,
                  log_every: int = 50, tail_steps: int = 0, on_log=None) -> ExperimentResult:
    """Online reconstruction from blocks of rotated Fourier samples.

    Every arriving block is one block of the block method; iterates are
    kept nonnegative. ``on_log(record, state)`` is called at logged steps.
    """
    sc = gen_ri_scenario((size, size), n_blocks, samples_per_block, seed)
    if lam is None:
        lam = ri_lambda(sc.x_true)
    rows0, rhs0 = sc.blocks[0]
    system = RowSystem.from_dense(rows0, rhs0)
    x, tr, stop = online_run(system, iter(sc.blocks[1:]), schedule, lam,
                             Control(control, seed=seed), StepsizeRule(stepsize),
                             monitor or StopMonitor(patience=1), blocking="arrivals",
                             shrink_mode="nonnegative", x_true=sc.x_true.ravel(),
                             log_every=log_every, tail_steps=tail_steps, on_log=on_log)
    return ExperimentResult(x.reshape(size, size), tr, stop, sc.x_true)


# -- argument parsing -------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _add_monitor_args(p, patience):
    g = p.add_argument_group("stop monitor")
    g.add_argument("--gamma", type=float, default=2.0,
                   help="an append is significant if the residual grows by more than "
                        "this factor")
    g.add_argument("--eps-abs", type=float, default=1e-3,
                   help="residuals below this never count as jumps")
    g.add_argument("--patience", type=_positive_int, default=patience,
                   help="consecutive insignificant appends before the monitor fires")


def _add_output_args(p, image=False):
    p.add_argument("--trace", metavar="CSV", help="write the trace to this CSV file")
    if image:
        p.add_argument("--image", metavar="PGM", help="write the reconstruction as ASCII PGM")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsekaczmarz",
        description="Sparse Kaczmarz, block and linearized Bregman solvers for sparse "
                    "and minimal-TV solutions of linear systems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve A x = b from MatrixMarket/vector files",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("matrix", help="MatrixMarket file with A")
    p.add_argument("rhs", help="vector file with b, one number per line")
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=1.0,
                   help="weight of the l1 term")
    p.add_argument("--stepsize", choices=STEPSIZE_KINDS, default="dynamic")
    p.add_argument("--control", choices=CONTROL_MODES, default="cyclic")
    p.add_argument("--block-size", type=_positive_int, default=1,
                   help="rows per block (1 = row-action sparse Kaczmarz)")
    p.add_argument("--shrink", choices=("signed", "nonnegative"), default="signed")
    p.add_argument("--seed", type=int, default=0, help="seed of random controls")
    p.add_argument("--max-steps", type=_positive_int, default=100_000)
    p.add_argument("--tol", type=_nonneg_float, default=1e-8,
                   help="stop when ||Ax-b||/||b|| falls to this value")
    p.add_argument("--log-every", type=_positive_int, default=1)
    p.add_argument("--output", metavar="FILE", help="write the solution, one entry per line")
    _add_output_args(p)

    p = sub.add_parser("cs-online", help="compressed sensing with streaming Gaussian rows",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--method", choices=("kaczmarz", "linbreg"), default="kaczmarz")
    p.add_argument("--n", type=_positive_int, default=300, help="number of unknowns")
    p.add_argument("--sparsity", type=_positive_int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", type=_positive_int, default=None,
                   help="measurements to stream [default: n//2 + 20]")
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=1.0)
    p.add_argument("--stepsize", choices=STEPSIZE_KINDS, default=None,
                   help="[default: exact for kaczmarz, dynamic for linbreg]")
    p.add_argument("--control", choices=CONTROL_MODES, default="cyclic")
    p.add_argument("--schedule", type=_positive_int, default=50, help="steps per arrival")
    p.add_argument("--tail-steps", type=_nonneg_int, default=5000,
                   help="extra steps after the last arrival")
    p.add_argument("--log-every", type=_positive_int, default=1)
    _add_monitor_args(p, patience=8)
    _add_output_args(p)

    p = sub.add_parser("tomo", help="TV reconstruction from parallel-beam projections",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--size", type=_positive_int, default=32, help="phantom side length")
    p.add_argument("--angles", type=_positive_int, default=7)
    p.add_argument("--bins", type=_positive_int, default=45, help="detector bins per angle")
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=None,
                   help="TV weight [default: 1.5 x phantom maximum]")
    p.add_argument("--sweeps", type=_positive_int, default=200)
    p.add_argument("--lb-steps", type=_nonneg_int, default=100,
                   help="linearized Bregman steps per Kaczmarz sweep")
    _add_output_args(p, image=True)

    p = sub.add_parser("ri", help="online imaging from rotated Fourier sample blocks",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--size", type=_positive_int, default=32)
    p.add_argument("--blocks", type=_positive_int, default=16)
    p.add_argument("--samples-per-block", type=_nonneg_int, default=0,
                   help="keep at most this many frequencies per block (0 = all)")
    p.add_argument("--seed", type=int, default=0, help="picks the base orientation")
    p.add_argument("--lambda", dest="lam", type=_nonneg_float, default=None,
                   help="[default: 1e-4 x ||x_true||_1]")
    p.add_argument("--stepsize", choices=("dynamic", "constant"), default="dynamic")
    p.add_argument("--control", choices=CONTROL_MODES, default="newest_first_cyclic")
    p.add_argument("--schedule", type=_positive_int, default=300, help="steps per block")
    p.add_argument("--tail-steps", type=_nonneg_int, default=0)
    p.add_argument("--log-every", type=_positive_int, default=50)
    _add_monitor_args(p, patience=1)
    _add_output_args(p, image=True)
    return parser


# -- commands -----------------------------------------------------------------------

def _fmt(v) -> str:
    return "nan" if v is None else f"{float(v):.6e}"


def summary_line(command: str, trace: Trace, stop_step: Optional[int]) -> str:
    last = trace.last
    stop = "none" if stop_step is None else str(stop_step)
    return (f"summary,{command},steps={last.step},residual={_fmt(last.residual)},"
            f"error={_fmt(last.error)},stop_step={stop}")


def _write_trace(args, trace: Trace) -> None:
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            trace.write_csv(fh)


def _monitor(args) -> StopMonitor:
    return StopMonitor(args.gamma, args.eps_abs, args.patience)


def cmd_solve(args) -> int:
    A = skio.read_matrix(args.matrix)
    b = skio.read_vector(args.rhs)
    system = RowSystem.from_dense(A, b)
    sizes = [args.block_size] * (system.m // args.block_size)
    if system.m % args.block_size:
        sizes.append(system.m % args.block_size)
    partition = BlockPartition.from_sizes(sizes)
    control = Control(args.control, seed=args.seed)
    x, trace = run(system, partition, args.lam, control, StepsizeRule(args.stepsize),
                   args.max_steps, args.tol, shrink_mode=args.shrink,
                   log_every=args.log_every)
    _write_trace(args, trace)
    if args.output:
        skio.write_vector(args.output, x)
    print(summary_line("solve", trace, None))
    return EXIT_MAX_STEPS if trace.max_steps_reached else EXIT_OK


def cmd_cs_online(args) -> int:
    if args.sparsity > args.n:
        raise ValueError("--sparsity may not exceed --n")
    res = cs_online_experiment(args.n, args.sparsity, args.seed, args.rows, args.method,
                               args.lam, args.stepsize, args.control, args.schedule,
                               _monitor(args), args.tail_steps, args.log_every)
    _write_trace(args, res.trace)
    print(summary_line("cs-online", res.trace, res.stop_step))
    return EXIT_OK


def cmd_tomo(args) -> int:
    if args.size < 8:
        raise ValueError("--size must be at least 8")
    res = tomo_experiment(args.size, args.angles, args.bins, args.lam, args.sweeps,
                          args.lb_steps)
    _write_trace(args, res.trace)
    if args.image:
        skio.write_pgm(args.image, res.x)
    print(summary_line("tomo", res.trace, None))
    return EXIT_OK


def cmd_ri(args) -> int:
    if args.size < 8:
        raise ValueError("--size must be at least 8")
    res = ri_experiment(args.size, args.blocks, args.seed, args.samples_per_block,
                        args.lam, args.schedule, args.control, args.stepsize,
                        _monitor(args), args.log_every, args.tail_steps)
    _write_trace(args, res.trace)
    if args.image:
        skio.write_pgm(args.image, res.x)
    print(summary_line("ri", res.trace, res.stop_step))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "cs-online": cmd_cs_online, "tomo": cmd_tomo, "ri": cmd_ri}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, SparseKaczmarzError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
