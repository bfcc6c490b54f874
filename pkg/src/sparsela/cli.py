"""Command-line front end: convert, solve, bench-stream, bench-spmv, bench-solver.

Exit codes: 0 success, 1 usage or internal error, 2 ingestion/parse
error, 3 solver breakdown without convergence.  Reports go to standard
output (or ``--out``) as JSON or CSV; diagnostics go to standard error.
With the reference executor and ``--no-timing`` the emitted bytes are a
pure function of argv and the input files, which is what the golden
tests rely on.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .core import DenseVector, Executor, ExecutorKind, Precision
from .errors import (IndexOutOfRange, Overflow, ParseError, SparselaError,
                     UnsupportedField)
from .formats import (FootprintMode, MatrixFormat, coo_to_csr,
                      read_matrix_market)
from .perfmodel import (BenchmarkRecord, DEVICE_PRESETS, DeviceSpec,
                        ReportFormat, RooflineModel, SolverRunInfo,
                        StreamKernel, auto_device_spec, benchmark_solver,
                        benchmark_spmv, default_stream_length, emit_report,
                        load_device_spec, run_stream, stream_sweep)
from .solvers import SolverConfig, SolverMethod, StopMode, solve
from .spmv import spmv_coo, spmv_csr

__all__ = ["CliConfig", "build_parser", "main"]

_MATRIX_COMMANDS = ("convert", "solve", "bench-spmv", "bench-solver")


@dataclass
class CliConfig:
    """Validated view of one CLI invocation."""

    subcommand: str
    matrix_path: Optional[str] = None
    fmt: MatrixFormat = MatrixFormat.CSR
    precision: Precision = Precision.F64
    executor: ExecutorKind = ExecutorKind.REFERENCE
    threads: int = 1
    solver: SolverMethod = SolverMethod.CG
    iters: int = 1000
    warmups: int = 2
    reps: int = 10
    restart: int = 100
    tol: Optional[float] = None
    output: ReportFormat = ReportFormat.JSON
    device_spec_path: Optional[str] = None
    out: Optional[str] = None
    no_timing: bool = False
    kernel: str = "all"
    array_len: Optional[int] = None
    sweep: bool = False
    warmup_iters: int = 10

    def __post_init__(self):
        if self.subcommand in _MATRIX_COMMANDS and not self.matrix_path:
            raise ValueError(f"{self.subcommand} requires --matrix")
        if self.threads < 1:
            raise ValueError(f"--threads must be >= 1, got {self.threads}")
        if self.executor is ExecutorKind.REFERENCE and self.threads != 1:
            raise ValueError(
                "--threads other than 1 needs --executor parallel")
        if self.iters < 1:
            raise ValueError(f"--iters must be >= 1, got {self.iters}")
        if self.warmups < 0:
            raise ValueError(f"--warmups must be >= 0, got {self.warmups}")
        if self.reps < 1:
            raise ValueError(f"--reps must be >= 1, got {self.reps}")
        if self.restart < 1:
            raise ValueError(f"--restart must be >= 1, got {self.restart}")
        if self.warmup_iters < 0:
            raise ValueError(
                f"--warmup-iters must be >= 0, got {self.warmup_iters}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"--tol must be positive, got {self.tol}")
        if self.array_len is not None and self.array_len < 1:
            raise ValueError(f"--array-len must be >= 1, got {self.array_len}")
        if self.sweep and self.array_len is not None:
            raise ValueError("--sweep and --array-len are mutually exclusive")

    def make_executor(self) -> Executor:
        if self.executor is ExecutorKind.PARALLEL:
            return Executor.parallel(self.threads)
        return Executor.reference()


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1 in our taxonomy (argparse default is 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_matrix_flags(p):
    p.add_argument("--matrix", metavar="PATH", required=True,
                   help="MatrixMarket .mtx file to ingest")
    p.add_argument("--format", choices=["csr", "coo"], default="csr",
                   help="sparse storage format (default: csr)")
    p.add_argument("--precision", choices=["f32", "f64"], default="f64",
                   help="working precision (default: f64)")


def _add_executor_flags(p):
    p.add_argument("--executor", choices=["reference", "parallel"],
                   default="reference",
                   help="execution backend (default: reference)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="parallel chunk/thread count (default: 1)")


def _add_output_flags(p, timing=True):
    p.add_argument("--output", choices=["json", "csv"], default="json",
                   help="report format (default: json)")
    p.add_argument("--out", metavar="PATH", default=None,
                   help="write the report here instead of standard output "
                        "(default: standard output)")
    if timing:
        p.add_argument("--no-timing", action="store_true",
                       help="zero all timing-derived fields and skip device "
                            "auto-calibration, for byte-stable output "
                            "(default: off)")


def _add_device_flag(p):
    p.add_argument("--device-spec", metavar="PATH|gen9|gen12|auto",
                   default=None, dest="device_spec",
                   help="device ceilings for roofline fields: a config "
                        "file, a built-in preset, or 'auto' to calibrate "
                        "locally (default: none)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsela",
                     description="Sparse kernel and solver benchmarking "
                                 "toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                parser_class=_Parser)

    p = sub.add_parser("convert", help="ingest a matrix and report its "
                       "converted layout and byte footprint")
    _add_matrix_flags(p)
    _add_output_flags(p, timing=False)

    p = sub.add_parser("solve", help="solve A x = A@1 with a Krylov method")
    _add_matrix_flags(p)
    _add_executor_flags(p)
    p.add_argument("--solver", choices=["cg", "bicgstab", "cgs", "gmres"],
                   default="cg", help="Krylov method (default: cg)")
    p.add_argument("--iters", type=int, default=1000, metavar="N",
                   help="iteration cap (default: 1000)")
    p.add_argument("--tol", type=float, default=None, metavar="RTOL",
                   help="relative residual target (default: 1e-8 for f64, "
                        "1e-5 for f32)")
    p.add_argument("--restart", type=int, default=100, metavar="M",
                   help="GMRES restart length (default: 100)")
    _add_device_flag(p)
    _add_output_flags(p)

    p = sub.add_parser("bench-stream", help="memory bandwidth "
                       "microbenchmark")
    p.add_argument("--kernel", choices=["copy", "mul", "add", "triad", "dot",
                                        "all"],
                   default="all", help="which kernel to run (default: all)")
    p.add_argument("--array-len", type=int, default=None, metavar="N",
                   help="elements per array (default: four times the "
                        "last-level cache)")
    p.add_argument("--sweep", action="store_true",
                   help="run the power-of-two length sweep 2^15..2^27 "
                        "instead of a single length (default: off)")
    p.add_argument("--precision", choices=["f32", "f64"], default="f64",
                   help="working precision (default: f64)")
    _add_executor_flags(p)
    p.add_argument("--warmups", type=int, default=2, metavar="N",
                   help="untimed launches before timing (default: 2)")
    p.add_argument("--reps", type=int, default=10, metavar="N",
                   help="timed repetitions (default: 10)")
    _add_device_flag(p)
    _add_output_flags(p)

    p = sub.add_parser("bench-spmv", help="SpMV timing under the 2+10 "
                       "protocol")
    _add_matrix_flags(p)
    _add_executor_flags(p)
    p.add_argument("--warmups", type=int, default=2, metavar="N",
                   help="untimed launches before timing (default: 2)")
    p.add_argument("--reps", type=int, default=10, metavar="N",
                   help="timed repetitions (default: 10)")
    _add_device_flag(p)
    _add_output_flags(p)

    p = sub.add_parser("bench-solver", help="fixed-iteration solver timing")
    _add_matrix_flags(p)
    _add_executor_flags(p)
    p.add_argument("--solver", choices=["cg", "bicgstab", "cgs", "gmres"],
                   default="cg", help="Krylov method (default: cg)")
    p.add_argument("--iters", type=int, default=1000, metavar="N",
                   help="timed iterations, executed exactly (default: 1000)")
    p.add_argument("--restart", type=int, default=100, metavar="M",
                   help="GMRES restart length (default: 100)")
    p.add_argument("--warmup-iters", type=int, default=10, metavar="N",
                   help="untimed warm-up iterations (default: 10)")
    _add_device_flag(p)
    _add_output_flags(p)

    return parser


def _config_from(ns: argparse.Namespace) -> CliConfig:
    def get(name, fallback):
        return getattr(ns, name, fallback)

    return CliConfig(
        subcommand=ns.command,
        matrix_path=get("matrix", None),
        fmt=MatrixFormat(get("format", "csr")),
        precision=Precision(get("precision", "f64")),
        executor=ExecutorKind(get("executor", "reference")),
        threads=get("threads", 1),
        solver=SolverMethod(get("solver", "cg")),
        iters=get("iters", 1000),
        warmups=get("warmups", 2),
        reps=get("reps", 10),
        restart=get("restart", 100),
        tol=get("tol", None),
        output=ReportFormat(get("output", "json")),
        device_spec_path=get("device_spec", None),
        out=get("out", None),
        no_timing=get("no_timing", False),
        kernel=get("kernel", "all"),
        array_len=get("array_len", None),
        sweep=get("sweep", False),
        warmup_iters=get("warmup_iters", 10),
    )


def _load_device(cfg: CliConfig) -> Optional[DeviceSpec]:
    spec = cfg.device_spec_path
    if spec is None:
        return None
    if spec == "auto":
        if cfg.no_timing:
            print("note: --no-timing skips device auto-calibration",
                  file=sys.stderr)
            return None
        return auto_device_spec(cfg.make_executor())
    if spec in DEVICE_PRESETS:
        return DEVICE_PRESETS[spec]()
    return load_device_spec(spec)


def _model_for(device: Optional[DeviceSpec],
               precision: Precision) -> Optional[RooflineModel]:
    if device is None or device.peak_for(precision) is None:
        return None
    return RooflineModel(device=device, precision=precision)


def _emit(records: List[BenchmarkRecord], device: Optional[DeviceSpec],
          cfg: CliConfig) -> bytes:
    if cfg.no_timing:
        records = [r.without_timing() for r in records]
    return emit_report(records, _model_for(device, cfg.precision), cfg.output)


def _run_convert(cfg: CliConfig) -> Tuple[bytes, int]:
    matrix, meta = read_matrix_market(cfg.matrix_path, cfg.precision)
    if cfg.fmt is MatrixFormat.CSR:
        matrix = coo_to_csr(matrix)
    payload = {
        "schema_version": 1,
        "convert": {
            "name": meta.name,
            "origin": meta.origin,
            "num_rows": matrix.num_rows,
            "num_cols": matrix.num_cols,
            "n": meta.n,
            "nz": meta.nz,
            "format": cfg.fmt.value,
            "precision": cfg.precision.value,
            "footprint_bytes_simplified":
                matrix.footprint_bytes(FootprintMode.SIMPLIFIED),
            "footprint_bytes_full":
                matrix.footprint_bytes(FootprintMode.FULL),
        },
    }
    if cfg.output is ReportFormat.JSON:
        return (json.dumps(payload, indent=2) + "\n").encode("utf-8"), 0
    row = payload["convert"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(row))
    w.writerow([row[k] for k in row])
    return buf.getvalue().encode("utf-8"), 0


def _run_solve(cfg: CliConfig) -> Tuple[bytes, int]:
    matrix, meta = read_matrix_market(cfg.matrix_path, cfg.precision)
    if cfg.fmt is MatrixFormat.CSR:
        matrix = coo_to_csr(matrix)
    executor = cfg.make_executor()
    apply_fn = spmv_csr if cfg.fmt is MatrixFormat.CSR else spmv_coo
    ones = DenseVector.full(matrix.num_cols, 1.0, cfg.precision)
    b = apply_fn(matrix, ones, None, 1.0, 0.0, executor)
    config = SolverConfig(method=cfg.solver, max_iters=cfg.iters,
                          rel_tol=cfg.tol, restart=cfg.restart,
                          stop_mode=StopMode.RESIDUAL)
    t0 = time.perf_counter()
    result = solve(matrix, b, config, executor=executor)
    elapsed = time.perf_counter() - t0
    info = SolverRunInfo(
        method=cfg.solver.value,
        stop_mode=config.stop_mode.value,
        iterations=result.iterations,
        restart=cfg.restart,
        converged=result.converged,
        final_relres=(result.final_relres
                      if math.isfinite(result.final_relres) else None),
        breakdown=result.breakdown.value if result.breakdown else None,
    )
    record = BenchmarkRecord(
        kernel=f"solve_{cfg.solver.value}",
        matrix=meta,
        precision=cfg.precision.value,
        executor=executor.kind.value,
        threads=executor.thread_count,
        warmups=0,
        repetitions=1,
        times_s=[elapsed],
        mean_time_s=elapsed,
        flops=result.flops,
        bytes_per_rep=None,
        bytes_simplified=None,
        gflops=result.flops / elapsed / 1e9 if elapsed > 0 else 0.0,
        achieved_gbs=None,
        achieved_gbs_simplified=None,
        solver=info,
    )
    device = _load_device(cfg)
    payload = _emit([record], device, cfg)
    code = 3 if (result.breakdown is not None and not result.converged) else 0
    return payload, code


def _run_bench_stream(cfg: CliConfig) -> Tuple[bytes, int]:
    executor = cfg.make_executor()
    device = _load_device(cfg)
    kernels = ([StreamKernel(cfg.kernel)] if cfg.kernel != "all"
               else list(StreamKernel))
    records: List[BenchmarkRecord] = []
    for kernel in kernels:
        if cfg.sweep:
            records.extend(stream_sweep(kernel, cfg.precision, cfg.warmups,
                                        cfg.reps, executor, device))
        else:
            n = (cfg.array_len if cfg.array_len is not None
                 else default_stream_length(cfg.precision))
            records.append(run_stream(kernel, n, cfg.precision, cfg.warmups,
                                      cfg.reps, executor, device))
    return _emit(records, device, cfg), 0


def _run_bench_spmv(cfg: CliConfig) -> Tuple[bytes, int]:
    matrix, meta = read_matrix_market(cfg.matrix_path, cfg.precision)
    executor = cfg.make_executor()
    device = _load_device(cfg)
    record = benchmark_spmv(matrix, cfg.fmt, cfg.precision, executor, device,
                            cfg.warmups, cfg.reps, metadata=meta)
    return _emit([record], device, cfg), 0


def _run_bench_solver(cfg: CliConfig) -> Tuple[bytes, int]:
    matrix, meta = read_matrix_market(cfg.matrix_path, cfg.precision)
    executor = cfg.make_executor()
    device = _load_device(cfg)
    record = benchmark_solver(matrix, cfg.solver, cfg.precision, executor,
                              device, cfg.iters, cfg.restart, cfg.fmt,
                              cfg.warmup_iters, metadata=meta)
    payload = _emit([record], device, cfg)
    info = record.solver
    code = 3 if (info.breakdown is not None and not info.converged) else 0
    return payload, code


_RUNNERS = {
    "convert": _run_convert,
    "solve": _run_solve,
    "bench-stream": _run_bench_stream,
    "bench-spmv": _run_bench_spmv,
    "bench-solver": _run_bench_solver,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command is None:
        parser.print_usage(sys.stderr)
        print("sparsela: error: a command is required", file=sys.stderr)
        return 1
    try:
        cfg = _config_from(ns)
        payload, code = _RUNNERS[cfg.subcommand](cfg)
    except (ParseError, UnsupportedField, IndexOutOfRange, Overflow,
            OSError) as exc:
        print(f"sparsela: error: {exc}", file=sys.stderr)
        return 2
    except (SparselaError, ValueError) as exc:
        print(f"sparsela: error: {exc}", file=sys.stderr)
        return 1
    try:
        if cfg.out is not None:
            with open(cfg.out, "wb") as f:
                f.write(payload)
        else:
            sys.stdout.buffer.write(payload)
            sys.stdout.buffer.flush()
    except OSError as exc:
        print(f"sparsela: error: cannot write report: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
