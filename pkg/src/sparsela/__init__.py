"""sparsela: portable sparse kernels, Krylov solvers, and benchmarking.

The library is organized in layers: :mod:`sparsela.core` provides the
executor/operation dispatch and dense vector primitives,
:mod:`sparsela.formats` the sparse containers and MatrixMarket
ingestion, :mod:`sparsela.spmv` the matrix-vector kernels,
:mod:`sparsela.solvers` the iterative methods, and
:mod:`sparsela.perfmodel` the bandwidth/roofline benchmarking harness.
:mod:`sparsela.cli` exposes it all as the ``sparsela`` command.
"""

from . import errors
from .core import (DenseVector, Executor, ExecutorKind, Operation, Precision,
                   axpy, dispatch, dot, norm2)
from .errors import (DimensionMismatch, IndexOutOfRange, Overflow, ParseError,
                     SerializationError, SparselaError, UnknownOperation,
                     UnsupportedField, ValidationFailed)
from .formats import (CooMatrix, CsrMatrix, FootprintMode, MatrixFormat,
                      MatrixMetadata, coo_to_csr, csr_to_coo, footprint_bytes,
                      read_matrix_market)
from .perfmodel import (BenchmarkRecord, DEVICE_PRESETS, DeviceSpec,
                        ReportFormat, RooflineModel, SolverRunInfo,
                        StreamKernel, arithmetic_intensity, attainable,
                        auto_device_spec, benchmark_solver, benchmark_spmv,
                        default_stream_length, emit_report,
                        estimate_peak_flops, gen12_spec, gen9_spec,
                        load_device_spec, parse_report, run_stream,
                        spmv_bound, stream_sweep)
from .solvers import (BreakdownKind, DEFAULT_REL_TOL, SolverConfig,
                      SolverMethod, SolverResult, StopMode, solve,
                      solve_bicgstab, solve_cg, solve_cgs, solve_gmres,
                      solver_flops)
from .spmv import SpmvWorkload, spmv_coo, spmv_csr, spmv_flops

__version__ = "0.1.0"

__all__ = [
    "errors",
    "SparselaError",
    "DimensionMismatch",
    "UnknownOperation",
    "ParseError",
    "UnsupportedField",
    "IndexOutOfRange",
    "Overflow",
    "ValidationFailed",
    "SerializationError",
    "Precision",
    "ExecutorKind",
    "Executor",
    "Operation",
    "dispatch",
    "DenseVector",
    "dot",
    "axpy",
    "norm2",
    "MatrixFormat",
    "FootprintMode",
    "MatrixMetadata",
    "CooMatrix",
    "CsrMatrix",
    "coo_to_csr",
    "csr_to_coo",
    "footprint_bytes",
    "read_matrix_market",
    "SpmvWorkload",
    "spmv_csr",
    "spmv_coo",
    "spmv_flops",
    "SolverMethod",
    "StopMode",
    "BreakdownKind",
    "SolverConfig",
    "SolverResult",
    "DEFAULT_REL_TOL",
    "solve",
    "solve_cg",
    "solve_bicgstab",
    "solve_cgs",
    "solve_gmres",
    "solver_flops",
    "DeviceSpec",
    "RooflineModel",
    "StreamKernel",
    "BenchmarkRecord",
    "SolverRunInfo",
    "ReportFormat",
    "arithmetic_intensity",
    "spmv_bound",
    "attainable",
    "run_stream",
    "stream_sweep",
    "default_stream_length",
    "estimate_peak_flops",
    "auto_device_spec",
    "benchmark_spmv",
    "benchmark_solver",
    "emit_report",
    "parse_report",
    "load_device_spec",
    "gen9_spec",
    "gen12_spec",
    "DEVICE_PRESETS",
    "__version__",
]
