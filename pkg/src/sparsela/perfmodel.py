"""Bandwidth microbenchmarks, roofline modelling, and the benchmark harness.

The measurement protocol is fixed: each kernel timing is a monotonic
wall-clock interval around one repetition, the first ``warmups`` runs
are discarded, and the record keeps every remaining time so medians or
minima stay recoverable downstream.  SpMV benchmarks default to 2
warmups + 10 repetitions; solver benchmarks run one untimed warm-up
segment and then a single timed fixed-iteration run (1000 iterations by
default).

Byte accounting follows the streaming conventions: Copy/Mul/Dot move 2
values per element, Add/Triad move 3.  SpMV records carry two byte
models, the simplified one (matrix entry storage only, which also
defines arithmetic intensity) and the full one (plus row pointers and
the x/y vectors); the full model feeds ``achieved_gbs``.

A :class:`DeviceSpec` can be typed in from published numbers, loaded
from a small config file, or calibrated locally (triad bandwidth plus a
register-resident multiply-add probe for peak flops), so roofline bound
lines are reproducible with or without the hardware at hand.
Bandwidth fractions are reported against both the measured and the
theoretical baseline, each in its own clearly named field.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .core import DenseVector, Executor, ExecutorKind, Precision
from .errors import SerializationError, ValidationFailed
from .formats import (CooMatrix, CsrMatrix, FootprintMode, MatrixFormat,
                      MatrixMetadata, coo_to_csr, csr_to_coo, footprint_bytes)
from .solvers import (SolverConfig, SolverMethod, StopMode, solve,
                      solver_flops)
from .spmv import spmv_coo, spmv_csr, spmv_flops

__all__ = [
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
    "SWEEP_LENGTHS",
]


@dataclass(frozen=True)
class DeviceSpec:
    """Bandwidth and compute ceilings of one device, in GB/s and GFLOP/s."""

    name: str
    theoretical_bandwidth: float
    measured_bandwidth: float
    peak_flops: Dict[Precision, float]

    def __post_init__(self):
        if not self.theoretical_bandwidth > 0 or not self.measured_bandwidth > 0:
            raise ValueError("bandwidths must be positive")
        if self.measured_bandwidth > 1.05 * self.theoretical_bandwidth:
            raise ValueError(
                f"measured bandwidth {self.measured_bandwidth} exceeds "
                f"theoretical {self.theoretical_bandwidth} by more than 5%")
        for prec, rate in self.peak_flops.items():
            if not isinstance(prec, Precision):
                raise ValueError(f"peak_flops keys must be Precision, got {prec!r}")
            if not rate > 0:
                raise ValueError(f"peak_flops[{prec.value}] must be positive")

    def peak_for(self, precision: Precision) -> Optional[float]:
        return self.peak_flops.get(precision)


def gen9_spec() -> DeviceSpec:
    """Integrated Gen9 graphics: 41.6 GB/s nominal, 37 GB/s streamed."""
    return DeviceSpec(name="gen9",
                      theoretical_bandwidth=41.6,
                      measured_bandwidth=37.0,
                      peak_flops={Precision.F64: 105.0, Precision.F32: 430.0})


def gen12_spec() -> DeviceSpec:
    """Integrated Gen12 graphics: 68 GB/s nominal, 58 GB/s streamed.

    The f64 rate is the emulated one; the hardware has no native f64.
    """
    return DeviceSpec(name="gen12",
                      theoretical_bandwidth=68.0,
                      measured_bandwidth=58.0,
                      peak_flops={Precision.F32: 2200.0, Precision.F64: 8.0})


DEVICE_PRESETS = {"gen9": gen9_spec, "gen12": gen12_spec}


@dataclass(frozen=True)
class RooflineModel:
    """Two-segment attainable-performance model for one precision."""

    device: DeviceSpec
    precision: Precision

    def __post_init__(self):
        if self.device.peak_for(self.precision) is None:
            raise ValueError(
                f"device {self.device.name!r} has no peak_flops entry "
                f"for {self.precision.value}")

    @property
    def ridge_ai(self) -> float:
        """Arithmetic intensity where the two roofline segments meet."""
        return self.device.peak_for(self.precision) / self.device.measured_bandwidth

    def attainable(self, ai) -> float:
        """min(peak, measured bandwidth * ai), in GFLOP/s."""
        if ai < 0:
            raise ValueError(f"arithmetic intensity must be >= 0, got {ai}")
        peak = self.device.peak_for(self.precision)
        return float(min(peak, self.device.measured_bandwidth * ai))


def arithmetic_intensity(fmt: MatrixFormat, precision: Precision) -> Fraction:
    """Flops per byte of one SpMV under the simplified byte model.

    Returned as an exact rational: 2 flops per nonzero over the per-entry
    storage bytes, e.g. 1/6 for CSR in f64 (2 flops / 12 bytes).
    """
    per_entry = footprint_bytes(fmt, 1, precision, FootprintMode.SIMPLIFIED)
    return Fraction(2, per_entry)


def spmv_bound(bandwidth: float, ai) -> float:
    """Memory-roofline SpMV ceiling: bandwidth (GB/s) times intensity."""
    if bandwidth < 0:
        raise ValueError(f"bandwidth must be >= 0, got {bandwidth}")
    return float(bandwidth * ai)


def attainable(model: RooflineModel, ai) -> float:
    """Roofline value at ``ai``: min(peak flops, bandwidth * ai)."""
    return model.attainable(ai)


class StreamKernel(Enum):
    """BabelStream-style kernels with their fixed per-element byte counts."""

    COPY = "copy"    # c = a
    MUL = "mul"      # b = s*c
    ADD = "add"      # c = a + b
    TRIAD = "triad"  # a = b + s*c
    DOT = "dot"      # sum(a*b)

    @property
    def arrays_per_element(self) -> int:
        return 3 if self in (StreamKernel.ADD, StreamKernel.TRIAD) else 2

    def bytes_per_element(self, precision: Precision) -> int:
        return self.arrays_per_element * precision.value_bytes

    @property
    def flops_per_element(self) -> int:
        return {StreamKernel.COPY: 0, StreamKernel.MUL: 1,
                StreamKernel.ADD: 1, StreamKernel.TRIAD: 2,
                StreamKernel.DOT: 2}[self]


@dataclass
class SolverRunInfo:
    """Solver-specific payload attached to a benchmark record."""

    method: str
    stop_mode: str
    iterations: int
    restart: int
    converged: bool
    final_relres: Optional[float]
    breakdown: Optional[str]


@dataclass
class BenchmarkRecord:
    """One benchmark outcome with its derived rates and roofline context.

    ``times_s`` holds exactly ``repetitions`` wall-clock intervals;
    warm-up runs are never stored.  ``mean_time_s`` is their arithmetic
    mean.  ``achieved_gbs`` is ``bytes_per_rep / mean_time_s / 1e9`` by
    construction.  Roofline fields stay None when no device spec was
    available.  ``fraction_of_peak_bw`` divides by the device's measured
    bandwidth, ``fraction_of_theoretical_bw`` by the nominal one; both
    are clamped into [0, 1].
    """

    kernel: str
    matrix: Optional[MatrixMetadata]
    precision: str
    executor: str
    threads: int
    warmups: int
    repetitions: int
    times_s: List[float]
    mean_time_s: float
    flops: int
    bytes_per_rep: Optional[int]
    bytes_simplified: Optional[int]
    gflops: float
    achieved_gbs: Optional[float]
    achieved_gbs_simplified: Optional[float]
    arithmetic_intensity: Optional[float] = None
    bound_gflops: Optional[float] = None
    fraction_of_peak_bw: Optional[float] = None
    fraction_of_theoretical_bw: Optional[float] = None
    device_name: Optional[str] = None
    solver: Optional[SolverRunInfo] = None

    def without_timing(self) -> "BenchmarkRecord":
        """Copy with every timing-derived field zeroed (golden-test mode)."""
        return dataclasses.replace(
            self,
            times_s=[0.0] * len(self.times_s),
            mean_time_s=0.0,
            gflops=0.0,
            achieved_gbs=None if self.achieved_gbs is None else 0.0,
            achieved_gbs_simplified=(None if self.achieved_gbs_simplified is None
                                     else 0.0),
            fraction_of_peak_bw=(None if self.fraction_of_peak_bw is None
                                 else 0.0),
            fraction_of_theoretical_bw=(None if self.fraction_of_theoretical_bw
                                        is None else 0.0),
        )


def _mean(times: Sequence[float]) -> float:
    return sum(times) / len(times)


def _executor_or_default(executor: Optional[Executor]) -> Executor:
    return executor if executor is not None else Executor.reference()


def _attach_device(record: BenchmarkRecord, device: Optional[DeviceSpec],
                   precision: Precision) -> BenchmarkRecord:
    """Fill roofline fields from a device spec, leaving set fields alone."""
    if device is None:
        return record
    record.device_name = record.device_name or device.name
    if record.arithmetic_intensity is not None and record.bound_gflops is None:
        peak = device.peak_for(precision)
        by_bw = device.measured_bandwidth * record.arithmetic_intensity
        record.bound_gflops = float(by_bw if peak is None else min(peak, by_bw))
    if record.achieved_gbs is not None:
        if record.fraction_of_peak_bw is None:
            record.fraction_of_peak_bw = min(
                1.0, record.achieved_gbs / device.measured_bandwidth)
        if record.fraction_of_theoretical_bw is None:
            record.fraction_of_theoretical_bw = min(
                1.0, record.achieved_gbs / device.theoretical_bandwidth)
    return record


# ---------------------------------------------------------------------------
# streaming benchmark

_STREAM_INIT = {"a": 1.0, "b": 2.0, "c": 0.0}
_STREAM_SCALAR = 0.4
# closed-form array contents after any number of runs (kernels are idempotent)
_STREAM_EXPECT = {
    StreamKernel.COPY: ("c", 1.0),
    StreamKernel.MUL: ("b", 0.0),
    StreamKernel.ADD: ("c", 3.0),
    StreamKernel.TRIAD: ("a", 2.0),
}


def default_stream_length(precision: Precision = Precision.F64) -> int:
    """Array length covering four times the last-level cache.

    The cache size is read from sysfs when available; otherwise 16 MiB
    is assumed.
    """
    llc = 16 * 2 ** 20
    try:
        best = 0
        base = Path("/sys/devices/system/cpu/cpu0/cache")
        for d in base.glob("index*"):
            level = int((d / "level").read_text())
            text = (d / "size").read_text().strip()
            size = int(text[:-1]) * 1024 if text.endswith("K") else int(text)
            if level >= best:
                best = level
                llc = size
    except (OSError, ValueError):
        pass
    return max(1, 4 * llc // precision.value_bytes)


SWEEP_LENGTHS = tuple(2 ** k for k in range(15, 28))


def _stream_runner(kernel: StreamKernel, executor: Executor, a, b, c, s):
    par = executor.kind is ExecutorKind.PARALLEL
    if kernel is StreamKernel.COPY:
        return (lambda: _kernels.stream_copy_par(a, c)) if par else \
            (lambda: _kernels.stream_copy_seq(a, c))
    if kernel is StreamKernel.MUL:
        return (lambda: _kernels.stream_mul_par(b, c, s)) if par else \
            (lambda: _kernels.stream_mul_seq(b, c, s))
    if kernel is StreamKernel.ADD:
        return (lambda: _kernels.stream_add_par(a, b, c)) if par else \
            (lambda: _kernels.stream_add_seq(a, b, c))
    if kernel is StreamKernel.TRIAD:
        return (lambda: _kernels.stream_triad_par(a, b, c, s)) if par else \
            (lambda: _kernels.stream_triad_seq(a, b, c, s))
    if kernel is StreamKernel.DOT:
        nchunks = executor.thread_count
        return (lambda: _kernels.dot_par(a, b, nchunks)) if par else \
            (lambda: _kernels.dot_seq(a, b))
    raise ValueError(f"unknown stream kernel {kernel!r}")


def run_stream(kernel: StreamKernel, array_len: int,
               precision: Precision = Precision.F64,
               warmups: int = 2, repetitions: int = 10,
               executor: Optional[Executor] = None,
               device: Optional[DeviceSpec] = None) -> BenchmarkRecord:
    """Time one streaming kernel and validate its output.

    Arrays start at a=1.0, b=2.0, c=0.0 with s=0.4, so each kernel has a
    closed-form result that the post-run contents are checked against
    (tolerance 100*eps relative, with an absolute floor where the
    expected value is zero).  The Dot result is checked against 2n with
    a tolerance that grows with n, since a strictly ordered low-precision
    sum of that length cannot be exact.

    Raises ValidationFailed when the check fails; otherwise returns the
    timing record.
    """
    if array_len < 1:
        raise ValueError(f"array_len must be >= 1, got {array_len}")
    if warmups < 0 or repetitions < 1:
        raise ValueError("need warmups >= 0 and repetitions >= 1")
    executor = _executor_or_default(executor)
    _kernels.warm_kernels()
    dt = precision.dtype
    a = np.full(array_len, _STREAM_INIT["a"], dt)
    b = np.full(array_len, _STREAM_INIT["b"], dt)
    c = np.full(array_len, _STREAM_INIT["c"], dt)
    s = dt.type(_STREAM_SCALAR)
    fn = _stream_runner(kernel, executor, a, b, c, s)

    times: List[float] = []
    dot_result = None
    with _kernels.active_threads(executor.thread_count):
        for i in range(warmups + repetitions):
            t0 = time.perf_counter()
            out = fn()
            t1 = time.perf_counter()
            if i >= warmups:
                times.append(t1 - t0)
            if kernel is StreamKernel.DOT:
                dot_result = float(out)

    eps = precision.eps
    if kernel is StreamKernel.DOT:
        want = 2.0 * array_len
        tol = max(100.0 * eps, eps * array_len) * want
        if not math.isfinite(dot_result) or abs(dot_result - want) > tol:
            raise ValidationFailed(
                f"stream dot returned {dot_result!r}, expected {want}")
    else:
        name, want = _STREAM_EXPECT[kernel]
        arr = {"a": a, "b": b, "c": c}[name]
        tol = 100.0 * eps * max(abs(want), 1.0)
        worst = float(np.max(np.abs(arr - dt.type(want))))
        if not math.isfinite(worst) or worst > tol:
            raise ValidationFailed(
                f"stream {kernel.value} array {name} deviates by {worst} "
                f"from {want}")

    mean = _mean(times)
    nbytes = kernel.bytes_per_element(precision) * array_len
    flops = kernel.flops_per_element * array_len
    record = BenchmarkRecord(
        kernel=f"stream_{kernel.value}",
        matrix=None,
        precision=precision.value,
        executor=executor.kind.value,
        threads=executor.thread_count,
        warmups=warmups,
        repetitions=repetitions,
        times_s=times,
        mean_time_s=mean,
        flops=flops,
        bytes_per_rep=nbytes,
        bytes_simplified=None,
        gflops=flops / mean / 1e9,
        achieved_gbs=nbytes / mean / 1e9,
        achieved_gbs_simplified=None,
    )
    return _attach_device(record, device, precision)


def stream_sweep(kernel: StreamKernel,
                 precision: Precision = Precision.F64,
                 warmups: int = 2, repetitions: int = 10,
                 executor: Optional[Executor] = None,
                 device: Optional[DeviceSpec] = None,
                 lengths: Optional[Sequence[int]] = None) -> List[BenchmarkRecord]:
    """Run one kernel over a grid of array lengths (default 2^15..2^27)."""
    if lengths is None:
        lengths = SWEEP_LENGTHS
    return [run_stream(kernel, n, precision, warmups, repetitions,
                       executor, device) for n in lengths]


# ---------------------------------------------------------------------------
# compute-peak probe and local device calibration


def estimate_peak_flops(precision: Precision = Precision.F64,
                        executor: Optional[Executor] = None,
                        buf_len: int = 4096, sweeps: int = 4096,
                        repeats: int = 5) -> float:
    """Estimate the attainable flop rate with a cache-resident FMA chain.

    Runs ``sweeps`` multiply-add passes over a small buffer (2 flops per
    element per pass) and returns the best rate over ``repeats`` trials,
    in GFLOP/s.
    """
    executor = _executor_or_default(executor)
    _kernels.warm_kernels()
    dt = precision.dtype
    s = dt.type(0.999999)
    c = dt.type(1e-9)
    flops = 2.0 * buf_len * sweeps
    best = 0.0
    with _kernels.active_threads(executor.thread_count):
        for _ in range(repeats):
            buf = np.full(buf_len, 1.0, dt)
            t0 = time.perf_counter()
            if executor.kind is ExecutorKind.PARALLEL:
                _kernels.fma_sweeps_par(buf, s, c, sweeps, executor.thread_count)
            else:
                _kernels.fma_sweeps_seq(buf, s, c, sweeps)
            t1 = time.perf_counter()
            best = max(best, flops / (t1 - t0) / 1e9)
    return best


def auto_device_spec(executor: Optional[Executor] = None,
                     array_len: Optional[int] = None,
                     warmups: int = 2, repetitions: int = 5,
                     name: str = "local-auto") -> DeviceSpec:
    """Calibrate a DeviceSpec on the local machine.

    Measured bandwidth comes from the triad kernel (also used as the
    theoretical entry, since no nominal figure is known); peak flops per
    precision from the FMA probe.
    """
    executor = _executor_or_default(executor)
    if array_len is None:
        array_len = default_stream_length(Precision.F64)
    triad = run_stream(StreamKernel.TRIAD, array_len, Precision.F64,
                       warmups, repetitions, executor)
    bw = triad.achieved_gbs
    peaks = {p: estimate_peak_flops(p, executor) for p in Precision}
    return DeviceSpec(name=name, theoretical_bandwidth=bw,
                      measured_bandwidth=bw, peak_flops=peaks)


# ---------------------------------------------------------------------------
# SpMV and solver harness


def _as_format(matrix, fmt: MatrixFormat):
    if fmt is MatrixFormat.CSR:
        return matrix if isinstance(matrix, CsrMatrix) else coo_to_csr(matrix)
    return matrix if isinstance(matrix, CooMatrix) else csr_to_coo(matrix)


def _default_metadata(matrix) -> MatrixMetadata:
    return MatrixMetadata(name=f"matrix-{matrix.num_rows}x{matrix.num_cols}",
                          n=matrix.num_rows, nz=matrix.nnz)


def benchmark_spmv(matrix, fmt: MatrixFormat = MatrixFormat.CSR,
                   precision: Optional[Precision] = None,
                   executor: Optional[Executor] = None,
                   device: Optional[DeviceSpec] = None,
                   warmups: int = 2, repetitions: int = 10,
                   metadata: Optional[MatrixMetadata] = None) -> BenchmarkRecord:
    """Time repeated y = A@x products under the standard protocol.

    Defaults to 2 warm-up launches and 10 timed repetitions; the mean is
    taken over the timed runs only.  x is all ones.  ``achieved_gbs``
    uses the full byte footprint (entries, row pointers, x and y); the
    simplified variant is reported alongside.
    """
    if warmups < 0 or repetitions < 1:
        raise ValueError("need warmups >= 0 and repetitions >= 1")
    executor = _executor_or_default(executor)
    if precision is not None and matrix.precision is not precision:
        matrix = matrix.astype(precision)
    precision = matrix.precision
    matrix = _as_format(matrix, fmt)
    metadata = metadata if metadata is not None else _default_metadata(matrix)
    _kernels.warm_kernels()

    x = DenseVector.full(matrix.num_cols, 1.0, precision)
    y = DenseVector.zeros(matrix.num_rows, precision)
    apply_fn = spmv_csr if fmt is MatrixFormat.CSR else spmv_coo

    times: List[float] = []
    for i in range(warmups + repetitions):
        t0 = time.perf_counter()
        apply_fn(matrix, x, y, 1.0, 0.0, executor)
        t1 = time.perf_counter()
        if i >= warmups:
            times.append(t1 - t0)

    mean = _mean(times)
    flops = spmv_flops(matrix)
    full_bytes = footprint_bytes(fmt, matrix.nnz, precision,
                                 FootprintMode.FULL, matrix.num_rows,
                                 matrix.num_cols)
    simple_bytes = footprint_bytes(fmt, matrix.nnz, precision,
                                   FootprintMode.SIMPLIFIED)
    ai = arithmetic_intensity(fmt, precision)
    record = BenchmarkRecord(
        kernel=f"spmv_{fmt.value}",
        matrix=metadata,
        precision=precision.value,
        executor=executor.kind.value,
        threads=executor.thread_count,
        warmups=warmups,
        repetitions=repetitions,
        times_s=times,
        mean_time_s=mean,
        flops=flops,
        bytes_per_rep=full_bytes,
        bytes_simplified=simple_bytes,
        gflops=flops / mean / 1e9,
        achieved_gbs=full_bytes / mean / 1e9,
        achieved_gbs_simplified=simple_bytes / mean / 1e9,
        arithmetic_intensity=float(ai),
    )
    return _attach_device(record, device, precision)


def benchmark_solver(matrix, method: SolverMethod,
                     precision: Optional[Precision] = None,
                     executor: Optional[Executor] = None,
                     device: Optional[DeviceSpec] = None,
                     iterations: int = 1000, restart: int = 100,
                     fmt: MatrixFormat = MatrixFormat.COO,
                     warmup_iterations: int = 10,
                     metadata: Optional[MatrixMetadata] = None
                     ) -> BenchmarkRecord:
    """Time a fixed-iteration solve on b = A@1 after an untimed warm-up.

    The timed run always executes exactly ``iterations`` iterations;
    breakdowns are recorded on the result, never raised.  Solvers
    traverse the matrix in COO form by default.  ``gflops`` divides the
    solver flop model by the wall time of the timed run; no byte model
    is defined for solver records, so bandwidth fields stay None.
    """
    if iterations < 1 or warmup_iterations < 0:
        raise ValueError("need iterations >= 1 and warmup_iterations >= 0")
    executor = _executor_or_default(executor)
    if precision is not None and matrix.precision is not precision:
        matrix = matrix.astype(precision)
    precision = matrix.precision
    matrix = _as_format(matrix, fmt)
    metadata = metadata if metadata is not None else _default_metadata(matrix)
    _kernels.warm_kernels()

    ones = DenseVector.full(matrix.num_cols, 1.0, precision)
    apply_fn = spmv_csr if isinstance(matrix, CsrMatrix) else spmv_coo
    b = apply_fn(matrix, ones, None, 1.0, 0.0, executor)

    if warmup_iterations:
        warm_cfg = SolverConfig(method=method,
                                max_iters=min(warmup_iterations, iterations),
                                restart=restart,
                                stop_mode=StopMode.FIXED_ITERATIONS)
        solve(matrix, b, warm_cfg, executor=executor)

    config = SolverConfig(method=method, max_iters=iterations, restart=restart,
                          stop_mode=StopMode.FIXED_ITERATIONS)
    t0 = time.perf_counter()
    result = solve(matrix, b, config, executor=executor)
    elapsed = time.perf_counter() - t0

    final = result.final_relres
    info = SolverRunInfo(
        method=method.value,
        stop_mode=config.stop_mode.value,
        iterations=result.iterations,
        restart=restart,
        converged=result.converged,
        final_relres=final if math.isfinite(final) else None,
        breakdown=result.breakdown.value if result.breakdown else None,
    )
    record = BenchmarkRecord(
        kernel=f"solver_{method.value}",
        matrix=metadata,
        precision=precision.value,
        executor=executor.kind.value,
        threads=executor.thread_count,
        warmups=warmup_iterations,
        repetitions=1,
        times_s=[elapsed],
        mean_time_s=elapsed,
        flops=result.flops,
        bytes_per_rep=None,
        bytes_simplified=None,
        gflops=result.flops / elapsed / 1e9,
        achieved_gbs=None,
        achieved_gbs_simplified=None,
        solver=info,
    )
    return _attach_device(record, device, precision)


# ---------------------------------------------------------------------------
# report emission

SCHEMA_VERSION = 1


class ReportFormat(Enum):
    JSON = "json"
    CSV = "csv"


_CSV_COLUMNS = [
    "kernel", "matrix_name", "matrix_n", "matrix_nz", "matrix_origin",
    "precision", "executor", "threads", "warmups", "repetitions",
    "mean_time_s", "flops", "bytes_per_rep", "bytes_simplified", "gflops",
    "achieved_gbs", "achieved_gbs_simplified", "arithmetic_intensity",
    "bound_gflops", "fraction_of_peak_bw", "fraction_of_theoretical_bw",
    "device_name", "solver_method", "solver_stop_mode", "solver_iterations",
    "solver_restart", "solver_converged", "solver_final_relres",
    "solver_breakdown",
]


def _clean_float(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _record_to_dict(r: BenchmarkRecord) -> dict:
    d = {
        "kernel": r.kernel,
        "matrix": None if r.matrix is None else {
            "name": r.matrix.name, "n": r.matrix.n, "nz": r.matrix.nz,
            "origin": r.matrix.origin,
        },
        "precision": r.precision,
        "executor": r.executor,
        "threads": r.threads,
        "warmups": r.warmups,
        "repetitions": r.repetitions,
        "times_s": [_clean_float(t) for t in r.times_s],
        "mean_time_s": _clean_float(r.mean_time_s),
        "flops": r.flops,
        "bytes_per_rep": r.bytes_per_rep,
        "bytes_simplified": r.bytes_simplified,
        "gflops": _clean_float(r.gflops),
        "achieved_gbs": _clean_float(r.achieved_gbs),
        "achieved_gbs_simplified": _clean_float(r.achieved_gbs_simplified),
        "arithmetic_intensity": _clean_float(r.arithmetic_intensity),
        "bound_gflops": _clean_float(r.bound_gflops),
        "fraction_of_peak_bw": _clean_float(r.fraction_of_peak_bw),
        "fraction_of_theoretical_bw": _clean_float(r.fraction_of_theoretical_bw),
        "device_name": r.device_name,
        "solver": None if r.solver is None else {
            "method": r.solver.method,
            "stop_mode": r.solver.stop_mode,
            "iterations": r.solver.iterations,
            "restart": r.solver.restart,
            "converged": r.solver.converged,
            "final_relres": _clean_float(r.solver.final_relres),
            "breakdown": r.solver.breakdown,
        },
    }
    return d


def _record_from_dict(d: dict) -> BenchmarkRecord:
    try:
        matrix = d["matrix"]
        if matrix is not None:
            matrix = MatrixMetadata(name=matrix["name"], n=matrix["n"],
                                    nz=matrix["nz"],
                                    origin=matrix.get("origin", ""))
        solver = d["solver"]
        if solver is not None:
            solver = SolverRunInfo(
                method=solver["method"], stop_mode=solver["stop_mode"],
                iterations=solver["iterations"], restart=solver["restart"],
                converged=solver["converged"],
                final_relres=solver["final_relres"],
                breakdown=solver["breakdown"])
        return BenchmarkRecord(
            kernel=d["kernel"], matrix=matrix, precision=d["precision"],
            executor=d["executor"], threads=d["threads"],
            warmups=d["warmups"], repetitions=d["repetitions"],
            times_s=list(d["times_s"]), mean_time_s=d["mean_time_s"],
            flops=d["flops"], bytes_per_rep=d["bytes_per_rep"],
            bytes_simplified=d["bytes_simplified"], gflops=d["gflops"],
            achieved_gbs=d["achieved_gbs"],
            achieved_gbs_simplified=d["achieved_gbs_simplified"],
            arithmetic_intensity=d["arithmetic_intensity"],
            bound_gflops=d["bound_gflops"],
            fraction_of_peak_bw=d["fraction_of_peak_bw"],
            fraction_of_theoretical_bw=d["fraction_of_theoretical_bw"],
            device_name=d["device_name"], solver=solver)
    except (KeyError, TypeError) as exc:
        raise SerializationError(f"malformed record: {exc}") from exc


def _device_to_dict(device: DeviceSpec) -> dict:
    return {
        "name": device.name,
        "theoretical_bandwidth": device.theoretical_bandwidth,
        "measured_bandwidth": device.measured_bandwidth,
        "peak_flops": {p.value: v for p, v in device.peak_flops.items()},
    }


def _finalized(records: Sequence[BenchmarkRecord],
               model: Optional[RooflineModel]) -> List[BenchmarkRecord]:
    if model is None:
        return list(records)
    out = []
    for r in records:
        r = dataclasses.replace(r)
        _attach_device(r, model.device, Precision(r.precision))
        out.append(r)
    return out


def emit_report(records: Sequence[BenchmarkRecord],
                model: Optional[RooflineModel] = None,
                fmt: ReportFormat = ReportFormat.JSON) -> bytes:
    """Serialize records (JSON envelope or flat CSV) as bytes.

    When a model is given, its device fills any missing roofline fields
    (bound, bandwidth fractions) in the emitted copy; the input records
    are not modified.  Non-finite floats serialize as null.  The JSON
    envelope is versioned and round-trips through :func:`parse_report`;
    CSV is a write-only flat view with a fixed header.
    """
    records = _finalized(records, model)
    try:
        if fmt is ReportFormat.JSON:
            envelope = {
                "schema_version": SCHEMA_VERSION,
                "device": (None if model is None
                           else _device_to_dict(model.device)),
                "records": [_record_to_dict(r) for r in records],
            }
            text = json.dumps(envelope, indent=2, allow_nan=False)
            return (text + "\n").encode("utf-8")
        if fmt is ReportFormat.CSV:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(_CSV_COLUMNS)
            for r in records:
                d = _record_to_dict(r)
                flat = dict(d)
                m = d["matrix"] or {}
                s = d["solver"] or {}
                flat.update({
                    "matrix_name": m.get("name"), "matrix_n": m.get("n"),
                    "matrix_nz": m.get("nz"),
                    "matrix_origin": m.get("origin"),
                    "solver_method": s.get("method"),
                    "solver_stop_mode": s.get("stop_mode"),
                    "solver_iterations": s.get("iterations"),
                    "solver_restart": s.get("restart"),
                    "solver_converged": s.get("converged"),
                    "solver_final_relres": s.get("final_relres"),
                    "solver_breakdown": s.get("breakdown"),
                })
                writer.writerow(["" if flat.get(c) is None else flat.get(c)
                                 for c in _CSV_COLUMNS])
            return buf.getvalue().encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise SerializationError(f"cannot serialize report: {exc}") from exc
    raise SerializationError(f"unknown report format {fmt!r}")


def parse_report(data: bytes) -> Tuple[List[BenchmarkRecord],
                                       Optional[DeviceSpec]]:
    """Parse a JSON report back into records (CSV is write-only)."""
    try:
        envelope = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SerializationError(f"not a JSON report: {exc}") from exc
    if not isinstance(envelope, dict):
        raise SerializationError("report envelope must be a JSON object")
    if envelope.get("schema_version") != SCHEMA_VERSION:
        raise SerializationError(
            f"unsupported schema_version {envelope.get('schema_version')!r}")
    device = envelope.get("device")
    if device is not None:
        try:
            device = DeviceSpec(
                name=device["name"],
                theoretical_bandwidth=device["theoretical_bandwidth"],
                measured_bandwidth=device["measured_bandwidth"],
                peak_flops={Precision(k): v
                            for k, v in device["peak_flops"].items()})
        except (KeyError, TypeError, ValueError) as exc:
            raise SerializationError(f"malformed device spec: {exc}") from exc
    records = [_record_from_dict(d) for d in envelope.get("records", [])]
    return records, device


# ---------------------------------------------------------------------------
# device spec files


def load_device_spec(source: Union[str, Path]) -> DeviceSpec:
    """Load a DeviceSpec from a JSON or key=value config file.

    JSON form mirrors the dataclass::

        {"name": "gen9", "theoretical_bandwidth": 41.6,
         "measured_bandwidth": 37, "peak_flops": {"f64": 105, "f32": 430}}

    The key=value form uses flat keys (``peak_flops_f64 = 105``).  A
    missing measured (or theoretical) bandwidth defaults to the other
    one.
    """
    text = Path(source).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid device spec JSON: {exc}") from exc
        peak = {Precision(k): float(v)
                for k, v in raw.get("peak_flops", {}).items()}
        theo = raw.get("theoretical_bandwidth")
        meas = raw.get("measured_bandwidth")
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(
                    f"device spec line {lineno} is not key=value: {line!r}")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
        peak = {}
        for p in Precision:
            if f"peak_flops_{p.value}" in raw:
                peak[p] = float(raw[f"peak_flops_{p.value}"])
        theo = raw.get("theoretical_bandwidth")
        meas = raw.get("measured_bandwidth")
    if theo is None and meas is None:
        raise ValueError("device spec needs at least one bandwidth entry")
    theo = float(theo) if theo is not None else float(meas)
    meas = float(meas) if meas is not None else theo
    return DeviceSpec(name=str(raw.get("name", Path(source).stem)),
                      theoretical_bandwidth=theo, measured_bandwidth=meas,
                      peak_flops=peak)
