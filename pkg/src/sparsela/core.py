"""Execution backends, operation dispatch, and dense vector primitives.

The central idea is that algorithms are written once against named
operations and an :class:`Executor` picks the kernel binding at call
time.  The reference backend is strictly sequential with a pinned
left-to-right accumulation order.  The parallel backend decomposes work
into ``thread_count`` contiguous chunks whose partial results combine in
chunk order, so for a given thread count its output is reproducible
run-to-run regardless of how the OS schedules threads.  With
``thread_count == 1`` the parallel backend reduces to the reference
order exactly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, UnknownOperation

__all__ = [
    "Precision",
    "ExecutorKind",
    "Executor",
    "Operation",
    "dispatch",
    "DenseVector",
    "dot",
    "axpy",
    "norm2",
]


class Precision(Enum):
    """IEEE-754 working precision of vector and matrix values."""

    F32 = "f32"
    F64 = "f64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32 if self is Precision.F32 else np.float64)

    @property
    def value_bytes(self) -> int:
        """Bytes per stored value (4 or 8)."""
        return int(self.dtype.itemsize)

    @property
    def index_bytes(self) -> int:
        """Bytes per stored index; indices are always 32-bit."""
        return 4

    @property
    def eps(self) -> float:
        """Machine epsilon of the working precision."""
        return float(np.finfo(self.dtype).eps)

    @classmethod
    def from_dtype(cls, dtype) -> "Precision":
        dt = np.dtype(dtype)
        if dt == np.float32:
            return cls.F32
        if dt == np.float64:
            return cls.F64
        raise ValueError(f"unsupported dtype {dt}; use float32 or float64")


class ExecutorKind(Enum):
    REFERENCE = "reference"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class Executor:
    """Immutable handle selecting a backend and its degree of parallelism.

    ``thread_count`` is the work decomposition parameter: parallel
    kernels split their index space into this many contiguous chunks.
    It is also the requested size of the worker pool, clamped at run
    time to what the machine provides, so results never depend on the
    clamp.  The reference backend always has ``thread_count == 1``.
    """

    kind: ExecutorKind
    thread_count: int = 1

    def __post_init__(self):
        if self.thread_count < 1:
            raise ValueError(f"thread_count must be >= 1, got {self.thread_count}")
        if self.kind is ExecutorKind.REFERENCE and self.thread_count != 1:
            raise ValueError("reference executor is single-threaded by definition")

    @classmethod
    def reference(cls) -> "Executor":
        return cls(ExecutorKind.REFERENCE, 1)

    @classmethod
    def parallel(cls, thread_count: Optional[int] = None) -> "Executor":
        if thread_count is None:
            thread_count = os.cpu_count() or 1
        return cls(ExecutorKind.PARALLEL, thread_count)


class Operation:
    """A named operation with per-backend kernel bindings.

    A reference binding is mandatory for dispatch to succeed; backends
    without their own binding fall back to it.  Bindings receive the
    executor as their first argument.
    """

    def __init__(self, name: str,
                 reference: Optional[Callable] = None,
                 parallel: Optional[Callable] = None):
        self.name = name
        self._bindings: dict[ExecutorKind, Callable] = {}
        if reference is not None:
            self.register(ExecutorKind.REFERENCE, reference)
        if parallel is not None:
            self.register(ExecutorKind.PARALLEL, parallel)

    def register(self, kind: ExecutorKind, fn: Callable) -> None:
        self._bindings[kind] = fn

    def binding_for(self, kind: ExecutorKind) -> Callable:
        fn = self._bindings.get(kind)
        if fn is None:
            fn = self._bindings.get(ExecutorKind.REFERENCE)
        if fn is None:
            raise UnknownOperation(
                f"operation '{self.name}' has no binding for {kind.value} "
                "and no reference fallback")
        return fn

    def __repr__(self):
        kinds = ",".join(k.value for k in self._bindings)
        return f"Operation({self.name!r}, bindings=[{kinds}])"


def dispatch(op: Operation, executor: Executor, *args, **kwargs):
    """Run ``op`` under ``executor``, falling back to the reference binding."""
    return op.binding_for(executor.kind)(executor, *args, **kwargs)


class DenseVector:
    """A contiguous 1-D vector of f32 or f64 values.

    Thin wrapper over a numpy array; ``values`` exposes the underlying
    storage for in-place updates by kernels.
    """

    __slots__ = ("_values",)

    def __init__(self, values, precision: Optional[Precision] = None):
        arr = np.asarray(values)
        if precision is not None:
            arr = np.ascontiguousarray(arr, dtype=precision.dtype)
        elif arr.dtype == np.float32:
            arr = np.ascontiguousarray(arr)
        else:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
        if arr.ndim != 1:
            raise DimensionMismatch(f"expected a 1-D vector, got ndim={arr.ndim}")
        self._values = arr

    @classmethod
    def zeros(cls, n: int, precision: Precision = Precision.F64) -> "DenseVector":
        return cls(np.zeros(n, dtype=precision.dtype))

    @classmethod
    def full(cls, n: int, fill: float,
             precision: Precision = Precision.F64) -> "DenseVector":
        return cls(np.full(n, fill, dtype=precision.dtype))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def precision(self) -> Precision:
        return Precision.from_dtype(self._values.dtype)

    def copy(self) -> "DenseVector":
        return DenseVector(self._values.copy())

    def __len__(self) -> int:
        return self._values.size

    def __repr__(self):
        return f"DenseVector(n={len(self)}, precision={self.precision.value})"


def _check_pair(x: DenseVector, y: DenseVector) -> None:
    if len(x) != len(y):
        raise DimensionMismatch(f"vector lengths differ: {len(x)} vs {len(y)}")
    if x.values.dtype != y.values.dtype:
        raise DimensionMismatch(
            f"vector precisions differ: {x.values.dtype} vs {y.values.dtype}")


def _as_vector(v) -> DenseVector:
    """Accept DenseVector or 1-D float array without copying."""
    return v if isinstance(v, DenseVector) else DenseVector(v)


def _dot_reference(executor, x, y):
    return float(_kernels.dot_seq(x.values, y.values))


def _dot_parallel(executor, x, y):
    with _kernels.active_threads(executor.thread_count):
        return float(_kernels.dot_par(x.values, y.values, executor.thread_count))


dot_operation = Operation("dot", reference=_dot_reference, parallel=_dot_parallel)


def _axpy_reference(executor, alpha, x, y, out):
    _kernels.axpy_seq(alpha, x.values, y.values, out.values)
    return out


def _axpy_parallel(executor, alpha, x, y, out):
    with _kernels.active_threads(executor.thread_count):
        _kernels.axpy_par(alpha, x.values, y.values, out.values)
    return out


axpy_operation = Operation("axpy", reference=_axpy_reference,
                           parallel=_axpy_parallel)


def dot(x: DenseVector, y: DenseVector,
        executor: Optional[Executor] = None) -> float:
    """Inner product of two vectors.

    The reference backend accumulates strictly left to right; the
    parallel backend reduces ``executor.thread_count`` contiguous chunks
    left to right and sums the partials in chunk order.
    """
    if executor is None:
        executor = Executor.reference()
    xv, yv = _as_vector(x), _as_vector(y)
    _check_pair(xv, yv)
    return dispatch(dot_operation, executor, xv, yv)


def axpy(alpha: float, x: DenseVector, y: DenseVector,
         executor: Optional[Executor] = None,
         out: Optional[DenseVector] = None):
    """Compute ``alpha*x + y`` elementwise, optionally into ``out``.

    ``out`` may alias ``x`` or ``y``; each element is read before it is
    written.  A new vector is allocated when ``out`` is None.  Plain 1-D
    arrays are accepted alongside DenseVector; the return value is the
    object passed as ``out``, or a fresh buffer matching ``y``'s type.
    """
    if executor is None:
        executor = Executor.reference()
    xv, yv = _as_vector(x), _as_vector(y)
    _check_pair(xv, yv)
    if out is None:
        fresh = np.empty(len(xv), dtype=xv.values.dtype)
        out = DenseVector(fresh) if isinstance(y, DenseVector) else fresh
    outv = _as_vector(out)
    _check_pair(xv, outv)
    if not isinstance(out, DenseVector) and not np.shares_memory(outv.values, out):
        raise ValueError("out array must be contiguous")
    a = xv.values.dtype.type(alpha)  # keep the multiply in working precision
    dispatch(axpy_operation, executor, a, xv, yv, outv)
    return out


def norm2(x: DenseVector, executor: Optional[Executor] = None) -> float:
    """Euclidean norm, derived as ``sqrt(dot(x, x))`` on the same backend."""
    return math.sqrt(dot(x, x, executor))
