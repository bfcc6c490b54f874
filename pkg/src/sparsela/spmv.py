"""Sparse matrix-vector product kernels, y = alpha*A@x + beta*y.

Both formats update y in place and return it.  With beta == 0 the
output is overwritten rather than scaled, so a y full of garbage (or
NaN) is a legal starting point.  The flop convention is the usual one
for SpMV accounting: two flops per stored nonzero.

Reference kernels accumulate each row left to right in file order.
The parallel CSR kernel distributes whole rows, so it is bit-identical
to the reference at any thread count.  The parallel COO kernel splits
the nonzero stream into ``thread_count`` contiguous segments and merges
the boundary-straddling row sums in segment order, so its result
depends only on the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .core import DenseVector, Executor, Operation, _as_vector, dispatch
from .errors import DimensionMismatch
from .formats import CooMatrix, CsrMatrix

__all__ = ["SpmvWorkload", "spmv_csr", "spmv_coo", "spmv_flops"]


def spmv_flops(matrix: Union[CooMatrix, CsrMatrix]) -> int:
    """Flops of one product: one multiply and one add per stored nonzero."""
    return 2 * matrix.nnz


def _check_operands(matrix, x: DenseVector, y: DenseVector) -> None:
    if len(x) != matrix.num_cols:
        raise DimensionMismatch(
            f"x has length {len(x)}, matrix has {matrix.num_cols} columns")
    if len(y) != matrix.num_rows:
        raise DimensionMismatch(
            f"y has length {len(y)}, matrix has {matrix.num_rows} rows")
    if x.values.dtype != matrix.values.dtype or y.values.dtype != matrix.values.dtype:
        raise DimensionMismatch(
            f"precision mismatch: matrix {matrix.values.dtype}, "
            f"x {x.values.dtype}, y {y.values.dtype}")
    if np.shares_memory(x.values, y.values):
        raise ValueError("x and y must not alias")


@dataclass
class SpmvWorkload:
    """One SpMV problem instance: matrix, operand vectors, and scalars."""

    matrix: Union[CooMatrix, CsrMatrix]
    x: DenseVector
    y: DenseVector
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        self.x = _as_vector(self.x)
        self.y = _as_vector(self.y)
        _check_operands(self.matrix, self.x, self.y)

    @property
    def flops(self) -> int:
        return spmv_flops(self.matrix)


def _csr_reference(executor, m, x, y, alpha, beta):
    _kernels.csr_spmv_seq(m.row_ptrs, m.col_idxs, m.values,
                          x.values, y.values, alpha, beta)
    return y


def _csr_parallel(executor, m, x, y, alpha, beta):
    with _kernels.active_threads(executor.thread_count):
        _kernels.csr_spmv_par(m.row_ptrs, m.col_idxs, m.values,
                              x.values, y.values, alpha, beta)
    return y


def _coo_reference(executor, m, x, y, alpha, beta):
    _kernels.coo_spmv_seq(m.row_idxs, m.col_idxs, m.values,
                          x.values, y.values, alpha, beta)
    return y


def _coo_parallel(executor, m, x, y, alpha, beta):
    with _kernels.active_threads(executor.thread_count):
        _kernels.coo_spmv_par(m.row_idxs, m.col_idxs, m.values,
                              x.values, y.values, alpha, beta,
                              executor.thread_count)
    return y


spmv_csr_operation = Operation("spmv_csr", reference=_csr_reference,
                               parallel=_csr_parallel)
spmv_coo_operation = Operation("spmv_coo", reference=_coo_reference,
                               parallel=_coo_parallel)


def _run(op, matrix, x, y, alpha, beta, executor):
    if executor is None:
        executor = Executor.reference()
    if y is None:
        fresh = np.zeros(matrix.num_rows, dtype=matrix.values.dtype)
        y = DenseVector(fresh) if isinstance(x, DenseVector) else fresh
    xv = _as_vector(x)
    yv = _as_vector(y)
    if not isinstance(y, DenseVector) and not np.shares_memory(yv.values, y):
        raise ValueError("y array must be contiguous")
    _check_operands(matrix, xv, yv)
    dt = matrix.values.dtype.type
    dispatch(op, executor, matrix, xv, yv, dt(alpha), dt(beta))
    return y


def spmv_csr(matrix: CsrMatrix, x: DenseVector, y: Optional[DenseVector] = None,
             alpha: float = 1.0, beta: float = 0.0,
             executor: Optional[Executor] = None) -> DenseVector:
    """CSR product y = alpha*A@x + beta*y; y is updated in place and returned.

    When ``y`` is None a zero vector is allocated.
    """
    if not isinstance(matrix, CsrMatrix):
        raise DimensionMismatch(f"expected CsrMatrix, got {type(matrix).__name__}")
    return _run(spmv_csr_operation, matrix, x, y, alpha, beta, executor)


def spmv_coo(matrix: CooMatrix, x: DenseVector, y: Optional[DenseVector] = None,
             alpha: float = 1.0, beta: float = 0.0,
             executor: Optional[Executor] = None) -> DenseVector:
    """COO product y = alpha*A@x + beta*y; y is updated in place and returned.

    When ``y`` is None a zero vector is allocated.
    """
    if not isinstance(matrix, CooMatrix):
        raise DimensionMismatch(f"expected CooMatrix, got {type(matrix).__name__}")
    return _run(spmv_coo_operation, matrix, x, y, alpha, beta, executor)
