"""Sparse matrix containers, format conversions, and MatrixMarket ingestion.

Both containers use 32-bit indices and freeze their arrays after
validation, so a constructed matrix is immutable and always valid:
indices in range, entries sorted row-major, no duplicate coordinates.
Values are f32 or f64, chosen at construction.

Byte footprints follow the usual bandwidth-model conventions: the
simplified mode counts only the matrix entry storage (nz*(value+index
bytes) for CSR, nz*(value+2*index bytes) for COO), the full mode adds
the CSR row-pointer array and one read of x plus one write of y.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .core import Precision
from .errors import (DimensionMismatch, IndexOutOfRange, Overflow, ParseError,
                     UnsupportedField)

__all__ = [
    "MatrixFormat",
    "FootprintMode",
    "MatrixMetadata",
    "CooMatrix",
    "CsrMatrix",
    "coo_to_csr",
    "csr_to_coo",
    "footprint_bytes",
    "read_matrix_market",
]

_INDEX_LIMIT = 2 ** 31  # 32-bit signed index space


class MatrixFormat(Enum):
    CSR = "csr"
    COO = "coo"


class FootprintMode(Enum):
    """What counts toward the bytes moved by one matrix-vector product."""

    SIMPLIFIED = "simplified"  # matrix entry storage only
    FULL = "full"              # plus row pointers and the x/y vector traffic


@dataclass(frozen=True)
class MatrixMetadata:
    """Descriptive record attached to an ingested matrix."""

    name: str
    n: int
    nz: int
    origin: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.nz < 1:
            raise ValueError(f"nz must be positive, got {self.nz}")


def footprint_bytes(fmt: MatrixFormat, nz: int, precision: Precision,
                    mode: FootprintMode = FootprintMode.SIMPLIFIED,
                    num_rows: Optional[int] = None,
                    num_cols: Optional[int] = None) -> int:
    """Bytes moved from memory by one SpMV in the given format.

    ``num_rows`` and ``num_cols`` are only required in full mode, where
    the row-pointer array (CSR) and one pass over x and y are added.
    """
    vb = precision.value_bytes
    ib = precision.index_bytes
    if fmt is MatrixFormat.CSR:
        total = nz * (vb + ib)
    elif fmt is MatrixFormat.COO:
        total = nz * (vb + 2 * ib)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    if mode is FootprintMode.FULL:
        if num_rows is None or num_cols is None:
            raise ValueError("full footprint needs num_rows and num_cols")
        if fmt is MatrixFormat.CSR:
            total += (num_rows + 1) * ib
        total += (num_rows + num_cols) * vb
    return int(total)


def _check_dims(num_rows: int, num_cols: int, nz: int) -> None:
    if num_rows < 0 or num_cols < 0:
        raise ValueError(f"dimensions must be non-negative, got "
                         f"{num_rows}x{num_cols}")
    if num_rows >= _INDEX_LIMIT or num_cols >= _INDEX_LIMIT or nz >= _INDEX_LIMIT:
        raise Overflow("matrix exceeds the 32-bit index space: "
                       f"{num_rows}x{num_cols}, nz={nz}")


def _own_values(values, precision: Optional[Precision]) -> np.ndarray:
    arr = np.asarray(values)
    if precision is None:
        precision = (Precision.F32 if arr.dtype == np.float32 else Precision.F64)
    out = np.array(arr, dtype=precision.dtype, copy=True, order="C")
    if out.ndim != 1:
        raise DimensionMismatch(f"values must be 1-D, got ndim={out.ndim}")
    return out


def _own_indices(idxs, limit: int, what: str) -> np.ndarray:
    arr = np.asarray(idxs)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{what} must be 1-D, got ndim={arr.ndim}")
    if arr.size:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{what} must be integers, got dtype {arr.dtype}")
        lo = int(arr.min())
        hi = int(arr.max())
        if lo < 0 or hi >= limit:
            raise IndexOutOfRange(
                f"{what} outside [0, {limit}): found range [{lo}, {hi}]")
    return arr.astype(np.int32, copy=True)


class CooMatrix:
    """Coordinate-layout sparse matrix: parallel (row, col, value) arrays.

    Entries are sorted by row then column with no duplicates, which the
    constructor enforces.  Arrays are frozen after construction.
    """

    __slots__ = ("num_rows", "num_cols", "_row_idxs", "_col_idxs", "_values")

    def __init__(self, num_rows: int, num_cols: int, row_idxs, col_idxs,
                 values, precision: Optional[Precision] = None):
        vals = _own_values(values, precision)
        _check_dims(num_rows, num_cols, vals.size)
        ri = _own_indices(row_idxs, num_rows, "row indices")
        ci = _own_indices(col_idxs, num_cols, "column indices")
        if not (ri.size == ci.size == vals.size):
            raise DimensionMismatch(
                f"coordinate arrays disagree in length: "
                f"{ri.size}/{ci.size}/{vals.size}")
        if vals.size > 1:
            key = ri.astype(np.int64) * max(num_cols, 1) + ci
            if not np.all(np.diff(key) > 0):
                raise ValueError(
                    "entries must be sorted by (row, col) with no duplicates")
        for a in (ri, ci, vals):
            a.setflags(write=False)
        self.num_rows = int(num_rows)
        self.num_cols = int(num_cols)
        self._row_idxs = ri
        self._col_idxs = ci
        self._values = vals

    @property
    def row_idxs(self) -> np.ndarray:
        return self._row_idxs

    @property
    def col_idxs(self) -> np.ndarray:
        return self._col_idxs

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def nnz(self) -> int:
        return self._values.size

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.num_rows, self.num_cols)

    @property
    def precision(self) -> Precision:
        return Precision.from_dtype(self._values.dtype)

    def astype(self, precision: Precision) -> "CooMatrix":
        """Copy with values cast to another working precision.

        Returns self unchanged when the precision already matches; the
        arrays are frozen, so sharing them is safe.
        """
        if precision is self.precision:
            return self
        return CooMatrix(self.num_rows, self.num_cols, self._row_idxs,
                         self._col_idxs, self._values.astype(precision.dtype),
                         precision)

    def footprint_bytes(self, mode: FootprintMode = FootprintMode.SIMPLIFIED) -> int:
        return footprint_bytes(MatrixFormat.COO, self.nnz, self.precision,
                               mode, self.num_rows, self.num_cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CooMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and self._values.dtype == other._values.dtype
                and np.array_equal(self._row_idxs, other._row_idxs)
                and np.array_equal(self._col_idxs, other._col_idxs)
                and np.array_equal(self._values, other._values))

    def __repr__(self):
        return (f"CooMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz}, "
                f"{self.precision.value})")


class CsrMatrix:
    """Compressed-sparse-row matrix: row pointer, column index, value arrays.

    Row pointers are monotone from 0 to nnz; column indices are strictly
    increasing within each row.  Arrays are frozen after construction.
    """

    __slots__ = ("num_rows", "num_cols", "_row_ptrs", "_col_idxs", "_values")

    def __init__(self, num_rows: int, num_cols: int, row_ptrs, col_idxs,
                 values, precision: Optional[Precision] = None):
        vals = _own_values(values, precision)
        _check_dims(num_rows, num_cols, vals.size)
        nz = vals.size
        rp = np.asarray(row_ptrs)
        if rp.ndim != 1 or rp.size != num_rows + 1:
            raise DimensionMismatch(
                f"row_ptrs must have length num_rows+1={num_rows + 1}, "
                f"got {rp.size}")
        if not np.issubdtype(rp.dtype, np.integer):
            raise ValueError(f"row_ptrs must be integers, got dtype {rp.dtype}")
        if rp[0] != 0 or rp[-1] != nz or np.any(np.diff(rp) < 0):
            raise ValueError("row_ptrs must be non-decreasing from 0 to nnz")
        rp = rp.astype(np.int32, copy=True)
        ci = _own_indices(col_idxs, num_cols, "column indices")
        if ci.size != nz:
            raise DimensionMismatch(
                f"col_idxs length {ci.size} != values length {nz}")
        if nz > 1:
            # column order must be strictly increasing between entries of
            # the same row; pairs straddling a row boundary are exempt
            same_row = np.ones(nz - 1, dtype=bool)
            bounds = rp[1:-1]
            bounds = bounds[(bounds > 0) & (bounds < nz)]
            same_row[bounds.astype(np.int64) - 1] = False
            if not np.all(np.diff(ci)[same_row] > 0):
                raise ValueError(
                    "column indices must be strictly increasing within a row")
        for a in (rp, ci, vals):
            a.setflags(write=False)
        self.num_rows = int(num_rows)
        self.num_cols = int(num_cols)
        self._row_ptrs = rp
        self._col_idxs = ci
        self._values = vals

    @property
    def row_ptrs(self) -> np.ndarray:
        return self._row_ptrs

    @property
    def col_idxs(self) -> np.ndarray:
        return self._col_idxs

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def nnz(self) -> int:
        return self._values.size

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.num_rows, self.num_cols)

    @property
    def precision(self) -> Precision:
        return Precision.from_dtype(self._values.dtype)

    def astype(self, precision: Precision) -> "CsrMatrix":
        """Copy with values cast to another working precision.

        Returns self unchanged when the precision already matches.
        """
        if precision is self.precision:
            return self
        return CsrMatrix(self.num_rows, self.num_cols, self._row_ptrs,
                         self._col_idxs, self._values.astype(precision.dtype),
                         precision)

    def footprint_bytes(self, mode: FootprintMode = FootprintMode.SIMPLIFIED) -> int:
        return footprint_bytes(MatrixFormat.CSR, self.nnz, self.precision,
                               mode, self.num_rows, self.num_cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and self._values.dtype == other._values.dtype
                and np.array_equal(self._row_ptrs, other._row_ptrs)
                and np.array_equal(self._col_idxs, other._col_idxs)
                and np.array_equal(self._values, other._values))

    def __repr__(self):
        return (f"CsrMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz}, "
                f"{self.precision.value})")


def coo_to_csr(m: CooMatrix) -> CsrMatrix:
    """Exact conversion; values and column order are preserved bit for bit."""
    counts = np.bincount(m.row_idxs, minlength=m.num_rows)
    row_ptrs = np.zeros(m.num_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptrs[1:])
    return CsrMatrix(m.num_rows, m.num_cols, row_ptrs, m.col_idxs, m.values,
                     m.precision)


def csr_to_coo(m: CsrMatrix) -> CooMatrix:
    """Exact conversion; values and column order are preserved bit for bit."""
    lengths = np.diff(m.row_ptrs)
    row_idxs = np.repeat(np.arange(m.num_rows, dtype=np.int32), lengths)
    return CooMatrix(m.num_rows, m.num_cols, row_idxs, m.col_idxs, m.values,
                     m.precision)


# ---------------------------------------------------------------------------
# MatrixMarket ingestion


def _readline_text(f) -> Optional[str]:
    line = f.readline()
    if isinstance(line, bytes):
        line = line.decode("latin-1")
    if line == "":
        return None
    return line


def _parse_banner(line: str) -> Tuple[str, str]:
    tokens = line.split()
    if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
        raise ParseError(f"malformed MatrixMarket banner: {line.strip()!r}")
    obj, layout, fld, symmetry = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise UnsupportedField(f"unsupported object {obj!r}; only 'matrix'")
    if layout == "array":
        raise UnsupportedField("dense 'array' layout is not supported")
    if layout != "coordinate":
        raise ParseError(f"unknown layout {layout!r}")
    if fld in ("complex",):
        raise UnsupportedField("complex values are not supported")
    if fld not in ("real", "integer", "pattern"):
        raise ParseError(f"unknown field {fld!r}")
    if symmetry in ("hermitian", "skew-symmetric"):
        raise UnsupportedField(f"{symmetry} storage is not supported")
    if symmetry not in ("general", "symmetric"):
        raise ParseError(f"unknown symmetry {symmetry!r}")
    return fld, symmetry


def _read_header(f) -> Tuple[str, str, int, int, int, str]:
    banner = _readline_text(f)
    if banner is None:
        raise ParseError("empty file")
    fld, symmetry = _parse_banner(banner)
    origin = ""
    while True:
        line = _readline_text(f)
        if line is None:
            raise ParseError("missing size line")
        stripped = line.strip()
        if stripped.startswith("%"):
            # SuiteSparse files carry a "kind:" comment describing the
            # application area; keep it as the matrix origin
            body = stripped.lstrip("%").strip()
            if body.lower().startswith("kind:"):
                origin = body[5:].strip()
            continue
        if not stripped:
            continue
        break
    tokens = stripped.split()
    if len(tokens) != 3:
        raise ParseError(f"malformed size line: {stripped!r}")
    try:
        num_rows, num_cols, declared_nz = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"malformed size line: {stripped!r}") from exc
    if num_rows < 1 or num_cols < 1:
        raise ParseError(f"dimensions must be positive: {num_rows}x{num_cols}")
    if declared_nz < 1:
        raise ParseError(f"entry count must be positive, got {declared_nz}")
    if max(num_rows, num_cols, declared_nz) >= _INDEX_LIMIT:
        raise Overflow("matrix exceeds the 32-bit index space: "
                       f"{num_rows}x{num_cols}, nz={declared_nz}")
    return fld, symmetry, num_rows, num_cols, declared_nz, origin


def _load_records(f, fld: str, declared_nz: int) -> np.ndarray:
    want_cols = 2 if fld == "pattern" else 3
    try:
        data = np.loadtxt(f, comments="%", ndmin=2)
    except ValueError as exc:
        raise ParseError(f"malformed entry record: {exc}") from exc
    if data.size == 0:
        raise ParseError(f"expected {declared_nz} entries, found 0")
    if data.shape[1] != want_cols:
        raise ParseError(f"expected {want_cols} fields per entry, "
                         f"found {data.shape[1]}")
    if data.shape[0] != declared_nz:
        raise ParseError(f"expected {declared_nz} entries, "
                         f"found {data.shape[0]}")
    return data


def _integral(column: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(column)):
        raise ParseError(f"non-finite {what}")
    as_int = column.astype(np.int64)
    if np.any(as_int != column):
        raise ParseError(f"non-integer {what}")
    return as_int


def read_matrix_market(source: Union[str, Path, io.IOBase],
                       precision: Precision = Precision.F64
                       ) -> Tuple[CooMatrix, MatrixMetadata]:
    """Read a MatrixMarket coordinate file into a sorted COO matrix.

    Handles real, integer, and pattern fields with general or symmetric
    storage.  Pattern entries get value 1.  Symmetric storage is
    expanded: every off-diagonal entry is mirrored, so the returned
    matrix holds the full pattern and its metadata counts the expanded
    nonzeros.  Duplicate coordinates are summed.  Indices in the file
    are 1-based; the returned matrix is 0-based.

    Parameters
    ----------
    source : path or open file object
        Text or binary handle positioned at the banner line.
    precision : Precision
        Working precision of the stored values (default f64).

    Returns
    -------
    (CooMatrix, MatrixMetadata)

    Raises
    ------
    ParseError, UnsupportedField, IndexOutOfRange, Overflow
    """
    if isinstance(source, (str, Path)):
        name = Path(source).stem
        with open(source, "rb") as f:
            return _read_stream(f, name, precision)
    name = Path(getattr(source, "name", "stream")).stem or "stream"
    return _read_stream(source, name, precision)


def _read_stream(f, name: str, precision: Precision
                 ) -> Tuple[CooMatrix, MatrixMetadata]:
    fld, symmetry, num_rows, num_cols, declared_nz, origin = _read_header(f)
    data = _load_records(f, fld, declared_nz)

    rows = _integral(data[:, 0], "row index")
    cols = _integral(data[:, 1], "column index")
    if rows.min() < 1 or rows.max() > num_rows:
        raise IndexOutOfRange(
            f"row index outside [1, {num_rows}]")
    if cols.min() < 1 or cols.max() > num_cols:
        raise IndexOutOfRange(
            f"column index outside [1, {num_cols}]")
    rows -= 1
    cols -= 1

    if fld == "pattern":
        vals = np.ones(declared_nz, dtype=np.float64)
    else:
        vals = data[:, 2]
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite matrix value")
        if fld == "integer" and np.any(vals != np.floor(vals)):
            raise ParseError("non-integer value in integer-field file")

    if symmetry == "symmetric":
        if num_rows != num_cols:
            raise ParseError("symmetric storage requires a square matrix")
        off = rows != cols
        if np.any(off):
            mirror_r, mirror_c, mirror_v = cols[off], rows[off], vals[off]
            rows = np.concatenate([rows, mirror_r])
            cols = np.concatenate([cols, mirror_c])
            vals = np.concatenate([vals, mirror_v])
    if rows.size >= _INDEX_LIMIT:
        raise Overflow(f"expanded nonzero count {rows.size} exceeds "
                       "the 32-bit index space")

    # canonical order; duplicate coordinates are summed
    key = rows * num_cols + cols
    order = np.argsort(key, kind="stable")
    key = key[order]
    rows = rows[order]
    cols = cols[order]
    vals = vals[order]
    if key.size > 1:
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        if starts.size != key.size:
            vals = np.add.reduceat(vals, starts)
            rows = rows[starts]
            cols = cols[starts]

    matrix = CooMatrix(num_rows, num_cols, rows, cols,
                       vals.astype(precision.dtype), precision)
    meta = MatrixMetadata(name=name, n=num_rows, nz=matrix.nnz, origin=origin)
    return matrix, meta
