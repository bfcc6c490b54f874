import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsela import (
    CooMatrix,
    CsrMatrix,
    DimensionMismatch,
    FootprintMode,
    IndexOutOfRange,
    MatrixFormat,
    MatrixMetadata,
    Overflow,
    ParseError,
    Precision,
    UnsupportedField,
    coo_to_csr,
    csr_to_coo,
    footprint_bytes,
    read_matrix_market,
)

from _util import mm_text, random_sparse

I32 = np.int32


def _coo(num_rows, num_cols, triples, dtype=np.float64):
    rows = np.array([t[0] for t in triples], dtype=I32)
    cols = np.array([t[1] for t in triples], dtype=I32)
    vals = np.array([t[2] for t in triples], dtype=dtype)
    return CooMatrix(num_rows, num_cols, rows, cols, vals)


class TestFootprint:
    def test_csr_simplified_example(self):
        assert footprint_bytes(MatrixFormat.CSR, 1, Precision.F64,
                               FootprintMode.SIMPLIFIED) == 12

    def test_coo_simplified_example(self):
        assert footprint_bytes(MatrixFormat.COO, 1, Precision.F32,
                               FootprintMode.SIMPLIFIED) == 12

    def test_zero_nonzeros(self):
        assert footprint_bytes(MatrixFormat.CSR, 0, Precision.F64,
                               FootprintMode.SIMPLIFIED) == 0
        assert footprint_bytes(MatrixFormat.COO, 0, Precision.F32,
                               FootprintMode.SIMPLIFIED) == 0

    def test_simplified_per_entry_sizes(self):
        # CSR: value + one index per entry; COO: value + two indices.
        assert footprint_bytes(MatrixFormat.CSR, 10, Precision.F64,
                               FootprintMode.SIMPLIFIED) == 10 * 12
        assert footprint_bytes(MatrixFormat.COO, 10, Precision.F64,
                               FootprintMode.SIMPLIFIED) == 10 * 16
        assert footprint_bytes(MatrixFormat.CSR, 10, Precision.F32,
                               FootprintMode.SIMPLIFIED) == 10 * 8
        assert footprint_bytes(MatrixFormat.COO, 10, Precision.F32,
                               FootprintMode.SIMPLIFIED) == 10 * 12

    def test_coo_minus_csr_is_index_array(self):
        # The simplified COO footprint exceeds CSR by exactly one 32-bit
        # index per stored entry, for any nz and either precision.
        for nz in (0, 1, 7, 1024, 20_316_253):
            for prec in (Precision.F64, Precision.F32):
                coo = footprint_bytes(MatrixFormat.COO, nz, prec,
                                      FootprintMode.SIMPLIFIED)
                csr = footprint_bytes(MatrixFormat.CSR, nz, prec,
                                      FootprintMode.SIMPLIFIED)
                assert coo - csr == nz * prec.index_bytes

    def test_full_adds_row_pointer_and_vectors(self):
        nz, rows, cols = 5, 3, 4
        simple = footprint_bytes(MatrixFormat.CSR, nz, Precision.F64,
                                 FootprintMode.SIMPLIFIED)
        full = footprint_bytes(MatrixFormat.CSR, nz, Precision.F64,
                               FootprintMode.FULL, num_rows=rows,
                               num_cols=cols)
        assert full - simple == (rows + 1) * 4 + (rows + cols) * 8

    def test_full_coo_adds_vectors_only(self):
        nz, rows, cols = 5, 3, 4
        simple = footprint_bytes(MatrixFormat.COO, nz, Precision.F32,
                                 FootprintMode.SIMPLIFIED)
        full = footprint_bytes(MatrixFormat.COO, nz, Precision.F32,
                               FootprintMode.FULL, num_rows=rows,
                               num_cols=cols)
        assert full - simple == (rows + cols) * 4

    def test_full_requires_dimensions(self):
        with pytest.raises(ValueError):
            footprint_bytes(MatrixFormat.CSR, 1, Precision.F64,
                            FootprintMode.FULL)

    def test_matrix_methods(self):
        m = _coo(2, 2, [(0, 0, 1.0)])
        assert m.footprint_bytes() == 16
        assert coo_to_csr(m).footprint_bytes() == 12


class TestCooValidation:
    def test_basic(self):
        m = _coo(2, 3, [(0, 1, 2.0), (1, 0, -1.0)])
        assert m.num_rows == 2 and m.num_cols == 3 and m.nnz == 2

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            _coo(2, 2, [(1, 0, 1.0), (0, 0, 1.0)])

    def test_rejects_unsorted_within_row(self):
        with pytest.raises(ValueError):
            _coo(2, 2, [(0, 1, 1.0), (0, 0, 1.0)])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            _coo(2, 2, [(0, 1, 1.0), (0, 1, 2.0)])

    def test_rejects_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            _coo(2, 2, [(0, 2, 1.0)])
        with pytest.raises(IndexOutOfRange):
            _coo(2, 2, [(2, 0, 1.0)])
        with pytest.raises(IndexOutOfRange):
            _coo(2, 2, [(-1, 0, 1.0)])

    def test_rejects_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            CooMatrix(2, 2, np.array([0], dtype=I32),
                      np.array([0, 1], dtype=I32), np.array([1.0]))

    def test_rejects_huge_dimensions(self):
        with pytest.raises(Overflow):
            CooMatrix(2**31, 1, np.array([0], dtype=I32),
                      np.array([0], dtype=I32), np.array([1.0]))

    def test_arrays_frozen(self):
        m = _coo(2, 2, [(0, 0, 1.0)])
        with pytest.raises(ValueError):
            m.values[0] = 2.0
        with pytest.raises(ValueError):
            m.row_idxs[0] = 1

    def test_astype(self):
        m = _coo(2, 2, [(0, 0, 1.5)], dtype=np.float64)
        m32 = m.astype(Precision.F32)
        assert m32.values.dtype == np.float32
        assert m32.values[0] == np.float32(1.5)
        assert m.astype(Precision.F64) is m

    def test_equality(self):
        a = _coo(2, 2, [(0, 0, 1.0)])
        b = _coo(2, 2, [(0, 0, 1.0)])
        c = _coo(2, 2, [(0, 0, 2.0)])
        assert a == b and a != c


class TestCsrValidation:
    def test_rejects_bad_row_ptr_length(self):
        with pytest.raises(DimensionMismatch):
            CsrMatrix(2, 2, np.array([0, 1], dtype=I32),
                      np.array([0], dtype=I32), np.array([1.0]))

    def test_rejects_nonzero_start(self):
        with pytest.raises(ValueError):
            CsrMatrix(1, 2, np.array([1, 1], dtype=I32),
                      np.zeros(0, dtype=I32), np.zeros(0))

    def test_rejects_bad_end(self):
        with pytest.raises(ValueError):
            CsrMatrix(1, 2, np.array([0, 2], dtype=I32),
                      np.array([0], dtype=I32), np.array([1.0]))

    def test_rejects_decreasing_row_ptr(self):
        with pytest.raises(ValueError):
            CsrMatrix(2, 2, np.array([0, 2, 1], dtype=I32),
                      np.array([0], dtype=I32), np.array([1.0]))

    def test_rejects_unsorted_columns_in_row(self):
        with pytest.raises(ValueError):
            CsrMatrix(1, 3, np.array([0, 2], dtype=I32),
                      np.array([2, 0], dtype=I32), np.array([1.0, 2.0]))

    def test_rejects_duplicate_columns_in_row(self):
        with pytest.raises(ValueError):
            CsrMatrix(1, 3, np.array([0, 2], dtype=I32),
                      np.array([1, 1], dtype=I32), np.array([1.0, 2.0]))

    def test_same_column_across_rows_ok(self):
        m = CsrMatrix(2, 3, np.array([0, 1, 2], dtype=I32),
                      np.array([2, 2], dtype=I32), np.array([1.0, 2.0]))
        assert m.nnz == 2

    def test_rejects_column_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            CsrMatrix(1, 2, np.array([0, 1], dtype=I32),
                      np.array([5], dtype=I32), np.array([1.0]))


class TestConversion:
    def test_example_row_ptrs(self):
        m = _coo(2, 2, [(0, 0, 1.0), (0, 1, 2.0), (1, 1, 3.0)])
        csr = coo_to_csr(m)
        assert csr.row_ptrs.tolist() == [0, 2, 3]
        assert csr.col_idxs.tolist() == [0, 1, 1]
        assert csr.values.tolist() == [1.0, 2.0, 3.0]

    def test_single_entry_last_row(self):
        m = _coo(3, 3, [(2, 0, 5.0)])
        assert coo_to_csr(m).row_ptrs.tolist() == [0, 0, 0, 1]

    def test_csr_to_coo(self):
        csr = CsrMatrix(2, 2, np.array([0, 2, 3], dtype=I32),
                        np.array([0, 1, 1], dtype=I32),
                        np.array([1.0, 2.0, 3.0]))
        coo = csr_to_coo(csr)
        assert coo.row_idxs.tolist() == [0, 0, 1]
        assert coo.col_idxs.tolist() == [0, 1, 1]
        assert coo.values.tolist() == [1.0, 2.0, 3.0]

    @pytest.mark.parametrize("precision", [Precision.F64, Precision.F32])
    def test_round_trip_random(self, precision):
        rng = np.random.default_rng(123)
        for _ in range(100):
            r = int(rng.integers(1, 40))
            c = int(rng.integers(1, 40))
            coo, _ = random_sparse(rng, r, c, float(rng.uniform(0.02, 0.5)),
                                   precision)
            csr = coo_to_csr(coo)
            assert csr_to_coo(csr) == coo
            assert coo_to_csr(csr_to_coo(csr)) == csr

    def test_preserves_dtype(self):
        m = _coo(2, 2, [(0, 0, 1.0)], dtype=np.float32)
        assert coo_to_csr(m).values.dtype == np.float32


def _read(text, **kw):
    return read_matrix_market(io.StringIO(text), **kw)


class TestMatrixMarketRead:
    def test_general_real(self):
        text = mm_text(2, 2, [(1, 1, 2.0), (2, 1, 1.0)])
        m, meta = _read(text)
        assert m.row_idxs.tolist() == [0, 1]
        assert m.col_idxs.tolist() == [0, 0]
        assert m.values.tolist() == [2.0, 1.0]
        assert meta.n == 2 and meta.nz == 2

    def test_symmetric_expansion_example(self):
        # Off-diagonal entries are mirrored; diagonal entries are not.
        text = mm_text(2, 2, [(1, 1, 2.0), (2, 1, 1.0)], symmetry="symmetric")
        m, meta = _read(text)
        assert m.nnz == 3
        got = {(r, c): v for r, c, v in zip(m.row_idxs, m.col_idxs, m.values)}
        assert got == {(0, 0): 2.0, (1, 0): 1.0, (0, 1): 1.0}
        assert meta.nz == 3

    def test_pattern_entries_are_one(self):
        text = mm_text(3, 2, [(3, 1)], field="pattern")
        m, _ = _read(text)
        assert m.row_idxs.tolist() == [2]
        assert m.col_idxs.tolist() == [0]
        assert m.values.tolist() == [1.0]

    def test_integer_field(self):
        text = mm_text(2, 2, [(1, 2, 7)], field="integer")
        m, _ = _read(text)
        assert m.values.tolist() == [7.0]

    def test_unsorted_input_is_canonicalized(self):
        text = mm_text(3, 3, [(3, 1, 1.0), (1, 2, 2.0), (2, 2, 3.0),
                              (1, 1, 4.0)])
        m, _ = _read(text)
        assert m.row_idxs.tolist() == [0, 0, 1, 2]
        assert m.col_idxs.tolist() == [0, 1, 1, 0]
        assert m.values.tolist() == [4.0, 2.0, 3.0, 1.0]

    def test_duplicates_summed(self):
        text = mm_text(2, 2, [(1, 1, 1.5), (1, 1, 2.5), (2, 2, 1.0)])
        m, meta = _read(text)
        assert m.nnz == 2
        assert m.values.tolist() == [4.0, 1.0]
        assert meta.nz == 2

    def test_kind_comment_becomes_origin(self):
        text = mm_text(2, 2, [(1, 1, 1.0)],
                       comments=[" kind: Circuit Simulation Problem"])
        _, meta = _read(text)
        assert meta.origin == "Circuit Simulation Problem"

    def test_precision_request(self):
        text = mm_text(2, 2, [(1, 1, 0.1)])
        m, _ = _read(text, precision=Precision.F32)
        assert m.values.dtype == np.float32

    def test_file_path(self, tmp_path):
        p = tmp_path / "m.mtx"
        p.write_text(mm_text(2, 2, [(1, 1, 1.0)]))
        m, meta = read_matrix_market(p)
        assert m.nnz == 1
        assert meta.name == "m"

    def test_symmetric_requires_square(self):
        text = mm_text(2, 3, [(1, 1, 1.0)], symmetry="symmetric")
        with pytest.raises(ParseError):
            _read(text)


class TestMatrixMarketErrors:
    def test_empty_file(self):
        with pytest.raises(ParseError):
            _read("")

    def test_bad_banner(self):
        with pytest.raises(ParseError):
            _read("%%NotMatrixMarket matrix coordinate real general\n1 1 1\n1 1 1.0\n")

    def test_banner_too_short(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate\n1 1 1\n1 1 1.0\n")

    def test_array_layout_unsupported(self):
        with pytest.raises(UnsupportedField):
            _read("%%MatrixMarket matrix array real general\n2 2\n1.0\n")

    def test_complex_unsupported(self):
        text = mm_text(1, 1, [(1, 1, 1.0)], field="complex")
        with pytest.raises(UnsupportedField):
            _read(text)

    def test_hermitian_unsupported(self):
        text = mm_text(2, 2, [(1, 1, 1.0)], symmetry="hermitian")
        with pytest.raises(UnsupportedField):
            _read(text)

    def test_skew_symmetric_unsupported(self):
        text = mm_text(2, 2, [(2, 1, 1.0)], symmetry="skew-symmetric")
        with pytest.raises(UnsupportedField):
            _read(text)

    def test_missing_size_line(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n")

    def test_bad_size_line(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n2 2\n")

    def test_nonpositive_dimension(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n0 2 1\n1 1 1.0\n")

    def test_too_few_records(self):
        text = mm_text(2, 2, [(1, 1, 1.0)])
        text = text.replace("2 2 1", "2 2 2")
        with pytest.raises(ParseError):
            _read(text)

    def test_too_many_records(self):
        text = mm_text(2, 2, [(1, 1, 1.0), (2, 2, 1.0)])
        text = text.replace("2 2 2", "2 2 1")
        with pytest.raises(ParseError):
            _read(text)

    def test_wrong_column_count(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1\n")

    def test_non_integer_index(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n2 2 1\n1.5 1 1.0\n")

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            _read(mm_text(2, 2, [(3, 1, 1.0)]))
        with pytest.raises(IndexOutOfRange):
            _read(mm_text(2, 2, [(0, 1, 1.0)]))

    def test_non_finite_value(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 nan\n")
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 inf\n")

    def test_non_integral_integer_value(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 2.5\n")

    def test_dimension_overflow(self):
        big = 2**31
        with pytest.raises(Overflow):
            _read(f"%%MatrixMarket matrix coordinate real general\n{big} 1 1\n1 1 1.0\n")

    def test_garbage_token(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 abc\n")

    def test_empty_matrix_rejected(self):
        with pytest.raises(ParseError):
            _read("%%MatrixMarket matrix coordinate real general\n2 2 0\n")


class TestMetadata:
    def test_fields(self):
        m = MatrixMetadata(name="rajat31", n=4_690_002, nz=20_316_253,
                           origin="Circuit Simulation Problem")
        assert m.n == 4_690_002 and m.nz == 20_316_253

    def test_validation(self):
        with pytest.raises(ValueError):
            MatrixMetadata(name="x", n=0, nz=1)
        with pytest.raises(ValueError):
            MatrixMetadata(name="x", n=1, nz=0)


@st.composite
def _mm_files(strategy_draw):
    draw = strategy_draw
    symmetric = draw(st.booleans())
    nrows = draw(st.integers(1, 8))
    ncols = nrows if symmetric else draw(st.integers(1, 8))
    field = draw(st.sampled_from(["real", "integer", "pattern"]))
    pair_pool = [(r, c) for r in range(1, nrows + 1) for c in range(1, ncols + 1)
                 if not symmetric or r >= c]
    idx = draw(st.lists(st.integers(0, len(pair_pool) - 1), min_size=1,
                        max_size=len(pair_pool), unique=True))
    pairs = [pair_pool[i] for i in idx]
    if field == "real":
        vals = [draw(st.floats(-100, 100, allow_nan=False,
                               allow_infinity=False)) for _ in pairs]
    elif field == "integer":
        vals = [draw(st.integers(-50, 50)) for _ in pairs]
    else:
        vals = [None] * len(pairs)
    records = [(r, c) if v is None else (r, c, v)
               for (r, c), v in zip(pairs, vals)]
    comments = draw(st.lists(st.sampled_from([" a comment", "%", " x y z"]),
                             max_size=2))
    text = mm_text(nrows, ncols, records,
                   symmetry="symmetric" if symmetric else "general",
                   field=field, comments=comments)
    expected = {}
    for (r, c), v in zip(pairs, vals):
        v = 1.0 if v is None else float(v)
        expected[(r - 1, c - 1)] = expected.get((r - 1, c - 1), 0.0) + v
        if symmetric and r != c:
            expected[(c - 1, r - 1)] = expected.get((c - 1, r - 1), 0.0) + v
    return text, nrows, ncols, expected


class TestMatrixMarketProperties:
    @settings(max_examples=120, deadline=None)
    @given(_mm_files())
    def test_output_is_canonical_and_matches_oracle(self, case):
        text, nrows, ncols, expected = case
        m, meta = _read(text)
        assert m.num_rows == nrows and m.num_cols == ncols
        # Strictly increasing (row, col) keys: sorted with no duplicates.
        keys = m.row_idxs.astype(np.int64) * m.num_cols + m.col_idxs.astype(np.int64)
        assert np.all(np.diff(keys) > 0)
        got = {(int(r), int(c)): float(v)
               for r, c, v in zip(m.row_idxs, m.col_idxs, m.values)}
        assert got == expected
        assert meta.n == nrows
        assert meta.nz == m.nnz
