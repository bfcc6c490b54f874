import numpy as np
import pytest

from sparsela import (
    CooMatrix,
    DimensionMismatch,
    Executor,
    Precision,
    SpmvWorkload,
    coo_to_csr,
    spmv_coo,
    spmv_csr,
    spmv_flops,
)

from _util import coo_from_dense, dense_spmv, random_sparse

I32 = np.int32


def _spmv_for(matrix, executor=None):
    if isinstance(matrix, CooMatrix):
        return lambda *a, **k: spmv_coo(matrix, *a, executor=executor, **k)
    return lambda *a, **k: spmv_csr(matrix, *a, executor=executor, **k)


def _both_formats(dense, precision=Precision.F64):
    coo = coo_from_dense(dense, precision)
    return coo, coo_to_csr(coo)


class TestFlops:
    def test_two_per_nonzero(self):
        coo = coo_from_dense(np.eye(3))
        assert spmv_flops(coo) == 6
        assert spmv_flops(coo_to_csr(coo)) == 6

    def test_rajat31_scale(self):
        # 20,316,253 stored entries cost 40,632,506 flops per product.
        assert 2 * 20_316_253 == 40_632_506


class TestExamples:
    def test_identity(self):
        coo, csr = _both_formats(np.eye(3))
        x = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(spmv_coo(coo, x), x)
        assert np.array_equal(spmv_csr(csr, x), x)

    def test_scaled_accumulating_product(self):
        # alpha=2, beta=1 on [[1,2],[0,3]] with x=[1,1], y=[1,1] -> [7,7].
        dense = np.array([[1.0, 2.0], [0.0, 3.0]])
        x = np.ones(2)
        for m, run in [(f, _spmv_for(f)) for f in _both_formats(dense)]:
            y = np.ones(2)
            got = run(x, y, alpha=2.0, beta=1.0)
            assert got is y
            assert np.array_equal(y, [7.0, 7.0])

    def test_beta_zero_overwrites_nan(self):
        dense = np.array([[1.0, 0.0], [0.0, 2.0]])
        for ex in (None, Executor.parallel(3)):
            for m in _both_formats(dense):
                y = np.full(2, np.nan)
                _spmv_for(m, ex)(np.ones(2), y, alpha=1.0, beta=0.0)
                assert np.array_equal(y, [1.0, 2.0])

    def test_beta_zero_skips_empty_row_garbage(self):
        # Row 1 stores nothing; with beta=0 its output must still be set.
        dense = np.array([[3.0, 0.0], [0.0, 0.0]])
        for m in _both_formats(dense):
            y = np.full(2, np.nan)
            _spmv_for(m)(np.ones(2), y, beta=0.0)
            assert np.array_equal(y, [3.0, 0.0])

    def test_allocates_zero_y(self):
        coo, _ = _both_formats(np.array([[0.0, 1.0], [0.0, 0.0]]))
        got = spmv_coo(coo, np.array([5.0, 7.0]))
        assert isinstance(got, np.ndarray)
        assert np.array_equal(got, [7.0, 0.0])


class TestValidation:
    def setup_method(self):
        self.coo, self.csr = _both_formats(np.eye(3))

    def test_x_length(self):
        with pytest.raises(DimensionMismatch):
            spmv_coo(self.coo, np.ones(4))

    def test_y_length(self):
        with pytest.raises(DimensionMismatch):
            spmv_csr(self.csr, np.ones(3), np.ones(2))

    def test_precision_mismatch(self):
        with pytest.raises(DimensionMismatch):
            spmv_coo(self.coo, np.ones(3, dtype=np.float32))

    def test_alias_rejected(self):
        v = np.ones(3)
        with pytest.raises(ValueError):
            spmv_coo(self.coo, v, v)

    def test_format_mismatch(self):
        with pytest.raises(DimensionMismatch):
            spmv_csr(self.coo, np.ones(3))
        with pytest.raises(DimensionMismatch):
            spmv_coo(self.csr, np.ones(3))

    def test_workload(self):
        w = SpmvWorkload(self.coo, np.ones(3), np.zeros(3), alpha=2.0)
        assert w.flops == 6
        with pytest.raises(DimensionMismatch):
            SpmvWorkload(self.coo, np.ones(2), np.zeros(3))


class TestOracle:
    @pytest.mark.parametrize("precision", [Precision.F64, Precision.F32])
    def test_random_matrices_match_dense_oracle(self, precision):
        # Each product is checked elementwise against a dense brute-force
        # evaluation at <= 16*eps*max_row_nnz*max|A|*max|x| absolute.
        rng = np.random.default_rng(2024)
        eps = precision.eps
        executors = [Executor.reference(), Executor.parallel(4)]
        for case in range(200):
            r = int(rng.integers(1, 65))
            c = int(rng.integers(1, 65))
            coo, dense = random_sparse(rng, r, c, float(rng.uniform(0.02, 0.3)),
                                       precision)
            csr = coo_to_csr(coo)
            x = rng.standard_normal(c).astype(precision.dtype)
            y0 = rng.standard_normal(r).astype(precision.dtype)
            alpha = float(rng.standard_normal())
            beta = float(rng.standard_normal())
            want = dense_spmv(dense, x, alpha, beta, y0)
            row_nnz = np.count_nonzero(dense, axis=1).max()
            scale = max(np.abs(dense).max() * np.abs(x).max(), 1e-9)
            tol = 16.0 * eps * max(int(row_nnz), 1) * scale * (
                1.0 + abs(alpha) + abs(beta))
            for ex in executors:
                for m, run in ((coo, spmv_coo), (csr, spmv_csr)):
                    y = y0.copy()
                    run(m, x, y, alpha=alpha, beta=beta, executor=ex)
                    assert np.max(np.abs(y - want)) <= tol

    def test_formats_agree(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            r = int(rng.integers(1, 50))
            c = int(rng.integers(1, 50))
            coo, _ = random_sparse(rng, r, c, 0.2)
            csr = coo_to_csr(coo)
            x = rng.standard_normal(c)
            a = spmv_coo(coo, x)
            b = spmv_csr(csr, x)
            assert np.max(np.abs(a - b)) <= 8 * np.finfo(np.float64).eps * max(
                1.0, np.abs(a).max()) * c

    def test_linearity(self):
        rng = np.random.default_rng(8)
        coo, dense = random_sparse(rng, 20, 20, 0.3)
        x1 = rng.standard_normal(20)
        x2 = rng.standard_normal(20)
        lhs = spmv_coo(coo, x1 + x2)
        rhs = spmv_coo(coo, x1) + spmv_coo(coo, x2)
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(lhs).max() + 1e-13)


class TestParallel:
    def test_csr_bit_identical_any_thread_count(self):
        # Row-parallel CSR performs exactly the per-row sequential sums.
        rng = np.random.default_rng(55)
        coo, _ = random_sparse(rng, 200, 150, 0.1)
        csr = coo_to_csr(coo)
        x = rng.standard_normal(150)
        base = spmv_csr(csr, x)
        for t in (1, 2, 3, 5, 8):
            got = spmv_csr(csr, x, executor=Executor.parallel(t))
            assert np.array_equal(base, got)

    def test_coo_single_thread_matches_reference(self):
        rng = np.random.default_rng(56)
        coo, _ = random_sparse(rng, 120, 120, 0.15)
        x = rng.standard_normal(120)
        a = spmv_coo(coo, x)
        b = spmv_coo(coo, x, executor=Executor.parallel(1))
        assert np.array_equal(a, b)

    def test_coo_deterministic_per_thread_count(self):
        rng = np.random.default_rng(57)
        coo, _ = random_sparse(rng, 300, 300, 0.05)
        x = rng.standard_normal(300)
        ex = Executor.parallel(6)
        a = spmv_coo(coo, x, executor=ex)
        b = spmv_coo(coo, x, executor=ex)
        assert np.array_equal(a, b)

    def test_coo_parallel_within_tolerance(self):
        rng = np.random.default_rng(58)
        coo, dense = random_sparse(rng, 150, 150, 0.2)
        x = rng.standard_normal(150)
        want = dense_spmv(dense, x)
        row_nnz = int(np.count_nonzero(dense, axis=1).max())
        tol = 16 * np.finfo(np.float64).eps * row_nnz * np.abs(dense).max() * \
            np.abs(x).max()
        for t in (2, 4, 7):
            got = spmv_coo(coo, x, executor=Executor.parallel(t))
            assert np.max(np.abs(got - want)) <= tol

    def test_inputs_not_mutated(self):
        rng = np.random.default_rng(59)
        coo, _ = random_sparse(rng, 40, 40, 0.2)
        x = rng.standard_normal(40)
        xc = x.copy()
        vals = coo.values.copy()
        spmv_coo(coo, x, executor=Executor.parallel(3))
        assert np.array_equal(x, xc)
        assert np.array_equal(coo.values, vals)


class TestDtypeHandling:
    def test_scalars_cast_to_matrix_precision(self):
        dense = np.array([[1.0]], dtype=np.float32)
        coo = coo_from_dense(dense, Precision.F32)
        y = np.zeros(1, dtype=np.float32)
        spmv_coo(coo, np.ones(1, dtype=np.float32), y, alpha=0.1, beta=0.0)
        assert y[0] == np.float32(0.1) * np.float32(1.0)

    def test_f32_output_dtype(self):
        coo = coo_from_dense(np.eye(2), Precision.F32)
        out = spmv_coo(coo, np.ones(2, dtype=np.float32))
        assert out.dtype == np.float32
