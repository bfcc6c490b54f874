"""Krylov subspace solvers over the dispatched kernel layer.

All four methods (CG, BiCGSTAB, CGS, restarted GMRES) are built purely
from the library's dot/axpy/SpMV operations, so the choice of executor
controls every accumulation in the solve and results are reproducible
per backend and thread count.

Stopping works in two modes.  ``RESIDUAL`` iterates until the monitored
relative residual drops to ``rel_tol`` (or breakdown, or ``max_iters``).
``FIXED_ITERATIONS`` always executes exactly ``max_iters`` iterations:
breakdowns are recorded but the offending scalar is replaced by zero so
the recurrence can keep running, which is what a timing harness needs.

During the iteration the cheap recurrence residual is monitored; the
reported ``final_relres`` always comes from a fresh ``b - A@x`` product
at exit, so convergence claims never rest on the recurrence.

Breakdowns are data, not exceptions: the first one encountered is
reported on the result.  ``RHO_ZERO`` covers vanishing Lanczos/CG
scalars (r'r, rhat'r, p'Ap), ``OMEGA_ZERO`` the BiCGSTAB stabilization
scalar, and ``H_BREAKDOWN`` the happy GMRES breakdown, which is an exit
reported together with ``converged=True`` when the residual is below
tolerance.

The recurrences follow the standard preconditioner-free formulations
(Saad, "Iterative Methods for Sparse Linear Systems", 2nd ed., ch. 6-7),
arranged so every iteration executes an identical operation sequence:

======== ===== ==== ====== =====================
method   SpMV  dot  axpy   flops per iteration
======== ===== ==== ====== =====================
CG         1    2    3     2*nz + 10*n
BiCGSTAB   2    5    6     4*nz + 22*n
CGS        2    3    7     4*nz + 20*n
======== ===== ==== ====== =====================

(The residual-monitor dot is included.)  GMRES inner step j of a cycle
costs ``2*nz + 4*n*j + 4*n`` (one SpMV, j orthogonalization dot/axpy
pairs, one norm, one scaling); each cycle adds ``2*nz + 4*n`` to start
(residual SpMV, norm, scaling) and ``2*n*k`` to fold k steps back into
x.  The O(restart^2) scalar work on the Hessenberg matrix and the final
exit-residual check are excluded.  ``solver_flops`` freezes this model.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from .core import DenseVector, Executor, Precision, _as_vector, axpy, dot, norm2
from .errors import DimensionMismatch
from .formats import CooMatrix, CsrMatrix
from .spmv import spmv_coo, spmv_csr

__all__ = [
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
]

Matrix = Union[CooMatrix, CsrMatrix]


class SolverMethod(Enum):
    CG = "cg"
    BICGSTAB = "bicgstab"
    CGS = "cgs"
    GMRES = "gmres"


class StopMode(Enum):
    RESIDUAL = "residual"
    FIXED_ITERATIONS = "fixed_iterations"


class BreakdownKind(Enum):
    RHO_ZERO = "rho_zero"
    OMEGA_ZERO = "omega_zero"
    H_BREAKDOWN = "h_breakdown"


DEFAULT_REL_TOL = {Precision.F64: 1e-8, Precision.F32: 1e-5}


@dataclass(frozen=True)
class SolverConfig:
    """Method selection and stopping policy for one solve.

    ``rel_tol=None`` picks the per-precision default (1e-8 for f64,
    1e-5 for f32) when the solve starts.  ``restart`` only affects
    GMRES.
    """

    method: SolverMethod
    max_iters: int = 1000
    rel_tol: Optional[float] = None
    restart: int = 100
    stop_mode: StopMode = StopMode.RESIDUAL

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.rel_tol is not None and not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.restart < 1:
            raise ValueError(f"restart must be >= 1, got {self.restart}")


@dataclass
class SolverResult:
    """Outcome of one solve.

    ``iterations`` counts completed iterations (inner steps for GMRES).
    ``residual_norms[0]`` is the initial relative residual and each
    further entry is the monitored recurrence residual after one
    iteration.  ``final_relres`` is computed from a fresh ``b - A@x``
    at exit and ``converged`` compares it against the tolerance, so a
    recorded breakdown and ``converged=True`` can coexist (the lucky
    breakdown case).  ``flops`` follows the per-iteration model of
    :func:`solver_flops`.
    """

    x: DenseVector
    iterations: int
    final_relres: float
    converged: bool
    breakdown: Optional[BreakdownKind]
    flops: int
    residual_norms: List[float] = field(default_factory=list)


def solver_flops(method: SolverMethod, iterations: int, n: int, nz: int,
                 restart: int = 100) -> int:
    """Flops executed by ``iterations`` iterations of a method.

    Counts SpMV at 2 flops per nonzero and dot/axpy at 2*n each, per
    the operation tallies in the module docstring.  For GMRES,
    ``iterations`` counts inner steps and the cost of each restart
    cycle (including its starting residual) is included; the trailing
    exit-residual check is excluded for every method.
    """
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    if method is SolverMethod.CG:
        return iterations * (2 * nz + 10 * n)
    if method is SolverMethod.BICGSTAB:
        return iterations * (4 * nz + 22 * n)
    if method is SolverMethod.CGS:
        return iterations * (4 * nz + 20 * n)
    if method is SolverMethod.GMRES:
        if restart < 1:
            raise ValueError(f"restart must be >= 1, got {restart}")

        def cycle_cost(k: int) -> int:
            # start + k inner steps + fold-back of k basis vectors
            inner = sum(2 * nz + 4 * n * j + 4 * n for j in range(1, k + 1))
            return (2 * nz + 4 * n) + inner + 2 * n * k

        full, rem = divmod(iterations, restart)
        total = full * cycle_cost(restart)
        if rem:
            total += cycle_cost(rem)
        return total
    raise ValueError(f"unknown method {method!r}")


class _BreakdownGuard:
    """Records the first breakdown and decides whether iteration stops.

    A scalar smaller than ``eps^2 * ||b||^2`` counts as broken down.  In
    residual mode that halts the solve (via :class:`_Halt`); in fixed
    mode a division by a broken-down denominator yields 0 so the
    recurrence keeps executing the full iteration budget.  Solvers
    disarm the guard once the monitored residual is at tolerance:
    scalars vanish naturally after convergence and reporting them as
    breakdowns would be noise (divisions stay protected either way).
    """

    def __init__(self, threshold: float, keep_going: bool):
        self.threshold = threshold
        self.keep_going = keep_going
        self.armed = True
        self.kind: Optional[BreakdownKind] = None

    def _trip(self, kind: BreakdownKind) -> None:
        if not self.armed:
            return
        if self.kind is None:
            self.kind = kind
        if not self.keep_going:
            raise _Halt()

    def value(self, v: float, kind: BreakdownKind) -> float:
        if abs(v) < self.threshold or v == 0.0:
            self._trip(kind)
        return v

    def ratio(self, num: float, den: float, kind: BreakdownKind) -> float:
        if abs(den) < self.threshold or den == 0.0:
            self._trip(kind)
            return 0.0
        return num / den


class _Halt(Exception):
    """Internal control flow: residual-mode stop at a breakdown."""


def _apply(A: Matrix, x: DenseVector, y: DenseVector, executor,
           alpha: float = 1.0, beta: float = 0.0) -> DenseVector:
    if isinstance(A, CsrMatrix):
        return spmv_csr(A, x, y, alpha, beta, executor)
    return spmv_coo(A, x, y, alpha, beta, executor)


class _Solve:
    """Shared state for one solve: vectors, tolerances, residual monitor."""

    def __init__(self, A: Matrix, b: DenseVector, x0: Optional[DenseVector],
                 config: SolverConfig, executor: Optional[Executor]):
        b = _as_vector(b)
        if x0 is not None:
            x0 = _as_vector(x0)
        if A.num_rows != A.num_cols:
            raise DimensionMismatch(
                f"solver needs a square matrix, got {A.num_rows}x{A.num_cols}")
        if len(b) != A.num_rows:
            raise DimensionMismatch(
                f"b has length {len(b)}, matrix is {A.num_rows}x{A.num_cols}")
        if b.values.dtype != A.values.dtype:
            raise DimensionMismatch(
                f"precision mismatch: matrix {A.values.dtype}, b {b.values.dtype}")
        if x0 is not None and x0.values.dtype != b.values.dtype:
            raise DimensionMismatch(
                f"precision mismatch: b {b.values.dtype}, x0 {x0.values.dtype}")
        if x0 is not None and len(x0) != len(b):
            raise DimensionMismatch(
                f"x0 has length {len(x0)}, expected {len(b)}")
        self.A = A
        self.b = b
        self.config = config
        self.executor = executor if executor is not None else Executor.reference()
        self.precision = b.precision
        self.n = len(b)
        self.x = x0.copy() if x0 is not None else DenseVector.zeros(
            self.n, self.precision)
        self.tol = (config.rel_tol if config.rel_tol is not None
                    else DEFAULT_REL_TOL[self.precision])
        self.fixed = config.stop_mode is StopMode.FIXED_ITERATIONS
        self.bnorm = norm2(b, self.executor)
        self.bdiv = self.bnorm if self.bnorm > 0 else 1.0
        threshold = self.precision.eps ** 2 * self.bnorm ** 2
        self.guard = _BreakdownGuard(threshold, keep_going=self.fixed)
        self.history: List[float] = []

    def fresh(self) -> DenseVector:
        return DenseVector.zeros(self.n, self.precision)

    def residual_into(self, r: DenseVector) -> float:
        """r := b - A@x; returns the relative residual norm."""
        np.copyto(r.values, self.b.values)
        _apply(self.A, self.x, r, self.executor, alpha=-1.0, beta=1.0)
        return norm2(r, self.executor) / self.bdiv

    def keep_running(self, iters: int, relres: float) -> bool:
        if iters >= self.config.max_iters:
            return False
        return self.fixed or relres > self.tol

    def finish(self, iterations: int) -> SolverResult:
        scratch = self.fresh()
        final_relres = self.residual_into(scratch)
        return SolverResult(
            x=self.x,
            iterations=iterations,
            final_relres=final_relres,
            converged=bool(final_relres <= self.tol),
            breakdown=self.guard.kind,
            flops=solver_flops(self.config.method, iterations, self.n,
                               self.A.nnz, self.config.restart),
            residual_norms=self.history,
        )


def _with_method(config: Optional[SolverConfig],
                 method: SolverMethod) -> SolverConfig:
    if config is None:
        return SolverConfig(method=method)
    if config.method is not method:
        config = dataclasses.replace(config, method=method)
    return config


def solve_cg(A: Matrix, b: DenseVector,
             config: Optional[SolverConfig] = None,
             x0: Optional[DenseVector] = None,
             executor: Optional[Executor] = None) -> SolverResult:
    """Conjugate gradients for symmetric positive definite systems."""
    config = _with_method(config, SolverMethod.CG)
    ctx = _Solve(A, b, x0, config, executor)
    ex, guard = ctx.executor, ctx.guard

    r = ctx.fresh()
    relres = ctx.residual_into(r)
    ctx.history.append(relres)
    p = r.copy()
    q = ctx.fresh()
    rho = dot(r, r, ex)

    iters = 0
    try:
        while ctx.keep_running(iters, relres):
            guard.armed = relres > ctx.tol
            _apply(A, p, q, ex)
            sigma = guard.value(dot(p, q, ex), BreakdownKind.RHO_ZERO)
            alpha = guard.ratio(rho, sigma, BreakdownKind.RHO_ZERO)
            axpy(alpha, p, ctx.x, ex, out=ctx.x)
            axpy(-alpha, q, r, ex, out=r)
            rho_next = dot(r, r, ex)
            iters += 1
            relres = math.sqrt(max(rho_next, 0.0)) / ctx.bdiv
            ctx.history.append(relres)
            guard.armed = relres > ctx.tol
            beta = guard.ratio(guard.value(rho_next, BreakdownKind.RHO_ZERO),
                               rho, BreakdownKind.RHO_ZERO)
            axpy(beta, p, r, ex, out=p)  # p = r + beta*p
            rho = rho_next
    except _Halt:
        pass
    return ctx.finish(iters)


def solve_bicgstab(A: Matrix, b: DenseVector,
                   config: Optional[SolverConfig] = None,
                   x0: Optional[DenseVector] = None,
                   executor: Optional[Executor] = None) -> SolverResult:
    """Stabilized bi-conjugate gradients for general square systems.

    The shadow residual is the initial residual itself.
    """
    config = _with_method(config, SolverMethod.BICGSTAB)
    ctx = _Solve(A, b, x0, config, executor)
    ex, guard = ctx.executor, ctx.guard

    r = ctx.fresh()
    relres = ctx.residual_into(r)
    ctx.history.append(relres)
    rhat = r.copy()
    p = ctx.fresh()
    v = ctx.fresh()
    s = ctx.fresh()
    t = ctx.fresh()
    rho_old = 1.0
    alpha = 1.0
    omega = 1.0

    iters = 0
    try:
        while ctx.keep_running(iters, relres):
            guard.armed = relres > ctx.tol
            rho = guard.value(dot(rhat, r, ex), BreakdownKind.RHO_ZERO)
            beta = guard.ratio(rho * alpha, rho_old * omega,
                               BreakdownKind.RHO_ZERO)
            # p = r + beta*(p - omega*v)
            axpy(-omega, v, p, ex, out=p)
            axpy(beta, p, r, ex, out=p)
            _apply(A, p, v, ex)
            sigma = guard.value(dot(rhat, v, ex), BreakdownKind.RHO_ZERO)
            alpha = guard.ratio(rho, sigma, BreakdownKind.RHO_ZERO)
            axpy(-alpha, v, r, ex, out=s)  # s = r - alpha*v
            _apply(A, s, t, ex)
            tt = dot(t, t, ex)
            ts = dot(t, s, ex)
            if tt <= guard.threshold:
                # The stabilization denominator vanished.  When the
                # half-step residual s already meets the tolerance this is
                # convergence, not a breakdown: keep the alpha update and
                # report the half step.
                half = math.sqrt(max(dot(s, s, ex), 0.0)) / ctx.bdiv
                guard.armed = half > ctx.tol
                if half <= ctx.tol:
                    axpy(alpha, p, ctx.x, ex, out=ctx.x)
                    np.copyto(r.values, s.values)
                    rho_old = rho
                    iters += 1
                    relres = half
                    ctx.history.append(relres)
                    continue
            omega = guard.value(guard.ratio(ts, tt, BreakdownKind.OMEGA_ZERO),
                                BreakdownKind.OMEGA_ZERO)
            axpy(alpha, p, ctx.x, ex, out=ctx.x)
            axpy(omega, s, ctx.x, ex, out=ctx.x)
            axpy(-omega, t, s, ex, out=r)  # r = s - omega*t
            rr = dot(r, r, ex)
            rho_old = rho
            iters += 1
            relres = math.sqrt(max(rr, 0.0)) / ctx.bdiv
            ctx.history.append(relres)
    except _Halt:
        pass
    return ctx.finish(iters)


def solve_cgs(A: Matrix, b: DenseVector,
              config: Optional[SolverConfig] = None,
              x0: Optional[DenseVector] = None,
              executor: Optional[Executor] = None) -> SolverResult:
    """Conjugate gradient squared for general square systems."""
    config = _with_method(config, SolverMethod.CGS)
    ctx = _Solve(A, b, x0, config, executor)
    ex, guard = ctx.executor, ctx.guard

    r = ctx.fresh()
    relres = ctx.residual_into(r)
    ctx.history.append(relres)
    rhat = r.copy()
    p = ctx.fresh()
    q = ctx.fresh()
    u = ctx.fresh()
    w = ctx.fresh()
    v = ctx.fresh()
    t = ctx.fresh()
    tmp = ctx.fresh()
    rho_old = 1.0

    iters = 0
    try:
        while ctx.keep_running(iters, relres):
            guard.armed = relres > ctx.tol
            rho = guard.value(dot(rhat, r, ex), BreakdownKind.RHO_ZERO)
            beta = guard.ratio(rho, rho_old, BreakdownKind.RHO_ZERO)
            axpy(beta, q, r, ex, out=u)      # u = r + beta*q
            axpy(beta, p, q, ex, out=tmp)    # tmp = q + beta*p
            axpy(beta, tmp, u, ex, out=p)    # p = u + beta*tmp
            _apply(A, p, v, ex)
            sigma = guard.value(dot(rhat, v, ex), BreakdownKind.RHO_ZERO)
            alpha = guard.ratio(rho, sigma, BreakdownKind.RHO_ZERO)
            axpy(-alpha, v, u, ex, out=q)    # q = u - alpha*v
            axpy(1.0, u, q, ex, out=w)       # w = u + q
            axpy(alpha, w, ctx.x, ex, out=ctx.x)
            _apply(A, w, t, ex)
            axpy(-alpha, t, r, ex, out=r)
            rr = dot(r, r, ex)
            rho_old = rho
            iters += 1
            relres = math.sqrt(max(rr, 0.0)) / ctx.bdiv
            ctx.history.append(relres)
    except _Halt:
        pass
    return ctx.finish(iters)


def _plane_rotation(a: float, b: float):
    """Givens rotation (c, s, r) with c*a + s*b = r and -s*a + c*b = 0."""
    if b == 0.0:
        return 1.0, 0.0, a
    if a == 0.0:
        return 0.0, 1.0, b
    h = math.hypot(a, b)
    return a / h, b / h, h


def solve_gmres(A: Matrix, b: DenseVector,
                config: Optional[SolverConfig] = None,
                x0: Optional[DenseVector] = None,
                executor: Optional[Executor] = None) -> SolverResult:
    """Restarted GMRES with modified Gram-Schmidt and Givens rotations.

    The per-step residual estimate comes from the rotated right-hand
    side, so it is monotone non-increasing within a cycle.  A vanishing
    subdiagonal (happy breakdown) exits with ``H_BREAKDOWN`` when the
    estimate is already below tolerance; otherwise the cycle simply
    restarts.  In fixed-iteration mode degenerate steps keep executing
    on zero basis vectors so the iteration count always reaches
    ``max_iters``.
    """
    config = _with_method(config, SolverMethod.GMRES)
    ctx = _Solve(A, b, x0, config, executor)
    ex, guard = ctx.executor, ctx.guard
    m = config.restart
    dt = ctx.precision.dtype
    eps = ctx.precision.eps

    basis = [ctx.fresh() for _ in range(m + 1)]
    w = ctx.fresh()
    zero = ctx.fresh()  # read-only source for scaling via axpy
    scratch = ctx.fresh()

    total = 0
    first = True
    pending_happy = False
    while True:
        relres = ctx.residual_into(scratch)
        if first:
            ctx.history.append(relres)
            first = False
        if not ctx.keep_running(total, relres):
            if pending_happy and relres <= ctx.tol:
                guard.kind = BreakdownKind.H_BREAKDOWN
            break
        pending_happy = False

        beta = relres * ctx.bdiv
        if beta > 0.0:
            axpy(1.0 / beta, scratch, zero, ex, out=basis[0])
        else:
            np.copyto(basis[0].values, 0.0)
        H = np.zeros((m + 1, m), dtype=dt)
        cs = np.zeros(m, dtype=dt)
        sn = np.zeros(m, dtype=dt)
        g = np.zeros(m + 1, dtype=dt)
        g[0] = beta

        k = 0
        for j in range(m):
            if total >= config.max_iters:
                break
            _apply(A, basis[j], w, ex)
            for i in range(j + 1):
                h = dot(basis[i], w, ex)
                H[i, j] = h
                axpy(-h, basis[i], w, ex, out=w)
            hsub = norm2(w, ex)
            H[j + 1, j] = hsub
            total += 1
            k = j + 1
            happy = hsub == 0.0 or hsub < eps * ctx.bdiv
            if happy:
                np.copyto(basis[j + 1].values, 0.0)
            else:
                axpy(1.0 / hsub, w, zero, ex, out=basis[j + 1])
            # fold the new column through the accumulated rotations
            for i in range(j):
                hi = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = hi
            c, s, rdiag = _plane_rotation(float(H[j, j]), float(H[j + 1, j]))
            cs[j], sn[j] = c, s
            H[j, j] = rdiag
            H[j + 1, j] = 0.0
            g[j + 1] = -s * g[j]
            g[j] = c * g[j]
            relres = abs(float(g[j + 1])) / ctx.bdiv
            ctx.history.append(relres)
            if not ctx.fixed:
                if relres <= ctx.tol:
                    pending_happy = happy
                    break
                if happy:
                    break  # cannot extend a saturated basis; restart

        if k:
            # back-substitute the rotated system; zero diagonals come
            # from degenerate (zero-basis) steps and contribute nothing
            y = np.zeros(k, dtype=dt)
            for i in range(k - 1, -1, -1):
                acc = float(g[i])
                for jj in range(i + 1, k):
                    acc -= float(H[i, jj]) * float(y[jj])
                y[i] = 0.0 if H[i, i] == 0.0 else acc / float(H[i, i])
            for i in range(k):
                axpy(float(y[i]), basis[i], ctx.x, ex, out=ctx.x)

    return ctx.finish(total)


_METHOD_TABLE = {
    SolverMethod.CG: solve_cg,
    SolverMethod.BICGSTAB: solve_bicgstab,
    SolverMethod.CGS: solve_cgs,
    SolverMethod.GMRES: solve_gmres,
}


def solve(A: Matrix, b: DenseVector, config: SolverConfig,
          x0: Optional[DenseVector] = None,
          executor: Optional[Executor] = None) -> SolverResult:
    """Run the solver selected by ``config.method``."""
    return _METHOD_TABLE[config.method](A, b, config, x0, executor)
