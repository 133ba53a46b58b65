"""Solvers for the quasi non-negative quaternion factorization X ~= W @ H.

Two algorithms are provided for minimizing ``0.5 * ||X - W @ H||_F**2`` over
quasi non-negative factors:

* :func:`qipg_run` -- alternating projected gradient with an Armijo
  backtracking line search.  ``variant="alg1"`` restarts the search at step
  1 every iteration and only shrinks; ``variant="alg2"`` warm-starts from
  the previous accepted step and may grow it first.
* :func:`qadmm_run` -- an alternating direction method of multipliers on
  the split formulation ``W = U``, ``H = V`` with ``U, V`` constrained to
  the quasi non-negative cone.

Both emit one :class:`TraceRecord` per iteration; the CSV schema is
``iter,objective,res,step_w,step_h,elapsed_ms`` (step fields empty for the
multiplier method).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .qmatrix import (
    DomainError,
    HermitianSolver,
    QMatrix,
    ShapeError,
    SingularMatrixError,
    project_quasi_nonneg,
    re_inner,
    require_quasi_nonneg,
)

__all__ = [
    "PGConfig",
    "FactorPair",
    "AdmmState",
    "TraceRecord",
    "LineSearchResult",
    "SolveResult",
    "SolverError",
    "objective",
    "grad_w",
    "grad_h",
    "armijo_search",
    "qipg_run",
    "kkt_residual",
    "qadmm_step",
    "qadmm_run",
    "write_trace_csv",
    "TRACE_FIELDS",
]

TRACE_FIELDS = ("iter", "objective", "res", "step_w", "step_h", "elapsed_ms")


class SolverError(RuntimeError):
    """An iteration could not be completed (wraps the failing diagnosis)."""


@dataclass(frozen=True)
class PGConfig:
    """Projected-gradient settings.

    ``rho`` is the backtracking ratio, ``sigma`` the sufficient-decrease
    constant of the Armijo test.  ``stop_tol`` of zero means run exactly
    ``max_iters`` iterations; a positive value stops once the relative
    objective decrease per iteration falls below it.
    """

    rho: float = 0.01
    sigma: float = 0.001
    max_iters: int = 50
    max_linesearch: int = 50
    step_min: float = 1e-12
    step_max: float = 1e6
    stop_tol: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.step_min > self.step_max:
            raise ValueError("step_min must not exceed step_max")
        if self.max_iters < 0 or self.max_linesearch < 1:
            raise ValueError("iteration budgets must be positive")


@dataclass
class FactorPair:
    """A rank-``l`` factorization candidate ``(W, H)``.

    ``W`` is the m x l source matrix, ``H`` the l x n activation matrix.
    """

    W: QMatrix
    H: QMatrix

    def __post_init__(self):
        if self.W.cols != self.H.rows:
            raise ShapeError(
                f"factor shapes do not chain: {self.W.shape} @ {self.H.shape}")

    @property
    def rank(self) -> int:
        return self.W.cols

    def product(self) -> QMatrix:
        return self.W @ self.H


@dataclass
class AdmmState:
    """Full iterate of the multiplier method.

    ``U`` and ``V`` are the quasi non-negative splits of ``W`` and ``H``;
    ``Lam`` and ``Pi`` the corresponding multipliers; ``alpha`` and ``beta``
    the penalty parameters.
    """

    W: QMatrix
    H: QMatrix
    U: QMatrix
    V: QMatrix
    Lam: QMatrix
    Pi: QMatrix
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("penalty parameters must be positive")
        for got, want, name in ((self.U, self.W, "U"), (self.Lam, self.W, "Lam"),
                                (self.V, self.H, "V"), (self.Pi, self.H, "Pi")):
            if got.shape != want.shape:
                raise ShapeError(f"{name} shape {got.shape} does not match "
                                 f"{want.shape}")
        if self.W.cols != self.H.rows:
            raise ShapeError(
                f"factor shapes do not chain: {self.W.shape} @ {self.H.shape}")
        require_quasi_nonneg(self.U, "U")
        require_quasi_nonneg(self.V, "V")

    def pair(self) -> FactorPair:
        """The feasible factor pair (the splits U, V)."""
        return FactorPair(self.U, self.V)


@dataclass
class TraceRecord:
    """One solver iteration: objective, imaginary-part residual, steps, time.

    ``res`` is ``||Im X - Im(W_r @ H_r)||_F``.  ``step_w``/``step_h`` are the
    accepted line-search steps (None for the multiplier method).
    ``ls_evals`` counts objective evaluations spent in line searches this
    iteration and ``warned`` flags an exhausted search budget; both are
    informational and not part of the CSV schema.
    """

    iter: int
    objective: float
    res: float
    step_w: Optional[float]
    step_h: Optional[float]
    elapsed_ms: float
    ls_evals: int = 0
    warned: bool = False


@dataclass
class LineSearchResult:
    step: float
    iterate: QMatrix
    value: float
    evals: int
    warned: bool


@dataclass
class SolveResult:
    """Factorization output: feasible pair plus the per-iteration trace."""

    pair: FactorPair
    trace: List[TraceRecord]
    ls_evals: int = 0
    warnings: int = 0
    state: Optional[AdmmState] = None


# ---------------------------------------------------------------------------
# objective and gradients
# ---------------------------------------------------------------------------

def objective(x: QMatrix, w: QMatrix, h: QMatrix) -> float:
    """Fit value ``0.5 * ||X - W @ H||_F**2``."""
    return 0.5 * (x - w @ h).sqnorm()


def grad_w(x: QMatrix, w: QMatrix, h: QMatrix) -> QMatrix:
    """Gradient of :func:`objective` in ``W``: ``-(X - W @ H) @ H*``."""
    return -((x - w @ h) @ h.conj_t())


def grad_h(x: QMatrix, w: QMatrix, h: QMatrix) -> QMatrix:
    """Gradient of :func:`objective` in ``H``: ``-W* @ (X - W @ H)``."""
    return -(w.conj_t() @ (x - w @ h))


# ---------------------------------------------------------------------------
# Armijo projected line search
# ---------------------------------------------------------------------------

def _sufficient_decrease(f_new: float, f_curr: float, grad: QMatrix,
                         candidate: QMatrix, iterate: QMatrix,
                         sigma: float) -> bool:
    return f_new - f_curr <= sigma * re_inner(grad, candidate - iterate)


def armijo_search(f_curr: float, iterate: QMatrix, grad: QMatrix,
                  evaluate: Callable[[QMatrix], float], start_step: float,
                  cfg: PGConfig, mode: str = "fresh") -> LineSearchResult:
    """Projected backtracking search for one factor, the other held fixed.

    Accepts the candidate ``project(iterate - step * grad)`` once
    ``f(candidate) - f_curr <= sigma * <grad, candidate - iterate>`` holds.
    ``mode="fresh"`` starts at step 1 and only shrinks by ``rho``;
    ``mode="warm"`` starts at ``start_step``, growing by ``1/rho`` while the
    test keeps holding (returning the last holding step) or shrinking until
    it first holds.

    If the evaluation budget or ``step_min`` is exhausted the smallest tried
    step is returned with ``warned=True``.
    """
    if mode not in ("fresh", "warm"):
        raise ValueError(f"mode must be 'fresh' or 'warm', got {mode!r}")
    if grad.sqnorm() == 0.0:
        return LineSearchResult(start_step, iterate, f_curr, 0, False)

    def clamp(s: float) -> float:
        return min(max(s, cfg.step_min), cfg.step_max)

    def attempt(s: float):
        candidate = project_quasi_nonneg(iterate - s * grad)
        f_new = evaluate(candidate)
        ok = _sufficient_decrease(f_new, f_curr, grad, candidate, iterate,
                                  cfg.sigma)
        return candidate, f_new, ok

    step = clamp(1.0) if mode == "fresh" else clamp(start_step)
    candidate, f_new, ok = attempt(step)
    evals = 1

    if ok and mode == "warm":
        # Grow while the test holds; keep the last step that held.
        while evals < cfg.max_linesearch:
            bigger = step / cfg.rho
            if bigger > cfg.step_max:
                break
            cand2, f2, ok2 = attempt(bigger)
            evals += 1
            if not ok2:
                break
            step, candidate, f_new = bigger, cand2, f2
        return LineSearchResult(step, candidate, f_new, evals, False)

    while not ok:
        if evals >= cfg.max_linesearch or step <= cfg.step_min:
            return LineSearchResult(step, candidate, f_new, evals, True)
        step = clamp(step * cfg.rho)
        candidate, f_new, ok = attempt(step)
        evals += 1
    return LineSearchResult(step, candidate, f_new, evals, False)


# ---------------------------------------------------------------------------
# alternating projected gradient
# ---------------------------------------------------------------------------

def qipg_run(x: QMatrix, init: FactorPair, cfg: PGConfig,
             variant: str = "alg2") -> SolveResult:
    """Alternate Armijo-projected gradient steps on ``W`` and ``H``.

    Every exposed iterate is quasi non-negative and the objective sequence
    is nonincreasing.  ``variant`` selects the fresh-restart ("alg1") or
    warm-started ("alg2") line search.
    """
    if variant not in ("alg1", "alg2"):
        raise ValueError(f"variant must be 'alg1' or 'alg2', got {variant!r}")
    require_quasi_nonneg(x, "X")
    require_quasi_nonneg(init.W, "initial W")
    require_quasi_nonneg(init.H, "initial H")
    if x.rows != init.W.rows or x.cols != init.H.cols:
        raise ShapeError(
            f"data {x.shape} does not match factors "
            f"{init.W.shape} @ {init.H.shape}")

    mode = "fresh" if variant == "alg1" else "warm"
    w, h = init.W, init.H
    f_curr = objective(x, w, h)
    # Warm starts for alg2; the first iteration begins at step 1.
    step_w_prev = 1.0
    step_h_prev = 1.0
    trace: List[TraceRecord] = []
    total_evals = 0
    warnings = 0
    x_im = x.imag()

    for r in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        f_before = f_curr

        gw = grad_w(x, w, h)
        ls_w = armijo_search(f_curr, w, gw, lambda m: objective(x, m, h),
                             step_w_prev, cfg, mode)
        w, f_curr, step_w_prev = ls_w.iterate, ls_w.value, ls_w.step

        gh = grad_h(x, w, h)
        ls_h = armijo_search(f_curr, h, gh, lambda m: objective(x, w, m),
                             step_h_prev, cfg, mode)
        h, f_curr, step_h_prev = ls_h.iterate, ls_h.value, ls_h.step

        res = (x_im - (w @ h).imag()).norm()
        elapsed = (time.perf_counter() - t0) * 1e3
        evals = ls_w.evals + ls_h.evals
        total_evals += evals
        warnings += int(ls_w.warned) + int(ls_h.warned)
        trace.append(TraceRecord(r, f_curr, res, ls_w.step, ls_h.step,
                                 elapsed, evals,
                                 warned=ls_w.warned or ls_h.warned))

        if cfg.stop_tol > 0.0 and \
                f_before - f_curr <= cfg.stop_tol * max(1.0, abs(f_before)):
            break

    return SolveResult(FactorPair(w, h), trace, total_evals, warnings)


# ---------------------------------------------------------------------------
# first-order stationarity residual
# ---------------------------------------------------------------------------

def _max_abs(arr: np.ndarray) -> float:
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def kkt_residual(x: QMatrix, w: QMatrix, h: QMatrix) -> float:
    """Largest violation of the first-order stationarity conditions.

    At a stationary point of the constrained problem the gradient in each
    factor has a vanishing real plane, entrywise non-negative imaginary
    planes (dual feasibility), and imaginary planes complementary to the
    factor's own.  Returns the max violation over all those conditions;
    zero exactly at stationary points.
    """
    terms = []
    for factor, grad in ((w, grad_w(x, w, h)), (h, grad_h(x, w, h))):
        terms.append(_max_abs(grad.a0))
        for fp, gp in zip(factor.planes[1:], grad.planes[1:]):
            terms.append(_max_abs(np.minimum(gp, 0.0)))
            terms.append(_max_abs(fp * gp))
    return max(terms)


# ---------------------------------------------------------------------------
# alternating direction method of multipliers
# ---------------------------------------------------------------------------

def qadmm_step(x: QMatrix, s: AdmmState) -> AdmmState:
    """One sweep of the six multiplier-method updates.

    The normal-equation solves go through the real-representation Cholesky
    factorization; the multipliers are computed as ``alpha * (U_new - D)``
    with ``D = W_new - Lam / alpha`` (the algebraically identical form of
    ``Lam - alpha * (W_new - U_new)``), which keeps the structural
    identities of the iterates exact in floating point: the multipliers
    have an exactly zero real plane, exactly non-negative imaginary planes,
    and exactly zero entrywise products with the matching split's imaginary
    planes.
    """
    alpha, beta = s.alpha, s.beta
    eye_l = QMatrix.eye(s.W.cols)
    # Small penalties leave the Gram systems legitimately ill-conditioned
    # near convergence, and the sweep tolerates inexact subproblem solves,
    # so the block-consistency guard is run at a looser relative level than
    # a direct one-shot solve would use.
    consistency = 1e-6
    try:
        a_w = s.H @ s.H.conj_t() + alpha * eye_l
        rhs_w = x @ s.H.conj_t() + s.Lam + alpha * s.U
        w_new = HermitianSolver(
            a_w, consistency_tol=consistency).solve_right(rhs_w)

        a_h = w_new.conj_t() @ w_new + beta * eye_l
        rhs_h = w_new.conj_t() @ x + s.Pi + beta * s.V
        h_new = HermitianSolver(
            a_h, consistency_tol=consistency).solve_left(rhs_h)
    except (SingularMatrixError, DomainError) as exc:
        raise SolverError(f"normal-equation solve failed: {exc}") from exc

    d = w_new - s.Lam / alpha
    u_new = project_quasi_nonneg(d)
    lam_new = alpha * (u_new - d)

    e = h_new - s.Pi / beta
    v_new = project_quasi_nonneg(e)
    pi_new = beta * (v_new - e)

    return AdmmState(w_new, h_new, u_new, v_new, lam_new, pi_new, alpha, beta)


def check_multiplier_structure(s: AdmmState) -> float:
    """Max violation of the post-step multiplier identities (0 when exact).

    Checks, for both (U, Lam) and (V, Pi): zero real multiplier plane,
    non-negative imaginary multiplier planes, and entrywise complementarity
    with the split's imaginary planes.
    """
    worst = 0.0
    for split, mult in ((s.U, s.Lam), (s.V, s.Pi)):
        worst = max(worst, _max_abs(mult.a0))
        for sp, mp in zip(split.planes[1:], mult.planes[1:]):
            if mp.size:
                worst = max(worst, -float(np.min(mp)), 0.0)
                worst = max(worst, _max_abs(sp * mp))
    return worst


def qadmm_run(x: QMatrix, init: AdmmState, max_iters: int,
              stop_tol: float = 0.0,
              check_invariants: bool = True) -> SolveResult:
    """Iterate :func:`qadmm_step`, returning the feasible splits ``(U, V)``.

    The trace's objective and residual are computed from ``(W, H)``.  Stops
    after ``max_iters`` sweeps, or earlier once
    ``max(||W - U||, ||H - V||) / max(1, ||X||) <= stop_tol`` for positive
    ``stop_tol``.  With ``check_invariants`` the exact multiplier structure
    is asserted after every sweep and a violation aborts the run.
    """
    state = init
    trace: List[TraceRecord] = []
    x_im = x.imag()
    x_norm = x.norm()

    for r in range(1, max_iters + 1):
        t0 = time.perf_counter()
        try:
            state = qadmm_step(x, state)
        except SolverError as exc:
            raise SolverError(f"iteration {r}: {exc}") from exc
        if check_invariants:
            violation = check_multiplier_structure(state)
            if violation > 0.0:
                raise SolverError(
                    f"iteration {r}: multiplier structure violated by "
                    f"{violation:g}")
        product = state.W @ state.H
        f_val = 0.5 * (x - product).sqnorm()
        res = (x_im - product.imag()).norm()
        elapsed = (time.perf_counter() - t0) * 1e3
        trace.append(TraceRecord(r, f_val, res, None, None, elapsed))
        gap = max((state.W - state.U).norm(), (state.H - state.V).norm())
        if stop_tol > 0.0 and gap / max(1.0, x_norm) <= stop_tol:
            break

    return SolveResult(state.pair(), trace, state=state)


# ---------------------------------------------------------------------------
# trace serialization
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_trace_csv(records, path, timing: bool = False) -> None:
    """Write records as ``iter,objective,res,step_w,step_h,elapsed_ms``.

    Without ``timing`` the elapsed column is written as 0 so that repeated
    runs of one configuration serialize byte-identically.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for rec in records:
            writer.writerow([
                rec.iter,
                _fmt(rec.objective),
                _fmt(rec.res),
                _fmt(rec.step_w),
                _fmt(rec.step_h),
                _fmt(rec.elapsed_ms if timing else 0.0),
            ])
