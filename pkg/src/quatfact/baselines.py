"""Real-field non-negative factorization baselines, run per color channel.

These mirror the quaternion solvers on a single real plane: the same Armijo
projected-gradient template with clamp-at-zero projection, and the same
six-update multiplier sweep with ``max(., 0)`` in place of the quasi
non-negative projection.  :func:`channel_factorize` applies either method
independently to the red, green and blue planes and reports the combined
residual ``sqrt(sum_c ||X_c - W_c @ H_c||**2)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .qmatrix import ShapeError
from .solvers import PGConfig, SolverError, TraceRecord

__all__ = [
    "RealFactorPair",
    "RealAdmmState",
    "ChannelTriple",
    "ChannelResult",
    "real_objective",
    "nmf_pg",
    "radmm_step",
    "nmf_admm",
    "channel_factorize",
]


def _nonneg_matrix(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D")
    if arr.size and arr.min() < 0.0:
        raise ValueError(f"{name} must be entrywise non-negative")
    return arr


@dataclass
class RealFactorPair:
    """Non-negative factors W (m x l) and H (l x n)."""

    W: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        self.W = _nonneg_matrix(self.W, "W")
        self.H = _nonneg_matrix(self.H, "H")
        if self.W.shape[1] != self.H.shape[0]:
            raise ShapeError(
                f"factor shapes do not chain: {self.W.shape} @ {self.H.shape}")


@dataclass
class RealAdmmState:
    """Real multiplier-method iterate; U and V stay non-negative."""

    W: np.ndarray
    H: np.ndarray
    U: np.ndarray
    V: np.ndarray
    Lam: np.ndarray
    Pi: np.ndarray
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("penalty parameters must be positive")
        self.W = np.asarray(self.W, dtype=np.float64)
        self.H = np.asarray(self.H, dtype=np.float64)
        self.Lam = np.asarray(self.Lam, dtype=np.float64)
        self.Pi = np.asarray(self.Pi, dtype=np.float64)
        self.U = _nonneg_matrix(self.U, "U")
        self.V = _nonneg_matrix(self.V, "V")


@dataclass
class ChannelTriple:
    """Equal-shape non-negative red, green and blue planes."""

    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.r = _nonneg_matrix(self.r, "r")
        self.g = _nonneg_matrix(self.g, "g")
        self.b = _nonneg_matrix(self.b, "b")
        if not (self.r.shape == self.g.shape == self.b.shape):
            raise ShapeError("channel shapes differ")

    @property
    def planes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.r, self.g, self.b)


@dataclass
class ChannelResult:
    """Per-channel factor pairs plus combined and per-channel traces.

    ``pairs`` holds each method's answer (for the multiplier method the
    non-negative splits); ``iterates`` holds the final (W, H) of each
    channel, the pair the per-iteration residuals track.
    """

    pairs: Tuple[RealFactorPair, RealFactorPair, RealFactorPair]
    trace: List[TraceRecord]
    channel_traces: Tuple[List[TraceRecord], ...]
    iterates: Tuple[Tuple[np.ndarray, np.ndarray], ...] = ()


def real_objective(x: np.ndarray, w: np.ndarray, h: np.ndarray) -> float:
    r = x - w @ h
    return 0.5 * float(np.dot(r.ravel(), r.ravel()))


# ---------------------------------------------------------------------------
# projected gradient on one plane
# ---------------------------------------------------------------------------

def _armijo_real(f_curr: float, iterate: np.ndarray, grad: np.ndarray,
                 evaluate: Callable[[np.ndarray], float], start_step: float,
                 cfg: PGConfig, mode: str):
    if not np.any(grad):
        return start_step, iterate, f_curr, 0, False

    def clamp(s):
        return min(max(s, cfg.step_min), cfg.step_max)

    def attempt(s):
        cand = np.maximum(iterate - s * grad, 0.0)
        f_new = evaluate(cand)
        ok = f_new - f_curr <= cfg.sigma * float(
            np.dot(grad.ravel(), (cand - iterate).ravel()))
        return cand, f_new, ok

    step = clamp(1.0) if mode == "fresh" else clamp(start_step)
    cand, f_new, ok = attempt(step)
    evals = 1
    if ok and mode == "warm":
        while evals < cfg.max_linesearch:
            bigger = step / cfg.rho
            if bigger > cfg.step_max:
                break
            cand2, f2, ok2 = attempt(bigger)
            evals += 1
            if not ok2:
                break
            step, cand, f_new = bigger, cand2, f2
        return step, cand, f_new, evals, False
    while not ok:
        if evals >= cfg.max_linesearch or step <= cfg.step_min:
            return step, cand, f_new, evals, True
        step = clamp(step * cfg.rho)
        cand, f_new, ok = attempt(step)
        evals += 1
    return step, cand, f_new, evals, False


def nmf_pg(x: np.ndarray, init: RealFactorPair, cfg: PGConfig,
           variant: str = "alg2") -> Tuple[RealFactorPair, List[TraceRecord]]:
    """Alternating Armijo projected gradient for real non-negative factors."""
    x = np.asarray(x, dtype=np.float64)
    if x.size and x.min() < 0.0:
        raise ValueError("data matrix must be non-negative")
    mode = "fresh" if variant == "alg1" else "warm"
    w, h = init.W.copy(), init.H.copy()
    f_curr = real_objective(x, w, h)
    step_w = step_h = 1.0
    trace: List[TraceRecord] = []

    for r in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        f_before = f_curr
        resid = x - w @ h
        gw = -(resid @ h.T)
        step_w, w, f_curr, ev_w, _ = _armijo_real(
            f_curr, w, gw, lambda m: real_objective(x, m, h), step_w, cfg, mode)
        gh = -(w.T @ (x - w @ h))
        step_h, h, f_curr, ev_h, _ = _armijo_real(
            f_curr, h, gh, lambda m: real_objective(x, w, m), step_h, cfg, mode)
        res = float(np.linalg.norm(x - w @ h))
        trace.append(TraceRecord(r, f_curr, res, step_w, step_h,
                                 (time.perf_counter() - t0) * 1e3,
                                 ev_w + ev_h))
        if cfg.stop_tol > 0.0 and \
                f_before - f_curr <= cfg.stop_tol * max(1.0, abs(f_before)):
            break
    return RealFactorPair(w, h), trace


# ---------------------------------------------------------------------------
# multiplier method on one plane
# ---------------------------------------------------------------------------

def radmm_step(x: np.ndarray, s: RealAdmmState) -> RealAdmmState:
    """One real multiplier sweep; multipliers keep U (x) Lam = 0 exactly."""
    a, b = s.alpha, s.beta
    l = s.W.shape[1]
    try:
        a_w = s.H @ s.H.T + a * np.eye(l)
        w_new = np.linalg.solve(a_w, (x @ s.H.T + s.Lam + a * s.U).T).T
        a_h = w_new.T @ w_new + b * np.eye(l)
        h_new = np.linalg.solve(a_h, w_new.T @ x + s.Pi + b * s.V)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"normal-equation solve failed: {exc}") from exc

    d = w_new - s.Lam / a
    u_new = np.maximum(d, 0.0)
    lam_new = a * (u_new - d)
    e = h_new - s.Pi / b
    v_new = np.maximum(e, 0.0)
    pi_new = b * (v_new - e)
    return RealAdmmState(w_new, h_new, u_new, v_new, lam_new, pi_new, a, b)


def nmf_admm(x: np.ndarray, init: RealAdmmState, max_iters: int,
             stop_tol: float = 0.0
             ) -> Tuple[RealFactorPair, List[TraceRecord], RealAdmmState]:
    """Iterate :func:`radmm_step`; returns the non-negative splits (U, V)."""
    x = np.asarray(x, dtype=np.float64)
    state = init
    trace: List[TraceRecord] = []
    x_norm = float(np.linalg.norm(x))
    for r in range(1, max_iters + 1):
        t0 = time.perf_counter()
        state = radmm_step(x, state)
        product = state.W @ state.H
        f_val = 0.5 * float(np.sum((x - product) ** 2))
        res = float(np.linalg.norm(x - product))
        trace.append(TraceRecord(r, f_val, res, None, None,
                                 (time.perf_counter() - t0) * 1e3))
        gap = max(float(np.linalg.norm(state.W - state.U)),
                  float(np.linalg.norm(state.H - state.V)))
        if stop_tol > 0.0 and gap / max(1.0, x_norm) <= stop_tol:
            break
    return RealFactorPair(state.U, state.V), trace, state


# ---------------------------------------------------------------------------
# three independent channels
# ---------------------------------------------------------------------------

def channel_factorize(channels: ChannelTriple, method: str,
                      inits: Sequence[Tuple[np.ndarray, np.ndarray]],
                      cfg: Optional[PGConfig] = None,
                      alpha: float = 0.01, beta: float = 0.01,
                      variant: str = "alg2") -> ChannelResult:
    """Factorize the three channels independently with per-channel inits.

    ``inits`` supplies one ``(L, S)`` pair per channel, consumed in red,
    green, blue order.  ``method`` is ``"pg"`` or ``"admm"``; the iteration
    budget comes from ``cfg.max_iters`` in both cases.  The combined trace
    carries the summed objective and the root of the summed squared
    channel residuals.
    """
    if method not in ("pg", "admm"):
        raise ValueError(f"method must be 'pg' or 'admm', got {method!r}")
    if len(inits) != 3:
        raise ValueError("need one (L, S) init pair per channel")
    cfg = cfg or PGConfig()

    pairs = []
    channel_traces = []
    iterates = []
    for plane, (l_mat, s_mat) in zip(channels.planes, inits):
        if method == "pg":
            pair, tr = nmf_pg(plane, RealFactorPair(l_mat, s_mat), cfg,
                              variant=variant)
            iterates.append((pair.W, pair.H))
        else:
            state = RealAdmmState(l_mat, s_mat, l_mat, s_mat, l_mat, s_mat,
                                  alpha, beta)
            pair, tr, final = nmf_admm(plane, state, cfg.max_iters,
                                       stop_tol=cfg.stop_tol)
            iterates.append((final.W, final.H))
        pairs.append(pair)
        channel_traces.append(tr)

    combined: List[TraceRecord] = []
    n_iters = min(len(tr) for tr in channel_traces)
    for idx in range(n_iters):
        recs = [tr[idx] for tr in channel_traces]
        combined.append(TraceRecord(
            iter=idx + 1,
            objective=sum(r.objective for r in recs),
            res=float(np.sqrt(sum(r.res ** 2 for r in recs))),
            step_w=None,
            step_h=None,
            elapsed_ms=sum(r.elapsed_ms for r in recs),
            ls_evals=sum(r.ls_evals for r in recs),
        ))
    return ChannelResult(tuple(pairs), combined, tuple(channel_traces),
                         tuple(iterates))
