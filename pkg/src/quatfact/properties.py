"""Named property suites behind the ``check`` command.

Each suite samples seeded random instances, measures the worst violation of
the invariant it guards, and reports it against the suite tolerance.  The
suites mirror the package's structural guarantees: projection inequalities,
gradient correctness against finite differences, exact multiplier structure,
monotone descent, the real-representation product identity, and brute-force
agreement of the recognizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from .qmatrix import QMatrix, project_quasi_nonneg, re_inner, real_rep
from .solvers import (
    PGConfig,
    grad_h,
    grad_w,
    objective,
    qadmm_step,
    qipg_run,
    check_multiplier_structure,
)
from .initializers import InitBundle
from . import facerec

__all__ = ["SuiteReport", "SUITES", "run_suite", "suite_names"]


@dataclass
class SuiteReport:
    name: str
    passed: bool
    lines: List[str] = field(default_factory=list)


def _random_qmatrix(rng, rows, cols, lo=-1.0, hi=1.0) -> QMatrix:
    return QMatrix(*(rng.uniform(lo, hi, (rows, cols)) for _ in range(4)))


def _random_feasible(rng, rows, cols) -> QMatrix:
    return QMatrix(rng.uniform(-1.0, 1.0, (rows, cols)),
                   *(rng.uniform(0.0, 1.0, (rows, cols)) for _ in range(3)))


def check_projection_lemmas(seed: int = 0, samples: int = 1000,
                            tol: float = 1e-12) -> SuiteReport:
    """Variational inequality, monotonicity and nonexpansiveness of the
    clamp projection, plus the nonincreasing step-length ratio."""
    rng = np.random.default_rng(seed)
    worst = {"variational": 0.0, "monotone": 0.0, "nonexpansive": 0.0}
    for _ in range(samples):
        rows, cols = rng.integers(1, 7, 2)
        y = _random_qmatrix(rng, rows, cols, -2.0, 2.0)
        z_feasible = _random_feasible(rng, rows, cols)
        z = _random_qmatrix(rng, rows, cols, -2.0, 2.0)
        py, pz = project_quasi_nonneg(y), project_quasi_nonneg(z)
        worst["variational"] = max(
            worst["variational"], -re_inner(py - y, z_feasible - py))
        worst["monotone"] = max(worst["monotone"], -re_inner(py - pz, y - z))
        worst["nonexpansive"] = max(
            worst["nonexpansive"], (py - pz).norm() - (y - z).norm())

    ratio_tol = 1e-10
    worst_ratio = 0.0
    grid = np.geomspace(1e-3, 1e3, 20)
    for _ in range(50):
        w = _random_qmatrix(rng, 6, 4, -2.0, 2.0)
        d = _random_qmatrix(rng, 6, 4, -2.0, 2.0)
        theta = [
            (project_quasi_nonneg(w - float(a) * d) - w).norm() / float(a)
            for a in grid
        ]
        for prev, nxt in zip(theta, theta[1:]):
            worst_ratio = max(worst_ratio, nxt - prev)

    lines = [
        f"variational inequality: worst violation {worst['variational']:.3e}"
        f" (tol {tol:g})",
        f"projection monotonicity: worst violation {worst['monotone']:.3e}"
        f" (tol {tol:g})",
        f"nonexpansiveness: worst violation {worst['nonexpansive']:.3e}"
        f" (tol {tol:g})",
        f"step ratio nonincreasing: worst violation {worst_ratio:.3e}"
        f" (tol {ratio_tol:g})",
    ]
    passed = (max(worst.values()) <= tol) and worst_ratio <= ratio_tol
    return SuiteReport("projection-lemmas", passed, lines)


def check_gradients(seed: int = 0, points: int = 20, step: float = 1e-6,
                    tol: float = 1e-5) -> SuiteReport:
    """All eight component-plane gradients against central differences."""
    rng = np.random.default_rng(seed)
    m = n = 10
    l = 3
    worst = 0.0
    for _ in range(points):
        x = _random_qmatrix(rng, m, n)
        w = _random_qmatrix(rng, m, l)
        h = _random_qmatrix(rng, l, n)
        for which, grad in (("w", grad_w(x, w, h)), ("h", grad_h(x, w, h))):
            target = w if which == "w" else h
            for p_idx in range(4):
                analytic = grad.planes[p_idx]
                numeric = np.zeros_like(analytic)
                base = [pl.copy() for pl in target.planes]
                for (s, t), _ in np.ndenumerate(analytic):
                    for sign in (+1.0, -1.0):
                        planes = [pl.copy() for pl in base]
                        planes[p_idx][s, t] += sign * step
                        cand = QMatrix(*planes)
                        val = objective(x, cand, h) if which == "w" \
                            else objective(x, w, cand)
                        numeric[s, t] += sign * val
                    numeric[s, t] /= 2.0 * step
                scale = max(1.0, float(np.max(np.abs(analytic))))
                worst = max(worst,
                            float(np.max(np.abs(numeric - analytic))) / scale)
    lines = [f"finite-difference gradient match: worst relative error "
             f"{worst:.3e} (tol {tol:g})"]
    return SuiteReport("gradients", worst <= tol, lines)


def check_admm_invariants(seed: int = 0, instances: int = 20,
                          iters: int = 25) -> SuiteReport:
    """Exact multiplier structure after every sweep on random instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for inst in range(instances):
        m, n, l = 12, 10, 3
        x = _random_feasible(rng, m, n)
        bundle = InitBundle.draw(int(rng.integers(1 << 31)), m, l, n)
        state = bundle.admm_state(0.05, 0.05)
        for _ in range(iters):
            state = qadmm_step(x, state)
            worst = max(worst, check_multiplier_structure(state))
    lines = [f"multiplier structure: worst violation {worst:.3e} "
             f"(must be exactly 0)"]
    return SuiteReport("admm-invariants", worst == 0.0, lines)


def check_descent(seed: int = 0, instances: int = 5, iters: int = 100,
                  slack: float = 1e-12) -> SuiteReport:
    """Nonincreasing objective traces for both gradient variants."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        m = n = 20
        l = 4
        # pure-imaginary times real non-negative keeps the product feasible
        w_true = QMatrix.from_imag(*(rng.uniform(0, 1, (m, l))
                                     for _ in range(3)))
        h_true = QMatrix.from_real(rng.uniform(0, 1, (l, n)))
        x = w_true @ h_true
        bundle = InitBundle.draw(int(rng.integers(1 << 31)), m, l, n)
        cfg = PGConfig(rho=0.01, sigma=0.001, max_iters=iters)
        for variant in ("alg1", "alg2"):
            result = qipg_run(x, bundle.factor_pair(), cfg, variant=variant)
            values = [r.objective for r in result.trace]
            for prev, nxt in zip(values, values[1:]):
                worst = max(worst, nxt - prev)
    lines = [f"objective descent: worst increase {worst:.3e} "
             f"(slack {slack:g})"]
    return SuiteReport("descent", worst <= slack, lines)


def check_real_rep(seed: int = 0, pairs: int = 100) -> SuiteReport:
    """Product identity of the real block representation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        m, l, n = rng.integers(1, 9, 3)
        a = _random_qmatrix(rng, m, l)
        b = _random_qmatrix(rng, n, l)
        lhs = real_rep(a @ b.conj_t())
        rhs = real_rep(a) @ real_rep(b).T
        bound = 1e-10 * (1.0 + a.norm() * b.norm())
        worst = max(worst, float(np.linalg.norm(lhs - rhs)) / bound)
    lines = [f"representation product identity: worst error/bound ratio "
             f"{worst:.3e} (must be <= 1)"]
    return SuiteReport("real-rep", worst <= 1.0, lines)


def check_oracle_recognition(seed: int = 0) -> SuiteReport:
    """Self-recognition on the planted corpus and brute-force agreement."""
    bundle = facerec.generate_corpus(n_ids=6, per_id=4, height=12, width=12,
                                     seed=seed, shared=9)
    n = len(bundle.images)
    dataset = facerec.FaceDataset(
        [facerec.vectorize_image(img) for img in bundle.images],
        bundle.labels, ["train"] * n)
    model = facerec.train(dataset, rank=bundle.planted.rank, method="qadmm",
                          iters=4, alpha=1.0, beta=1.0,
                          init=bundle.planted)
    mismatches = 0
    predictions = []
    for probe in dataset.images:
        idx, score = facerec.classify(model, probe)
        predictions.append(model.labels[idx])
        # Independent brute-force argmax over every training column.
        h = facerec.encode_probe(model, probe)
        best_t, best_score = 0, -np.inf
        for t in range(len(model.labels)):
            col = QMatrix(*(p[:, t:t + 1] for p in model.H.planes))
            try:
                s = facerec.similarity(h, col)
            except Exception:
                s = -np.inf
            if s > best_score:
                best_t, best_score = t, s
        if best_t != idx:
            mismatches += 1
    acc = facerec.accuracy(predictions, dataset.labels)
    lines = [
        f"training relative residual: {model.training_residual:.3e} "
        f"(must be <= 1e-6)",
        f"self-recognition accuracy: {acc:.3f} (must be 1.0)",
        f"brute-force argmax mismatches: {mismatches} (must be 0)",
    ]
    passed = (model.training_residual <= 1e-6 and acc == 1.0
              and mismatches == 0)
    return SuiteReport("oracle-recognition", passed, lines)


SUITES: Dict[str, Callable[..., SuiteReport]] = {
    "projection-lemmas": check_projection_lemmas,
    "gradients": check_gradients,
    "admm-invariants": check_admm_invariants,
    "descent": check_descent,
    "real-rep": check_real_rep,
    "oracle-recognition": check_oracle_recognition,
}


def suite_names() -> List[str]:
    return list(SUITES)


def run_suite(name: str, seed: int = 0) -> SuiteReport:
    try:
        fn = SUITES[name]
    except KeyError:
        raise KeyError(
            f"unknown suite {name!r}; available: {', '.join(SUITES)}")
    return fn(seed=seed)
