"""Dense quaternion matrices stored as four real component planes.

A matrix ``A = A0 + A1*i + A2*j + A3*k`` is kept as four equal-shape float64
arrays.  All algebra here is expressed through plane-level numpy kernels, so
there is no per-entry quaternion object on the hot path.

The module also provides:

* the quasi non-negative cone (imaginary planes entrywise >= 0, real plane
  free) and the clamp projection onto it,
* the 4m x 4n real block representation ``real_rep`` satisfying
  ``real_rep(A @ B.conj_t()) == real_rep(A) @ real_rep(B).T``, used both as a
  correctness oracle and as the engine for Hermitian positive definite
  solves (:class:`HermitianSolver`, :func:`hpd_solve`).

Matrices are immutable after construction (their planes are marked
read-only) and safe to share across threads.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .quaternion import Quaternion

__all__ = [
    "QMatrix",
    "ShapeError",
    "DomainError",
    "SingularMatrixError",
    "qmat_mul",
    "conj_transpose",
    "fro_norm",
    "re_inner",
    "real_rep",
    "project_quasi_nonneg",
    "is_quasi_nonneg",
    "require_quasi_nonneg",
    "HermitianSolver",
    "hpd_solve",
    "max_abs_diff",
]


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class DomainError(ValueError):
    """Input violates a mathematical precondition (not a shape issue)."""


class SingularMatrixError(ArithmeticError):
    """A linear system could not be factorized as positive definite."""


def _as_plane(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != 2:
        raise ShapeError(f"component plane must be 2-D, got ndim={arr.ndim}")
    return arr


class QMatrix:
    """Quaternion matrix held as four real planes ``a0, a1, a2, a3``.

    Entry ``(s, t)`` is the quaternion
    ``a0[s, t] + a1[s, t]*i + a2[s, t]*j + a3[s, t]*k``.
    """

    __slots__ = ("a0", "a1", "a2", "a3")

    def __init__(self, a0, a1, a2, a3):
        planes = tuple(_as_plane(p) for p in (a0, a1, a2, a3))
        shape = planes[0].shape
        if any(p.shape != shape for p in planes[1:]):
            raise ShapeError(
                "component planes must share one shape, got "
                + ", ".join(str(p.shape) for p in planes))
        for p in planes:
            p.setflags(write=False)
        self.a0, self.a1, self.a2, self.a3 = planes

    @classmethod
    def _wrap(cls, a0, a1, a2, a3) -> "QMatrix":
        # Internal fast path: takes ownership of freshly computed float64
        # arrays without re-copying.
        obj = object.__new__(cls)
        for name, p in zip(("a0", "a1", "a2", "a3"), (a0, a1, a2, a3)):
            p = np.ascontiguousarray(p, dtype=np.float64)
            p.setflags(write=False)
            setattr(obj, name, p)
        return obj

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "QMatrix":
        z = np.zeros((rows, cols))
        return cls._wrap(z, z.copy(), z.copy(), z.copy())

    @classmethod
    def eye(cls, n: int) -> "QMatrix":
        z = np.zeros((n, n))
        return cls._wrap(np.eye(n), z, z.copy(), z.copy())

    @classmethod
    def from_real(cls, a0) -> "QMatrix":
        a0 = _as_plane(a0)
        z = np.zeros_like(a0)
        return cls._wrap(a0, z, z.copy(), z.copy())

    @classmethod
    def from_imag(cls, a1, a2, a3) -> "QMatrix":
        a1 = _as_plane(a1)
        return cls(np.zeros_like(a1), a1, a2, a3)

    # -- basic queries ------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.a0.shape

    @property
    def rows(self) -> int:
        return self.a0.shape[0]

    @property
    def cols(self) -> int:
        return self.a0.shape[1]

    @property
    def planes(self) -> tuple:
        return (self.a0, self.a1, self.a2, self.a3)

    def entry(self, s: int, t: int) -> Quaternion:
        return Quaternion(float(self.a0[s, t]), float(self.a1[s, t]),
                          float(self.a2[s, t]), float(self.a3[s, t]))

    def __repr__(self):
        return f"QMatrix({self.rows}x{self.cols})"

    # -- algebra -------------------------------------------------------------

    def __add__(self, other: "QMatrix") -> "QMatrix":
        _require_same_shape(self, other)
        return QMatrix._wrap(self.a0 + other.a0, self.a1 + other.a1,
                             self.a2 + other.a2, self.a3 + other.a3)

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        _require_same_shape(self, other)
        return QMatrix._wrap(self.a0 - other.a0, self.a1 - other.a1,
                             self.a2 - other.a2, self.a3 - other.a3)

    def __neg__(self) -> "QMatrix":
        return QMatrix._wrap(-self.a0, -self.a1, -self.a2, -self.a3)

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float)):
            return QMatrix._wrap(self.a0 * scalar, self.a1 * scalar,
                                 self.a2 * scalar, self.a3 * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, (int, float)):
            return QMatrix._wrap(self.a0 / scalar, self.a1 / scalar,
                                 self.a2 / scalar, self.a3 / scalar)
        return NotImplemented

    def __matmul__(self, other: "QMatrix") -> "QMatrix":
        return qmat_mul(self, other)

    def conj_t(self) -> "QMatrix":
        """Conjugate transpose ``A0.T - A1.T*i - A2.T*j - A3.T*k``."""
        return QMatrix._wrap(self.a0.T.copy(), -self.a1.T,
                             -self.a2.T, -self.a3.T)

    def imag(self) -> "QMatrix":
        """Imaginary part: same matrix with the real plane zeroed."""
        return QMatrix._wrap(np.zeros_like(self.a0), self.a1.copy(),
                             self.a2.copy(), self.a3.copy())

    def norm(self) -> float:
        """Frobenius norm: sqrt of the summed squared entry moduli."""
        return float(np.sqrt(self.sqnorm()))

    def sqnorm(self) -> float:
        s = 0.0
        for p in self.planes:
            s += float(np.dot(p.ravel(), p.ravel()))
        return s


def _require_same_shape(a: QMatrix, b: QMatrix) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def qmat_mul(a: QMatrix, b: QMatrix) -> QMatrix:
    """Quaternion matrix product via 16 real plane products."""
    if a.cols != b.rows:
        raise ShapeError(
            f"inner dimensions do not match: {a.shape} @ {b.shape}")
    a0, a1, a2, a3 = a.planes
    b0, b1, b2, b3 = b.planes
    return QMatrix._wrap(
        a0 @ b0 - a1 @ b1 - a2 @ b2 - a3 @ b3,
        a0 @ b1 + a1 @ b0 + a2 @ b3 - a3 @ b2,
        a0 @ b2 - a1 @ b3 + a2 @ b0 + a3 @ b1,
        a0 @ b3 + a1 @ b2 - a2 @ b1 + a3 @ b0,
    )


def conj_transpose(a: QMatrix) -> QMatrix:
    return a.conj_t()


def fro_norm(a: QMatrix) -> float:
    return a.norm()


def re_inner(a: QMatrix, b: QMatrix) -> float:
    """Real part of the trace inner product: sum of plane-wise dot products.

    Symmetric in its arguments and equal to ``fro_norm(a)**2`` when
    ``b is a``.
    """
    _require_same_shape(a, b)
    s = 0.0
    for pa, pb in zip(a.planes, b.planes):
        s += float(np.dot(pa.ravel(), pb.ravel()))
    return s


def real_rep(a: QMatrix) -> np.ndarray:
    """4m x 4n real block representation of a quaternion matrix.

    Block layout (m x n blocks)::

        [  A0   A2   A1   A3 ]
        [ -A2   A0   A3  -A1 ]
        [ -A1  -A3   A0   A2 ]
        [ -A3   A1  -A2   A0 ]

    For conforming matrices the product identity
    ``real_rep(A @ B.conj_t()) == real_rep(A) @ real_rep(B).T`` holds, and
    the map is multiplicative: ``real_rep(A @ B) == real_rep(A) @ real_rep(B)``.
    """
    a0, a1, a2, a3 = a.planes
    return np.block([
        [a0, a2, a1, a3],
        [-a2, a0, a3, -a1],
        [-a1, -a3, a0, a2],
        [-a3, a1, -a2, a0],
    ])


def _extractions_from_real_rep(y: np.ndarray, rows: int, cols: int):
    """All four (A0, A1, A2, A3) readings of a 4*rows x 4*cols block matrix.

    Each block column of the representation determines the matrix; the four
    readings agree exactly for a true representation and their spread
    measures numerical error for a computed one.
    """
    blk = [[y[bi * rows:(bi + 1) * rows, bj * cols:(bj + 1) * cols]
            for bj in range(4)] for bi in range(4)]
    return [
        (blk[0][0], -blk[2][0], -blk[1][0], -blk[3][0]),
        (blk[1][1], blk[3][1], blk[0][1], -blk[2][1]),
        (blk[2][2], blk[0][2], -blk[3][2], blk[1][2]),
        (blk[3][3], -blk[1][3], blk[2][3], blk[0][3]),
    ]


def project_quasi_nonneg(a: QMatrix) -> QMatrix:
    """Nearest quasi non-negative matrix: clamp imaginary planes at zero.

    The real plane passes through unchanged.  Idempotent and nonexpansive
    in the Frobenius norm.
    """
    return QMatrix._wrap(a.a0.copy(),
                         np.maximum(a.a1, 0.0),
                         np.maximum(a.a2, 0.0),
                         np.maximum(a.a3, 0.0))


def is_quasi_nonneg(a: QMatrix) -> bool:
    """True iff every entry of the three imaginary planes is >= 0."""
    if a.a1.size == 0:
        return True
    return bool(min(a.a1.min(), a.a2.min(), a.a3.min()) >= 0.0)


def require_quasi_nonneg(a: QMatrix, what: str) -> None:
    if not is_quasi_nonneg(a):
        worst = min(a.a1.min(), a.a2.min(), a.a3.min())
        raise DomainError(
            f"{what} must be quasi non-negative; most negative imaginary "
            f"entry is {worst:g}")


def max_abs_diff(a: QMatrix, b: QMatrix) -> float:
    """Largest entrywise component deviation between two matrices."""
    _require_same_shape(a, b)
    if a.a0.size == 0:
        return 0.0
    return max(float(np.max(np.abs(pa - pb)))
               for pa, pb in zip(a.planes, b.planes))


class HermitianSolver:
    """Cholesky-backed solver for a Hermitian positive definite matrix.

    Factorizes the real representation of ``A`` once (it is symmetric
    positive definite exactly when ``A`` is Hermitian positive definite) and
    then answers ``A @ X = B`` (left) or ``X @ A = B`` (right) for any number
    of right-hand sides.

    The representation stores each unknown four times over; after a solve
    the four readings are compared and a spread above ``consistency_tol``
    (relative to the solution size) raises :class:`SingularMatrixError`.

    Parameters
    ----------
    a : QMatrix
        Square Hermitian positive definite matrix.
    herm_tol : float
        Relative Frobenius tolerance for the Hermitian check.
    consistency_tol : float
        Bound on the block-redundancy spread of extracted solutions.
    """

    def __init__(self, a: QMatrix, herm_tol: float = 1e-8,
                 consistency_tol: float = 1e-9):
        if a.rows != a.cols:
            raise ShapeError(f"matrix must be square, got {a.shape}")
        dev = (a - a.conj_t()).norm()
        if dev > herm_tol * max(a.norm(), np.finfo(float).tiny):
            raise DomainError(
                f"matrix is not Hermitian: ||A - A*|| = {dev:g} exceeds "
                f"{herm_tol:g} * ||A||")
        self.n = a.rows
        self.consistency_tol = consistency_tol
        try:
            self._factor = scipy.linalg.cho_factor(real_rep(a))
        except scipy.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                "real representation is not positive definite: "
                f"{exc}") from exc

    def _extract(self, y: np.ndarray, rows: int, cols: int) -> QMatrix:
        reads = _extractions_from_real_rep(y, rows, cols)
        first = reads[0]
        scale = 1.0 + max(float(np.max(np.abs(p))) for p in first) if first[0].size else 1.0
        spread = 0.0
        for other in reads[1:]:
            for p, q in zip(first, other):
                if p.size:
                    spread = max(spread, float(np.max(np.abs(p - q))))
        if spread > self.consistency_tol * scale:
            raise SingularMatrixError(
                f"solution block-consistency spread {spread:g} exceeds "
                f"{self.consistency_tol:g} * {scale:g}; system is too "
                "ill-conditioned")
        return QMatrix(first[0], first[1], first[2], first[3])

    def solve_left(self, b: QMatrix) -> QMatrix:
        """Solve ``A @ X = B``."""
        if b.rows != self.n:
            raise ShapeError(
                f"right-hand side has {b.rows} rows, expected {self.n}")
        y = scipy.linalg.cho_solve(self._factor, real_rep(b))
        return self._extract(y, self.n, b.cols)

    def solve_right(self, b: QMatrix) -> QMatrix:
        """Solve ``X @ A = B`` (uses ``A @ X* = B*`` with ``A`` Hermitian)."""
        if b.cols != self.n:
            raise ShapeError(
                f"right-hand side has {b.cols} columns, expected {self.n}")
        return self.solve_left(b.conj_t()).conj_t()

    def solve(self, b: QMatrix, side: str = "left") -> QMatrix:
        if side == "left":
            return self.solve_left(b)
        if side == "right":
            return self.solve_right(b)
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def hpd_solve(a: QMatrix, b: QMatrix, side: str = "left",
              herm_tol: float = 1e-8,
              consistency_tol: float = 1e-9) -> QMatrix:
    """One-shot Hermitian positive definite solve; see :class:`HermitianSolver`."""
    return HermitianSolver(a, herm_tol, consistency_tol).solve(b, side)
