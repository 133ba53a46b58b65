"""Shared builders for randomized tests.

The factorizable-instance generators keep the planted factors inside the
feasible cone by construction (quasi non-negativity is not closed under
products, so a generic random pair would not do).
"""

import numpy as np

from quatfact import InitBundle, QMatrix


def random_qmatrix(rng, rows, cols, lo=-1.0, hi=1.0) -> QMatrix:
    return QMatrix(*(rng.uniform(lo, hi, (rows, cols)) for _ in range(4)))


def random_feasible(rng, rows, cols, lo=0.0, hi=1.0) -> QMatrix:
    """Random quasi non-negative matrix (real plane sign-free)."""
    return QMatrix(rng.uniform(-hi, hi, (rows, cols)),
                   *(rng.uniform(lo, hi, (rows, cols)) for _ in range(3)))


def factorizable_instance(seed, m, n, l, scale=1.0):
    """Exactly factorizable pure-imaginary X = W @ H.

    W is pure-imaginary with non-negative planes and H real non-negative,
    so X is quasi non-negative and pure-imaginary with both factors
    feasible.  Returns (X, W, H).
    """
    rng = np.random.default_rng(seed)
    w = QMatrix.from_imag(*(rng.uniform(0.0, 1.0, (m, l)) for _ in range(3)))
    h = QMatrix.from_real(rng.uniform(0.0, 1.0, (l, n)) * scale)
    return w @ h, w, h


def conditioned_instance(seed, m, n, l, scale=0.1, lo=0.5, width=0.5,
                         bump=2.0):
    """Well-conditioned strictly positive planted instance.

    Each planted basis column dominates its own row/column block, keeping
    the Gram matrices well conditioned; a positive floor keeps the planted
    solution in the interior of the cone.  Used where the multiplier
    method must converge to tight stationarity within a fixed budget.
    """
    rng = np.random.default_rng(seed)
    planes = []
    for _ in range(3):
        p = rng.uniform(lo, lo + width, (m, l))
        for k in range(l):
            p[k * (m // l):(k + 1) * (m // l), k] += bump
        planes.append(p * scale)
    w = QMatrix.from_imag(*planes)
    h0 = rng.uniform(lo, lo + width, (l, n))
    for k in range(l):
        h0[k, k * (n // l):(k + 1) * (n // l)] += bump
    h = QMatrix.from_real(h0 * scale)
    return w @ h, w, h


def scaled_bundle(seed, m, l, n, scale) -> InitBundle:
    """Seeded init bundle with draws matched to the instance scale."""
    b = InitBundle.draw(seed, m, l, n)
    return InitBundle(*(p * scale for p in
                        (b.L1, b.L2, b.L3, b.S1, b.S2, b.S3)))


def worked_example():
    """The exactly factorizable integer 4x4 instance with its rank-1 factors.

    Returns (X, W, H) with X = W @ H holding exactly in integer arithmetic;
    W's and H's imaginary planes are non-negative while the real planes
    carry negative entries.
    """
    x = QMatrix(
        [[-6, 3, -2, -9], [2, 9, 2, -5], [-5, 1, -3, -7], [-4, 7, 0, -11]],
        [[3, 3, 7, 3], [4, 2, 6, 2], [0, 2, 4, 0], [2, 0, 8, 4]],
        [[9, 10, 5, 0], [8, 4, 2, 4], [6, 6, 4, 0], [14, 12, 8, 4]],
        [[2, 5, 0, 1], [4, 3, 4, 5], [3, 6, 1, 0], [2, 7, 2, 1]],
    )
    w = QMatrix([[2], [3], [1], [3]], [[1], [0], [1], [0]],
                [[2], [0], [1], [2]], [[2], [1], [2], [3]])
    h = QMatrix([[1, 3, 1, -1]], [[2, 1, 2, 1]],
                [[2, 1, 0, 1]], [[1, 0, 1, 2]])
    return x, w, h
