"""Seeded starting points shared by every solver.

One :class:`InitBundle` holds six uniform [0, 1) matrices drawn from a
single 64-bit-seeded generator in the fixed order L1, L2, L3, S1, S2, S3.
The quaternion methods start from the pure-imaginary stacks
``W0 = L1*i + L2*j + L3*k`` and ``H0 = S1*i + S2*j + S3*k`` (with the
splits and multipliers initialized to the same stacks for the multiplier
method), while the per-channel methods assign (L1, S1), (L2, S2), (L3, S3)
to the red, green and blue channels.  Because the draw order is fixed,
runs of different methods under one seed are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qmatrix import QMatrix
from .solvers import AdmmState, FactorPair

__all__ = ["InitBundle"]


@dataclass(frozen=True)
class InitBundle:
    """Six seeded uniform [0, 1) matrices: L1..L3 are m x l, S1..S3 l x n."""

    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    S3: np.ndarray

    @classmethod
    def draw(cls, seed: int, m: int, l: int, n: int) -> "InitBundle":
        rng = np.random.default_rng(seed)
        mats = [rng.random((m, l)) for _ in range(3)]
        mats += [rng.random((l, n)) for _ in range(3)]
        return cls(*mats)

    def factor_pair(self) -> FactorPair:
        """Pure-imaginary feasible start (W0, H0) for the gradient methods."""
        w0 = QMatrix.from_imag(self.L1, self.L2, self.L3)
        h0 = QMatrix.from_imag(self.S1, self.S2, self.S3)
        return FactorPair(w0, h0)

    def admm_state(self, alpha: float, beta: float) -> AdmmState:
        """Start with W = U = Lam and H = V = Pi on the imaginary stacks."""
        w0 = QMatrix.from_imag(self.L1, self.L2, self.L3)
        h0 = QMatrix.from_imag(self.S1, self.S2, self.S3)
        return AdmmState(w0, h0, w0, h0, w0, h0, alpha, beta)

    def channel_pairs(self):
        """Per-channel (L, S) inits in red, green, blue order."""
        return [(self.L1, self.S1), (self.L2, self.S2), (self.L3, self.S3)]

    def gray_pair(self):
        """Init for the single-channel gray pipeline (first draws)."""
        return (self.L1, self.S1)
