"""Scalar quaternion arithmetic.

A quaternion is stored as four real components ``(w, x, y, z)`` standing for
``w + x*i + y*j + z*k``.  Multiplication follows the Hamilton rules
``i*i = j*j = k*k = -1`` and ``i*j = -j*i = k``, ``j*k = -k*j = i``,
``k*i = -i*k = j``; it is associative and distributive but not commutative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["Quaternion", "qmul", "qinv"]


@dataclass(frozen=True)
class Quaternion:
    """One quaternion ``w + x*i + y*j + z*k`` with real components."""

    w: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def conj(self) -> "Quaternion":
        """Conjugate: negate the three imaginary components."""
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def modulus(self) -> float:
        """Euclidean length sqrt(w^2 + x^2 + y^2 + z^2)."""
        return math.sqrt(self.w * self.w + self.x * self.x +
                         self.y * self.y + self.z * self.z)

    def inverse(self) -> "Quaternion":
        """Multiplicative inverse conj(q) / |q|^2.

        Raises
        ------
        ZeroDivisionError
            If the quaternion is exactly zero.
        """
        m2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
        if m2 == 0.0:
            raise ZeroDivisionError("zero quaternion has no inverse")
        return Quaternion(self.w / m2, -self.x / m2, -self.y / m2, -self.z / m2)

    def is_close(self, other: "Quaternion", tol: float = 1e-12) -> bool:
        return (abs(self.w - other.w) <= tol and abs(self.x - other.x) <= tol
                and abs(self.y - other.y) <= tol and abs(self.z - other.z) <= tol)

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w + other.w, self.x + other.x,
                          self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w - other.w, self.x - other.x,
                          self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return qmul(self, other)
        if isinstance(other, (int, float)):
            return Quaternion(self.w * other, self.x * other,
                              self.y * other, self.z * other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion(self.w * other, self.x * other,
                              self.y * other, self.z * other)
        return NotImplemented


def qmul(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product of two quaternions (noncommutative)."""
    return Quaternion(
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    )


def qinv(q: Quaternion) -> Quaternion:
    """Inverse of a nonzero quaternion; see :meth:`Quaternion.inverse`."""
    return q.inverse()
