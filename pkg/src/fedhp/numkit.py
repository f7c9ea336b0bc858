"""Small dense linear-algebra helpers and the seeded random source.

Vectors and matrices are plain ``numpy`` arrays. The symmetric eigensolver is
a cyclic Jacobi iteration so spectral results do not depend on the LAPACK
build underneath numpy.

Random streams use numpy's PCG64 bit generator seeded through
``SeedSequence(seed, *stream_key)``. PCG64 is a 128-bit LCG with an XSL-RR
output permutation; the stream key lets every worker, link and round draw
from an independent sequence that is identical on every platform.
"""
from __future__ import annotations

import math
import zlib

import numpy as np

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


class NotSymmetricError(ValueError):
    pass


def as_vec(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def as_sym_matrix(m) -> np.ndarray:
    """Validate ``m`` as a finite, exactly symmetric square matrix."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NotSymmetricError("matrix has non-finite entries")
    if not np.array_equal(arr, arr.T):
        raise NotSymmetricError("matrix is not symmetric")
    return arr


def l2_norm(v) -> float:
    arr = as_vec(v)
    return float(math.sqrt(float(np.dot(arr, arr))))


def _max_offdiag(a: np.ndarray) -> float:
    off = np.abs(a - np.diag(np.diag(a)))
    return float(off.max()) if off.size else 0.0


def sym_eigenvalues(m, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> list[float]:
    """Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.

    Sweeps over every (p, q) pair in row order and zeroes ``a[p, q]`` with a
    plane rotation. Stops once the largest off-diagonal magnitude is below
    ``tol`` or after ``max_sweeps`` sweeps.

    Raises:
        NotSymmetricError: if ``m`` is not square, symmetric and finite.
        ArithmeticError: if the sweep budget runs out before convergence.
    """
    a = as_sym_matrix(m).copy()
    n = a.shape[0]
    if n == 1:
        return [float(a[0, 0])]

    for _ in range(max_sweeps):
        if _max_offdiag(a) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol * 1e-3:
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J applied to rows/cols p and q
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
    else:
        if _max_offdiag(a) >= tol:
            raise ArithmeticError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return sorted(float(x) for x in np.diag(a))


def _stream_word(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream ids must be non-negative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


class Rng:
    """Seeded random stream addressed by ``(seed, *key)``.

    Key parts may be non-negative ints or strings (strings are mapped through
    CRC-32), e.g. ``Rng(7, "batch", 3)`` is worker 3's mini-batch stream.
    ``child`` derives a sub-stream without consuming draws from the parent.
    """

    def __init__(self, seed: int, *key):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.key = tuple(key)
        words = [self.seed & 0xFFFFFFFF, self.seed >> 32] + [_stream_word(k) for k in key]
        self.gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))

    def child(self, *key) -> "Rng":
        return Rng(self.seed, *self.key, *key)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        return self.gen.choice(n, size=min(k, n), replace=False)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, key={self.key!r})"
