"""Dense small-matrix kernel: symmetric/SPD types, Cholesky, eigen, expm, solves.

Every function is pure and deterministic. Single-matrix operations accept a
``SymMatrix``/``SpdMatrix`` or anything ``numpy.asarray`` understands; the
``*_batch`` helpers work on stacks of shape ``(N, m, m)`` and report the
offending stack index on failure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import PositiveDefinitenessError

log = logging.getLogger(__name__)

MAX_DIM = 16
PIVOT_TOLERANCE = 1e-12  # relative to the largest diagonal entry


def _as_square(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if not 1 <= arr.shape[0] <= MAX_DIM:
        raise ValueError(f"matrix dimension {arr.shape[0]} outside 1..{MAX_DIM}")
    return arr


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Read-only symmetric matrix. The constructor symmetrizes its input."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_square(self.entries)
        arr = 0.5 * (arr + arr.T)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}({self.entries.tolist()!r})"


@dataclass(frozen=True, eq=False, repr=False)
class SpdMatrix(SymMatrix):
    """Symmetric positive-definite matrix, verified by Cholesky at construction."""

    factor: np.ndarray = field(init=False)

    def __post_init__(self):
        super().__post_init__()
        lower = cholesky(self.entries)
        lower.setflags(write=False)
        object.__setattr__(self, "factor", lower)

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.factor))))


def cholesky(a) -> np.ndarray:
    """Lower Cholesky factor ``L`` with ``L @ L.T == a``.

    Raises PositiveDefinitenessError when a pivot falls below
    ``PIVOT_TOLERANCE`` times the largest diagonal entry.
    """
    if isinstance(a, SpdMatrix):
        return np.array(a.factor)
    arr = _as_square(a)
    try:
        lower = np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefinitenessError("matrix is not positive definite") from exc
    pivots = np.diag(lower) ** 2
    threshold = PIVOT_TOLERANCE * np.max(np.diag(arr))
    if not np.all(pivots > threshold):
        raise PositiveDefinitenessError(
            f"Cholesky pivot {pivots.min():.3e} below tolerance {threshold:.3e}"
        )
    return lower


def cholesky_batch(stack: np.ndarray, points: np.ndarray | None = None) -> np.ndarray:
    """Cholesky factors of a stack ``(N, m, m)``; errors name the failing index."""
    stack = np.asarray(stack, dtype=float)
    try:
        lower = np.linalg.cholesky(stack)
    except np.linalg.LinAlgError:
        lower = None
    if lower is not None:
        pivots = np.diagonal(lower, axis1=-2, axis2=-1) ** 2
        diag = np.diagonal(stack, axis1=-2, axis2=-1)
        ok = np.all(pivots > PIVOT_TOLERANCE * diag.max(axis=-1, keepdims=True), axis=-1)
        ok &= np.all(np.isfinite(pivots), axis=-1)
        if ok.all():
            return lower
        bad = int(np.flatnonzero(~ok)[0])
    else:
        bad = next(i for i, a in enumerate(stack) if not _is_spd(a))
    point = None if points is None else np.asarray(points)[bad]
    raise PositiveDefinitenessError(
        f"matrix at node {bad} is not positive definite", node=bad, point=point
    )


def _is_spd(a: np.ndarray) -> bool:
    try:
        cholesky(a)
    except (PositiveDefinitenessError, ValueError):
        return False
    return True


def logdet_batch(lower: np.ndarray) -> np.ndarray:
    """log-determinants from a stack of Cholesky factors."""
    return 2.0 * np.sum(np.log(np.diagonal(lower, axis1=-2, axis2=-1)), axis=-1)


def sym_eigen(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching orthonormal eigenvectors (columns)."""
    arr = np.asarray(SymMatrix(a) if not isinstance(a, SymMatrix) else a)
    values, vectors = np.linalg.eigh(arr)
    return values[::-1].copy(), vectors[:, ::-1].copy()


def mat_exp(a) -> np.ndarray:
    """Matrix exponential (scaling and squaring with Padé approximants)."""
    arr = _as_square(a)
    result = scipy.linalg.expm(arr)
    if not np.all(np.isfinite(result)):
        raise OverflowError("matrix exponential overflowed")
    return result


def solve(a, b) -> np.ndarray:
    """``a^{-1} b`` for SPD ``a`` via its Cholesky factor."""
    lower = cholesky(a)
    return scipy.linalg.cho_solve((lower, True), np.asarray(b, dtype=float))


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Exactly symmetric part of the trailing two axes."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))
