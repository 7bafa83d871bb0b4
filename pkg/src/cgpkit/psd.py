"""Numerically safe operations on symmetric positive-(semi)definite matrices.

All solves go through a jittered Cholesky factorization; explicit inverses
are formed only where an inverse itself is the requested result (block
inverses). The jitter ladder is relative to the mean diagonal magnitude so
that regularization stays observable and scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import FactorizationFailure

# Relative jitter levels tried in order, scaled by trace/dim.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (m + m.T)/2, absorbing accumulated asymmetry."""
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class PsdMatrix:
    """Dense symmetric PSD matrix, symmetrized on construction.

    Positive-(semi)definiteness is not eigen-checked up front; it is
    established by the first successful jittered factorization.
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "entries", symmetrize(a))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def as_matrix(m) -> np.ndarray:
    """Coerce a PsdMatrix or array-like to a dense float ndarray."""
    if isinstance(m, PsdMatrix):
        return m.entries
    return np.asarray(m, dtype=float)


def _jitter_scale(a: np.ndarray) -> float:
    scale = np.trace(a) / a.shape[0]
    # A zero/negative trace gives no usable scale; fall back to unit scale
    # so the ladder can still regularize (e.g. the all-zero matrix).
    return scale if scale > 0 else 1.0


# Factorizations with an estimated reciprocal condition below this are
# treated as failed so the ladder escalates; solves through such factors
# would amplify roundoff past any downstream tolerance.
RCOND_FLOOR = 1e-12


def cholesky_jittered(m) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``m + jitter*I`` and the jitter used.

    The jitter starts at 0 and escalates through ``JITTER_LADDER`` times
    trace/dim until the factorization succeeds. A factorization only
    counts as successful when the factored matrix is numerically usable
    (estimated reciprocal condition above ``RCOND_FLOOR``); the final
    ladder level is accepted whenever it factorizes at all.

    Raises FactorizationFailure when the ladder is exhausted, which signals
    an indefinite input.
    """
    a = as_matrix(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise FactorizationFailure(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise FactorizationFailure("matrix entries must be finite")
    scale = _jitter_scale(a)
    for i, level in enumerate(JITTER_LADDER):
        jitter = level * scale
        if jitter:
            a_j = a.copy()
            a_j[np.diag_indices_from(a_j)] += jitter
        else:
            a_j = a
        try:
            lower = np.linalg.cholesky(a_j)
        except np.linalg.LinAlgError:
            continue
        if i + 1 < len(JITTER_LADDER):
            rcond, info = scipy.linalg.lapack.dpocon(lower, np.linalg.norm(a_j, 1), "L")
            if info != 0 or not np.isfinite(rcond) or rcond < RCOND_FLOOR:
                continue
        return lower, jitter
    raise FactorizationFailure(
        f"Cholesky failed for dim={a.shape[0]} after jitter up to {JITTER_LADDER[-1] * scale:g}"
    )


@dataclass(frozen=True)
class PsdFactor:
    """A jittered Cholesky factorization reusable across many solves."""

    lower: np.ndarray = field(repr=False)
    jitter: float
    matrix: np.ndarray = field(repr=False)  # the jittered matrix, for refinement

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def solve(self, b) -> np.ndarray:
        """Solve ``(m + jitter*I) x = b`` with iterative refinement.

        The refinement keeps the relative residual at or below 1e-10 even
        for poorly conditioned (but factorizable) inputs.
        """
        b_arr = np.asarray(b, dtype=float)
        x = scipy.linalg.cho_solve((self.lower, True), b_arr, check_finite=False)
        b_norm = np.linalg.norm(b_arr)
        if b_norm > 0:
            for _ in range(2):
                r = b_arr - self.matrix @ x
                if np.linalg.norm(r) <= 1e-12 * b_norm:
                    break
                x = x + scipy.linalg.cho_solve((self.lower, True), r, check_finite=False)
        return x

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


def factorize_psd(m) -> PsdFactor:
    """Factor once for repeated solves against the same matrix."""
    a = as_matrix(m)
    lower, jitter = cholesky_jittered(a)
    if jitter:
        a_j = a.copy()
        a_j[np.diag_indices_from(a_j)] += jitter
    else:
        a_j = a
    return PsdFactor(lower=lower, jitter=jitter, matrix=a_j)


def solve_psd(m, b) -> np.ndarray:
    """Solve ``(m + jitter*I) x = b`` via Cholesky with iterative refinement."""
    return factorize_psd(m).solve(b)


def logdet_psd(m) -> float:
    """Log determinant of ``m + jitter*I`` via the Cholesky diagonal."""
    lower, _ = cholesky_jittered(m)
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def block_inverse_2x2(a11, a12, a21, a22):
    """Invert ``[[a11, a12], [a21, a22]]`` blockwise via the Schur complement.

    Returns the four blocks (A, B, C, D) of the inverse. Requires a11 and
    the Schur complement ``a22 - a21 a11^{-1} a12`` to be factorizable.
    """
    a11 = as_matrix(a11)
    a12 = np.asarray(a12, dtype=float)
    a21 = np.asarray(a21, dtype=float)
    a22 = as_matrix(a22)
    n1 = a11.shape[0]
    n2 = a22.shape[0]
    if a12.shape != (n1, n2) or a21.shape != (n2, n1):
        raise FactorizationFailure(
            f"off-diagonal blocks have shapes {a12.shape}/{a21.shape}, "
            f"expected {(n1, n2)}/{(n2, n1)}"
        )
    inv11 = solve_psd(a11, np.eye(n1))
    w = inv11 @ a12                       # a11^{-1} a12
    v = a21 @ inv11                       # a21 a11^{-1}
    schur = a22 - a21 @ w
    d = solve_psd(schur, np.eye(n2))
    b = -w @ d
    c = -d @ v
    a = inv11 + w @ d @ v
    return a, b, c, d
