"""Hot numeric kernels: pairwise max-cosine reductions.

Alignment and BERTScore spend nearly all their time computing, for every
token of one sentence, the best cosine against every token of another. Two
interchangeable implementations live here:

- the default pure-numpy path (normalize rows, one BLAS matmul, axis max),
- numba @njit loop kernels that stream the reduction without materializing
  the similarity matrix, enabled with REFREV_NUMBA=1.

On this workload the BLAS path wins (see benchmarks/bench_kernels.py); the
JIT path is kept for environments without a tuned BLAS and for memory-bound
shapes. Both compute the same formula and agree to float64 round-off; each
path is deterministic run to run.

Zero rows have cosine 0 against everything (normalization leaves them zero).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

_FLAG = os.environ.get("REFREV_NUMBA", "0").strip().lower()
_USE_JIT = _HAVE_NUMBA and _FLAG in ("1", "true", "on", "yes")


def using_numba() -> bool:
    """True when the JIT kernels are the active dispatch target."""
    return _USE_JIT


def have_numba() -> bool:
    return _HAVE_NUMBA


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """float64 copy with unit-norm rows; zero rows stay zero."""
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected 2-D matrix, got shape {m.shape}")
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    out = np.zeros_like(m)
    nz = norms > 0.0
    out[nz] = m[nz] / norms[nz, None]
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _max_rows_jit(a, b):  # pragma: no cover - exercised via wrapper
        n, d = a.shape
        m = b.shape[0]
        out = np.zeros(n, dtype=np.float64)
        for i in range(n):
            best = -1.0
            for j in range(m):
                s = 0.0
                for k in range(d):
                    s += a[i, k] * b[j, k]
                if s > best:
                    best = s
            out[i] = best
        return out

    @njit(cache=True)
    def _max_both_jit(a, b):  # pragma: no cover - exercised via wrapper
        n, d = a.shape
        m = b.shape[0]
        best_a = np.full(n, -1.0)
        best_b = np.full(m, -1.0)
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    s += a[i, k] * b[j, k]
                if s > best_a[i]:
                    best_a[i] = s
                if s > best_b[j]:
                    best_b[j] = s
        return best_a, best_b


def _max_rows_np(an: np.ndarray, bn: np.ndarray) -> np.ndarray:
    return (an @ bn.T).max(axis=1) if an.shape[0] else np.zeros(0)


def _max_both_np(an: np.ndarray, bn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sim = an @ bn.T
    return sim.max(axis=1), sim.max(axis=0)


def max_cosine_per_row(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each row of ``a``: the maximum cosine against all rows of ``b``.

    Raw cosines in [-1, 1]; a zero row of ``a`` scores exactly 0.
    """
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dim mismatch: {a.shape[1]} vs {b.shape[1]}")
    if b.shape[0] == 0:
        raise ValueError("second matrix must have at least one row")
    an = normalize_rows(a)
    bn = normalize_rows(b)
    if _USE_JIT:
        return _max_rows_jit(an, bn)
    return _max_rows_np(an, bn)


def max_cosine_both(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best cosine per row of ``a`` vs ``b`` and per row of ``b`` vs ``a``."""
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dim mismatch: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("matrices must be non-empty")
    an = normalize_rows(a)
    bn = normalize_rows(b)
    if _USE_JIT:
        return _max_both_jit(an, bn)
    return _max_both_np(an, bn)


def warmup() -> None:
    """Trigger JIT compilation outside timed sections (no-op on numpy path)."""
    a = np.ones((2, 8))
    b = np.ones((3, 8))
    max_cosine_per_row(a, b)
    max_cosine_both(a, b)
