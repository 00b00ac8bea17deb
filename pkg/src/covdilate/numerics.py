"""Dense complex-matrix kernels used by every construction in the package.

All Hilbert spaces in scope are finite dimensional, so operator identities
are checked in the spectral norm and subspace closures are plain linear
spans.  Everything here is a pure function of its inputs and deterministic,
which the report layer relies on for byte-identical reruns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotPositive

ComplexMatrix = np.ndarray


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds shared by all verifications.

    Parameters
    ----------
    rank_eps : float
        Relative singular-value cutoff for rank and span decisions.
    residual_tol : float
        Assertion threshold for operator identities.
    psd_floor : float
        Most negative admissible eigenvalue when certifying positivity.
    """

    rank_eps: float = 1e-10
    residual_tol: float = 1e-8
    psd_floor: float = 1e-10

    def __post_init__(self):
        if not (self.rank_eps > 0 and self.residual_tol > 0 and self.psd_floor > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.rank_eps > self.residual_tol:
            raise ValueError("rank_eps must not exceed residual_tol")


DEFAULT_TOL = Tolerance()


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got array of shape {m.shape}")
    if m.size and not np.all(np.isfinite(m.real)) or m.size and not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix entries must be finite")
    return m


def spectral_norm(a) -> float:
    """Largest singular value; zero for empty matrices."""
    m = np.asarray(a, dtype=complex)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def residual(aop, bop) -> float:
    """Scale-free distance ||A - B|| / (1 + max(||A||, ||B||)), spectral norm."""
    a = as_matrix(aop)
    b = as_matrix(bop)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")
    return spectral_norm(a - b) / (1.0 + max(spectral_norm(a), spectral_norm(b)))


def hermitian_residual(a) -> float:
    m = as_matrix(a)
    return residual(m, m.conj().T)


def psd_sqrt(mat, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Hermitian positive square root of a PSD matrix.

    Eigenvalues in ``[-psd_floor, psd_floor]`` are clamped to zero (the
    square root amplifies eigenvalue noise at zero to its own square root,
    so numerically-zero eigenvalues must not survive); anything below
    ``-psd_floor`` raises :class:`NotPositive`.
    """
    m = as_matrix(mat)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {m.shape}")
    if m.shape[0] == 0:
        return m.copy()
    if hermitian_residual(m) > tol.residual_tol:
        raise NotHermitian(f"hermitian residual {hermitian_residual(m):.3e}")
    herm = (m + m.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(herm)
    if vals[0] < -tol.psd_floor:
        raise NotPositive(f"eigenvalue {vals[0]:.3e} below -psd_floor")
    vals = np.where(np.abs(vals) <= tol.psd_floor, 0.0, np.clip(vals, 0.0, None))
    root = (vecs * np.sqrt(vals)) @ vecs.conj().T
    return (root + root.conj().T) / 2.0


def _canonical_phases(basis: np.ndarray) -> np.ndarray:
    # Fix the free phase of each column: largest-magnitude entry made real
    # positive (first index wins ties), so repeated runs are bit-stable.
    out = basis.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        i = int(np.argmax(np.abs(col)))
        z = col[i]
        if abs(z) > 0:
            out[:, j] = col * (z.conjugate() / abs(z))
    return out


def _stack_columns(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return np.asarray(vectors, dtype=complex)
    cols = []
    dim = None
    for v in vectors:
        c = np.asarray(v, dtype=complex).reshape(-1)
        if dim is None:
            dim = c.size
        elif c.size != dim:
            raise DimensionMismatch(f"vector of dimension {c.size}, expected {dim}")
        cols.append(c)
    if not cols:
        return np.zeros((0, 0), dtype=complex)
    return np.column_stack(cols)


def orthonormal_span(vectors, tol: Tolerance = DEFAULT_TOL,
                     scale: float | None = None) -> tuple[np.ndarray, int]:
    """Orthonormal basis of the span of the given column vectors.

    Accepts either a 2-D array whose columns are the vectors or a sequence
    of 1-D vectors.  Rank is decided at the relative singular-value cutoff
    ``rank_eps``, referenced to ``max(sigma_max, scale)`` so callers with a
    known operator scale are not fooled by all-noise inputs.  The returned
    basis is an SVD basis with canonical column phases, hence deterministic
    for a given input.
    """
    cols = _stack_columns(vectors)
    dim = cols.shape[0]
    if dim == 0 or cols.shape[1] == 0:
        return np.zeros((dim, 0), dtype=complex), 0
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    ref = max(float(s[0]) if s.size else 0.0, scale or 0.0)
    if ref <= 0.0:
        return np.zeros((dim, 0), dtype=complex), 0
    rank = int(np.sum(s > tol.rank_eps * ref))
    return _canonical_phases(u[:, :rank]), rank


def orthonormal_complement(basis: np.ndarray, inside_dim: int,
                           tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the complement of ``span(basis)`` in C^inside_dim."""
    if basis.shape[1] == 0:
        return np.eye(inside_dim, dtype=complex)
    proj = np.eye(inside_dim, dtype=complex) - basis @ basis.conj().T
    # projector singular values are 0 or 1; the unit scale keeps pure noise out
    comp, _ = orthonormal_span(proj, tol, scale=1.0)
    return comp


def gram_quotient(gram: np.ndarray, tol: Tolerance = DEFAULT_TOL,
                  floor_scale: float | None = None) -> tuple[np.ndarray, np.ndarray, int]:
    """Coordinates for the Hilbert-space quotient defined by a PSD Gram form.

    Returns ``(cmap, lift, rank)`` with ``cmap.conj().T @ cmap`` recovering
    the Gram matrix on the quotient: a vector with coefficient column ``c``
    gets quotient coordinates ``cmap @ c``, and ``lift`` is the right
    inverse (``cmap @ lift = I``).
    """
    g = as_matrix(gram)
    if g.shape[0] != g.shape[1]:
        raise DimensionMismatch(f"square Gram matrix required, got {g.shape}")
    n = g.shape[0]
    if n == 0:
        z = np.zeros((0, 0), dtype=complex)
        return z, z, 0
    if hermitian_residual(g) > tol.residual_tol:
        raise NotHermitian("Gram form is not hermitian")
    herm = (g + g.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(herm)
    top = max(vals[-1], 0.0)
    # Large Gram forms accumulate eigenvalue noise proportional to their norm.
    floor = tol.psd_floor * (1.0 + (floor_scale if floor_scale is not None else top))
    if vals[0] < -floor:
        raise NotPositive(f"Gram eigenvalue {vals[0]:.3e} below -{floor:.3e}")
    keep = vals > tol.rank_eps * max(top, tol.rank_eps)
    kept_vals = vals[keep][::-1]
    kept_vecs = _canonical_phases(vecs[:, keep][:, ::-1])
    rank = int(kept_vals.size)
    sq = np.sqrt(kept_vals)
    cmap = sq[:, None] * kept_vecs.conj().T
    lift = kept_vecs / sq[None, :]
    return cmap, lift, rank


def block_diag(mats) -> np.ndarray:
    """Direct sum of square complex matrices (zero-size blocks allowed)."""
    mats = [np.asarray(m, dtype=complex) for m in mats]
    n = sum(m.shape[0] for m in mats)
    c = sum(m.shape[1] for m in mats)
    out = np.zeros((n, c), dtype=complex)
    r = 0
    s = 0
    for m in mats:
        out[r:r + m.shape[0], s:s + m.shape[1]] = m
        r += m.shape[0]
        s += m.shape[1]
    return out
