"""Finite-dimensional C*-algebras as direct sums of complex matrix blocks.

An algebra is a tuple of block sizes ``(n_1, ..., n_r)``; its elements carry
one ``n_b x n_b`` complex matrix per block.  The canonical basis is the
family of matrix units, ordered block-major and row-major inside each block,
so an element's coordinate vector is just the concatenation of its flattened
blocks.  Star homomorphisms, states, representations, the GNS construction
and cyclic decompositions all act on these coordinates.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatch, NotInjective, NotState, ShapeMismatch)
from .numerics import (DEFAULT_TOL, Tolerance, as_matrix, block_diag,
                       gram_quotient, orthonormal_span, residual,
                       spectral_norm)
from .report import ClauseReport, clause


@dataclass(frozen=True)
class FiniteDimCStarAlgebra:
    """Direct sum of full matrix algebras, the desk-scale model of A."""

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.block_sizes) == 0:
            raise ValueError("algebra needs at least one block")
        if any(n < 1 for n in self.block_sizes):
            raise ValueError("block sizes must be positive")
        object.__setattr__(self, "block_sizes", tuple(int(n) for n in self.block_sizes))

    @property
    def dim(self) -> int:
        return sum(n * n for n in self.block_sizes)

    @property
    def block_offsets(self) -> tuple[int, ...]:
        offs = []
        o = 0
        for n in self.block_sizes:
            offs.append(o)
            o += n * n
        return tuple(offs)

    def unit_index(self, block: int, p: int, q: int) -> int:
        return self.block_offsets[block] + p * self.block_sizes[block] + q

    def element(self, blocks) -> "AlgebraElement":
        mats = tuple(as_matrix(b) for b in blocks)
        if len(mats) != len(self.block_sizes):
            raise ShapeMismatch("wrong number of blocks")
        for m, n in zip(mats, self.block_sizes):
            if m.shape != (n, n):
                raise ShapeMismatch(f"block of shape {m.shape}, expected ({n}, {n})")
        return AlgebraElement(self, mats)

    def from_coords(self, coords) -> "AlgebraElement":
        v = np.asarray(coords, dtype=complex).reshape(-1)
        if v.size != self.dim:
            raise DimensionMismatch(f"coordinate vector of size {v.size}, expected {self.dim}")
        blocks = []
        for n, off in zip(self.block_sizes, self.block_offsets):
            blocks.append(v[off:off + n * n].reshape(n, n))
        return AlgebraElement(self, tuple(blocks))

    def unit(self) -> "AlgebraElement":
        return self.element([np.eye(n, dtype=complex) for n in self.block_sizes])

    def zero(self) -> "AlgebraElement":
        return self.element([np.zeros((n, n), dtype=complex) for n in self.block_sizes])

    def basis(self) -> tuple["AlgebraElement", ...]:
        return _matrix_unit_basis(self)

    def random_element(self, rng, hermitian: bool = False) -> "AlgebraElement":
        blocks = []
        for n in self.block_sizes:
            m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            if hermitian:
                m = (m + m.conj().T) / 2.0
            blocks.append(m)
        return self.element(blocks)


@functools.lru_cache(maxsize=None)
def _matrix_unit_basis(algebra: FiniteDimCStarAlgebra):
    out = []
    for b, n in enumerate(algebra.block_sizes):
        for p in range(n):
            for q in range(n):
                blocks = [np.zeros((m, m), dtype=complex) for m in algebra.block_sizes]
                blocks[b][p, q] = 1.0
                out.append(AlgebraElement(algebra, tuple(blocks)))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """One complex matrix per block of the parent algebra."""

    algebra: FiniteDimCStarAlgebra
    blocks: tuple[np.ndarray, ...]

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([b.reshape(-1) for b in self.blocks])

    def full_matrix(self) -> np.ndarray:
        return block_diag(self.blocks)

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(b.conj().T for b in self.blocks))

    def norm(self) -> float:
        return max((spectral_norm(b) for b in self.blocks), default=0.0)

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.algebra, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.algebra, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            self._check(other)
            return AlgebraElement(self.algebra,
                                  tuple(a @ b for a, b in zip(self.blocks, other.blocks)))
        return AlgebraElement(self.algebra, tuple(complex(other) * b for b in self.blocks))

    def __rmul__(self, scalar) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(complex(scalar) * b for b in self.blocks))

    def _check(self, other: "AlgebraElement") -> None:
        if other.algebra.block_sizes != self.algebra.block_sizes:
            raise ShapeMismatch("elements of different algebras")


def operator_algebra(space_dim: int) -> FiniteDimCStarAlgebra:
    """B(H) for an explicit finite-dimensional H, as a single-block algebra."""
    return FiniteDimCStarAlgebra((space_dim,))


@dataclass(frozen=True, eq=False)
class StarHom:
    """Linear map between algebras, stored by its action on coordinates.

    Nothing is assumed at construction time; multiplicativity, adjoint
    preservation and unitality are certified by :func:`verify_star_hom`.
    """

    source: FiniteDimCStarAlgebra
    target: FiniteDimCStarAlgebra
    matrix: np.ndarray  # target.dim x source.dim

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape != (self.target.dim, self.source.dim):
            raise ShapeMismatch(f"coordinate matrix of shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    def __call__(self, x: AlgebraElement) -> AlgebraElement:
        return self.target.from_coords(self.matrix @ x.coords)

    def compose(self, inner: "StarHom") -> "StarHom":
        if inner.target.block_sizes != self.source.block_sizes:
            raise ShapeMismatch("composition shape mismatch")
        return StarHom(inner.source, self.target, self.matrix @ inner.matrix)

    def inverse(self, tol: Tolerance = DEFAULT_TOL) -> "StarHom":
        if self.source.dim != self.target.dim:
            raise NotInjective("only square coordinate maps can be inverted")
        s = np.linalg.svd(self.matrix, compute_uv=False)
        if s.size == 0 or s[-1] <= tol.rank_eps * s[0]:
            raise NotInjective("coordinate map is singular")
        return StarHom(self.target, self.source, np.linalg.inv(self.matrix))

    @staticmethod
    def identity(algebra: FiniteDimCStarAlgebra) -> "StarHom":
        return StarHom(algebra, algebra, np.eye(algebra.dim, dtype=complex))

    @staticmethod
    def from_images(source: FiniteDimCStarAlgebra, target: FiniteDimCStarAlgebra,
                    images) -> "StarHom":
        cols = [img.coords for img in images]
        if len(cols) != source.dim:
            raise ShapeMismatch("one image per basis element required")
        return StarHom(source, target, np.column_stack(cols))

    @staticmethod
    def inner_automorphism(u: AlgebraElement) -> "StarHom":
        """a -> u a u* for a (block-diagonal) unitary u."""
        alg = u.algebra
        ustar = u.adjoint()
        return StarHom.from_images(alg, alg, [u * b * ustar for b in alg.basis()])

    @staticmethod
    def block_permutation(algebra: FiniteDimCStarAlgebra, perm) -> "StarHom":
        """Permute equal-size blocks; block b of the image is block perm[b] of the input."""
        perm = list(perm)
        if sorted(perm) != list(range(len(algebra.block_sizes))):
            raise ShapeMismatch("not a permutation of the blocks")
        for b, src in enumerate(perm):
            if algebra.block_sizes[b] != algebra.block_sizes[src]:
                raise ShapeMismatch("permuted blocks must have equal sizes")
        images = []
        for x in algebra.basis():
            images.append(algebra.element([x.blocks[perm[b]]
                                           for b in range(len(algebra.block_sizes))]))
        return StarHom.from_images(algebra, algebra, images)


def verify_star_hom(h: StarHom, tol: Tolerance = DEFAULT_TOL) -> "StarHomReport":
    """Certify multiplicativity, star preservation and unitality on basis pairs."""
    basis = h.source.basis()
    images = [h(b) for b in basis]
    mult = 0.0
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            lhs = h(bi * bj).full_matrix()
            rhs = (images[i] * images[j]).full_matrix()
            mult = max(mult, residual(lhs, rhs))
    star = max(residual(h(b.adjoint()).full_matrix(), images[i].adjoint().full_matrix())
               for i, b in enumerate(basis))
    unit = residual(h(h.source.unit()).full_matrix(), h.target.unit().full_matrix())
    return StarHomReport(mult, star, unit, tol.residual_tol)


@dataclass(frozen=True)
class StarHomReport:
    mult_residual: float
    star_residual: float
    unit_residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return max(self.mult_residual, self.star_residual, self.unit_residual) <= self.threshold

    def clauses(self, prefix: str = "star-hom") -> ClauseReport:
        rep = ClauseReport()
        rep.add(clause(f"{prefix}/multiplicative", "h(ab) = h(a) h(b)",
                       self.mult_residual, self.threshold))
        rep.add(clause(f"{prefix}/star", "h(a*) = h(a)*", self.star_residual, self.threshold))
        rep.add(clause(f"{prefix}/unital", "h(1) = 1", self.unit_residual, self.threshold))
        return rep


@dataclass(frozen=True)
class EndomorphismReport:
    hom: StarHomReport
    injective: bool
    automorphism: bool
    coordinate_rank: int
    note: str

    @property
    def passed(self) -> bool:
        return self.hom.passed and self.injective


def verify_endomorphism(alpha: StarHom, tol: Tolerance = DEFAULT_TOL) -> EndomorphismReport:
    """Certify that alpha is a unital injective endomorphism of its algebra.

    On a finite-dimensional algebra a unital injective endomorphism is
    automatically surjective, so the automorphism flag equals injectivity;
    genuine non-surjectivity needs the graded tower backend.
    """
    if alpha.source.block_sizes != alpha.target.block_sizes:
        raise ShapeMismatch("endomorphism requires source = target")
    hom = verify_star_hom(alpha, tol)
    s = np.linalg.svd(alpha.matrix, compute_uv=False)
    rank = int(np.sum(s > tol.rank_eps * s[0])) if s.size and s[0] > 0 else 0
    injective = rank == alpha.source.dim
    note = ("injective + unital on a finite-dimensional algebra forces surjectivity; "
            "non-surjective dynamics require the tower backend")
    return EndomorphismReport(hom, injective, injective, rank, note)


@dataclass(frozen=True, eq=False)
class State:
    """Linear functional on an algebra, stored as a coordinate row vector."""

    algebra: FiniteDimCStarAlgebra
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).reshape(-1)
        if v.size != self.algebra.dim:
            raise DimensionMismatch("functional has wrong dimension")
        object.__setattr__(self, "vector", v)

    def __call__(self, x: AlgebraElement) -> complex:
        return complex(self.vector @ x.coords)

    @staticmethod
    def normalized_trace(algebra: FiniteDimCStarAlgebra) -> "State":
        total = sum(algebra.block_sizes)
        coords = np.zeros(algebra.dim, dtype=complex)
        for b, (n, off) in enumerate(zip(algebra.block_sizes, algebra.block_offsets)):
            for p in range(n):
                coords[off + p * n + p] = 1.0 / total
        return State(algebra, coords)

    @staticmethod
    def from_densities(algebra: FiniteDimCStarAlgebra, densities) -> "State":
        """omega(a) = sum_b tr(rho_b a_b) for PSD blocks rho_b with total trace 1."""
        coords = np.zeros(algebra.dim, dtype=complex)
        for b, (n, off) in enumerate(zip(algebra.block_sizes, algebra.block_offsets)):
            rho = as_matrix(densities[b])
            if rho.shape != (n, n):
                raise ShapeMismatch("density block of wrong shape")
            # tr(rho E_pq) = rho[q, p]
            for p in range(n):
                for q in range(n):
                    coords[off + p * n + q] = rho[q, p]
        return State(algebra, coords)

    @staticmethod
    def vector_state(algebra: FiniteDimCStarAlgebra, block: int, vec) -> "State":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        densities = [np.zeros((n, n), dtype=complex) for n in algebra.block_sizes]
        densities[block] = np.outer(v, v.conj())
        return State.from_densities(algebra, densities)


def state_gram(omega: State) -> np.ndarray:
    """Gram form G[i, j] = omega(b_i* b_j) over the matrix-unit basis."""
    alg = omega.algebra
    g = np.zeros((alg.dim, alg.dim), dtype=complex)
    for b, n in enumerate(alg.block_sizes):
        # E_{p qi}* E_{p qj} = E_{qi qj}; cross-block products vanish
        unit_vals = np.empty((n, n), dtype=complex)
        for qi in range(n):
            for qj in range(n):
                unit_vals[qi, qj] = omega.vector[alg.unit_index(b, qi, qj)]
        for p in range(n):
            for qi in range(n):
                i = alg.unit_index(b, p, qi)
                for qj in range(n):
                    g[i, alg.unit_index(b, p, qj)] = unit_vals[qi, qj]
    return g


def verify_state(omega: State, tol: Tolerance = DEFAULT_TOL) -> tuple[float, float]:
    """Return (unit residual, most negative Gram eigenvalue)."""
    unit_res = abs(omega(omega.algebra.unit()) - 1.0)
    g = state_gram(omega)
    vals = np.linalg.eigvalsh((g + g.conj().T) / 2.0)
    return float(unit_res), float(vals[0])


@dataclass(frozen=True, eq=False)
class Representation:
    """Unital *-homomorphism of an algebra into B(C^space_dim)."""

    algebra: FiniteDimCStarAlgebra
    space_dim: int
    hom: StarHom

    # engine protocol: finite-dimensional reps have no depth restriction
    max_depth = None

    @property
    def dim(self) -> int:
        return self.space_dim

    def __call__(self, x: AlgebraElement) -> np.ndarray:
        return self.hom(x).blocks[0]

    def verify(self, tol: Tolerance = DEFAULT_TOL) -> StarHomReport:
        return verify_star_hom(self.hom, tol)

    @staticmethod
    def from_images(algebra: FiniteDimCStarAlgebra, images) -> "Representation":
        mats = [as_matrix(m) for m in images]
        d = mats[0].shape[0]
        target = operator_algebra(d)
        hom = StarHom.from_images(algebra, target, [target.element([m]) for m in mats])
        return Representation(algebra, d, hom)

    @staticmethod
    def from_multiplicities(algebra: FiniteDimCStarAlgebra, multiplicities,
                            unitary=None) -> "Representation":
        """pi(a) = U (directsum_b a_b x I_{m_b}) U*; multiplicity 0 drops a block."""
        mults = [int(m) for m in multiplicities]
        if len(mults) != len(algebra.block_sizes):
            raise ShapeMismatch("one multiplicity per block required")
        if any(m < 0 for m in mults) or sum(mults) == 0:
            raise ShapeMismatch("multiplicities must be nonnegative, not all zero")
        d = sum(n * m for n, m in zip(algebra.block_sizes, mults))
        u = np.eye(d, dtype=complex) if unitary is None else as_matrix(unitary)
        if u.shape != (d, d):
            raise ShapeMismatch(f"basis unitary must be {d} x {d}")
        images = []
        for x in algebra.basis():
            parts = [np.kron(blk, np.eye(m, dtype=complex))
                     for blk, m in zip(x.blocks, mults) if m > 0]
            images.append(u @ block_diag(parts) @ u.conj().T)
        return Representation.from_images(algebra, images)


@dataclass(frozen=True)
class GnsData:
    rep: Representation
    cyclic: np.ndarray
    embed_dim: int
    vector_residual: float   # max_a |(rho(a) xi, xi) - omega(a)|
    cyclic_span_rank: int


def gns(algebra: FiniteDimCStarAlgebra, omega: State,
        tol: Tolerance = DEFAULT_TOL) -> GnsData:
    """GNS representation of a state: quotient of A by the null space of omega(b* a).

    The quotient basis order is fixed by the matrix-unit order of the
    algebra, so repeated runs produce identical coordinates.
    """
    unit_res, min_eig = verify_state(omega, tol)
    if unit_res > tol.residual_tol:
        raise NotState(f"omega(1) = 1 fails by {unit_res:.3e}")
    if min_eig < -tol.psd_floor:
        raise NotState(f"Gram eigenvalue {min_eig:.3e} below -psd_floor")
    g = state_gram(omega)
    cmap, lift, rank = gram_quotient(g, tol)
    basis = algebra.basis()
    images = []
    for x in basis:
        lm = left_mult_matrix(x)
        images.append(cmap @ lm @ lift)
    rep = Representation.from_images(algebra, images)
    cyclic = cmap @ algebra.unit().coords
    vec_res = max(abs(np.vdot(cyclic, rep(a) @ cyclic) - omega(a)) for a in basis)
    span, span_rank = orthonormal_span(
        np.column_stack([rep(a) @ cyclic for a in basis]), tol)
    return GnsData(rep, cyclic, rank, float(vec_res), span_rank)


def left_mult_matrix(x: AlgebraElement) -> np.ndarray:
    """Matrix of a -> x a on coordinates (row-major flattening per block)."""
    return block_diag([np.kron(b, np.eye(n, dtype=complex))
                       for b, n in zip(x.blocks, x.algebra.block_sizes)])


def cyclic_decomposition(pi: Representation, tol: Tolerance = DEFAULT_TOL) -> list[np.ndarray]:
    """Split the space of pi into mutually orthogonal cyclic invariant subspaces."""
    images = [pi(b) for b in pi.algebra.basis()]
    return cyclic_decomposition_from_images(images, pi.space_dim, tol)


def cyclic_decomposition_from_images(images, space_dim: int,
                                     tol: Tolerance = DEFAULT_TOL) -> list[np.ndarray]:
    return [basis for _, basis in cyclic_summands(images, space_dim, tol)]


def cyclic_summands(images, space_dim: int,
                    tol: Tolerance = DEFAULT_TOL) -> list[tuple[np.ndarray, np.ndarray]]:
    """Greedy cyclic decomposition returning (cyclic vector, subspace basis) pairs.

    Takes the first standard basis vector not yet covered and closes its
    residual under the algebra action; the orthocomplement of an invariant
    subspace is invariant, so summands stay orthogonal.
    """
    summands: list[tuple[np.ndarray, np.ndarray]] = []
    covered = np.zeros((space_dim, 0), dtype=complex)
    for j in range(space_dim):
        v = np.zeros(space_dim, dtype=complex)
        v[j] = 1.0
        r = v - covered @ (covered.conj().T @ v)
        if np.linalg.norm(r) <= 1e3 * tol.rank_eps:
            continue
        r = r / np.linalg.norm(r)
        cols = np.column_stack([m @ r for m in images])
        basis, _ = orthonormal_span(cols, tol)
        summands.append((r, basis))
        covered = np.column_stack([covered, basis])
        if covered.shape[1] >= space_dim:
            break
    return summands


def range_subalgebra_basis(alpha: StarHom, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal coordinate basis of the image of alpha."""
    basis, _ = orthonormal_span(alpha.matrix, tol)
    return basis
