"""Completely positive maps, transfer operators and Stinespring dilations.

A :class:`CPMap` is a linear map between finite-dimensional C*-algebras
stored by its coordinate action, exactly like :class:`~covdilate.algebra.StarHom`
but without any homomorphism claim.  Complete positivity is certified by
per-source-block Choi matrices; for direct-sum sources CP holds iff it holds
on every block.  Transfer operators (CP left inverses of the dynamics) and
the induced conditional expectations ``E = alpha o tau`` are built and
verified here, together with the minimal Stinespring dilation used by the
extension engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (AlgebraElement, FiniteDimCStarAlgebra, Representation,
                      StarHom, left_mult_matrix, operator_algebra,
                      range_subalgebra_basis)
from .errors import (NotCP, NotInjective, NotUnital, RangeNotInImage,
                     ShapeMismatch, TransferInvalid)
from .numerics import (DEFAULT_TOL, Tolerance, as_matrix, gram_quotient,
                       orthonormal_span, residual, spectral_norm)
from .report import ClauseReport, clause


@dataclass(frozen=True, eq=False)
class CPMap:
    """Linear map between algebras given by its action on coordinates."""

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

    def compose(self, inner: "CPMap") -> "CPMap":
        if inner.target.block_sizes != self.source.block_sizes:
            raise ShapeMismatch("composition shape mismatch")
        return CPMap(inner.source, self.target, self.matrix @ inner.matrix)

    @staticmethod
    def identity(algebra: FiniteDimCStarAlgebra) -> "CPMap":
        return CPMap(algebra, algebra, np.eye(algebra.dim, dtype=complex))

    @staticmethod
    def from_hom(h: StarHom) -> "CPMap":
        return CPMap(h.source, h.target, h.matrix)

    @staticmethod
    def from_images(source: FiniteDimCStarAlgebra, target: FiniteDimCStarAlgebra,
                    images) -> "CPMap":
        cols = [img.coords for img in images]
        if len(cols) != source.dim:
            raise ShapeMismatch("one image per basis element required")
        return CPMap(source, target, np.column_stack(cols))


def compose_rep(pi: Representation, tau: CPMap) -> CPMap:
    """pi o tau as a CP map into B(H)."""
    if tau.target.block_sizes != pi.algebra.block_sizes:
        raise ShapeMismatch("representation does not accept the map's target")
    return CPMap(tau.source, operator_algebra(pi.space_dim), pi.hom.matrix @ tau.matrix)


def choi_blocks(phi: CPMap) -> list[np.ndarray]:
    """One Choi-type matrix [phi(e_pq)]_{pq} per source block."""
    out = []
    src = phi.source
    tdim = sum(phi.target.block_sizes)
    for b, n in enumerate(src.block_sizes):
        choi = np.zeros((n * tdim, n * tdim), dtype=complex)
        for p in range(n):
            for q in range(n):
                img = phi(src.basis()[src.unit_index(b, p, q)]).full_matrix()
                choi[p * tdim:(p + 1) * tdim, q * tdim:(q + 1) * tdim] = img
        out.append(choi)
    return out


@dataclass(frozen=True)
class CompletePositivityReport:
    min_choi_eigs: tuple[float, ...]   # per source block
    floor: float

    @property
    def passed(self) -> bool:
        return all(e >= -self.floor for e in self.min_choi_eigs)

    @property
    def min_eig(self) -> float:
        return min(self.min_choi_eigs)


def verify_completely_positive(phi: CPMap,
                               tol: Tolerance = DEFAULT_TOL) -> CompletePositivityReport:
    """Per-block Choi positivity; passes iff every block matrix is PSD.

    Cross-block positivity is automatic for *-linear maps on direct sums,
    so the per-block check is the full criterion here.
    """
    eigs = []
    for choi in choi_blocks(phi):
        herm = (choi + choi.conj().T) / 2.0
        vals = np.linalg.eigvalsh(herm)
        eigs.append(float(vals[0]))
    return CompletePositivityReport(tuple(eigs), tol.psd_floor)


@dataclass(frozen=True)
class TransferReport:
    left_inverse_residual: float
    unit_residual: float
    cp: CompletePositivityReport
    threshold: float

    @property
    def passed(self) -> bool:
        return (self.left_inverse_residual <= self.threshold
                and self.unit_residual <= self.threshold and self.cp.passed)

    def clauses(self, prefix: str = "transfer") -> ClauseReport:
        rep = ClauseReport()
        rep.add(clause(f"{prefix}/left-inverse", "tau(alpha(a)) = a",
                       self.left_inverse_residual, self.threshold))
        rep.add(clause(f"{prefix}/unital", "tau(1) = 1", self.unit_residual, self.threshold))
        rep.add(clause(f"{prefix}/completely-positive", "min eig Choi(tau) >= 0",
                       max(0.0, -self.cp.min_eig), self.cp.floor))
        return rep


def verify_transfer(tau: CPMap, alpha: StarHom,
                    tol: Tolerance = DEFAULT_TOL) -> TransferReport:
    """Certify that tau is a completely positive unital left inverse of alpha."""
    if alpha.source.block_sizes != tau.target.block_sizes \
            or alpha.target.block_sizes != tau.source.block_sizes:
        raise ShapeMismatch("tau and alpha are not composable both ways")
    left = max(residual(tau(alpha(a)).full_matrix(), a.full_matrix())
               for a in alpha.source.basis())
    unit = residual(tau(tau.source.unit()).full_matrix(), tau.target.unit().full_matrix())
    cp = verify_completely_positive(tau, tol)
    return TransferReport(float(left), float(unit), cp, tol.residual_tol)


def expectation_from_transfer(alpha: StarHom, tau: CPMap,
                              tol: Tolerance = DEFAULT_TOL) -> CPMap:
    """E = alpha o tau, the induced conditional expectation onto the range of alpha.

    Idempotency follows from tau o alpha = id, and is re-checked numerically
    together with range containment.
    """
    rep = verify_transfer(tau, alpha, tol)
    if not rep.passed:
        raise TransferInvalid(
            f"transfer checks failed (left inverse {rep.left_inverse_residual:.3e}, "
            f"unit {rep.unit_residual:.3e}, min Choi eig {rep.cp.min_eig:.3e})")
    e = CPMap(tau.source, alpha.target, alpha.matrix @ tau.matrix)
    idem = max(residual(e(e(a)).full_matrix(), e(a).full_matrix())
               for a in e.source.basis())
    if idem > tol.residual_tol:
        raise TransferInvalid(f"E = alpha o tau fails idempotency by {idem:.3e}")
    rng_basis = range_subalgebra_basis(alpha, tol)
    off_range = spectral_norm(e.matrix - rng_basis @ (rng_basis.conj().T @ e.matrix))
    if off_range > tol.residual_tol * (1.0 + spectral_norm(e.matrix)):
        raise TransferInvalid(f"range of E leaves the image of alpha by {off_range:.3e}")
    return e


def transfer_from_expectation(alpha: StarHom, e: CPMap,
                              tol: Tolerance = DEFAULT_TOL) -> CPMap:
    """Solve alpha(tau(a)) = E(a) for tau on the injective coordinate map."""
    if e.source.block_sizes != alpha.target.block_sizes \
            or e.target.block_sizes != alpha.target.block_sizes:
        raise ShapeMismatch("E must act on the target algebra of alpha")
    s = np.linalg.svd(alpha.matrix, compute_uv=False)
    if s.size == 0 or s[-1] <= tol.rank_eps * s[0]:
        raise NotInjective("alpha has a singular coordinate map")
    sol, _, _, _ = np.linalg.lstsq(alpha.matrix, e.matrix, rcond=None)
    off = spectral_norm(alpha.matrix @ sol - e.matrix)
    if off > tol.residual_tol * (1.0 + spectral_norm(e.matrix)):
        raise RangeNotInImage(f"E maps outside the image of alpha by {off:.3e}")
    tau = CPMap(e.source, alpha.source, sol)
    rep = verify_transfer(tau, alpha, tol)
    if not rep.passed:
        raise TransferInvalid("recovered map fails the transfer checks")
    return tau


def stinespring_gram(source: FiniteDimCStarAlgebra, phi_unit_images,
                     inner_dim: int) -> np.ndarray:
    """Gram form <a x h, b x h'> = <phi(a* b) h, h'> over (matrix units) x H.

    ``phi_unit_images[i]`` is the ``inner_dim x inner_dim`` matrix phi(b_i).
    Matrix-unit products make the form sparse: E_{p qi}* E_{p qj} = E_{qi qj}
    inside one block and zero across blocks.
    """
    n = source.dim
    h = inner_dim
    g = np.zeros((n * h, n * h), dtype=complex)
    for b, nb in enumerate(source.block_sizes):
        for p in range(nb):
            for qi in range(nb):
                i = source.unit_index(b, p, qi)
                for qj in range(nb):
                    j = source.unit_index(b, p, qj)
                    g[i * h:(i + 1) * h, j * h:(j + 1) * h] = \
                        phi_unit_images[source.unit_index(b, qi, qj)]
    return g


@dataclass(frozen=True)
class StinespringData:
    rep: Representation
    isometry: np.ndarray        # W : H -> K
    dilation_dim: int
    isometry_residual: float    # ||W* W - I||
    dilation_residual: float    # max_a ||W* rho(a) W - phi(a)||
    minimality_rank: int        # dim span rho(A) W H

    @property
    def minimal(self) -> bool:
        return self.minimality_rank == self.dilation_dim


def stinespring_minimal(phi: CPMap, tol: Tolerance = DEFAULT_TOL) -> StinespringData:
    """Minimal Stinespring dilation of a unital CP map into B(H).

    K is the quotient of (basis of A) x H by the null space of the Gram
    form; rho acts by left multiplication and W h is the class of 1 x h.
    """
    if len(phi.target.block_sizes) != 1:
        raise ShapeMismatch("phi must map into a full operator algebra B(H)")
    cp = verify_completely_positive(phi, tol)
    if not cp.passed:
        raise NotCP(f"min Choi eigenvalue {cp.min_eig:.3e}")
    h = phi.target.block_sizes[0]
    unit_res = residual(phi(phi.source.unit()).full_matrix(), np.eye(h))
    if unit_res > tol.residual_tol:
        raise NotUnital(f"phi(1) = I fails by {unit_res:.3e}")

    src = phi.source
    images = [phi(b).blocks[0] for b in src.basis()]
    g = stinespring_gram(src, images, h)
    cmap, lift, rank = gram_quotient(g, tol)

    n = src.dim
    rep_images = []
    for x in src.basis():
        lm = left_mult_matrix(x)
        t = lift.reshape(n, h, rank)
        out = np.einsum("mn,nhr->mhr", lm, t).reshape(n * h, rank)
        rep_images.append(cmap @ out)
    rho = Representation.from_images(src, rep_images)
    w = cmap @ np.kron(src.unit().coords.reshape(n, 1), np.eye(h, dtype=complex))

    iso_res = residual(w.conj().T @ w, np.eye(h))
    dil_res = max(residual(w.conj().T @ rho(a) @ w, phi(a).blocks[0])
                  for a in src.basis())
    span_cols = np.column_stack([rho(a) @ w for a in src.basis()]) if rank else w
    _, span_rank = orthonormal_span(span_cols, tol)
    return StinespringData(rho, w, rank, float(iso_res), float(dil_res), span_rank)
