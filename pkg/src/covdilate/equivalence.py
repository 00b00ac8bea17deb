"""Numerical unitary-equivalence certificates.

Uniqueness statements in this theory are all anchored: the intertwiner is
required to fix the original space (or source space) pointwise.  Under that
anchor equivalence is decidable by Gram comparison on the canonical
spanning sets, so each certifier either constructs the intertwiner by least
squares and measures every declared relation, or produces a quantitative
failure witness recomputed from the defining data rather than from the
constructed spaces.  Unanchored equivalence is never searched for; when the
construction succeeds but a relation misses the threshold the verdict is
``inconclusive``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covariant import HBExtension, usable_depth
from .cpmaps import stinespring_gram
from .dilation import DilationRecord
from .errors import LevelMismatch, SpanDeficient
from .extension import ExtensionChain
from .numerics import (DEFAULT_TOL, Tolerance, block_diag, orthonormal_span,
                       residual, spectral_norm)

EQUIV_THRESHOLD = 1e-7
DILATION_THRESHOLD = 1e-6
WITNESS_FACTOR = 10.0


@dataclass(frozen=True)
class GramWitness:
    """A concrete Gram mismatch certifying inequivalence.

    The two values are recomputed from the defining map data (representation
    and transfer operators), not from the constructed dilation spaces.
    """

    level: int
    element: str          # description of b_i* b_j
    left_vector: int      # column index into the inner space
    right_vector: int
    value_a: complex
    value_b: complex

    @property
    def mismatch(self) -> float:
        return abs(self.value_a - self.value_b)

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "element": self.element,
            "left_vector": self.left_vector,
            "right_vector": self.right_vector,
            "value_a": [self.value_a.real, self.value_a.imag],
            "value_b": [self.value_b.real, self.value_b.imag],
            "mismatch": self.mismatch,
        }


@dataclass
class EquivalenceCertificate:
    verdict: str                      # equivalent | inequivalent | inconclusive
    threshold: float
    residuals: dict = field(default_factory=dict)
    intertwiner: Optional[np.ndarray] = None
    witness: Optional[GramWitness] = None
    note: str = ""

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def as_dict(self) -> dict:
        d = {"verdict": self.verdict, "threshold": self.threshold,
             "residuals": {k: float(v) for k, v in self.residuals.items()}}
        if self.witness is not None:
            d["witness"] = self.witness.as_dict()
        if self.note:
            d["note"] = self.note
        return d


def _verdict(residuals: dict, threshold: float, intertwiner,
             note: str = "") -> EquivalenceCertificate:
    if max(residuals.values(), default=0.0) <= threshold:
        return EquivalenceCertificate("equivalent", threshold, residuals,
                                      intertwiner, None, note)
    return EquivalenceCertificate("inconclusive", threshold, residuals,
                                  None, None,
                                  note or "intertwiner constructed but a relation "
                                          "misses the threshold")


def _gram_mismatch_witness(system, depth, phi_a, phi_b, h: int, level: int,
                           tol: Tolerance) -> tuple[float, Optional[GramWitness]]:
    view = system.algebra_view(depth)
    basis = system.basis(depth)
    units_a = [phi_a(b) for b in basis]
    units_b = [phi_b(b) for b in basis]
    ga = stinespring_gram(view, units_a, h)
    gb = stinespring_gram(view, units_b, h)
    diff = np.abs(ga - gb)
    mismatch = float(diff.max()) if diff.size else 0.0
    if mismatch <= WITNESS_FACTOR * tol.residual_tol:
        return mismatch, None
    flat = int(np.argmax(diff))
    i, j = np.unravel_index(flat, diff.shape)
    bi, p = divmod(int(i), h)
    bj, q = divmod(int(j), h)
    element = f"adjoint(basis[{bi}]) * basis[{bj}] at working depth {depth}" \
        if depth is not None else f"adjoint(basis[{bi}]) * basis[{bj}]"
    return mismatch, GramWitness(level, element, p, q,
                                 complex(ga[i, j]), complex(gb[i, j]))


def stinespring_intertwiner(ext1: HBExtension, ext2: HBExtension,
                            tol: Tolerance = DEFAULT_TOL,
                            threshold: float = EQUIV_THRESHOLD) -> EquivalenceCertificate:
    """Canonical intertwiner between two extension steps of the same data.

    Defined on the spanning set by u(rho1(a) W1 h) = rho2(a) W2 h; its
    well-definedness is the equality of the two reference Gram forms, which
    is checked first and turned into a witness on failure.
    """
    if ext1.space_dim != ext2.space_dim:
        raise LevelMismatch("extensions over different base spaces")
    system = ext1.system
    depth = ext1.working_depth
    if ext2.working_depth != depth:
        raise LevelMismatch("extensions at different working depths")

    mismatch, witness = _gram_mismatch_witness(system, depth, ext1.phi, ext2.phi,
                                               ext1.space_dim, 0, tol)
    if witness is not None:
        return EquivalenceCertificate("inequivalent", threshold,
                                      {"gram_mismatch": mismatch}, None, witness)

    basis = system.basis(depth)
    x1 = np.hstack([ext1.rho(a) @ ext1.isometry for a in basis])
    x2 = np.hstack([ext2.rho(a) @ ext2.isometry for a in basis])
    _, rank1 = orthonormal_span(x1, tol)
    if rank1 < ext1.dilation_dim:
        raise SpanDeficient(f"span rank {rank1} below dilation dimension "
                            f"{ext1.dilation_dim}")
    _, rank2 = orthonormal_span(x2, tol)
    if rank2 < ext2.dilation_dim:
        raise SpanDeficient(f"span rank {rank2} below dilation dimension "
                            f"{ext2.dilation_dim}")
    if ext1.dilation_dim != ext2.dilation_dim:
        return EquivalenceCertificate(
            "inconclusive", threshold, {"gram_mismatch": mismatch}, None, None,
            "matching Gram forms but different dilation dimensions")

    u = x2 @ np.linalg.pinv(x1, rcond=tol.rank_eps)
    residuals = {
        "gram_mismatch": mismatch,
        "unitarity_left": residual(u.conj().T @ u, np.eye(u.shape[1])),
        "unitarity_right": residual(u @ u.conj().T, np.eye(u.shape[0])),
        "isometry_intertwined": spectral_norm(u @ ext1.isometry - ext2.isometry),
    }
    rel = 0.0
    for a in basis:
        rel = max(rel, residual(u @ ext1.rho(a), ext2.rho(a) @ u))
    residuals["representation_intertwined"] = rel
    return _verdict(residuals, threshold, u)


def chain_intertwiner(chain1: ExtensionChain, chain2: ExtensionChain,
                      tol: Tolerance = DEFAULT_TOL,
                      threshold: float = EQUIV_THRESHOLD) -> EquivalenceCertificate:
    """Blockwise intertwiner between two chains over the same pair, fixing H.

    Built level by level from the extension-step intertwiners; at the first
    level whose reference Gram forms disagree the verdict is inequivalent
    with that level's witness.
    """
    p1, p2 = chain1.pair, chain2.pair
    if chain1.n_levels != chain2.n_levels:
        raise LevelMismatch(f"{chain1.n_levels} vs {chain2.n_levels} levels")
    if p1.space_dim != p2.space_dim:
        raise LevelMismatch("chains over different spaces")
    if residual(p1.contraction, p2.contraction) > tol.residual_tol:
        raise LevelMismatch("chains over different contractions")
    system = p1.system

    u_prev = np.eye(p1.space_dim, dtype=complex)
    blocks = [np.eye(p1.space_dim, dtype=complex)]
    residuals: dict = {}
    for k in range(chain1.n_levels):
        lv1, lv2 = chain1.levels[k], chain2.levels[k]
        depth = lv1.ext.working_depth
        h_prev = lv1.ext.space_dim

        def phi2_twisted(b, _lv2=lv2, _u=u_prev):
            return _u.conj().T @ _lv2.ext.phi(b) @ _u

        mismatch, witness = _gram_mismatch_witness(system, depth, lv1.ext.phi,
                                                   phi2_twisted, h_prev, k, tol)
        if witness is not None:
            note = "" if k == 0 else f"levels below {k} already intertwined"
            return EquivalenceCertificate("inequivalent", threshold,
                                          {f"level{k}_gram_mismatch": mismatch},
                                          None, witness, note)
        basis = system.basis(depth)
        x1 = np.hstack([lv1.ext.rho(a) @ lv1.ext.isometry for a in basis])
        x2 = np.hstack([lv2.ext.rho(a) @ lv2.ext.isometry @ u_prev for a in basis])
        _, rank1 = orthonormal_span(x1, tol)
        if rank1 < lv1.ext.dilation_dim:
            raise SpanDeficient(f"level {k} span deficient")
        u_k = x2 @ np.linalg.pinv(x1, rcond=tol.rank_eps)
        u_def = lv2.defect_basis.conj().T @ u_k @ lv1.defect_basis
        residuals[f"level{k}_unitarity"] = residual(
            u_def.conj().T @ u_def, np.eye(u_def.shape[1]))
        blocks.append(u_def)
        u_prev = u_def

    u = block_diag(blocks)
    residuals["unitarity_left"] = residual(u.conj().T @ u, np.eye(u.shape[1]))
    residuals["unitarity_right"] = residual(u @ u.conj().T, np.eye(u.shape[0]))
    residuals["fixes_H"] = spectral_norm(
        u[:p1.space_dim, :p1.space_dim] - np.eye(p1.space_dim))
    residuals["contraction_intertwined"] = residual(u @ chain1.v, chain2.v @ u)
    d = usable_depth(system, [chain1.rho, chain2.rho], 0, p1.depth)
    rel = 0.0
    for a in system.basis(d):
        rel = max(rel, residual(u @ chain1.rho(a), chain2.rho(a) @ u))
    residuals["representation_intertwined"] = rel
    return _verdict(residuals, threshold, u)


def dilation_intertwiner(rec1: DilationRecord, rec2: DilationRecord,
                         tol: Tolerance = DEFAULT_TOL,
                         threshold: float = DILATION_THRESHOLD) -> EquivalenceCertificate:
    """Intertwiner between two minimal dilations of the same source pair.

    u is defined by u(W1^n k) = W2^n k on the source space and extended by
    least squares; minimality of both records is a precondition and its
    failure is an error, not an inequivalence verdict.
    """
    s1, s2 = rec1.source_pair, rec2.source_pair
    if rec1.copies != rec2.copies:
        raise LevelMismatch("records with different numbers of copies")
    if s1.space_dim != s2.space_dim:
        raise LevelMismatch("records over different source spaces")
    if residual(s1.contraction, s2.contraction) > tol.residual_tol:
        raise LevelMismatch("records over different source contractions")

    def span_cols(rec):
        cols = []
        power = rec.source_embed
        for _ in range(rec.copies + 1):
            cols.append(power)
            power = rec.w @ power
        return np.hstack(cols)

    x1 = span_cols(rec1)
    x2 = span_cols(rec2)
    _, rank1 = orthonormal_span(x1, tol)
    if rank1 < rec1.total_dim:
        raise SpanDeficient(f"first record not minimal: rank {rank1} of {rec1.total_dim}")
    _, rank2 = orthonormal_span(x2, tol)
    if rank2 < rec2.total_dim:
        raise SpanDeficient(f"second record not minimal: rank {rank2} of {rec2.total_dim}")
    if rec1.total_dim != rec2.total_dim:
        return EquivalenceCertificate("inconclusive", threshold, {}, None, None,
                                      "minimal records of different dimension")

    u = x2 @ np.linalg.pinv(x1, rcond=tol.rank_eps)
    residuals = {
        "unitarity_left": residual(u.conj().T @ u, np.eye(u.shape[1])),
        "unitarity_right": residual(u @ u.conj().T, np.eye(u.shape[0])),
        "fixes_source": spectral_norm(u @ rec1.source_embed - rec2.source_embed),
        "dilation_intertwined": residual(u @ rec1.w, rec2.w @ u),
    }
    system = s1.system
    d = usable_depth(system, [rec1.eta, rec2.eta], 0, s1.depth)
    rel = 0.0
    for a in system.basis(d):
        rel = max(rel, residual(u @ rec1.eta(a), rec2.eta(a) @ u))
    residuals["representation_intertwined"] = rel
    return _verdict(residuals, threshold, u)
