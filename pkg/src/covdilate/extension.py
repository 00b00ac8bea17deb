"""Truncated inductive coisometric extension of a covariant pair.

``coisometric_extend(pair, n_levels, ...)`` stacks ``n_levels`` extension
steps: level 0 is the two-step block construction on H, and each further
level applies the extension step to the previous restricted representation
on its defect space.  The assembled pair ``(rho, V)`` lives on

    H + defect_0 + defect_1 + ... + defect_{n_levels-1}

with ``V`` superdiagonal and the row of the last block zero by truncation.
Consequently ``V V*`` equals the projection onto all blocks except the last
one exactly, which is how the coisometry clause is stated throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .covariant import (CovariantPair, DirectSumRep, HBExtension,
                        RestrictedRep, ShiftedRep, extend_representation,
                        defect_operators, haar_unitary, two_step,
                        usable_depth, verify_strategy)
from .errors import (DecompositionMismatch, DepthExceeded,
                     InvarianceViolation, LevelMismatch, StrategyInvalid)
from .numerics import (DEFAULT_TOL, Tolerance, block_diag, orthonormal_complement,
                       orthonormal_span, residual, spectral_norm)
from .report import ClauseReport, clause

TRUNCATION_NOTE = ("truncated construction: the ambient space keeps n_levels defect "
                   "blocks and the row of the last block is zero, so the coisometry "
                   "identity reads V V* = P onto all blocks but the last")
LEVEL_SPACE_NOTE = ("the defect space of level k is built, and lives, inside the "
                    "level-k dilation space")


@dataclass(eq=False)
class ChainLevel:
    ext: HBExtension
    defect_basis: np.ndarray     # orthonormal columns inside the level's dilation space
    d_star: np.ndarray           # map defect_k -> previous space, in basis coordinates
    pi_hat: RestrictedRep
    embed_residual: float        # || (I - B B*) W_k ||, isometric embedding of the previous defect
    containment_defect: float    # diagnostic: how far pi_k(A) moves the embedded defect

    @property
    def dim(self) -> int:
        return self.defect_basis.shape[1]


@dataclass(eq=False)
class ExtensionChain:
    pair: CovariantPair
    strategies: tuple
    levels: list[ChainLevel]
    rho: DirectSumRep
    v: np.ndarray
    block_names: list[str]
    block_dims: list[int]
    basis_seed: Optional[int]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)

    @property
    def block_offsets(self) -> list[int]:
        offs = []
        o = 0
        for d in self.block_dims:
            offs.append(o)
            o += d
        return offs

    def kept_projection(self) -> np.ndarray:
        """Projection onto every block except the truncated last one."""
        p = np.eye(self.total_dim, dtype=complex)
        lo = self.block_offsets[-1]
        p[lo:, lo:] = 0.0
        return p

    def as_pair(self) -> CovariantPair:
        return CovariantPair(self.pair.system, self.rho, self.v, self.pair.depth)


def coisometric_extend(pair: CovariantPair, n_levels: int, strategy,
                       tol: Tolerance = DEFAULT_TOL, basis_seed: Optional[int] = None,
                       level_strategies=None) -> ExtensionChain:
    """Assemble the truncated coisometric extension with ``n_levels`` defect blocks.

    ``level_strategies`` optionally overrides the strategy per level; mixed
    chains realize the non-uniqueness of the construction and are only built
    when explicitly requested this way.
    """
    if n_levels < 1:
        raise StrategyInvalid(
            "n_levels >= 1 required: with zero defect blocks the truncated "
            "coisometry identity has no content")
    system = pair.system
    if system.is_tower:
        if pair.depth is None:
            raise DepthExceeded("tower pairs need an explicit check depth")
        if pair.depth + n_levels + 1 > system.d_max:
            raise DepthExceeded(
                f"depth budget {pair.depth} + {n_levels} + 1 exceeds d_max {system.d_max}")
    strategies = tuple(level_strategies) if level_strategies is not None \
        else tuple([strategy] * n_levels)
    if len(strategies) != n_levels:
        raise StrategyInvalid("one strategy per level required")

    t_depth = system.stinespring_depth(pair.depth) if system.is_tower else None
    seen = []
    for strat in strategies:
        if not any(strat is s for s in seen):
            verify_strategy(system, strat, t_depth, tol)
            seen.append(strat)

    rng = np.random.default_rng(basis_seed) if basis_seed is not None else None
    levels: list[ChainLevel] = []

    ext0 = extend_representation(system, pair.rep, strategies[0], pair.depth, tol, rng)
    step0 = two_step(pair, ext0, tol, rng)
    levels.append(ChainLevel(ext0, step0.defect_basis, step0.d_star, step0.pi_hat,
                             0.0, 0.0))

    for k in range(1, n_levels):
        prev = levels[-1]
        ext = extend_representation(system, prev.pi_hat, strategies[k],
                                    pair.depth, tol, rng)
        w = ext.isometry
        span_depth = ext.rho.max_depth if system.is_tower else None
        cols = [ext.rho(a) @ w for a in system.basis(span_depth)]
        basis, rank = orthonormal_span(np.hstack(cols) if cols else w, tol)
        if rng is not None and rank:
            basis = basis @ haar_unitary(rank, rng)
        proj_off = np.eye(ext.dilation_dim, dtype=complex) - basis @ basis.conj().T
        inv = max((spectral_norm(proj_off @ ext.rho(a) @ basis)
                   for a in system.basis(span_depth)), default=0.0)
        if inv > tol.residual_tol:
            raise InvarianceViolation(f"level {k} defect space drifts by {inv:.3e}")
        embed_res = spectral_norm(proj_off @ w)
        d_star = w.conj().T @ basis
        pi_hat = RestrictedRep(ext.rho, basis)
        # how far the full algebra action moves the embedded previous defect:
        # only alpha(A) is guaranteed to preserve it
        p_embed = w @ w.conj().T
        check_d = usable_depth(system, [ext.rho], 0, pair.depth)
        off = np.eye(ext.dilation_dim, dtype=complex) - p_embed
        containment = max((spectral_norm(off @ ext.rho(a) @ p_embed)
                           for a in system.basis(check_d)), default=0.0)
        levels.append(ChainLevel(ext, basis, d_star, pi_hat, float(embed_res),
                                 float(containment)))

    block_dims = [pair.space_dim] + [lv.dim for lv in levels]
    block_names = ["H"] + [f"defect-{k}" for k in range(n_levels)]
    total = sum(block_dims)
    offs = []
    o = 0
    for d in block_dims:
        offs.append(o)
        o += d
    v = np.zeros((total, total), dtype=complex)
    v[:pair.space_dim, :pair.space_dim] = pair.contraction
    for k, lv in enumerate(levels):
        r0, r1 = offs[k], offs[k] + block_dims[k]
        c0, c1 = offs[k + 1], offs[k + 1] + block_dims[k + 1]
        v[r0:r1, c0:c1] = lv.d_star
    rho = DirectSumRep(tuple([pair.rep] + [lv.pi_hat for lv in levels]))
    return ExtensionChain(pair, strategies, levels, rho, v, block_names,
                          block_dims, basis_seed)


def verify_coisometric_extension(chain: ExtensionChain,
                                 tol: Tolerance = DEFAULT_TOL) -> ClauseReport:
    """Extension, covariance and truncated-coisometry clauses for the chain."""
    pair = chain.pair
    system = pair.system
    h = pair.space_dim
    rep = ClauseReport()
    rep.notes.append(TRUNCATION_NOTE)
    rep.notes.append(LEVEL_SPACE_NOTE)

    d = usable_depth(system, [pair.rep, chain.rho], 1, pair.depth)
    restr = 0.0
    for a in system.basis(d):
        col = chain.rho(a)[:, :h]
        target = np.zeros((chain.total_dim, h), dtype=complex)
        target[:h, :] = pair.rep(a)
        restr = max(restr, residual(col, target))
    rep.add(clause("chain/representation-restricts", "rho(a)|H = pi(a), rho(a) H in H",
                   restr, tol.residual_tol))

    vcol = chain.v[:, :h]
    vtarget = np.zeros((chain.total_dim, h), dtype=complex)
    vtarget[:h, :] = pair.contraction
    rep.add(clause("chain/contraction-restricts", "V|H = T, V H in H",
                   residual(vcol, vtarget), tol.residual_tol))

    cov = 0.0
    for a in system.basis(d):
        aa = system.alpha_apply(a)
        cov = max(cov, residual(chain.v @ chain.rho(aa), chain.rho(a) @ chain.v))
    rep.add(clause("chain/covariance", "V rho(alpha(a)) = rho(a) V",
                   cov, tol.residual_tol))

    rep.add(clause("chain/coisometry", "V V* = P(all blocks but the truncated last)",
                   residual(chain.v @ chain.v.conj().T, chain.kept_projection()),
                   tol.residual_tol))

    for k, lv in enumerate(chain.levels):
        if k == 0:
            continue
        rep.add(clause(f"chain/level-{k}/defect-embeds", "W_k defect_(k-1) in defect_k",
                       lv.embed_residual, tol.residual_tol))
        rep.notes.append(
            f"level {k}: full algebra action moves the embedded previous defect by "
            f"{lv.containment_defect:.3e} (diagnostic; only the dynamics' image "
            "preserves it)")
    return rep


@dataclass(eq=False)
class DefectDecomposition:
    """The defect-space bookkeeping behind the two-sided matricial form."""

    chain: ExtensionChain
    delta: np.ndarray                 # (I - T*T)^(1/2) on H
    delta_h_basis: np.ndarray         # orthonormal basis of (delta H) inside H
    q_bases: list[np.ndarray]         # q_k basis inside defect-k coordinates
    dv_basis: np.ndarray              # ambient embedding of D_V (total x dv_dim)
    summand_dims: list[int]
    x_map: np.ndarray                 # defect-0 coords -> D_V coords
    row_map: np.ndarray               # K_V -> D_V coords (the defect row of U)
    rho1: RestrictedRep               # restriction of rho o alpha to D_V
    report: ClauseReport

    @property
    def dv_dim(self) -> int:
        return self.dv_basis.shape[1]


def defect_decomposition(chain: ExtensionChain,
                         tol: Tolerance = DEFAULT_TOL) -> DefectDecomposition:
    """Split the defect space of V into delta(H) and the per-level complements.

    The direct sum delta(H) + q_0(defect_0) + ... is not the defect subspace
    of V literally; the defect row [.. q_1 X delta] identifies the two
    canonically, which is certified by checking row* row = I - V* V and that
    the row is onto.
    """
    pair = chain.pair
    system = pair.system
    h = pair.space_dim
    defect = defect_operators(pair, tol)
    delta = defect.delta
    rep = ClauseReport()

    delta_h_basis, r_delta = orthonormal_span(delta, tol)

    level0 = chain.levels[0]
    w0 = level0.ext.isometry
    inner0 = level0.defect_basis.conj().T @ (w0 @ defect.delta_star)  # in defect-0 coords
    f0, f0_rank = orthonormal_span(inner0, tol)
    q0 = orthonormal_complement(f0, level0.dim, tol)
    if f0_rank + q0.shape[1] != level0.dim:
        raise DecompositionMismatch(
            f"defect-0 does not split: {f0_rank} + {q0.shape[1]} != {level0.dim}")
    q_bases = [q0]
    for k in range(1, chain.n_levels):
        lv = chain.levels[k]
        inner = lv.defect_basis.conj().T @ lv.ext.isometry
        fk, fk_rank = orthonormal_span(inner, tol)
        qk = orthonormal_complement(fk, lv.dim, tol)
        if fk_rank + qk.shape[1] != lv.dim:
            raise DecompositionMismatch(f"defect-{k} does not split")
        q_bases.append(qk)

    offs = chain.block_offsets
    summand_dims = [r_delta] + [q.shape[1] for q in q_bases]
    dv_dim = sum(summand_dims)
    dv_basis = np.zeros((chain.total_dim, dv_dim), dtype=complex)
    col = 0
    dv_basis[:h, col:col + r_delta] = delta_h_basis
    col += r_delta
    for k, q in enumerate(q_bases):
        lo = offs[k + 1]
        dv_basis[lo:lo + chain.block_dims[k + 1], col:col + q.shape[1]] = q
        col += q.shape[1]

    # X = (-T* W*|span(W delta* H)) + q_0, mapping defect-0 into D_V
    t = pair.contraction
    x_map = np.zeros((dv_dim, level0.dim), dtype=complex)
    upper = delta_h_basis.conj().T @ (-t.conj().T) @ w0.conj().T \
        @ level0.defect_basis @ (f0 @ f0.conj().T)
    x_map[:r_delta, :] = upper
    x_map[r_delta:r_delta + q0.shape[1], :] = q0.conj().T

    # T delta = delta_star T (used implicitly by X mapping into delta H)
    rep.add(clause("defect/intertwine", "T (I-T*T)^1/2 = (I-TT*)^1/2 T",
                   residual(t @ delta, defect.delta_star @ t), tol.residual_tol))

    # defect row of the two-sided form, one column block per chain block
    row_map = np.zeros((dv_dim, chain.total_dim), dtype=complex)
    row_map[:r_delta, :h] = delta_h_basis.conj().T @ delta
    row_map[:, offs[1]:offs[1] + level0.dim] = x_map
    col = r_delta + q0.shape[1]
    for k in range(1, chain.n_levels):
        lo = offs[k + 1]
        nk = chain.block_dims[k + 1]
        row_map[col:col + q_bases[k].shape[1], lo:lo + nk] = q_bases[k].conj().T
        col += q_bases[k].shape[1]

    eye = np.eye(chain.total_dim, dtype=complex)
    gram_res = residual(row_map.conj().T @ row_map, eye - chain.v.conj().T @ chain.v)
    rep.add(clause("defect/row-gram", "row* row = I - V* V", gram_res, tol.residual_tol))
    _, row_rank = orthonormal_span(row_map.conj().T, tol)
    rep.add(clause("defect/row-onto", "defect row maps onto D_V",
                   0.0 if row_rank == dv_dim else 1.0, 0.5,
                   note=f"rank {row_rank} of {dv_dim}"))
    rep.notes.append("D_V is identified with the defect space of V through the "
                     "polar part of the defect row; the two subspaces of the chain "
                     "space differ in general")

    shifted = ShiftedRep(chain.rho, system, 1)
    d = usable_depth(system, [chain.rho], 1, pair.depth)
    inv = 0.0
    proj_off = eye - dv_basis @ dv_basis.conj().T
    for a in system.basis(d):
        inv = max(inv, spectral_norm(proj_off @ shifted(a) @ dv_basis))
    rep.add(clause("defect/invariant", "rho(alpha(a)) preserves D_V",
                   inv, tol.residual_tol))
    rho1 = RestrictedRep(shifted, dv_basis)

    # rho1 must agree with the block-diagonal compressions onto the summands
    block_res = 0.0
    for a in system.basis(d):
        aa = system.alpha_apply(a)
        parts = [delta_h_basis.conj().T @ pair.rep(aa) @ delta_h_basis]
        for k, q in enumerate(q_bases):
            parts.append(q.conj().T @ chain.levels[k].pi_hat(aa) @ q)
        block_res = max(block_res, residual(rho1(a), block_diag(parts)))
    rep.add(clause("defect/diagonal-form", "rho1 = diag of summand compressions",
                   block_res, tol.residual_tol))

    if not rep.clauses[1].passed or not rep.clauses[2].passed:
        raise DecompositionMismatch("defect row fails to identify D_V with the "
                                    "defect space of V")
    return DefectDecomposition(chain, delta, delta_h_basis, q_bases, dv_basis,
                               summand_dims, x_map, row_map, rho1, rep)


def restrict_chain(chain: ExtensionChain, n_levels: int) -> ExtensionChain:
    """The chain truncated to its first ``n_levels`` blocks (for consistency tests)."""
    if n_levels < 1 or n_levels > chain.n_levels:
        raise LevelMismatch(f"cannot restrict to {n_levels} levels")
    levels = chain.levels[:n_levels]
    block_dims = chain.block_dims[:n_levels + 1]
    total = sum(block_dims)
    v = chain.v[:total, :total].copy()
    lo = sum(block_dims[:-1])
    v[lo:, :] = 0.0  # the new last row is truncated
    rho = DirectSumRep(tuple([chain.pair.rep] + [lv.pi_hat for lv in levels]))
    return ExtensionChain(chain.pair, chain.strategies[:n_levels], levels, rho, v,
                          chain.block_names[:n_levels + 1], block_dims,
                          chain.basis_seed)
