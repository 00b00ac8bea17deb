"""Minimal isometric dilations and the two routes to a unitary dilation.

``schaffer_dilate`` builds the truncated lower corner of the classical
Schaffer matrix for a covariant pair: ``T`` in the corner, the defect of
``T`` below it, then an identity subdiagonal through ``copies`` copies of
the defect space, with the last copy mapping to nothing.  Feeding it the
assembled coisometric extension of a pair produces a unitary dilation on
the interior of the truncation window (``unitary_dilate``), and
``explicit_matricial_unitary`` assembles the same object directly from the
two-sided block form, giving an independent construction the equivalence
module can compare against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covariant import (CovariantPair, DirectSumRep, RestrictedRep,
                        ShiftedRep, defect_operators, usable_depth)
from .errors import (DepthExceeded, NotContraction, ShapeMismatch,
                     StrategyInvalid)
from .extension import (ExtensionChain, coisometric_extend,
                        defect_decomposition)
from .numerics import (DEFAULT_TOL, Tolerance, orthonormal_span, residual,
                       spectral_norm)
from .report import ClauseReport, clause

BOUNDARY_NOTE = ("unitarity is asserted on the interior window only; the two "
                 "truncation-boundary blocks are reported separately and never "
                 "silently passed")
MINIMALITY_NOTE = ("minimality is the invariant-subspace form: the smallest "
                   "subspace containing the source space and invariant under the "
                   "dilation is everything")


@dataclass(eq=False)
class DilationRecord:
    """A dilation with its block-index bookkeeping.

    ``block_index`` assigns each block its two-sided position: negative
    indices for the extension defects, 0 for the source corner, positive for
    the defect copies of the dilation.
    """

    kind: str                       # isometric | unitary-composed | unitary-explicit
    block_names: list[str]
    block_dims: list[int]
    block_index: list[int]
    eta: object                     # block-diagonal representation on the ambient space
    w: np.ndarray                   # the dilation operator
    source_pair: CovariantPair
    source_embed: np.ndarray        # ambient x source_dim, isometric
    copies: int
    origin_pair: Optional[CovariantPair] = None   # the original (pi, T) when composed
    origin_embed: Optional[np.ndarray] = None
    chain: Optional[ExtensionChain] = None
    report: Optional[ClauseReport] = None
    boundary_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    boundary_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)

    def block_offsets(self) -> list[int]:
        offs = []
        o = 0
        for d in self.block_dims:
            offs.append(o)
            o += d
        return offs

    def index_table(self) -> list[dict]:
        offs = self.block_offsets()
        return [{"name": n, "index": i, "dim": d, "offset": o}
                for n, i, d, o in zip(self.block_names, self.block_index,
                                      self.block_dims, offs)]


def schaffer_dilate(pair: CovariantPair, copies: int,
                    tol: Tolerance = DEFAULT_TOL) -> DilationRecord:
    """Truncated minimal isometric dilation of a covariant pair."""
    if copies < 1:
        raise StrategyInvalid("at least one defect copy required")
    system = pair.system
    if system.is_tower:
        if pair.depth is None:
            raise DepthExceeded("tower pairs need an explicit check depth")
        if pair.depth + copies > system.d_max:
            raise DepthExceeded(
                f"depth budget {pair.depth} + {copies} exceeds d_max {system.d_max}")
    if pair.norm() > 1.0 + tol.rank_eps:
        raise NotContraction(f"||T|| = {pair.norm():.12f} exceeds 1")

    defect = defect_operators(pair, tol)
    basis, r = orthonormal_span(defect.delta, tol)
    h = pair.space_dim
    dims = [h] + [r] * copies
    total = h + copies * r
    w = np.zeros((total, total), dtype=complex)
    w[:h, :h] = pair.contraction
    if r:
        w[h:h + r, :h] = basis.conj().T @ defect.delta
        for j in range(1, copies):
            lo = h + j * r
            w[lo:lo + r, lo - r:lo] = np.eye(r, dtype=complex)

    parts = [pair.rep] + [RestrictedRep(ShiftedRep(pair.rep, system, n), basis)
                          for n in range(1, copies + 1)]
    eta = DirectSumRep(tuple(parts))
    embed = np.zeros((total, h), dtype=complex)
    embed[:h, :] = np.eye(h)
    names = ["H"] + [f"copy-{j}" for j in range(1, copies + 1)]
    index = list(range(0, copies + 1))
    last = np.arange(total - r, total) if r else np.zeros(0, dtype=int)
    return DilationRecord("isometric", names, dims, index, eta, w, pair, embed,
                          copies, origin_pair=pair, origin_embed=embed,
                          boundary_rows=np.zeros(0, dtype=int), boundary_cols=last)


def verify_isometric_dilation(rec: DilationRecord, source: CovariantPair = None,
                              tol: Tolerance = DEFAULT_TOL) -> ClauseReport:
    """Covariance, truncated isometry, dilation identity, minimality and
    coisometry inheritance for an isometric record.

    ``source`` defaults to the record's own provenance; passing it checks the
    record against an externally held pair.
    """
    pair = rec.source_pair if source is None else source
    if pair.space_dim != rec.source_pair.space_dim or \
            residual(pair.contraction, rec.source_pair.contraction) > tol.residual_tol:
        raise ShapeMismatch("supplied source pair does not match the record")
    system = pair.system
    rep = ClauseReport()
    rep.notes.append(MINIMALITY_NOTE)
    t = pair.contraction
    h = pair.space_dim
    total = rec.total_dim

    d = usable_depth(system, [rec.eta], 1, pair.depth)
    if system.is_tower and d == 0:
        rep.notes.append("covariance window reduced to basis depth 0 by the "
                         "truncation budget (scalars only)")
    cov = 0.0
    for a in system.basis(d):
        aa = system.alpha_apply(a)
        cov = max(cov, residual(rec.w @ rec.eta(aa), rec.eta(a) @ rec.w))
    rep.add(clause("dilation/covariance", "W eta(alpha(a)) = eta(a) W",
                   cov, tol.residual_tol))

    # defect-space invariance under pi o alpha^n, needed for eta's diagonal
    copy_dim = rec.block_dims[1] if len(rec.block_dims) > 1 else 0
    if copy_dim and h:
        bd = rec.eta.parts[1].basis
        inv = 0.0
        proj_off = np.eye(h, dtype=complex) - bd @ bd.conj().T
        for n in range(1, rec.copies + 1):
            dd = usable_depth(system, [pair.rep], n, pair.depth if d is None else d)
            for a in system.basis(dd):
                img = pair.rep(system.alpha_apply(a, n))
                inv = max(inv, spectral_norm(proj_off @ img @ bd))
        rep.add(clause("dilation/defect-invariant",
                       "pi(alpha^n(a)) preserves the defect space",
                       inv, tol.residual_tol))

    keep = np.eye(total, dtype=complex)
    for i in rec.boundary_cols:
        keep[i, i] = 0.0
    rep.add(clause("dilation/isometry", "W* W = P(all copies but the truncated last)",
                   residual(rec.w.conj().T @ rec.w, keep), tol.residual_tol))

    dil = 0.0
    power = np.eye(total, dtype=complex)
    tpower = np.eye(h, dtype=complex)
    e = rec.source_embed
    for n in range(rec.copies + 1):
        dil = max(dil, residual(e.conj().T @ power @ e, tpower))
        power = rec.w @ power
        tpower = t @ tpower
    rep.add(clause("dilation/compression", "P_H W^n |H = T^n (0 <= n <= copies)",
                   dil, tol.residual_tol))

    cols = []
    power = np.eye(total, dtype=complex)
    for n in range(rec.copies + 1):
        cols.append(power @ e)
        power = rec.w @ power
    _, rank = orthonormal_span(np.hstack(cols), tol)
    rep.add(clause("dilation/minimal", "span{W^n H} = K",
                   0.0 if rank == total else 1.0, 0.5,
                   note=f"rank {rank} of {total}"))

    coiso_cond = spectral_norm(np.eye(h) - t @ t.conj().T)
    if coiso_cond <= tol.residual_tol:
        res = spectral_norm((np.eye(total) - rec.w @ rec.w.conj().T) @ keep)
        rep.add(clause("dilation/coisometry-inherited",
                       "(I - W W*) P(kept) = 0 when T is a coisometry",
                       res, tol.residual_tol))
    else:
        rep.notes.append(f"coisometry-inheritance clause not applicable: "
                         f"||I - T T*|| = {coiso_cond:.3e}")
    return rep


def unitary_dilate(pair: CovariantPair, n_levels: int, copies: int, strategy,
                   tol: Tolerance = DEFAULT_TOL,
                   basis_seed: Optional[int] = None) -> DilationRecord:
    """Unitary dilation by composing the coisometric extension with the
    isometric dilation; unitarity holds on the interior of the window."""
    chain = coisometric_extend(pair, n_levels, strategy, tol, basis_seed)
    return compose_unitary(chain, copies, tol)


def compose_unitary(chain: ExtensionChain, copies: int,
                    tol: Tolerance = DEFAULT_TOL) -> DilationRecord:
    """The composed route applied to an already assembled extension chain."""
    pair = chain.pair
    system = pair.system
    if system.is_tower and pair.depth is not None and pair.depth < copies:
        raise DepthExceeded(
            f"composed dilation needs check depth >= copies ({pair.depth} < {copies})")
    cpair = chain.as_pair()
    rec = schaffer_dilate(cpair, copies, tol)

    h = pair.space_dim
    total = rec.total_dim
    origin_embed = np.zeros((total, h), dtype=complex)
    origin_embed[:h, :] = np.eye(h)
    # boundary blocks: the truncated last chain block (rows) and the last copy (cols)
    chain_last_off = chain.block_offsets[-1]
    chain_last_dim = chain.block_dims[-1]
    rows = np.arange(chain_last_off, chain_last_off + chain_last_dim)
    rec2 = DilationRecord("unitary-composed", rec.block_names, rec.block_dims,
                          rec.block_index, rec.eta, rec.w, cpair, rec.source_embed,
                          copies, origin_pair=pair, origin_embed=origin_embed,
                          chain=chain, boundary_rows=rows,
                          boundary_cols=rec.boundary_cols)
    rec2.report = _unitary_clauses(rec2, chain.n_levels, tol)
    return rec2


def _unitary_clauses(rec: DilationRecord, n_levels: int,
                     tol: Tolerance = DEFAULT_TOL) -> ClauseReport:
    rep = ClauseReport()
    rep.notes.append(BOUNDARY_NOTE)
    t = rec.origin_pair.contraction
    h = rec.origin_pair.space_dim
    total = rec.total_dim
    u = rec.w

    window = min(n_levels, rec.copies)
    dil = 0.0
    power = np.eye(total, dtype=complex)
    tpower = np.eye(h, dtype=complex)
    e = rec.origin_embed
    for n in range(window + 1):
        dil = max(dil, residual(e.conj().T @ power @ e, tpower))
        power = u @ power
        tpower = t @ tpower
    rep.add(clause("unitary/compression", "P_H U^n |H = T^n (0 <= n <= min(levels, copies))",
                   dil, tol.residual_tol))

    interior = np.eye(total, dtype=complex)
    for i in rec.boundary_rows:
        interior[i, i] = 0.0
    for i in rec.boundary_cols:
        interior[i, i] = 0.0
    eye = np.eye(total, dtype=complex)
    rep.add(clause("unitary/isometric-interior", "(U* U - I) P_int = 0",
                   spectral_norm((u.conj().T @ u - eye) @ interior), tol.residual_tol))
    rep.add(clause("unitary/coisometric-interior", "(U U* - I) P_int = 0",
                   spectral_norm((u @ u.conj().T - eye) @ interior), tol.residual_tol))

    row_b = spectral_norm((u @ u.conj().T - eye)[rec.boundary_rows][:, rec.boundary_rows]) \
        if rec.boundary_rows.size else 0.0
    col_b = spectral_norm((u.conj().T @ u - eye)[rec.boundary_cols][:, rec.boundary_cols]) \
        if rec.boundary_cols.size else 0.0
    rep.notes.append(f"boundary residuals (expected order 1 by truncation): "
                     f"rows {row_b:.3e}, columns {col_b:.3e}")
    return rep


def explicit_matricial_unitary(chain: ExtensionChain, copies: int,
                               tol: Tolerance = DEFAULT_TOL) -> DilationRecord:
    """Two-sided block form of the unitary dilation, assembled directly.

    Ambient order: defect-(N-1), ..., defect-0, H, then ``copies`` copies of
    the defect space of V; the defect row carries the per-level complements,
    the corner map and the defect of T, exactly one entry per column block.
    """
    if copies < 1:
        raise StrategyInvalid("at least one defect copy required")
    pair = chain.pair
    system = pair.system
    if system.is_tower and pair.depth is not None and pair.depth < copies:
        raise DepthExceeded(
            f"matricial dilation needs check depth >= copies ({pair.depth} < {copies})")
    dd = defect_decomposition(chain, tol)
    n = chain.n_levels
    h = pair.space_dim
    dv = dd.dv_dim

    # ambient blocks, most negative first
    names = [f"defect-{k}" for k in range(n - 1, -1, -1)] + ["H"] \
        + [f"copy-{j}" for j in range(1, copies + 1)]
    dims = [chain.block_dims[k + 1] for k in range(n - 1, -1, -1)] + [h] + [dv] * copies
    index = list(range(-n, 0)) + [0] + list(range(1, copies + 1))
    total = sum(dims)
    offs = []
    o = 0
    for d0 in dims:
        offs.append(o)
        o += d0

    def blk(name):
        i = names.index(name)
        return offs[i], dims[i]

    u = np.zeros((total, total), dtype=complex)
    ho, _ = blk("H")
    u[ho:ho + h, ho:ho + h] = pair.contraction
    for k in range(n):
        # D_{k*} sits in the row of the previous space, column of defect-k
        co, cd = blk(f"defect-{k}")
        if k == 0:
            ro, rd = ho, h
        else:
            ro, rd = blk(f"defect-{k - 1}")
        u[ro:ro + rd, co:co + cd] = chain.levels[k].d_star
    # the defect row: one entry per chain block, reassembled in ambient order
    c1o, _ = blk("copy-1")
    chain_offs = chain.block_offsets
    u[c1o:c1o + dv, ho:ho + h] = dd.row_map[:, :h]
    for k in range(n):
        co, cd = blk(f"defect-{k}")
        src = chain_offs[k + 1]
        u[c1o:c1o + dv, co:co + cd] = dd.row_map[:, src:src + cd]
    for j in range(1, copies):
        ro, _ = blk(f"copy-{j + 1}")
        co, _ = blk(f"copy-{j}")
        u[ro:ro + dv, co:co + dv] = np.eye(dv, dtype=complex)

    parts = []
    for k in range(n - 1, -1, -1):
        parts.append(chain.levels[k].pi_hat)
    parts.append(pair.rep)
    for j in range(copies):
        parts.append(ShiftedRep(dd.rho1, system, j) if j else dd.rho1)
    sigma = DirectSumRep(tuple(parts))

    src_embed = np.zeros((total, chain.total_dim), dtype=complex)
    src_embed[ho:ho + h, :h] = np.eye(h)
    for k in range(n):
        co, cd = blk(f"defect-{k}")
        src = chain_offs[k + 1]
        src_embed[co:co + cd, src:src + cd] = np.eye(cd)
    origin_embed = np.zeros((total, h), dtype=complex)
    origin_embed[ho:ho + h, :] = np.eye(h)

    bro, brd = blk(f"defect-{n - 1}") if n else (ho, 0)
    rows = np.arange(bro, bro + brd)
    cols_off, _ = blk(f"copy-{copies}")
    cols = np.arange(cols_off, cols_off + dv) if dv else np.zeros(0, dtype=int)

    rec = DilationRecord("unitary-explicit", names, dims, index, sigma, u,
                         chain.as_pair(), src_embed, copies, origin_pair=pair,
                         origin_embed=origin_embed, chain=chain,
                         boundary_rows=rows, boundary_cols=cols)
    rec.report = _matricial_clauses(rec, dd, tol)
    return rec


def _matricial_clauses(rec: DilationRecord, dd,
                       tol: Tolerance = DEFAULT_TOL) -> ClauseReport:
    rep = ClauseReport()
    rep.notes.append(BOUNDARY_NOTE)
    rep.extend(dd.report, prefix="")
    chain = rec.chain
    pair = chain.pair
    system = pair.system
    total = rec.total_dim
    u = rec.w

    d = usable_depth(system, [rec.eta], 1, pair.depth)
    if system.is_tower and d == 0:
        rep.notes.append("covariance window reduced to basis depth 0 by the "
                         "truncation budget (scalars only)")
    cov = 0.0
    for a in system.basis(d):
        aa = system.alpha_apply(a)
        cov = max(cov, residual(u @ rec.eta(aa), rec.eta(a) @ u))
    rep.add(clause("matricial/covariance", "U sigma(alpha(a)) = sigma(a) U",
                   cov, tol.residual_tol))

    interior = np.eye(total, dtype=complex)
    for i in rec.boundary_rows:
        interior[i, i] = 0.0
    for i in rec.boundary_cols:
        interior[i, i] = 0.0
    eye = np.eye(total, dtype=complex)
    rep.add(clause("matricial/isometric-interior", "(U* U - I) P_int = 0",
                   spectral_norm((u.conj().T @ u - eye) @ interior), tol.residual_tol))
    rep.add(clause("matricial/coisometric-interior", "(U U* - I) P_int = 0",
                   spectral_norm((u @ u.conj().T - eye) @ interior), tol.residual_tol))

    # compressions: to the chain pair and to the original corner
    e = rec.source_embed
    vpow = np.eye(chain.total_dim, dtype=complex)
    upow = np.eye(total, dtype=complex)
    res_v = 0.0
    for nn in range(rec.copies + 1):
        res_v = max(res_v, residual(e.conj().T @ upow @ e, vpow))
        upow = u @ upow
        vpow = chain.v @ vpow
    rep.add(clause("matricial/restricts-to-extension", "P_KV U^n |KV = V^n",
                   res_v, tol.residual_tol))

    h = pair.space_dim
    eh = rec.origin_embed
    upow = np.eye(total, dtype=complex)
    tpow = np.eye(h, dtype=complex)
    res_t = 0.0
    for nn in range(rec.copies + 1):
        res_t = max(res_t, residual(eh.conj().T @ upow @ eh, tpow))
        upow = u @ upow
        tpow = pair.contraction @ tpow
    rep.add(clause("matricial/compression", "P_H U^n |H = T^n",
                   res_t, tol.residual_tol))
    return rep
