"""Depth-graded tensor tower backend: the genuinely non-automorphic dynamics.

Stages are the matrix algebras A_d = M_{k^d}, embedded into each other by
x -> x tensor 1.  The dynamics is the tensor shift x -> 1 tensor x, a
unital injective *-homomorphism that raises the depth by one and is never
surjective, so the non-uniqueness phenomena that collapse on a fixed
finite-dimensional algebra appear here at desk scale.  Transfer operators
come from states on the local factor M_k: tau_phi = phi tensor id.

Every construction engine sees the tower through the same protocol as the
finite backend, with depth bookkeeping: each application of the dynamics
consumes one depth unit, and constructors validate their depth budget up
front.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
import numpy as np

from .algebra import FiniteDimCStarAlgebra, Representation, StarHom
from .covariant import CovariantPair, covariant_pair
from .cpmaps import CPMap
from .errors import (DepthExceeded, DepthZero, RangeNotInImage, ShapeMismatch,
                     SizeCap, StrategyInvalid)
from .numerics import DEFAULT_TOL, Tolerance, as_matrix


@dataclass(frozen=True)
class ShiftTower:
    """The graded family A_d = M_{k^d}, d <= d_max, under the tensor shift."""

    k: int
    d_max: int
    size_cap: int = 256

    def __post_init__(self):
        if self.k < 2:
            raise ShapeMismatch("local dimension k must be at least 2")
        if self.d_max < 1:
            raise ShapeMismatch("d_max must be at least 1")
        if self.k ** self.d_max > self.size_cap:
            raise SizeCap(f"k^d_max = {self.k ** self.d_max} exceeds the size cap "
                          f"{self.size_cap}")

    def stage_dim(self, depth: int) -> int:
        return self.k ** depth

    def stage(self, depth: int) -> FiniteDimCStarAlgebra:
        self._check_depth(depth)
        return FiniteDimCStarAlgebra((self.stage_dim(depth),))

    def unit(self, depth: int) -> "GradedElement":
        self._check_depth(depth)
        return GradedElement(self, depth, np.eye(self.stage_dim(depth), dtype=complex))

    def element(self, depth: int, mat) -> "GradedElement":
        self._check_depth(depth)
        m = as_matrix(mat)
        n = self.stage_dim(depth)
        if m.shape != (n, n):
            raise ShapeMismatch(f"stage-{depth} element must be {n} x {n}")
        return GradedElement(self, depth, m)

    def basis(self, depth: int) -> tuple["GradedElement", ...]:
        self._check_depth(depth)
        return _graded_basis(self, depth)

    def _check_depth(self, depth: int) -> None:
        if depth < 0 or depth > self.d_max:
            raise DepthExceeded(f"depth {depth} outside 0..{self.d_max}")


@functools.lru_cache(maxsize=None)
def _graded_basis(tower: ShiftTower, depth: int):
    n = tower.stage_dim(depth)
    out = []
    for p in range(n):
        for q in range(n):
            m = np.zeros((n, n), dtype=complex)
            m[p, q] = 1.0
            out.append(GradedElement(tower, depth, m))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class GradedElement:
    """An element of one stage; operations embed to the deeper stage first."""

    tower: ShiftTower
    depth: int
    mat: np.ndarray

    @property
    def coords(self) -> np.ndarray:
        return self.mat.reshape(-1)

    def adjoint(self) -> "GradedElement":
        return GradedElement(self.tower, self.depth, self.mat.conj().T)

    def norm(self) -> float:
        return float(np.linalg.norm(self.mat, 2)) if self.mat.size else 0.0

    def __add__(self, other: "GradedElement") -> "GradedElement":
        a, b = _common_depth(self, other)
        return GradedElement(self.tower, a.depth, a.mat + b.mat)

    def __sub__(self, other: "GradedElement") -> "GradedElement":
        a, b = _common_depth(self, other)
        return GradedElement(self.tower, a.depth, a.mat - b.mat)

    def __mul__(self, other):
        if isinstance(other, GradedElement):
            a, b = _common_depth(self, other)
            return GradedElement(self.tower, a.depth, a.mat @ b.mat)
        return GradedElement(self.tower, self.depth, complex(other) * self.mat)

    def __rmul__(self, scalar) -> "GradedElement":
        return GradedElement(self.tower, self.depth, complex(scalar) * self.mat)


def _common_depth(a: GradedElement, b: GradedElement):
    if a.tower is not b.tower and a.tower != b.tower:
        raise ShapeMismatch("elements of different towers")
    d = max(a.depth, b.depth)
    return embed(a, d), embed(b, d)


def embed(x: GradedElement, depth: int) -> GradedElement:
    """x tensor 1 up to the requested stage; unital, injective, multiplicative."""
    if depth < x.depth:
        raise DepthExceeded(f"cannot embed depth {x.depth} into shallower {depth}")
    if depth > x.tower.d_max:
        raise DepthExceeded(f"depth {depth} exceeds d_max {x.tower.d_max}")
    if depth == x.depth:
        return x
    pad = x.tower.k ** (depth - x.depth)
    return GradedElement(x.tower, depth, np.kron(x.mat, np.eye(pad, dtype=complex)))


def shift_alpha(x: GradedElement) -> GradedElement:
    """The dynamics 1 tensor x; depth rises by one and is never surjective."""
    if x.depth + 1 > x.tower.d_max:
        raise DepthExceeded(f"shift from depth {x.depth} exceeds d_max {x.tower.d_max}")
    return GradedElement(x.tower, x.depth + 1,
                         np.kron(np.eye(x.tower.k, dtype=complex), x.mat))


def state_density(tower: ShiftTower, phi) -> np.ndarray:
    """Normalize a state specification on M_k to its density matrix.

    Accepts the name ``"trace"``, a unit vector of dimension k (giving the
    vector state), or a k x k density matrix of trace one.
    """
    k = tower.k
    if isinstance(phi, str):
        if phi == "trace":
            return np.eye(k, dtype=complex) / k
        raise StrategyInvalid(f"unknown state name {phi!r}")
    arr = np.asarray(phi, dtype=complex)
    if arr.ndim == 2:
        if arr.shape != (k, k):
            raise ShapeMismatch(f"density must be {k} x {k}")
        tr = complex(np.trace(arr))
        if abs(tr - 1.0) > 1e-12:
            raise StrategyInvalid(f"density trace {tr} is not 1")
        return arr
    v = arr.reshape(-1)
    if v.size != k:
        raise ShapeMismatch(f"state vector must have dimension {k}")
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def transfer_phi(tower: ShiftTower, phi, y: GradedElement) -> GradedElement:
    """tau_phi(y) = (phi tensor id)(y); completely positive, unital left
    inverse of the shift."""
    rho = state_density(tower, phi)
    return TowerTransfer(tower, rho)(y)


@dataclass(frozen=True, eq=False)
class TowerTransfer:
    """The transfer operator tau_phi as a graded callable."""

    tower: ShiftTower
    density: np.ndarray

    def __call__(self, y: GradedElement) -> GradedElement:
        if y.depth == 0:
            raise DepthZero("transfer operators are undefined at depth 0")
        k = self.tower.k
        n = self.tower.stage_dim(y.depth - 1)
        y4 = y.mat.reshape(k, n, k, n)
        out = np.einsum("qp,piqj->ij", self.density, y4)
        return GradedElement(self.tower, y.depth - 1, out)

    def as_cpmap(self, depth: int) -> CPMap:
        """Depth-fixed finite view A_depth -> A_{depth-1}."""
        if depth < 1:
            raise DepthZero("transfer view needs depth >= 1")
        src = self.tower.stage(depth)
        dst = self.tower.stage(depth - 1)
        cols = [dst.element([self(b).mat]).coords for b in self.tower.basis(depth)]
        return CPMap(src, dst, np.column_stack(cols))


@dataclass(frozen=True, eq=False)
class TowerExpectation:
    """E_phi = shift o tau_phi, the induced conditional expectation."""

    tower: ShiftTower
    density: np.ndarray

    def __call__(self, y: GradedElement) -> GradedElement:
        return shift_alpha(TowerTransfer(self.tower, self.density)(y))

    def as_cpmap(self, depth: int) -> CPMap:
        if depth < 1:
            raise DepthZero("expectation view needs depth >= 1")
        alg = self.tower.stage(depth)
        cols = [alg.element([self(b).mat]).coords for b in self.tower.basis(depth)]
        return CPMap(alg, alg, np.column_stack(cols))


def alpha_hom(tower: ShiftTower, depth: int) -> StarHom:
    """Depth-fixed view of the shift as a map A_depth -> A_{depth+1}."""
    if depth + 1 > tower.d_max:
        raise DepthExceeded(f"shift view from depth {depth} exceeds d_max")
    src = tower.stage(depth)
    dst = tower.stage(depth + 1)
    cols = [dst.element([shift_alpha(b).mat]).coords for b in tower.basis(depth)]
    return StarHom(src, dst, np.column_stack(cols))


@dataclass(frozen=True, eq=False)
class TowerRep:
    """Depth-compatible representation family pi_d(x) = (x tensor 1) tensor I_m."""

    tower: ShiftTower
    top_depth: int
    multiplicity: int

    @property
    def dim(self) -> int:
        return self.tower.stage_dim(self.top_depth) * self.multiplicity

    @property
    def max_depth(self) -> int:
        return self.top_depth

    def __call__(self, x: GradedElement) -> np.ndarray:
        full = embed(x, self.top_depth).mat
        if self.multiplicity == 1:
            return full
        return np.kron(full, np.eye(self.multiplicity, dtype=complex))

    def view(self, depth: int) -> Representation:
        """Finite Representation of the stage algebra, for the standard checks."""
        alg = self.tower.stage(depth)
        return Representation.from_images(alg, [self(b) for b in self.tower.basis(depth)])


def standard_rep(tower: ShiftTower, depth: int, multiplicity: int = 1) -> TowerRep:
    if depth < 1 or depth > tower.d_max:
        raise DepthExceeded(f"representation depth {depth} outside 1..{tower.d_max}")
    if multiplicity < 1:
        raise ShapeMismatch("multiplicity must be positive")
    if tower.stage_dim(depth) * multiplicity > tower.size_cap:
        raise SizeCap(f"k^depth * multiplicity = "
                      f"{tower.stage_dim(depth) * multiplicity} exceeds the size cap")
    return TowerRep(tower, depth, multiplicity)


@dataclass(frozen=True, eq=False)
class TowerSystem:
    """Engine protocol adapter for the tower backend."""

    tower: ShiftTower

    is_tower = True

    @property
    def d_max(self) -> int:
        return self.tower.d_max

    def basis(self, depth: int):
        return self.tower.basis(depth)

    def unit(self, depth: int) -> GradedElement:
        return self.tower.unit(depth)

    def algebra_view(self, depth: int) -> FiniteDimCStarAlgebra:
        return self.tower.stage(depth)

    def alpha_apply(self, x: GradedElement, n: int = 1) -> GradedElement:
        for _ in range(n):
            x = shift_alpha(x)
        return x

    def coords(self, x: GradedElement, depth: int) -> np.ndarray:
        return embed(x, depth).coords

    def element_from_coords(self, coords, depth: int) -> GradedElement:
        n = self.tower.stage_dim(depth)
        return GradedElement(self.tower, depth,
                             np.asarray(coords, dtype=complex).reshape(n, n))

    def left_mult(self, x: GradedElement, depth: int) -> np.ndarray:
        n = self.tower.stage_dim(depth)
        return np.kron(embed(x, depth).mat, np.eye(n, dtype=complex))

    def alpha_coord_matrix(self, depth: int) -> np.ndarray:
        return alpha_hom(self.tower, depth).matrix

    def stinespring_depth(self, pair_depth: int) -> int:
        if pair_depth is None:
            raise DepthExceeded("tower constructions need an explicit check depth")
        return pair_depth + 1

    def solve_alpha(self, y: GradedElement, tol: Tolerance = DEFAULT_TOL) -> GradedElement:
        if y.depth == 0:
            raise DepthZero("cannot invert the shift below depth 1")
        m = self.alpha_coord_matrix(y.depth - 1)
        rhs = y.coords
        sol, _, _, _ = np.linalg.lstsq(m, rhs, rcond=None)
        off = np.linalg.norm(m @ sol - rhs)
        if off > tol.residual_tol * (1.0 + np.linalg.norm(rhs)):
            raise RangeNotInImage(f"element misses the image of the shift by {off:.3e}")
        return self.element_from_coords(sol, y.depth - 1)

    def transfer_check_data(self, tau, depth: int):
        if not isinstance(tau, TowerTransfer):
            raise StrategyInvalid("tower backend expects a TowerTransfer")
        return tau.as_cpmap(depth), alpha_hom(self.tower, depth - 1)

    def expectation_check_data(self, e, depth: int):
        if not isinstance(e, TowerExpectation):
            raise StrategyInvalid("tower backend expects a TowerExpectation")
        return e.as_cpmap(depth), alpha_hom(self.tower, depth - 1)


def shift_down_pair(tower: ShiftTower, depth: int, multiplicity: int,
                    scale: float, u, v,
                    tol: Tolerance = DEFAULT_TOL) -> CovariantPair:
    """Covariant pair fixture: T = scale (R tensor I_m) with
    R(xi_1 tensor xi') = <u, xi_1> (xi' tensor v) on the stage-``depth`` space.

    The check depth of the pair is depth - 1 (one shift must stay inside the
    representation).  ``u`` and ``v`` are normalized.
    """
    if not 0.0 <= scale <= 1.0:
        raise ShapeMismatch("scale must lie in [0, 1]")
    rep = standard_rep(tower, depth, multiplicity)
    k = tower.k
    uu = np.asarray(u, dtype=complex).reshape(-1)
    vv = np.asarray(v, dtype=complex).reshape(-1)
    if uu.size != k or vv.size != k:
        raise ShapeMismatch(f"u and v must have dimension {k}")
    uu = uu / np.linalg.norm(uu)
    vv = vv / np.linalg.norm(vv)
    rest = tower.stage_dim(depth - 1)
    r = np.kron(np.eye(rest, dtype=complex), vv.reshape(k, 1)) \
        @ np.kron(uu.conj().reshape(1, k), np.eye(rest, dtype=complex))
    t = scale * np.kron(r, np.eye(multiplicity, dtype=complex))
    system = TowerSystem(tower)
    return covariant_pair(system, rep, t, depth=depth - 1, tol=tol)
