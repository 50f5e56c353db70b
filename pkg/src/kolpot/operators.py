"""Structure of the degenerate parabolic operator and its homogeneous group.

The operator acts on R^n x R_t as

    L u = div(A grad u) + <B x, grad u> - du/dt

with constant n x n matrices in block form: A carries a symmetric
positive-definite p0 x p0 block A0 in the top-left corner (zero elsewhere),
and B has full-row-rank blocks B_1, ..., B_r on the first subdiagonal of the
partition n = p0 + p1 + ... + pr.  Under these assumptions R^{n+1} carries a
homogeneous Lie group structure

    (x, t) o (xi, tau) = (xi + E(tau) x, t + tau),      E(tau) = exp(-tau B),

with anisotropic dilations D(lam) = diag(lam I_{p0}, lam^3 I_{p1}, ...,
lam^{2r+1} I_{pr}) on space and lam^2 on time.  The determinant of the full
dilation matrix is lam^Q; Q is the homogeneous dimension.

B is nilpotent by construction (B^{r+1} = 0 exactly), so E(tau) is the finite
sum of r+1 terms and everything here is polynomial in tau.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BlockSizeMonotonicityViolated,
    DimensionMismatch,
    NonPositiveLambda,
    NonSymmetricA0,
    NotPositiveDefiniteA0,
    RankDeficientBlock,
)

__all__ = [
    "GroupPoint",
    "OperatorSpec",
    "validate_operator",
    "group_compose",
    "group_inverse",
    "dilate",
    "transport_matrix",
    "dilation_matrix",
    "operator_hash",
    "heat_operator",
    "kolmogorov_prototype",
    "chain_operator",
]


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point z = (x, t) of the homogeneous group on R^{n+1}."""

    x: np.ndarray
    t: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if x.ndim != 1 or not np.all(np.isfinite(x)) or not math.isfinite(self.t):
            raise DimensionMismatch("group point must have finite 1-d spatial part")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    def __repr__(self):
        return f"GroupPoint(x={np.array2string(self.x, separator=', ')}, t={self.t})"


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Validated block data of one operator, plus derived group constants.

    ``weights`` holds the spatial dilation exponent of each coordinate
    (1 for the first p0, 3 for the next p1, ...); time always scales with
    exponent 2.  ``B_powers`` caches I, B, ..., B^r for the nilpotent
    exponential.
    """

    n: int
    block_sizes: tuple[int, ...]
    A0: np.ndarray
    B_blocks: tuple[np.ndarray, ...]
    A: np.ndarray
    B: np.ndarray
    Q: int
    weights: tuple[int, ...]
    B_powers: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def r(self) -> int:
        """Number of subdiagonal blocks (nilpotency index of B is r+1)."""
        return len(self.block_sizes) - 1

    @property
    def p0(self) -> int:
        return self.block_sizes[0]

    @property
    def is_heat(self) -> bool:
        """True when B = 0 and A0 = I, i.e. the classical heat operator."""
        return self.r == 0 and np.array_equal(self.A0, np.eye(self.n))

    def origin(self) -> GroupPoint:
        return GroupPoint(np.zeros(self.n), 0.0)

    def point(self, x, t) -> GroupPoint:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.n,):
            raise DimensionMismatch(f"expected spatial dimension {self.n}, got {x.shape}")
        return GroupPoint(x, float(t))


def validate_operator(n, block_sizes, A0, B_blocks=()) -> OperatorSpec:
    """Assemble and validate an operator from its blocks.

    Checks: block sizes positive, non-increasing and summing to n; A0
    symmetric positive definite; every B_j of full row rank p_j.  Returns the
    assembled spec with the homogeneous dimension Q = sum (2j+1) p_j + 2.
    """
    block_sizes = tuple(int(p) for p in block_sizes)
    if len(block_sizes) == 0 or any(p < 1 for p in block_sizes):
        raise DimensionMismatch("block sizes must be a nonempty list of positive integers")
    if any(block_sizes[j] < block_sizes[j + 1] for j in range(len(block_sizes) - 1)):
        raise BlockSizeMonotonicityViolated(f"block sizes must be non-increasing: {block_sizes}")
    if sum(block_sizes) != n:
        raise DimensionMismatch(f"block sizes {block_sizes} do not sum to n={n}")

    A0 = np.asarray(A0, dtype=float)
    p0 = block_sizes[0]
    if A0.shape != (p0, p0):
        raise DimensionMismatch(f"A0 must be {p0}x{p0}, got {A0.shape}")
    if not np.allclose(A0, A0.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A0).max())):
        raise NonSymmetricA0("A0 must be symmetric")
    A0 = 0.5 * (A0 + A0.T)
    eigvals = np.linalg.eigvalsh(A0)
    if eigvals.min() <= 1e-10 * np.linalg.norm(A0, 2):
        raise NotPositiveDefiniteA0(f"A0 smallest eigenvalue {eigvals.min():g} is not positive")

    B_blocks = tuple(np.asarray(Bj, dtype=float) for Bj in B_blocks)
    if len(B_blocks) != len(block_sizes) - 1:
        raise DimensionMismatch(
            f"expected {len(block_sizes) - 1} drift blocks, got {len(B_blocks)}"
        )
    for j, Bj in enumerate(B_blocks, start=1):
        pj, pjm1 = block_sizes[j], block_sizes[j - 1]
        if Bj.shape != (pj, pjm1):
            raise DimensionMismatch(f"B_{j} must be {pj}x{pjm1}, got {Bj.shape}")
        sv = np.linalg.svd(Bj, compute_uv=False)
        if sv.min() <= 1e-10 * sv.max():
            raise RankDeficientBlock(j)

    A = np.zeros((n, n))
    A[:p0, :p0] = A0
    B = np.zeros((n, n))
    offs = np.concatenate(([0], np.cumsum(block_sizes)))
    for j, Bj in enumerate(B_blocks, start=1):
        B[offs[j]:offs[j + 1], offs[j - 1]:offs[j]] = Bj

    r = len(block_sizes) - 1
    powers = [np.eye(n)]
    for _ in range(r):
        powers.append(powers[-1] @ B)
    # nilpotency must be exact: zero pattern forced by the block structure
    if not np.all(powers[-1] @ B == 0.0):
        raise DimensionMismatch("drift matrix is not nilpotent of index r+1")

    Q = sum((2 * j + 1) * p for j, p in enumerate(block_sizes)) + 2
    weights = tuple(2 * j + 1 for j, p in enumerate(block_sizes) for _ in range(p))
    return OperatorSpec(
        n=n,
        block_sizes=block_sizes,
        A0=A0,
        B_blocks=B_blocks,
        A=A,
        B=B,
        Q=Q,
        weights=weights,
        B_powers=tuple(powers),
    )


def transport_matrix(tau: float, spec: OperatorSpec) -> np.ndarray:
    """E(tau) = exp(-tau B), computed as the finite nilpotent sum."""
    E = np.zeros((spec.n, spec.n))
    c = 1.0
    for k, Bk in enumerate(spec.B_powers):
        if k > 0:
            c *= -tau / k
        E += c * Bk
    return E


def group_compose(z: GroupPoint, w: GroupPoint, spec: OperatorSpec) -> GroupPoint:
    """z o w = (w.x + E(w.t) z.x, z.t + w.t)."""
    return GroupPoint(w.x + transport_matrix(w.t, spec) @ z.x, z.t + w.t)


def group_inverse(z: GroupPoint, spec: OperatorSpec) -> GroupPoint:
    """z^{-1} = (-E(-t) x, -t), so that z o z^{-1} = (0, 0)."""
    return GroupPoint(-(transport_matrix(-z.t, spec) @ z.x), -z.t)


def dilation_matrix(lam: float, spec: OperatorSpec) -> np.ndarray:
    """Spatial part of D(lam): diag(lam^{w_i}) with the anisotropic weights."""
    if lam <= 0:
        raise NonPositiveLambda(f"lambda must be positive, got {lam}")
    return np.diag([lam ** w for w in spec.weights])


def dilate(lam: float, z: GroupPoint, spec: OperatorSpec) -> GroupPoint:
    """delta_lam(x, t) = (lam^{w_1} x_1, ..., lam^{w_n} x_n, lam^2 t)."""
    if lam <= 0:
        raise NonPositiveLambda(f"lambda must be positive, got {lam}")
    scales = np.array([lam ** w for w in spec.weights])
    return GroupPoint(scales * z.x, lam ** 2 * z.t)


def operator_hash(spec: OperatorSpec) -> str:
    """Deterministic hex digest identifying the operator, used in reports."""
    h = hashlib.sha256()
    h.update(np.asarray(spec.block_sizes, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(spec.A0).tobytes())
    for Bj in spec.B_blocks:
        h.update(np.ascontiguousarray(Bj).tobytes())
    return h.hexdigest()[:16]


def heat_operator(n: int) -> OperatorSpec:
    """The classical heat operator on R^n: A = I, B = 0, Q = n + 2."""
    return validate_operator(n, [n], np.eye(n))


def kolmogorov_prototype() -> OperatorSpec:
    """The prototype on R^2: d^2/dx^2 + x d/dy - d/dt (blocks [1, 1], Q = 6)."""
    return validate_operator(2, [1, 1], [[1.0]], [np.array([[1.0]])])


def chain_operator() -> OperatorSpec:
    """Rank-3 chain example with blocks [2, 1]: n = 3, Q = 7."""
    return validate_operator(3, [2, 1], np.eye(2), [np.array([[1.0, 0.0]])])
