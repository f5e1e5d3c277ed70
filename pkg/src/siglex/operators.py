"""Discrete differential operators, operator assembly, and inverse solving.

Derivative matrices are built from local polynomial least-squares stencils:
a window of 2w+1 samples is fitted with a degree-`accuracy` polynomial and
the fit's derivative at the evaluation point gives the row weights.  Interior
rows use a symmetric window, the first/last w rows use the shifted window of
the first/last 2w+1 grid points.  Stencil weights are computed in exact
rational arithmetic and rounded once, so they are exact on polynomials up to
the stated degree to within a single float rounding.

The convolutional streaming path and the dense apply path both reduce each
output sample to the same ``np.dot`` over the same 2w+1 floats, which makes
interior outputs bitwise-identical between the two.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import ceil, factorial
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    CoefficientLengthMismatchError,
    ConstraintCountMismatchError,
    GridTooShortError,
    LeadingCoefficientZeroError,
    LengthMismatchError,
    OrderExceedsAccuracyError,
    SingularConstraintSystemError,
)
from .grid import Grid

_EPS = float(np.finfo(np.float64).eps)


# ---------------------------------------------------------------------------
# stencil construction (exact rational)
# ---------------------------------------------------------------------------

def _solve_fraction_system(G: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan solve of a small exact rational system."""
    m = len(G)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(G)]
    for c in range(m):
        p = next(r for r in range(c, m) if aug[r][c] != 0)
        aug[c], aug[p] = aug[p], aug[c]
        piv = aug[c][c]
        aug[c] = [x / piv for x in aug[c]]
        for r in range(m):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    return [aug[i][m] for i in range(m)]


@lru_cache(maxsize=4096)
def _rational_stencil(offsets: tuple, degree: int, order: int) -> tuple:
    """Weights (unit step) approximating the order-th derivative at offset 0.

    Least-squares fit of a degree-`degree` polynomial over the window
    `offsets`; the returned weights are the derivative of that fit.  Exact on
    any polynomial of degree <= `degree` because the fit then interpolates.
    """
    m = degree + 1
    V = [[Fraction(o) ** k for k in range(m)] for o in offsets]
    G = [[sum(V[j][a] * V[j][b] for j in range(len(offsets))) for b in range(m)]
         for a in range(m)]
    e = [Fraction(1 if i == order else 0) for i in range(m)]
    z = _solve_fraction_system(G, e)
    f = factorial(order)
    return tuple(f * sum(z[k] * V[j][k] for k in range(m))
                 for j in range(len(offsets)))


def _stencil(offsets: Sequence[int], degree: int, order: int, h: float) -> np.ndarray:
    exact = _rational_stencil(tuple(int(o) for o in offsets), degree, order)
    return np.array([float(x) for x in exact]) / h ** order


def _half_width(accuracy: int) -> int:
    return 0 if accuracy == 0 else ceil(accuracy / 2)


def _row_window(n: int, w: int, r: int) -> int:
    """Leftmost column of row r's stencil window."""
    if r < w:
        return 0
    if r > n - 1 - w:
        return n - (2 * w + 1)
    return r - w


# ---------------------------------------------------------------------------
# derivative operator matrices
# ---------------------------------------------------------------------------

@dataclass
class DiffOperatorMatrix:
    """Dense n x n realization of the i-th derivative on a uniform grid.

    `support` is the stencil half-width w; every row has at most 2w+1
    nonzero entries confined to its stencil window.
    """

    order: int
    accuracy: int
    grid: Grid
    entries: np.ndarray
    support: int

    def apply(self, x: np.ndarray) -> np.ndarray:
        return _banded_apply(self.entries, self.grid.n, self.support, x)

    def to_csv(self, path) -> None:
        """Row-major dump with a metadata header line `n,order,accuracy,h`."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("n,order,accuracy,h\n")
            fh.write(f"{self.grid.n},{self.order},{self.accuracy},{self.grid.h:.17g}\n")
            for row in self.entries:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DiffOperatorMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "n,order,accuracy,h":
                raise ValueError(f"unexpected header {header!r}")
            n_s, order_s, acc_s, h_s = fh.readline().strip().split(",")
            n, order, accuracy = int(n_s), int(order_s), int(acc_s)
            entries = np.array(
                [[float(v) for v in fh.readline().strip().split(",")] for _ in range(n)]
            )
        return cls(order, accuracy, Grid(n, float(h_s)),
                   entries, _half_width(accuracy))


def build_diff_operator(grid: Grid, order: int, accuracy: int) -> DiffOperatorMatrix:
    """Build the discrete derivative matrix D^(order) of the given accuracy.

    Parameters
    ----------
    grid : Grid
    order : int
        Derivative order, >= 0.  Order 0 yields the identity exactly.
    accuracy : int
        Polynomial degree the stencils reproduce exactly; >= order.

    Raises
    ------
    OrderExceedsAccuracyError
        If order > accuracy (or either is negative).
    GridTooShortError
        If the grid cannot host a full stencil window (n < 2w+1).
    """
    if order < 0 or accuracy < order:
        raise OrderExceedsAccuracyError(
            f"need 0 <= order <= accuracy, got order={order} accuracy={accuracy}")
    w = _half_width(accuracy)
    n = grid.n
    if n < 2 * w + 1 or n <= accuracy:
        raise GridTooShortError(
            f"grid n={n} too short for accuracy={accuracy} (needs n >= {2 * w + 1})")

    entries = np.zeros((n, n))
    if order == 0:
        np.fill_diagonal(entries, 1.0)
        return DiffOperatorMatrix(order, accuracy, grid, entries, w)

    width = 2 * w + 1
    central = _stencil(range(-w, w + 1), accuracy, order, grid.h)
    for r in range(n):
        lo = _row_window(n, w, r)
        if lo == r - w:
            entries[r, lo:lo + width] = central
        else:
            offsets = [lo + j - r for j in range(width)]
            entries[r, lo:lo + width] = _stencil(offsets, accuracy, order, grid.h)
    return DiffOperatorMatrix(order, accuracy, grid, entries, w)


def _banded_apply(entries: np.ndarray, n: int, w: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise LengthMismatchError(f"expected length {n}, got {x.shape}")
    width = 2 * w + 1
    out = np.empty(n)
    for r in range(n):
        lo = _row_window(n, w, r)
        out[r] = np.dot(entries[r, lo:lo + width], x[lo:lo + width])
    return out


# ---------------------------------------------------------------------------
# assembled linear differential operators
# ---------------------------------------------------------------------------

Coefficient = Union[float, int, np.ndarray, Sequence[float]]


@dataclass
class LdoSpec:
    """ODE left-hand side sum(a_i(t) * y^(i)), i = 0..degree.

    `coefficients[i]` is either a scalar or a per-grid-point value vector.
    """

    degree: int
    coefficients: list

    def __post_init__(self):
        if len(self.coefficients) != self.degree + 1:
            raise CoefficientLengthMismatchError(
                f"degree {self.degree} needs {self.degree + 1} coefficients, "
                f"got {len(self.coefficients)}")
        lead = self.coefficients[self.degree]
        if np.all(np.asarray(lead, dtype=np.float64) == 0.0):
            raise LeadingCoefficientZeroError(
                f"a_{self.degree} is identically zero")

    def coefficient_values(self, grid: Grid) -> list[np.ndarray]:
        """Each coefficient sampled on the grid (scalars broadcast)."""
        out = []
        for i, c in enumerate(self.coefficients):
            a = np.asarray(c, dtype=np.float64)
            if a.ndim == 0:
                a = np.full(grid.n, float(a))
            elif a.shape != (grid.n,):
                raise CoefficientLengthMismatchError(
                    f"coefficient {i} has length {a.shape}, grid has n={grid.n}")
            out.append(a)
        return out


@dataclass
class LdoMatrix:
    """Assembled operator L = sum(diag(a_i) @ D^(i)) with its null space.

    `null_basis` has orthonormal columns spanning the numerical null space
    (the discrete homogeneous solutions); `rank + null_basis.shape[1] == n`.
    """

    spec: LdoSpec
    grid: Grid
    entries: np.ndarray
    null_basis: np.ndarray
    rank: int
    accuracy: int
    support: int
    rank_tolerance: float
    _svd: tuple = field(default=None, repr=False, compare=False)

    @property
    def null_dim(self) -> int:
        return self.null_basis.shape[1]

    def _svd_parts(self):
        if self._svd is None:
            self._svd = np.linalg.svd(self.entries)
        return self._svd

    def apply(self, x: np.ndarray) -> np.ndarray:
        return _banded_apply(self.entries, self.grid.n, self.support, x)

    def pseudo_inverse(self) -> np.ndarray:
        """Moore-Penrose inverse with the operator's rank tolerance."""
        u, s, vt = self._svd_parts()
        r = self.rank
        return (vt[:r].T / s[:r]) @ u[:, :r].T


def assemble_ldo(spec: LdoSpec, grid: Grid, accuracy: int,
                 rank_tolerance: Optional[float] = None) -> LdoMatrix:
    """Assemble L = sum(diag(a_i(t)) @ D^(i)) and compute its null space.

    The numerical rank uses the SVD cutoff
    ``max(n * eps, rank_tolerance_rel) * s_max`` with a relative default of
    1e-10; pass `rank_tolerance` to override the relative cutoff.
    """
    coeffs = spec.coefficient_values(grid)
    entries = np.zeros((grid.n, grid.n))
    w = _half_width(accuracy)
    for i, a in enumerate(coeffs):
        d = build_diff_operator(grid, i, accuracy)
        entries += a[:, None] * d.entries

    u, s, vt = np.linalg.svd(entries)
    rel = 1e-10 if rank_tolerance is None else float(rank_tolerance)
    cutoff = s[0] * max(grid.n * _EPS, rel) if s[0] > 0 else 0.0
    rank = int(np.count_nonzero(s > cutoff))
    null_basis = vt[rank:].T.copy()
    return LdoMatrix(spec, grid, entries, null_basis, rank, accuracy, w,
                     cutoff, _svd=(u, s, vt))


def apply_ldo(op: Union[LdoMatrix, DiffOperatorMatrix], x: np.ndarray) -> np.ndarray:
    """Forward model g = L x (row-banded, deterministic summation order)."""
    return op.apply(x)


# ---------------------------------------------------------------------------
# inverse problem
# ---------------------------------------------------------------------------

@dataclass
class InverseSolution:
    """Solution of L y = g: minimum-norm particular part plus null modes."""

    y_particular: np.ndarray
    alpha: np.ndarray
    y: np.ndarray
    residual: np.ndarray


def solve_inverse(op: LdoMatrix, g: np.ndarray,
                  constraints: Sequence[tuple[int, float]]) -> InverseSolution:
    """Solve L y = g with point constraints fixing the null-space modes.

    The particular solution is the pseudo-inverse image of g; the null-space
    coefficients solve the k x k system pinning y at the constraint indices.
    Exactly `k = null_dim` constraints with distinct in-range indices are
    required.

    Raises
    ------
    ConstraintCountMismatchError
        If the number of constraints differs from the null-space dimension.
    SingularConstraintSystemError
        If the constraint rows of the null basis are rank deficient.
    """
    n = op.grid.n
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (n,):
        raise LengthMismatchError(f"g must have length {n}, got {g.shape}")
    k = op.null_dim
    constraints = list(constraints)
    if len(constraints) != k:
        raise ConstraintCountMismatchError(
            f"operator null space has dimension {k}, got {len(constraints)} constraints")
    rows = [int(i) for i, _ in constraints]
    vals = np.array([float(v) for _, v in constraints])
    if len(set(rows)) != len(rows):
        raise ConstraintCountMismatchError(f"constraint indices not distinct: {rows}")
    if any(i < 0 or i >= n for i in rows):
        raise ConstraintCountMismatchError(f"constraint index out of range: {rows}")

    u, s, vt = op._svd_parts()
    r = op.rank
    y_part = vt[:r].T @ ((u[:, :r].T @ g) / s[:r])

    if k:
        nb = op.null_basis[rows, :]
        sv = np.linalg.svd(nb, compute_uv=False)
        if sv[0] == 0.0 or sv[-1] < 1e-10 * sv[0]:
            raise SingularConstraintSystemError(
                f"null-basis rows {rows} are numerically rank deficient")
        alpha = np.linalg.solve(nb, vals - y_part[rows])
    else:
        alpha = np.zeros(0)

    y = y_part + op.null_basis @ alpha
    residual = op.apply(y) - g
    return InverseSolution(y_part, alpha, y, residual)


def solution_operator(op: LdoMatrix, constraint_indices: Sequence[int]) -> np.ndarray:
    """Linear map A with y = A g + (terms from the constraint values).

    Point constraints make the solved y affine in g; A is the g-dependent
    part, which is what covariance propagation needs.  For k = 0 this is
    just the pseudo-inverse.
    """
    k = op.null_dim
    rows = list(constraint_indices)
    if len(rows) != k:
        raise ConstraintCountMismatchError(
            f"operator null space has dimension {k}, got {len(rows)} constraint indices")
    pinv = op.pseudo_inverse()
    if k == 0:
        return pinv
    nb = op.null_basis[rows, :]
    sv = np.linalg.svd(nb, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < 1e-10 * sv[0]:
        raise SingularConstraintSystemError(
            f"null-basis rows {rows} are numerically rank deficient")
    proj = op.null_basis @ np.linalg.inv(nb)
    return pinv - proj @ pinv[rows, :]


# ---------------------------------------------------------------------------
# local kernels and streaming application
# ---------------------------------------------------------------------------

@dataclass
class LocalKernel:
    """Central-row stencil of a derivative operator, for convolutional use."""

    weights: np.ndarray
    order: int
    accuracy: int
    h: float

    @property
    def half_width(self) -> int:
        return (len(self.weights) - 1) // 2


def extract_local_kernel(order: int, accuracy: int, h: float) -> LocalKernel:
    """Central stencil of build_diff_operator for streaming convolution."""
    if order < 0 or accuracy < order:
        raise OrderExceedsAccuracyError(
            f"need 0 <= order <= accuracy, got order={order} accuracy={accuracy}")
    w = _half_width(accuracy)
    if order == 0:
        weights = np.zeros(2 * w + 1)
        weights[w] = 1.0
    else:
        weights = _stencil(range(-w, w + 1), accuracy, order, h)
    return LocalKernel(weights, order, accuracy, float(h))


class StreamingKernel:
    """Incremental convolution of a LocalKernel over a sample stream.

    Keeps a ring buffer of 2w+1 samples; output j is emitted as soon as
    inputs j-w .. j+w have arrived (latency w).  Single consumer per
    instance; independent instances are unrelated.

    boundary="valid" emits fully-supported outputs only; "one_sided" also
    fills the first/last w outputs with the shifted boundary stencils of the
    equivalent dense matrix (streams shorter than 2w+1 yield no output).
    """

    def __init__(self, kernel: LocalKernel, boundary: str = "valid"):
        if boundary not in ("valid", "one_sided"):
            raise ValueError(f"unknown boundary policy {boundary!r}")
        self.kernel = kernel
        self.boundary = boundary
        self._w = kernel.half_width
        self._buf = deque(maxlen=2 * self._w + 1)
        self._seen = 0
        if boundary == "one_sided" and self._w and kernel.order:
            width = 2 * self._w + 1
            self._head = [
                _stencil([j - r for j in range(width)], kernel.accuracy,
                         kernel.order, kernel.h)
                for r in range(self._w)
            ]
        elif boundary == "one_sided" and self._w:
            width = 2 * self._w + 1
            self._head = []
            for r in range(self._w):
                row = np.zeros(width)
                row[r] = 1.0
                self._head.append(row)
        else:
            self._head = []

    def push(self, sample: float) -> list[float]:
        """Feed one sample; returns the outputs it completes, in order."""
        self._buf.append(float(sample))
        self._seen += 1
        w = self._w
        width = 2 * w + 1
        if self._seen < width:
            return []
        window = np.array(self._buf)
        out = []
        if self._seen == width and self.boundary == "one_sided":
            for st in self._head:
                out.append(float(np.dot(st, window)))
        out.append(float(np.dot(self.kernel.weights, window)))
        return out

    def finish(self) -> list[float]:
        """Flush trailing one-sided outputs (empty for boundary="valid")."""
        w = self._w
        if self.boundary != "one_sided" or not w or self._seen < 2 * w + 1:
            return []
        window = np.array(self._buf)
        width = 2 * w + 1
        out = []
        for r in range(w):
            pos = width - w + r  # row index within the trailing window
            if self.kernel.order:
                st = _stencil([j - pos for j in range(width)],
                              self.kernel.accuracy, self.kernel.order,
                              self.kernel.h)
            else:
                st = np.zeros(width)
                st[pos] = 1.0
            out.append(float(np.dot(st, window)))
        return out


def apply_streaming(kernel: LocalKernel, stream, boundary: str = "valid") -> np.ndarray:
    """Convolve a kernel over a sample sequence via the streaming path."""
    sk = StreamingKernel(kernel, boundary)
    out: list[float] = []
    for sample in stream:
        out.extend(sk.push(sample))
    out.extend(sk.finish())
    return np.array(out)
