"""Centered truncated power spline designs and curvature penalty matrices.

Each covariate lives on [0, 1] and gets the basis

    x, x^2, ..., x^q, (x - t_1)^q_+, ..., (x - t_k)^q_+

with the linear term kept as a separate column so that linear and
nonlinear effects can be selected independently. Every column is centered
at its training sample mean, and the nonlinear columns are additionally
residualized on the centered linear column: without that step the
truncated powers reproduce a straight line almost exactly (R^2 > 0.999 on
a uniform design), so a linear signal could ride in the nonlinear block
and the linear/nonlinear split would be unidentifiable. Both adjustments
subtract an affine function of x from each basis function, which leaves
second derivatives, and hence the curvature penalty, unchanged. The
offsets and slopes are frozen at training time so prediction uses the
same decomposition as fitting.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npol


@dataclass(frozen=True)
class KnotGrid:
    """Degree and interior knots of the truncated power basis on [0, 1].

    The basis has ``1 + n_nonlinear`` columns: one linear column plus
    ``n_nonlinear = degree + len(knots) - 1`` curvature-carrying columns.
    """

    degree: int = 3
    knots: tuple = (0.2, 0.4, 0.6, 0.8)

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise ValueError(f"degree must be a positive integer, got {self.degree}")
        object.__setattr__(self, "degree", int(self.degree))
        knots = tuple(float(t) for t in self.knots)
        object.__setattr__(self, "knots", knots)
        if any(not (0.0 < t < 1.0) for t in knots):
            raise ValueError(f"knots must lie strictly inside (0, 1), got {knots}")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError(f"knots must be strictly increasing, got {knots}")
        if self.n_nonlinear < 1:
            raise ValueError("need degree >= 2 or at least one interior knot")

    @property
    def n_nonlinear(self):
        """Number of nonlinear basis columns."""
        return self.degree + len(self.knots) - 1

    @property
    def n_basis(self):
        """Total basis size including the linear column."""
        return self.n_nonlinear + 1

    @classmethod
    def equally_spaced(cls, degree=3, n_knots=4):
        """Grid with knots at i / (n_knots + 1)."""
        return cls(degree=degree, knots=tuple((i + 1) / (n_knots + 1) for i in range(n_knots)))


def raw_basis(x, grid):
    """Evaluate the uncentered basis at a scalar x in [0, 1].

    Entry 0 is x; entries 1..q-1 are x^2..x^q; the remaining entries are
    (x - t_i)^q for x > t_i and 0 otherwise.
    """
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    return basis_matrix(np.array([x]), grid, _validate=False)[0]


def basis_matrix(x, grid, _validate=True, clamp=False):
    """Uncentered basis rows for an array of points, shape (len(x), K+1)."""
    x = np.asarray(x, dtype=float)
    if clamp:
        if np.any(x < 0.0) or np.any(x > 1.0):
            warnings.warn("clamping evaluation points outside [0, 1]")
            x = np.clip(x, 0.0, 1.0)
    elif _validate and (np.any(x < 0.0) or np.any(x > 1.0)):
        raise ValueError("basis points must lie in [0, 1]")
    q = grid.degree
    cols = [x ** r for r in range(1, q + 1)]
    for t in grid.knots:
        cols.append(np.where(x > t, (x - t) ** q, 0.0))
    return np.column_stack(cols)


def penalty_matrix(grid):
    """Gram matrix of second derivatives of the nonlinear basis columns.

    Entry (a, b) is the integral over [0, 1] of B_a'' * B_b''. Computed in
    closed form by polynomial coefficient arithmetic; centering shifts do
    not change second derivatives, so the same matrix applies to the
    centered basis.
    """
    if grid.degree < 2:
        raise ValueError("curvature penalty requires degree >= 2")
    pieces = _second_derivatives(grid)
    K = len(pieces)
    omega = np.zeros((K, K))
    for a in range(K):
        lo_a, ca = pieces[a]
        for b in range(a, K):
            lo_b, cb = pieces[b]
            lo = max(lo_a, lo_b)
            anti = npol.polyint(npol.polymul(ca, cb))
            val = npol.polyval(1.0, anti) - npol.polyval(lo, anti)
            omega[a, b] = val
            omega[b, a] = val
    return omega


def _second_derivatives(grid):
    """(support lower bound, plain polynomial coefficients) per nonlinear column."""
    q = grid.degree
    pieces = []
    for r in range(2, q + 1):
        coeffs = np.zeros(r - 1)
        coeffs[r - 2] = r * (r - 1)
        pieces.append((0.0, coeffs))
    for t in grid.knots:
        coeffs = q * (q - 1) * npol.polypow(np.array([-t, 1.0]), q - 2)
        pieces.append((t, np.atleast_1d(coeffs)))
    return pieces


@dataclass
class SplineSystem:
    """Per-covariate centered designs plus the shared curvature penalty.

    ``B0[:, j]`` is the centered linear column of covariate j, ``B[j]`` the
    centered nonlinear design, ``offsets[j]`` the training column means of
    the raw basis (frozen for prediction). Engine variants may carry
    modified copies where ``B0`` is folded into ``B`` or one block is absent.
    """

    grid: KnotGrid
    offsets: np.ndarray            # (p, K+1) raw-basis training means
    B0: np.ndarray | None          # (n, p)
    B: list | None                 # p arrays of shape (n, K_b)
    omega: list | None             # p penalty matrices matching B
    n_train: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.offsets.shape[0]

    def centered_basis(self, j, x):
        """Centered basis rows (m, K+1) for covariate j at new points.

        Points outside [0, 1] are clamped with a warning; the training
        offsets are reused so fit and prediction share one decomposition.
        """
        rows = basis_matrix(np.atleast_1d(x), self.grid, clamp=True)
        return rows - self.offsets[j]


def build_system(X, grid):
    """Build centered designs and the penalty for every covariate column.

    All entries of X must lie in [0, 1]; constant columns are rejected
    because their centered linear column would be identically zero.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    n, p = X.shape
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise ValueError("covariates must be scaled to [0, 1] before building the design")
    if n <= grid.n_basis:
        warnings.warn(
            f"only {n} observations for {grid.n_basis} basis columns; fit will be weakly identified"
        )
    omega = penalty_matrix(grid) if grid.degree >= 2 else None
    offsets = np.empty((p, grid.n_basis))
    B0 = np.empty((n, p))
    B = []
    for j in range(p):
        col = X[:, j]
        if np.ptp(col) == 0.0:
            raise ValueError(f"covariate {j} is constant; remove it before fitting")
        raw = basis_matrix(col, grid, _validate=False)
        offsets[j] = raw.mean(axis=0)
        centered = raw - offsets[j]
        B0[:, j] = centered[:, 0]
        B.append(np.ascontiguousarray(centered[:, 1:]))
    omegas = [omega] * p if omega is not None else None
    return SplineSystem(grid=grid, offsets=offsets, B0=B0, B=B, omega=omegas, n_train=n)
