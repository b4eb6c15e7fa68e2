"""Quadratic control Lyapunov function on the normal form.

``P = diag(kx, ky) (x) P0`` with a fixed 4x4 block ``P0``.  Definiteness is
certified with Cholesky pivots rather than eigenvalues: a strictly positive
pivot sequence is an exact certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

#: Published Lyapunov block, taken as a constant and verified, not synthesized.
P0 = np.array([
    [0.25, 0.40, 0.95, 0.70],
    [0.40, 2.40, 4.00, 3.80],
    [0.95, 4.00, 9.80, 9.40],
    [0.70, 3.80, 9.40, 13.0],
])
P0.setflags(write=False)

#: Gains over which the Riccati inequality is claimed to hold.
CLAIMED_GAIN_RANGE = (0.2, 1.0e6)

_SHIFT4 = np.diag(np.ones(3), 1)
_B4 = np.array([[0.0], [0.0], [0.0], [1.0]])


class CertificationError(ValueError):
    """The Lyapunov matrix failed its definiteness certificate."""


class LinearPair(NamedTuple):
    A: np.ndarray
    B: np.ndarray


def linear_pair() -> LinearPair:
    """Two decoupled chains of four integrators."""
    eye = np.eye(2)
    return LinearPair(A=np.kron(eye, _SHIFT4), B=np.kron(eye, _B4))


def cholesky_pivots(M: np.ndarray) -> tuple[bool, np.ndarray]:
    """Attempt ``M = L L^T`` and return ``(success, pivots)``.

    Pivots are the diagonal values ``M_kk - sum_j L_kj^2`` before the square
    root.  Elimination stops at the first non-positive pivot, which is the
    last entry of the returned array.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    L = np.zeros_like(M)
    pivots = []
    for k in range(n):
        d = M[k, k] - L[k, :k] @ L[k, :k]
        pivots.append(d)
        if not d > 0.0:
            return False, np.array(pivots)
        L[k, k] = np.sqrt(d)
        for i in range(k + 1, n):
            L[i, k] = (M[i, k] - L[i, :k] @ L[k, :k]) / L[k, k]
    return True, np.array(pivots)


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    # relative so that kx ~ 1e6 residuals (entries ~ 1e14) are judged fairly
    tol = 1e-12 * (1.0 + np.max(np.abs(M), initial=0.0))
    if np.max(np.abs(M - M.T), initial=0.0) > tol:
        raise ValueError("matrix is not symmetric")
    return M


def certify_positive_definite(M) -> tuple[bool, float]:
    M = _check_symmetric(M)
    ok, piv = cholesky_pivots(M)
    return ok, float(piv.min())


def certify_negative_definite(M) -> tuple[bool, float]:
    """True iff ``-M`` admits a Cholesky factorization; margin is the smallest pivot."""
    M = _check_symmetric(M)
    ok, piv = cholesky_pivots(-M)
    return ok, float(piv.min())


@dataclass(frozen=True)
class ClfMatrix:
    kx: float
    ky: float
    P0: np.ndarray = field(default_factory=lambda: P0.copy(), repr=False)
    P: np.ndarray = field(init=False, repr=False)
    margin: float = field(init=False)

    def __post_init__(self):
        if not (self.kx > 0.0 and self.ky > 0.0):
            raise ValueError(f"gains must be positive, got kx={self.kx}, ky={self.ky}")
        P = np.kron(np.diag([self.kx, self.ky]), self.P0)
        ok, margin = certify_positive_definite(P)
        if not ok:
            raise CertificationError(f"P is not positive definite (pivot {margin:.3e})")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "margin", margin)


def build_clf(kx: float = 1.0, ky: float = 1.0) -> ClfMatrix:
    return ClfMatrix(kx=float(kx), ky=float(ky))


def riccati_residual(clf: ClfMatrix | np.ndarray) -> np.ndarray:
    """``A^T P + P A - P B B^T P`` for the full 8x8 problem."""
    A, B = linear_pair()
    P = clf.P if isinstance(clf, ClfMatrix) else np.asarray(clf, dtype=float)
    PB = P @ B
    return A.T @ P + P @ A - PB @ PB.T


def riccati_residual_blocks(kx: float, ky: float, P0_block: np.ndarray = P0) -> np.ndarray:
    """Same residual assembled from the 4x4 Kronecker blocks."""
    M0 = _SHIFT4.T @ P0_block + P0_block @ _SHIFT4
    pb = P0_block @ _B4
    O0 = pb @ pb.T
    R = np.zeros((8, 8))
    R[:4, :4] = kx * M0 - kx**2 * O0
    R[4:, 4:] = ky * M0 - ky**2 * O0
    return R


class GridPoint(NamedTuple):
    kx: float
    ky: float
    negdef: bool
    margin: float

    @property
    def in_claim(self) -> bool:
        lo, hi = CLAIMED_GAIN_RANGE
        return lo <= self.kx <= hi and lo <= self.ky <= hi


def check_gains(kx: float, ky: float) -> GridPoint:
    # out-of-claim probes (even kx <= 0) are recorded, not rejected
    P = np.kron(np.diag([kx, ky]), P0)
    ok, margin = certify_negative_definite(riccati_residual(P))
    return GridPoint(float(kx), float(ky), ok, margin)


def gain_grid(n: int = 25, lo: float = CLAIMED_GAIN_RANGE[0], hi: float = CLAIMED_GAIN_RANGE[1]) -> np.ndarray:
    if n < 2:
        raise ValueError("grid needs at least 2 points per axis")
    if not 0.0 < lo < hi:
        raise ValueError(f"invalid gain range [{lo}, {hi}]")
    return np.geomspace(lo, hi, n)


def sweep_gain_grid(n: int = 25, lo: float = CLAIMED_GAIN_RANGE[0], hi: float = CLAIMED_GAIN_RANGE[1],
                    extra_points=()) -> list[GridPoint]:
    """Check the Riccati inequality on a log-spaced ``n x n`` gain grid.

    Points are reported row-major in ``kx`` then ``ky``; ``extra_points`` are
    appended in the given order.
    """
    gains = gain_grid(n, lo, hi)
    report = [check_gains(kx, ky) for kx in gains for ky in gains]
    report.extend(check_gains(float(kx), float(ky)) for kx, ky in extra_points)
    return report


@dataclass(frozen=True)
class ClfEvaluation:
    """CLF quantities at one state (or a batch along trailing axes)."""

    V: float
    alpha: float
    beta: np.ndarray
    b: float
    zz: float  # z^T z, feeds the relative beta = 0 threshold


def evaluate_clf(clf: ClfMatrix, z, Phi, Gamma) -> ClfEvaluation:
    """V = z^T P z / 2, alpha = z^T P Phi, beta = Gamma^T P z, b = beta^T beta.

    ``z`` and ``Phi`` have shape (8, ...) and ``Gamma`` (8, 2, ...).
    """
    z = np.asarray(z, dtype=float)
    Pz = np.tensordot(clf.P, z, axes=1)
    beta = np.einsum("ik...,i...->k...", np.asarray(Gamma, dtype=float), Pz)
    return ClfEvaluation(
        V=0.5 * np.sum(z * Pz, axis=0),
        alpha=np.sum(Pz * np.asarray(Phi, dtype=float), axis=0),
        beta=beta,
        b=np.sum(beta * beta, axis=0),
        zz=np.sum(z * z, axis=0),
    )
