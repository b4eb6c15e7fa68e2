"""Dynamic feedback linearization and the Sontag-formula inverse optimal law.

Commands are arrays ``[fhat_ddot, tau]`` (shape (2, ...)).  The Sontag-side
helpers work on a :class:`~pvtol.clf.ClfEvaluation` and broadcast over any
trailing batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .clf import ClfEvaluation

DEFAULT_K0 = (0.1875, 1.0375, 2.4, 2.55)


class SingularityError(RuntimeError):
    """The linearizing input matrix is (numerically) singular."""


class InconclusiveError(ValueError):
    """Routh array hit a zero pivot; the test cannot decide."""


@dataclass(frozen=True)
class FblGains:
    """Pole-placement gain ``K = I2 (x) K0`` for ``v = -K e``."""

    K0: tuple = DEFAULT_K0

    def __post_init__(self):
        k0 = tuple(float(k) for k in self.K0)
        if len(k0) != 4:
            raise ValueError(f"K0 needs 4 entries, got {len(k0)}")
        object.__setattr__(self, "K0", k0)

    @property
    def K(self) -> np.ndarray:
        return np.kron(np.eye(2), np.asarray(self.K0)[None, :])

    def characteristic_poly(self) -> np.ndarray:
        """Closed-loop polynomial of one integrator chain, highest power first."""
        k1, k2, k3, k4 = self.K0
        return np.array([1.0, k4, k3, k2, k1])

    def is_hurwitz(self) -> bool:
        return routh_hurwitz_quartic(self.characteristic_poly())


@dataclass(frozen=True)
class SontagParams:
    c0: float = 1.0
    b_floor_rel: float = 1e-12
    fhat_floor: float = 1e-6

    def __post_init__(self):
        if not self.c0 > 0.0:
            raise ValueError(f"c0 must be > 0, got {self.c0}")
        if not self.b_floor_rel > 0.0:
            raise ValueError(f"b_floor_rel must be > 0, got {self.b_floor_rel}")
        if not self.fhat_floor > 0.0:
            raise ValueError(f"fhat_floor must be > 0, got {self.fhat_floor}")

    def b_floor(self, zz):
        """Threshold on ``b`` below which ``beta`` counts as zero: ``rel * (1 + z^T z)``."""
        return self.b_floor_rel * (1.0 + zz)


class SetPoint(NamedTuple):
    x_ref: float = 0.0
    y_ref: float = 0.0


def reference_shift(z, r: SetPoint) -> np.ndarray:
    """Regulation error; valid because Phi and Gamma do not depend on z1, z5."""
    e = np.array(z, dtype=float, copy=True)
    e[0] = e[0] - r.x_ref
    e[4] = e[4] - r.y_ref
    return e


def fbl_control(e, phi, G, gains: FblGains, fhat_floor: float = 1e-6) -> np.ndarray:
    """Linearizing law ``u = G^-1 (-phi + v)`` with ``v = -K e``.

    ``phi`` may be the full 8-vector drift or just its rows 4 and 8.
    """
    e = np.asarray(e, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] == 8:
        phi = phi[[3, 7]]
    G = np.asarray(G, dtype=float)
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if not abs(det) >= fhat_floor:
        raise SingularityError(f"|det G| = |fhat| = {abs(det):.3e} below floor {fhat_floor:.1e}")
    v = -gains.K @ e
    return np.linalg.solve(G, v - phi)


def _lambda(ev: ClfEvaluation, active):
    b_safe = np.where(active, ev.b, 1.0)
    return np.where(active, (ev.alpha + np.sqrt(ev.alpha**2 + ev.b**2)) / b_safe, 0.0)


def sontag_control(ev: ClfEvaluation, params: SontagParams) -> np.ndarray:
    """Sontag's universal formula applied to the quadratic CLF.

    Returns the zero command exactly when ``b <= b_floor``.
    """
    active = ev.b > params.b_floor(ev.zz)
    gain = params.c0 + _lambda(ev, active)
    return np.where(active, -gain * np.asarray(ev.beta), 0.0)


def mu_value(ev: ClfEvaluation, params: SontagParams):
    """Input-penalty scale of the reconstructed cost; always >= c0."""
    active = ev.b > params.b_floor(ev.zz)
    return params.c0 + _lambda(ev, active)


def cost_integrand(b, u, mu):
    """``mu/2 * b + u^T u / (2 mu)``, the running cost of the inverse optimal problem."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0.0):
        raise ValueError("mu must be positive")
    u = np.asarray(u, dtype=float)
    return 0.5 * mu * b + np.sum(u * u, axis=0) / (2.0 * mu)


def theorem2_Q(ev: ClfEvaluation, u_sontag, mu):
    """State penalty reconstructed as ``-alpha - beta^T u / 2`` (equals -alpha + mu b / 2)."""
    return -ev.alpha - 0.5 * np.sum(np.asarray(ev.beta) * np.asarray(u_sontag), axis=0)


def prop2_Q(ev: ClfEvaluation, mu):
    """Alternative state penalty ``mu b / 2``; reported, not asserted."""
    return 0.5 * mu * ev.b


def vdot_closed_form(ev: ClfEvaluation, params: SontagParams):
    """Decrease rate of V under the Sontag law: ``-c0 b - sqrt(alpha^2 + b^2)``."""
    return -params.c0 * ev.b - np.sqrt(ev.alpha**2 + ev.b**2)


def routh_hurwitz_quartic(coeffs) -> bool:
    """Routh-Hurwitz test for a real polynomial (written for quartics, any degree works).

    Coefficients are ordered highest power first.  A non-positive coefficient
    rules out stability before the array is built; a zero first-column entry
    afterwards raises :class:`InconclusiveError`.
    """
    a = [float(c) for c in coeffs]
    if not a[0] > 0.0:
        raise ValueError("leading coefficient must be positive")
    if any(c <= 0.0 for c in a):
        return False
    rows = [a[0::2], a[1::2]]
    width = len(rows[0])
    rows = [r + [0.0] * (width - len(r)) for r in rows]
    for _ in range(len(a) - 2):
        top, bot = rows[-2], rows[-1]
        if bot[0] == 0.0:
            raise InconclusiveError("zero pivot in Routh array")
        new = [(bot[0] * top[j + 1] - top[0] * bot[j + 1]) / bot[0] for j in range(width - 1)]
        rows.append(new + [0.0])
    first = [r[0] for r in rows]
    if any(c == 0.0 for c in first):
        raise InconclusiveError("zero pivot in Routh array")
    return all(c > 0.0 for c in first)
