"""Planar VTOL dynamics, the output transformation and the normal-form lift.

All functions are pure.  State containers are ``NamedTuple`` so the same
functions accept scalars or broadcastable numpy arrays field-wise, which the
property tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class SingularConfigurationError(ValueError):
    """Raised when a linearizing law is requested where it does not exist."""


@dataclass(frozen=True)
class PlantParams:
    """Normalized plant parameters (coupling ``epsilon``, ``gravity``)."""

    epsilon: float = 1.0
    gravity: float = 9.81

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not (np.isfinite(self.gravity) and self.gravity > 0.0):
            raise ValueError(f"gravity must be finite and > 0, got {self.gravity}")


@dataclass(frozen=True)
class DimensionalParams:
    """Physical vehicle parameters: mass [kg], inertia [kg m^2], arm [m], g [m/s^2]."""

    mass: float
    inertia: float
    arm: float
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("mass", "inertia", "arm", "gravity"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {val}")

    def normalize(self) -> PlantParams:
        return PlantParams(epsilon=self.inertia / (self.mass * self.arm), gravity=self.gravity)

    def normalize_input(self, F1, F2) -> "PlantInput":
        """Map the two body forces to (f, tau) in normalized units."""
        return PlantInput(f=F2 / self.mass, tau=self.arm * F1 / self.inertia)


class PlantState(NamedTuple):
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    xdot: float = 0.0
    ydot: float = 0.0
    thetadot: float = 0.0


class PlantInput(NamedTuple):
    f: float
    tau: float


class CompensatorState(NamedTuple):
    fhat: float
    fhatdot: float = 0.0


def dimensional_deriv(s: PlantState, F1, F2, dp: DimensionalParams) -> PlantState:
    """Rigid-body equations in physical units (used as a cross-check)."""
    m, J, r, g = dp.mass, dp.inertia, dp.arm, dp.gravity
    c, sn = np.cos(s.theta), np.sin(s.theta)
    return PlantState(
        x=s.xdot,
        y=s.ydot,
        theta=s.thetadot,
        xdot=(F1 * c - F2 * sn) / m,
        ydot=(F1 * sn + F2 * c) / m - g,
        thetadot=r * F1 / J,
    )


def plant_deriv(s: PlantState, u: PlantInput, p: PlantParams) -> PlantState:
    """Time derivative of the normalized plant.

    The result is returned as a ``PlantState`` whose fields hold the
    derivatives of the corresponding state fields.
    """
    c, sn = np.cos(s.theta), np.sin(s.theta)
    eps = p.epsilon
    return PlantState(
        x=s.xdot,
        y=s.ydot,
        theta=s.thetadot,
        xdot=eps * u.tau * c - u.f * sn,
        ydot=eps * u.tau * sn + u.f * c - p.gravity,
        thetadot=u.tau,
    )


def decoupling_matrix(theta, p: PlantParams) -> np.ndarray:
    """Input matrix of the position outputs' second derivatives; det = -epsilon."""
    c, sn = np.cos(theta), np.sin(theta)
    eps = p.epsilon
    return np.array([[-sn, eps * c], [c, eps * sn]])


def static_fbl(theta, v, p: PlantParams) -> PlantInput:
    """Static linearizing law giving xddot = v[0], yddot = v[1]."""
    if p.epsilon == 0.0:
        raise SingularConfigurationError("decoupling matrix is singular for epsilon = 0")
    c, sn = np.cos(theta), np.sin(theta)
    w1 = v[0]
    w2 = v[1] + p.gravity
    return PlantInput(f=-sn * w1 + c * w2, tau=(c * w1 + sn * w2) / p.epsilon)


def zero_dynamics_deriv(theta, thetadot, p: PlantParams):
    """Internal attitude dynamics with the position outputs pinned at rest."""
    if p.epsilon == 0.0:
        raise SingularConfigurationError("zero dynamics undefined for epsilon = 0")
    return thetadot, (p.gravity / p.epsilon) * np.sin(theta)


def to_transformed(s: PlantState, p: PlantParams):
    """Transformed outputs and their rates: (xhat, yhat, xhat', yhat')."""
    c, sn = np.cos(s.theta), np.sin(s.theta)
    eps = p.epsilon
    xhat = s.x - eps * sn
    yhat = s.y + eps * (c - 1.0)
    xhat_d = s.xdot - eps * s.thetadot * c
    yhat_d = s.ydot - eps * s.thetadot * sn
    return xhat, yhat, xhat_d, yhat_d


def transformed_thrust(f, thetadot, p: PlantParams):
    """fhat = f - epsilon * thetadot^2."""
    return f - p.epsilon * thetadot**2


def recover_plant_input(c: CompensatorState, s: PlantState, tau, p: PlantParams) -> PlantInput:
    return PlantInput(f=c.fhat + p.epsilon * s.thetadot**2, tau=tau)


def lift_to_normal_form(s: PlantState, c: CompensatorState, p: PlantParams) -> np.ndarray:
    """Normal-form coordinates z = [xhat, xhat', xhat'', xhat''', yhat, ..., yhat''']."""
    cth, sth = np.cos(s.theta), np.sin(s.theta)
    xhat, yhat, xhat_d, yhat_d = to_transformed(s, p)
    fh, fhd, w = c.fhat, c.fhatdot, s.thetadot
    return np.array(np.broadcast_arrays(
        xhat,
        xhat_d,
        -fh * sth,
        -fhd * sth - fh * w * cth,
        yhat,
        yhat_d,
        fh * cth - p.gravity,
        fhd * cth - fh * w * sth,
    ), dtype=float)


def unlift_normal_form(z, p: PlantParams, theta_hint: float = 0.0):
    """Invert :func:`lift_to_normal_form` on the branch fhat > 0.

    ``theta`` is recovered modulo 2*pi and placed on the branch nearest to
    ``theta_hint``.  Returns ``(PlantState, CompensatorState)``.
    """
    z = np.asarray(z, dtype=float)
    a = -z[2]
    b = z[6] + p.gravity
    fh = np.hypot(a, b)
    if np.any(fh == 0.0):
        raise SingularConfigurationError("fhat = 0: attitude is not recoverable")
    sth, cth = a / fh, b / fh
    theta = np.arctan2(sth, cth)
    theta = theta + 2.0 * np.pi * np.round((theta_hint - theta) / (2.0 * np.pi))
    fhd = -sth * z[3] + cth * z[7]
    w = (-cth * z[3] - sth * z[7]) / fh
    eps = p.epsilon
    s = PlantState(
        x=z[0] + eps * sth,
        y=z[4] - eps * (cth - 1.0),
        theta=theta,
        xdot=z[1] + eps * w * cth,
        ydot=z[5] + eps * w * sth,
        thetadot=w,
    )
    return s, CompensatorState(fhat=fh, fhatdot=fhd)


def normal_form_fields(s: PlantState, c: CompensatorState, p: PlantParams):
    """Drift ``Phi`` (8, ...) and input matrix ``Gamma`` (8, 2, ...) of the normal form."""
    z = lift_to_normal_form(s, c, p)
    cth, sth = np.cos(s.theta), np.sin(s.theta)
    fh, fhd, w = c.fhat, c.fhatdot, s.thetadot
    phi = np.array(np.broadcast_arrays(
        z[1], z[2], z[3],
        fh * w**2 * sth - 2.0 * fhd * w * cth,
        z[5], z[6], z[7],
        -fh * w**2 * cth - 2.0 * fhd * w * sth,
    ), dtype=float)
    zero = np.zeros(z.shape[1:])
    cth, sth, fh = np.broadcast_arrays(cth, sth, fh * zero + fh)
    gamma = np.array([
        [zero, zero], [zero, zero], [zero, zero],
        [-sth, -fh * cth],
        [zero, zero], [zero, zero], [zero, zero],
        [cth, -fh * sth],
    ])
    return phi, gamma


def input_matrix_2x2(theta, fhat) -> np.ndarray:
    """Rows 4 and 8 of ``Gamma``; its determinant equals ``fhat``."""
    c, sn = np.cos(theta), np.sin(theta)
    return np.array([[-sn, -fhat * c], [c, -fhat * sn]])
