"""Compiled closed-loop right-hand sides and fixed-step RK4 loops.

These mirror the readable functions in :mod:`pvtol.model`,
:mod:`pvtol.control` and :mod:`pvtol.sim` and exist only for speed; the test
suite checks them against those functions point by point.

Parameter vector layout (``prm``) is given by the ``I_*`` constants below.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure-Python fallback, slow but correct
    def njit(*_args, **_kwargs):
        def deco(fn):
            return fn
        return deco

from .clf import P0 as _P0_PUBLIC

P0 = np.array(_P0_PUBLIC)

I_EPS, I_G, I_C0, I_KX, I_KY = 0, 1, 2, 3, 4
I_K0 = 5  # 4 entries
I_XREF, I_YREF = 9, 10
I_DF, I_DTAU = 11, 12
I_FHAT_FLOOR, I_BREL = 13, 14
N_PRM = 15

CTRL_INVOPT, CTRL_FBL = 0, 1
ROUTE_PLANT, ROUTE_NORMAL = 0, 1
OK, DIVERGED, SINGULAR = 0, 1, 2

DIVERGENCE_BOUND = 1e9

# aux slots filled alongside a derivative evaluation
A_U1, A_U2, A_F, A_TAU, A_V, A_MU, A_B, A_ALPHA = range(8)
N_AUX = 8

N_AUG = 9  # x y theta xdot ydot thetadot fhat fhatdot J
N_NF = 9  # z1..z8 J


@njit(cache=True)
def _control(e, Pe, ph4, ph8, S, C, fh, prm, ctrl, aux):
    """Command and CLF bookkeeping from the error state and normal-form fields."""
    kx = prm[I_KX]
    ky = prm[I_KY]
    for i in range(4):
        sx = 0.0
        sy = 0.0
        for j in range(4):
            sx += P0[i, j] * e[j]
            sy += P0[i, j] * e[4 + j]
        Pe[i] = kx * sx
        Pe[4 + i] = ky * sy
    alpha = (Pe[0] * e[1] + Pe[1] * e[2] + Pe[2] * e[3] + Pe[3] * ph4
             + Pe[4] * e[5] + Pe[5] * e[6] + Pe[6] * e[7] + Pe[7] * ph8)
    beta1 = -S * Pe[3] + C * Pe[7]
    beta2 = -fh * C * Pe[3] - fh * S * Pe[7]
    b = beta1 * beta1 + beta2 * beta2
    zz = 0.0
    V = 0.0
    for i in range(8):
        zz += e[i] * e[i]
        V += e[i] * Pe[i]
    V *= 0.5
    c0 = prm[I_C0]
    active = b > prm[I_BREL] * (1.0 + zz)
    if active:
        mu = c0 + (alpha + math.sqrt(alpha * alpha + b * b)) / b
    else:
        mu = c0
    if ctrl == CTRL_INVOPT:
        if active:
            u1 = -mu * beta1
            u2 = -mu * beta2
        else:
            u1 = 0.0
            u2 = 0.0
    else:
        # G = [[-S, -fh C], [C, -fh S]], det G = fh
        det = S * S * fh + C * C * fh
        if not abs(det) >= prm[I_FHAT_FLOOR]:
            return SINGULAR
        v1 = 0.0
        v2 = 0.0
        for j in range(4):
            v1 -= prm[I_K0 + j] * e[j]
            v2 -= prm[I_K0 + j] * e[4 + j]
        r1 = v1 - ph4
        r2 = v2 - ph8
        u1 = (-fh * S * r1 + fh * C * r2) / det
        u2 = (-C * r1 - S * r2) / det
    aux[A_U1] = u1
    aux[A_U2] = u2
    aux[A_V] = V
    aux[A_MU] = mu
    aux[A_B] = b
    aux[A_ALPHA] = alpha
    return OK


@njit(cache=True)
def plant_rhs(a, prm, ctrl, out, aux, work):
    """Derivative of [plant(6), compensator(2), cost(1)] under the chosen law.

    ``work`` is a (2, 8) scratch array for the error state and ``P e``.
    """
    eps = prm[I_EPS]
    g = prm[I_G]
    th = a[2]
    w = a[5]
    fh = a[6]
    fhd = a[7]
    S = math.sin(th)
    C = math.cos(th)
    e = work[0]
    e[0] = a[0] - eps * S - prm[I_XREF]
    e[1] = a[3] - eps * w * C
    e[2] = -fh * S
    e[3] = -fhd * S - fh * w * C
    e[4] = a[1] + eps * (C - 1.0) - prm[I_YREF]
    e[5] = a[4] - eps * w * S
    e[6] = fh * C - g
    e[7] = fhd * C - fh * w * S
    ph4 = fh * w * w * S - 2.0 * fhd * w * C
    ph8 = -fh * w * w * C - 2.0 * fhd * w * S
    status = _control(e, work[1], ph4, ph8, S, C, fh, prm, ctrl, aux)
    if status != OK:
        return status
    u1 = prm[I_DF] * aux[A_U1]
    u2 = prm[I_DTAU] * aux[A_U2]
    mu = aux[A_MU]
    f = fh + eps * w * w
    out[0] = a[3]
    out[1] = a[4]
    out[2] = w
    out[3] = eps * u2 * C - f * S
    out[4] = eps * u2 * S + f * C - g
    out[5] = u2
    out[6] = fhd
    out[7] = u1
    out[8] = 0.5 * mu * aux[A_B] + (u1 * u1 + u2 * u2) / (2.0 * mu)
    aux[A_F] = f
    aux[A_TAU] = u2
    return OK


@njit(cache=True)
def normal_form_rhs(zJ, prm, ctrl, out, aux, work):
    """Derivative of [z(8), cost(1)] integrated directly in normal-form coordinates.

    The attitude quantities entering Phi and Gamma are recovered from z on the
    branch fhat > 0.  ``work`` as in :func:`plant_rhs`.
    """
    g = prm[I_G]
    a_ = -zJ[2]
    b_ = zJ[6] + g
    fh = math.sqrt(a_ * a_ + b_ * b_)
    if not fh >= prm[I_FHAT_FLOOR]:
        return SINGULAR
    S = a_ / fh
    C = b_ / fh
    fhd = -S * zJ[3] + C * zJ[7]
    w = (-C * zJ[3] - S * zJ[7]) / fh
    e = work[0]
    for i in range(8):
        e[i] = zJ[i]
    e[0] -= prm[I_XREF]
    e[4] -= prm[I_YREF]
    ph4 = fh * w * w * S - 2.0 * fhd * w * C
    ph8 = -fh * w * w * C - 2.0 * fhd * w * S
    status = _control(e, work[1], ph4, ph8, S, C, fh, prm, ctrl, aux)
    if status != OK:
        return status
    u1 = prm[I_DF] * aux[A_U1]
    u2 = prm[I_DTAU] * aux[A_U2]
    mu = aux[A_MU]
    out[0] = zJ[1]
    out[1] = zJ[2]
    out[2] = zJ[3]
    out[3] = ph4 - S * u1 - fh * C * u2
    out[4] = zJ[5]
    out[5] = zJ[6]
    out[6] = zJ[7]
    out[7] = ph8 + C * u1 - fh * S * u2
    out[8] = 0.5 * mu * aux[A_B] + (u1 * u1 + u2 * u2) / (2.0 * mu)
    aux[A_F] = fh + prm[I_EPS] * w * w
    aux[A_TAU] = u2
    return OK


@njit(cache=True)
def _rhs(route, y, prm, ctrl, out, aux, work):
    if route == ROUTE_PLANT:
        return plant_rhs(y, prm, ctrl, out, aux, work)
    return normal_form_rhs(y, prm, ctrl, out, aux, work)


@njit(cache=True)
def _finite(y):
    for j in range(y.shape[0]):
        if not abs(y[j]) <= DIVERGENCE_BOUND:
            return False
    return True


@njit(cache=True)
def _record(rec, row, t, y, aux):
    n = y.shape[0]
    rec[row, 0] = t
    for j in range(n):
        rec[row, 1 + j] = y[j]
    for j in range(N_AUX):
        rec[row, 1 + n + j] = aux[j]


@njit(cache=True)
def integrate(route, y0, prm, ctrl, dt, n_steps, decimation):
    """Classical RK4 from t = 0 for ``n_steps`` steps of size ``dt``.

    Rows of the returned record array are ``[t, y..., aux...]`` at t = 0,
    every ``decimation``-th step and the final step.  Returns
    ``(records, status, k_stop, y_final)`` where ``k_stop`` is the number of
    completed steps.
    """
    n = y0.shape[0]
    n_rows = n_steps // decimation + 2
    rec = np.full((n_rows, 1 + n + N_AUX), np.nan)
    y = y0.copy()
    tmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    aux = np.full(N_AUX, np.nan)
    scratch = np.empty(N_AUX)
    work = np.empty((2, 8))
    row = 0
    status = _rhs(route, y, prm, ctrl, k1, aux, work)
    _record(rec, row, 0.0, y, aux)
    row += 1
    if status != OK:
        return rec[:row], status, 0, y
    if not _finite(y):
        return rec[:row], DIVERGED, 0, y
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n_steps):
        status = _rhs(route, y, prm, ctrl, k1, scratch, work)
        if status != OK:
            return rec[:row], status, k, y
        for j in range(n):
            tmp[j] = y[j] + half * k1[j]
        status = _rhs(route, tmp, prm, ctrl, k2, scratch, work)
        if status != OK:
            return rec[:row], status, k, y
        for j in range(n):
            tmp[j] = y[j] + half * k2[j]
        status = _rhs(route, tmp, prm, ctrl, k3, scratch, work)
        if status != OK:
            return rec[:row], status, k, y
        for j in range(n):
            tmp[j] = y[j] + dt * k3[j]
        status = _rhs(route, tmp, prm, ctrl, k4, scratch, work)
        if status != OK:
            return rec[:row], status, k, y
        for j in range(n):
            tmp[j] = y[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        if not _finite(tmp):
            return rec[:row], DIVERGED, k + 1, tmp
        for j in range(n):
            y[j] = tmp[j]
        done = k + 1
        if done % decimation == 0 or done == n_steps:
            for j in range(N_AUX):
                aux[j] = np.nan
            _rhs(route, y, prm, ctrl, k1, aux, work)
            _record(rec, row, done * dt, y, aux)
            row += 1
    return rec[:row], OK, n_steps, y


@njit(cache=True)
def zero_dynamics(theta0, thetadot0, gain, dt, n_steps):
    """RK4 of theta'' = gain * sin(theta); rows are [t, theta, thetadot]."""
    out = np.empty((n_steps + 1, 3))
    th = theta0
    w = thetadot0
    out[0, 0] = 0.0
    out[0, 1] = th
    out[0, 2] = w
    for k in range(n_steps):
        a1 = w
        b1 = gain * math.sin(th)
        a2 = w + 0.5 * dt * b1
        b2 = gain * math.sin(th + 0.5 * dt * a1)
        a3 = w + 0.5 * dt * b2
        b3 = gain * math.sin(th + 0.5 * dt * a2)
        a4 = w + dt * b3
        b4 = gain * math.sin(th + dt * a3)
        th = th + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        w = w + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        out[k + 1, 0] = (k + 1) * dt
        out[k + 1, 1] = th
        out[k + 1, 2] = w
    return out
