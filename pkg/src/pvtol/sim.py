"""Fixed-step closed-loop simulation with optional input-gain perturbation.

The integrated state is ``[x, y, theta, xdot, ydot, thetadot, fhat, fhatdot, J]``:
plant, compensator and cost accumulator.  :func:`closed_loop_deriv` is the
readable composition of the model and control modules; :func:`run` drives the
compiled copy in :mod:`pvtol._kernel`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernel
from .clf import build_clf, evaluate_clf
from .control import (
    FblGains,
    SetPoint,
    SingularityError,
    SontagParams,
    cost_integrand,
    fbl_control,
    mu_value,
    reference_shift,
    sontag_control,
)
from .model import (
    CompensatorState,
    PlantParams,
    PlantState,
    lift_to_normal_form,
    normal_form_fields,
    plant_deriv,
    recover_plant_input,
)

CONTROLLERS = ("invopt", "fbl")
CSV_SCHEMA = 1
CSV_COLUMNS = ("t", "x", "y", "theta", "xdot", "ydot", "thetadot", "fhat", "fhatdot",
               "f", "tau", "u1", "u2", "V", "J")
NF_COLUMNS = ("t", "z1", "z2", "z3", "z4", "z5", "z6", "z7", "z8", "J", "u1", "u2", "V")

#: RK4 step used unless a config says otherwise.  The inverse optimal law puts
#: an attitude pole near -13 g^2 mu (about -1250 mu at g = 9.81); 1e-4 keeps
#: RK4 stable and accurate for input gains up to 5.
DEFAULT_DT = 1e-4
OUTPUT_RATE_HZ = 100.0


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    controller: str = "invopt"
    kx: float = 1.0
    ky: float = 1.0
    sontag: SontagParams = field(default_factory=SontagParams)
    fbl: FblGains = field(default_factory=FblGains)
    setpoint: SetPoint = SetPoint()
    dt: float = DEFAULT_DT
    t_final: float = 30.0
    delta: tuple = (1.0, 1.0)
    initial: PlantState = PlantState()
    compensator: CompensatorState | None = None  # None -> hover thrust (g, 0)
    decimation: int | None = None  # None -> 100 Hz output

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller: expected one of {CONTROLLERS}, got {self.controller!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt: must be > 0, got {self.dt}")
        if not (math.isfinite(self.t_final) and self.t_final > 0.0):
            raise ValueError(f"t_final: must be > 0, got {self.t_final}")
        delta = tuple(float(d) for d in self.delta)
        if len(delta) != 2 or not all(math.isfinite(d) and d > 0.0 for d in delta):
            raise ValueError(f"delta: need two positive multipliers, got {self.delta}")
        object.__setattr__(self, "delta", delta)
        if self.decimation is not None and int(self.decimation) < 1:
            raise ValueError(f"decimation: must be >= 1, got {self.decimation}")
        if not all(math.isfinite(v) for v in (*self.initial, *self.setpoint, *self.comp0)):
            raise ValueError("initial state and setpoint must be finite")
        # validates kx, ky > 0 and P > 0
        build_clf(self.kx, self.ky)

    @property
    def comp0(self) -> CompensatorState:
        if self.compensator is None:
            return CompensatorState(fhat=self.plant.gravity, fhatdot=0.0)
        return self.compensator

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def record_every(self) -> int:
        if self.decimation is not None:
            return int(self.decimation)
        return max(1, int(round(1.0 / (OUTPUT_RATE_HZ * self.dt))))

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def param_vector(self) -> np.ndarray:
        prm = np.zeros(_kernel.N_PRM)
        prm[_kernel.I_EPS] = self.plant.epsilon
        prm[_kernel.I_G] = self.plant.gravity
        prm[_kernel.I_C0] = self.sontag.c0
        prm[_kernel.I_KX] = self.kx
        prm[_kernel.I_KY] = self.ky
        prm[_kernel.I_K0:_kernel.I_K0 + 4] = self.fbl.K0
        prm[_kernel.I_XREF] = self.setpoint.x_ref
        prm[_kernel.I_YREF] = self.setpoint.y_ref
        prm[_kernel.I_DF], prm[_kernel.I_DTAU] = self.delta
        prm[_kernel.I_FHAT_FLOOR] = self.sontag.fhat_floor
        prm[_kernel.I_BREL] = self.sontag.b_floor_rel
        return prm

    def initial_augmented(self) -> np.ndarray:
        return np.array([*self.initial, *self.comp0, 0.0], dtype=float)

    @property
    def ctrl_code(self) -> int:
        return _kernel.CTRL_INVOPT if self.controller == "invopt" else _kernel.CTRL_FBL


def split_augmented(a):
    """Split an augmented vector (or column stack) into plant, compensator and cost."""
    return PlantState(*a[0:6]), CompensatorState(*a[6:8]), a[8]


def controller_output(a, cfg: SimConfig):
    """Commanded input and CLF bookkeeping at an augmented state.

    Returns ``(u_cmd, ev, mu)``.  Raises :class:`SingularityError` for the
    linearizing law at ``|fhat| < fhat_floor``.
    """
    s, c, _ = split_augmented(np.asarray(a, dtype=float))
    z = lift_to_normal_form(s, c, cfg.plant)
    phi, gamma = normal_form_fields(s, c, cfg.plant)
    e = reference_shift(z, cfg.setpoint)
    ev = evaluate_clf(build_clf(cfg.kx, cfg.ky), e, phi, gamma)
    mu = mu_value(ev, cfg.sontag)
    if cfg.controller == "invopt":
        u = sontag_control(ev, cfg.sontag)
    else:
        u = fbl_control(e, phi, gamma[[3, 7]], cfg.fbl, cfg.sontag.fhat_floor)
    return u, ev, mu


def closed_loop_deriv(a, cfg: SimConfig) -> np.ndarray:
    """Derivative of the augmented state (reference implementation)."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DivergenceError("non-finite state")
    s, c, _ = split_augmented(a)
    u_cmd, ev, mu = controller_output(a, cfg)
    u_app = np.asarray(cfg.delta) * u_cmd
    u = recover_plant_input(c, s, u_app[1], cfg.plant)
    ds = plant_deriv(s, u, cfg.plant)
    return np.array([*ds, c.fhatdot, u_app[0], cost_integrand(ev.b, u_app, mu)])


def rk4(fun, y, dt):
    """One classical Runge-Kutta step of ``y' = fun(y)``."""
    k1 = fun(y)
    k2 = fun(y + 0.5 * dt * k1)
    k3 = fun(y + 0.5 * dt * k2)
    k4 = fun(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(a, dt: float, cfg: SimConfig) -> np.ndarray:
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    return rk4(lambda y: closed_loop_deriv(y, cfg), np.asarray(a, dtype=float), dt)


_STATUS = {_kernel.OK: "completed", _kernel.DIVERGED: "diverged", _kernel.SINGULAR: "singular"}


@dataclass
class SimResult:
    """Recorded samples of one run plus its termination status.

    ``data`` has one row per retained sample and columns :data:`CSV_COLUMNS`.
    """

    data: np.ndarray
    status: str = "completed"
    t_stop: float = float("nan")
    final: np.ndarray | None = None  # augmented state at t_stop
    cfg: SimConfig | None = None
    columns: tuple = CSV_COLUMNS

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def plant_states(self) -> PlantState:
        return PlantState(*(self[n] for n in PlantState._fields))

    def compensator_states(self) -> CompensatorState:
        return CompensatorState(self["fhat"], self["fhatdot"])

    def normal_form(self) -> np.ndarray:
        """Lifted z for every sample, shape (8, n)."""
        return lift_to_normal_form(self.plant_states(), self.compensator_states(), self.cfg.plant)

    def error(self) -> np.ndarray:
        """Reference-shifted error for every sample, shape (8, n)."""
        return reference_shift(self.normal_form(), self.cfg.setpoint)

    def to_csv(self, path=None) -> str:
        text = format_csv(self.data, self.columns)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _rows_to_columns(rec: np.ndarray) -> np.ndarray:
    # kernel rows: t, x y th xd yd thd fh fhd J, aux(U1 U2 F TAU V MU B ALPHA)
    n = _kernel.N_AUG
    aux = rec[:, 1 + n:]
    return np.column_stack([
        rec[:, 0:9],  # t .. fhatdot
        aux[:, _kernel.A_F], aux[:, _kernel.A_TAU],
        aux[:, _kernel.A_U1], aux[:, _kernel.A_U2],
        aux[:, _kernel.A_V],
        rec[:, 9],  # J
    ])


def run(cfg: SimConfig) -> SimResult:
    """Integrate the physical plant loop from 0 to ``t_final``."""
    rec, status, k_stop, y = _kernel.integrate(
        _kernel.ROUTE_PLANT, cfg.initial_augmented(), cfg.param_vector(), cfg.ctrl_code,
        cfg.dt, cfg.n_steps, cfg.record_every)
    return SimResult(data=_rows_to_columns(rec), status=_STATUS[status], t_stop=k_stop * cfg.dt,
                     final=y, cfg=cfg)


def run_normal_form(cfg: SimConfig) -> SimResult:
    """Integrate the normal form directly from the lifted initial condition."""
    s0, c0 = cfg.initial, cfg.comp0
    z0 = lift_to_normal_form(s0, c0, cfg.plant)
    rec, status, k_stop, y = _kernel.integrate(
        _kernel.ROUTE_NORMAL, np.append(z0, 0.0), cfg.param_vector(), cfg.ctrl_code,
        cfg.dt, cfg.n_steps, cfg.record_every)
    aux = rec[:, 1 + _kernel.N_NF:]
    data = np.column_stack([rec[:, :1 + _kernel.N_NF], aux[:, _kernel.A_U1], aux[:, _kernel.A_U2],
                            aux[:, _kernel.A_V]])
    return SimResult(data=data, status=_STATUS[status], t_stop=k_stop * cfg.dt, final=y, cfg=cfg,
                     columns=NF_COLUMNS)


def run_zero_dynamics(theta0: float, duration: float, plant: PlantParams = PlantParams(),
                      dt: float = 1e-3, thetadot0: float = 0.0) -> np.ndarray:
    """Integrate the unforced attitude zero dynamics; rows are ``[t, theta, thetadot]``."""
    if plant.epsilon == 0.0:
        raise ValueError("zero dynamics undefined for epsilon = 0")
    if not (dt > 0.0 and duration > 0.0):
        raise ValueError("dt and duration must be > 0")
    n = int(round(duration / dt))
    return _kernel.zero_dynamics(float(theta0), float(thetadot0), plant.gravity / plant.epsilon, dt, n)


def format_csv(data: np.ndarray, columns) -> str:
    """CSV text with a schema comment, a header and 17 significant digits."""
    buf = io.StringIO()
    buf.write(f"# schema={CSV_SCHEMA}\n")
    buf.write(",".join(columns) + "\n")
    for row in np.asarray(data):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def read_csv(path) -> tuple[tuple, np.ndarray]:
    """Read a CSV written by :func:`format_csv`; returns ``(columns, data)``."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# schema={CSV_SCHEMA}":
            raise ValueError(f"unsupported schema line {first!r}")
        columns = tuple(fh.readline().strip().split(","))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return columns, data
