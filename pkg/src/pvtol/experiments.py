"""Canonical scenarios, nominal controller comparison and the Monte-Carlo gain study."""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .control import SetPoint
from .model import PlantParams
from .sim import SimConfig, SimResult, run

TAIL_WINDOW = (25.0, 30.0)
TAIL_LENGTH = TAIL_WINDOW[1] - TAIL_WINDOW[0]
ENVELOPE_SIGNALS = ("x", "y", "theta", "f", "tau")
SUMMARY_COLUMNS = ("id", "delta_f", "delta_tau", "status", "final_err", "final_cost",
                   "peak_theta", "tail_osc")


@dataclass(frozen=True)
class Scenario:
    name: str
    config: SimConfig
    description: str = ""


def canonical_scenario() -> Scenario:
    """Hover at rest at the origin, regulate to (5, 5); eps = 1, g = 9.81, T = 30 s."""
    cfg = SimConfig(plant=PlantParams(epsilon=1.0, gravity=9.81), setpoint=SetPoint(5.0, 5.0),
                    t_final=30.0)
    return Scenario("canonical", cfg, "rest at origin, step to (5, 5)")


def hover_scenario() -> Scenario:
    cfg = SimConfig(setpoint=SetPoint(0.0, 0.0), t_final=30.0)
    return Scenario("hover", cfg, "equilibrium at the setpoint")


SCENARIOS = {
    "canonical": canonical_scenario,
    "hover": hover_scenario,
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}") from None


class Comparison(NamedTuple):
    invopt: SimResult
    fbl: SimResult

    @property
    def J_invopt(self) -> float:
        return float(self.invopt["J"][-1])

    @property
    def J_fbl(self) -> float:
        return float(self.fbl["J"][-1])

    @property
    def ratio(self) -> float:
        return self.J_fbl / self.J_invopt

    def report_line(self) -> str:
        return f"J_invopt={self.J_invopt:.17g} J_fbl={self.J_fbl:.17g} ratio={self.ratio:.17g}"


def compare_nominal(s: Scenario) -> Comparison:
    """Both controllers on the same scenario, scored with the same running cost."""
    return Comparison(
        invopt=run(s.config.with_(controller="invopt", delta=(1.0, 1.0))),
        fbl=run(s.config.with_(controller="fbl", delta=(1.0, 1.0))),
    )


@dataclass(frozen=True)
class MonteCarloConfig:
    n_runs: int = 100
    delta_range: tuple = (0.2, 5.0)
    seed: int = 42
    fixed_delta: tuple | None = None  # overrides sampling, e.g. (1, 1)

    def __post_init__(self):
        if int(self.n_runs) < 1:
            raise ValueError(f"n_runs: must be >= 1, got {self.n_runs}")
        lo, hi = (float(v) for v in self.delta_range)
        if not 0.0 < lo <= hi:
            raise ValueError(f"delta_range: need 0 < lo <= hi, got {self.delta_range}")
        object.__setattr__(self, "delta_range", (lo, hi))
        if self.fixed_delta is not None:
            fd = tuple(float(v) for v in self.fixed_delta)
            if len(fd) != 2 or min(fd) <= 0.0:
                raise ValueError(f"fixed_delta: need two positive values, got {self.fixed_delta}")
            object.__setattr__(self, "fixed_delta", fd)


def draw_delta(mc: MonteCarloConfig, run_id: int) -> tuple[float, float]:
    """Input gains of one run, from a generator keyed by (seed, run id)."""
    if mc.fixed_delta is not None:
        return mc.fixed_delta
    rng = np.random.default_rng([mc.seed, run_id])
    lo, hi = mc.delta_range
    d = rng.uniform(lo, hi, size=2)
    return float(d[0]), float(d[1])


@dataclass
class RunSummary:
    run_id: int
    delta: tuple
    status: str
    final_err: float | None = None
    final_cost: float | None = None
    peak_theta: float | None = None
    tail_osc: float | None = None

    def row(self) -> list[str]:
        def fmt(v):
            return "" if v is None else f"{v:.17g}"
        return [str(self.run_id), fmt(self.delta[0]), fmt(self.delta[1]), self.status,
                fmt(self.final_err), fmt(self.final_cost), fmt(self.peak_theta), fmt(self.tail_osc)]


def tail_oscillation(t: np.ndarray, theta: np.ndarray, window=TAIL_WINDOW) -> float:
    """``max |theta| - mean |theta|`` over the window: zero for any constant attitude."""
    mask = (t >= window[0] - 1e-9) & (t <= window[1] + 1e-9)
    if not mask.any():
        raise ValueError(f"no samples inside tail window {window}")
    a = np.abs(theta[mask])
    return float(a.max() - a.mean())


def tail_window(result: SimResult) -> tuple[float, float]:
    """The last ``TAIL_LENGTH`` seconds of the horizon; [25, 30] for a 30 s run."""
    T = result.cfg.t_final if result.cfg is not None else float(result.t[-1])
    return (max(0.0, T - TAIL_LENGTH), T)


def summarize(result: SimResult, run_id: int = 0) -> RunSummary:
    if len(result) == 0:
        raise ValueError("empty record sequence")
    delta = result.cfg.delta if result.cfg is not None else (1.0, 1.0)
    if not result.completed:
        return RunSummary(run_id, delta, result.status)
    e_final = result.error()[:, -1]
    return RunSummary(
        run_id=run_id,
        delta=delta,
        status=result.status,
        final_err=float(np.linalg.norm(e_final)),
        final_cost=float(result["J"][-1]),
        peak_theta=float(np.max(np.abs(result["theta"]))),
        tail_osc=tail_oscillation(result.t, result["theta"], tail_window(result)),
    )


@dataclass
class MonteCarloResult:
    controller: str
    summaries: list
    results: list = field(repr=False)
    envelope_t: np.ndarray = field(repr=False, default=None)
    envelope: dict = field(repr=False, default_factory=dict)  # signal -> (min, max)

    def counts(self) -> dict:
        out: dict = {}
        for s in self.summaries:
            out[s.status] = out.get(s.status, 0) + 1
        return out

    @property
    def all_completed(self) -> bool:
        return all(s.status == "completed" for s in self.summaries)

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# schema=1\n")
        buf.write(",".join(SUMMARY_COLUMNS) + "\n")
        for s in self.summaries:
            buf.write(",".join(s.row()) + "\n")
        return buf.getvalue()

    def envelope_csv(self) -> str:
        cols = ["t"]
        for name in ENVELOPE_SIGNALS:
            cols += [f"{name}_min", f"{name}_max"]
        buf = io.StringIO()
        buf.write("# schema=1\n")
        buf.write(",".join(cols) + "\n")
        if self.envelope_t is None:
            return buf.getvalue()
        for k, t in enumerate(self.envelope_t):
            vals = [t]
            for name in ENVELOPE_SIGNALS:
                lo, hi = self.envelope[name]
                vals += [lo[k], hi[k]]
            buf.write(",".join(f"{v:.17g}" for v in vals) + "\n")
        return buf.getvalue()


def envelope(results, signals=ENVELOPE_SIGNALS):
    """Per-sample min/max over completed runs; ``(t, {signal: (min, max)})``."""
    done = [r for r in results if r.completed]
    if not done:
        return None, {}
    n = min(len(r) for r in done)
    t = done[0].t[:n]
    env = {}
    for name in signals:
        stack = np.stack([r[name][:n] for r in done])
        env[name] = (stack.min(axis=0), stack.max(axis=0))
    return t, env


def _run_one(args):
    run_id, cfg = args
    return run_id, run(cfg)


def monte_carlo(s: Scenario, mc: MonteCarloConfig = MonteCarloConfig(), controller: str = "invopt",
                jobs: int | None = 1) -> MonteCarloResult:
    """Perturbed-input runs of one controller.

    Results are ordered by run id, so the outcome does not depend on ``jobs``.
    ``jobs=None`` uses every available core.
    """
    tasks = [(i, s.config.with_(controller=controller, delta=draw_delta(mc, i)))
             for i in range(int(mc.n_runs))]
    jobs = (os.cpu_count() or 1) if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(tasks) == 1:
        done = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    done.sort(key=lambda item: item[0])
    results = [r for _, r in done]
    summaries = [summarize(r, i) for i, r in done]
    t, env = envelope(results)
    return MonteCarloResult(controller=controller, summaries=summaries, results=results,
                            envelope_t=t, envelope=env)


def max_metric(summaries, name: str) -> float:
    vals = [getattr(s, name) for s in summaries if getattr(s, name) is not None]
    return max(vals) if vals else math.nan
