"""Direct numerical integration of the full Hamiltonian, g >= 0.

Serves two purposes: an independent oracle for the event-driven g = 0
propagation, and the exploration tool for the perturbed system (Poincare
sections in the (x, lambda) rectangle, drift of the osculating R).

Integration uses an adaptive 8th-order Runge-Kutta pair (DOP853) with dense
output; the wall crossing y = h is located on the dense interpolant to
machine precision in time, keeping only crossings that approach the wall
(dy/dt > 0).  The osculating R at an impact is computed from the g = 0
element formulas applied to the instantaneous state; for g > 0 it is a
drift diagnostic, not an invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from . import billiard
from .errors import EscapeDetected, NoCollision, StepFailure
from .kepler import CartesianState, Params, elements_from_cartesian

R_SINGULARITY_GUARD = 1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    """Error control and event-location settings for the ODE route."""

    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = math.inf
    event_tol: float = 1e-12
    max_arc_time: float = 1e4
    escape_radius: float = 1e3

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol",
                     "max_arc_time", "escape_radius"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SectionPoint:
    """Impact record on the wall section: abscissa, tangent angle, osculating R."""

    n: int
    x: float
    lam: float
    R_value: float


@dataclass(frozen=True)
class EnergyDriftReport:
    """Hamiltonian conservation along each integrated arc."""

    H0: float
    per_arc: np.ndarray
    max_rel_drift: float


@dataclass(frozen=True)
class PerturbedRun:
    points: list[SectionPoint]
    drift: EnergyDriftReport
    events: list[billiard.CollisionEvent]
    samples: np.ndarray  # (N, 5): t, x, y, px, py


@dataclass(frozen=True)
class SeedOutcome:
    """Per-seed result of an ensemble run; failures are isolated."""

    seed_index: int
    points: list[SectionPoint]
    error: str | None = None


def _rhs(p: Params):
    alpha, g = p.alpha, p.g

    def f(_t, y):
        x, yy, px, py = y
        r2 = x * x + yy * yy
        r = math.sqrt(r2)
        # dV/dr of -alpha/(2r) + g/(2r^2), divided by r
        coef = -0.5 * alpha / (r2 * r) + g / (r2 * r2)
        return (px, py, coef * x, coef * yy)

    return f


def hamiltonian(s: CartesianState, p: Params) -> float:
    return s.hamiltonian(p)


def _integrate_arc(s: CartesianState, p: Params, cfg: IntegratorConfig):
    """One arc up to the next upward wall crossing; returns (state, t_hit, sol).

    ``sol`` is the solver result (with dense output) so callers can sample
    the arc; it is None for the zero-length case.
    """
    if abs(s.y - p.h) < cfg.event_tol and s.py > 0.0:
        return s, 0.0, None
    if s.hamiltonian(p) >= 0.0:
        raise EscapeDetected(f"H = {s.hamiltonian(p):g} >= 0")

    def wall(_t, y):
        return y[1] - p.h

    wall.terminal = True
    wall.direction = 1.0

    def escape(_t, y):
        return math.hypot(y[0], y[1]) - cfg.escape_radius

    escape.terminal = True
    escape.direction = 1.0

    def center(_t, y):
        return math.hypot(y[0], y[1]) - R_SINGULARITY_GUARD

    center.terminal = True
    center.direction = -1.0

    sol = solve_ivp(
        _rhs(p),
        (0.0, cfg.max_arc_time),
        [s.x, s.y, s.px, s.py],
        method="DOP853",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        events=[wall, escape, center],
        dense_output=True,
    )
    if sol.status == -1:
        raise StepFailure(f"integrator failed: {sol.message}")
    if len(sol.t_events[1]):
        raise EscapeDetected(f"left bounding radius {cfg.escape_radius:g}")
    if len(sol.t_events[2]):
        raise StepFailure(f"approached the center within {R_SINGULARITY_GUARD:g}")
    if not len(sol.t_events[0]):
        raise NoCollision(f"no wall crossing within t = {cfg.max_arc_time:g}")
    t_hit = float(sol.t_events[0][0])
    y_hit = sol.y_events[0][0]
    out = CartesianState(
        x=float(y_hit[0]), y=float(y_hit[1]),
        px=float(y_hit[2]), py=float(y_hit[3]),
        t=s.t + t_hit,
    )
    return out, t_hit, sol


def integrate_to_wall(
    s: CartesianState, p: Params, cfg: IntegratorConfig
) -> tuple[CartesianState, float]:
    """Integrate Hamilton's equations until the next upward wall crossing.

    Returns the state at y = h (approaching the wall) and the elapsed time.
    A state already on the wall and approaching it returns immediately.

    Raises:
        EscapeDetected: for non-negative energy or leaving the bounding radius.
        StepFailure: integrator breakdown or the r -> 0 singularity guard.
        NoCollision: no crossing within ``cfg.max_arc_time``.
    """
    out, t_hit, _ = _integrate_arc(s, p, cfg)
    return out, t_hit


def _dense_arc(sol_dense, t0: float, t1: float, t_offset: float, m: int) -> np.ndarray:
    ts = np.linspace(t0, t1, m, endpoint=False)
    ys = sol_dense(ts)
    return np.column_stack([ts + t_offset, ys.T])


def run_perturbed(
    s0: CartesianState,
    n: int,
    p: Params,
    cfg: IntegratorConfig | None = None,
    samples_per_arc: int = 0,
) -> PerturbedRun:
    """n wall collisions by direct integration, with per-arc energy audit.

    Reflection reuses the event-driven module's elastic law.  The osculating
    elements at each impact use the g = 0 formulas on the instantaneous
    state, so ``R_value`` is exactly the quantity whose drift measures the
    perturbation.
    """
    cfg = cfg or IntegratorConfig()
    g0 = Params(alpha=p.alpha, g=0.0, h=p.h)
    points: list[SectionPoint] = []
    events: list[billiard.CollisionEvent] = []
    drifts: list[float] = []
    chunks: list[np.ndarray] = []
    H0 = s0.hamiltonian(p)
    state = s0
    for k in range(n):
        hit, elapsed, sol = _integrate_arc(state, p, cfg)
        if samples_per_arc > 0 and sol is not None:
            chunks.append(_dense_arc(sol.sol, 0.0, elapsed, state.t, samples_per_arc))
        drifts.append(abs(hit.hamiltonian(p) - state.hamiltonian(p)))
        hit = replace(hit, y=p.h)  # pin onto the wall (within event accuracy)
        lam = math.atan2(hit.py, hit.px) % math.pi
        el_pre = elements_from_cartesian(hit, g0)
        out = billiard.reflect(hit, p, tol_event=10.0 * cfg.event_tol)
        el_post = elements_from_cartesian(out, g0)
        points.append(
            SectionPoint(
                n=k, x=hit.x, lam=lam, R_value=billiard.conserved_R(el_post, g0)
            )
        )
        events.append(
            billiard.CollisionEvent(
                n=k, t=hit.t, x_impact=hit.x, r=hit.r, lam=lam,
                pre=el_pre, post=el_post,
            )
        )
        state = out
    per_arc = np.array(drifts)
    scale = abs(H0) if H0 != 0.0 else 1.0
    drift = EnergyDriftReport(
        H0=H0,
        per_arc=per_arc,
        max_rel_drift=float(per_arc.max() / scale) if per_arc.size else 0.0,
    )
    samples = (
        np.vstack(chunks)
        if chunks
        else np.array([[s0.t, s0.x, s0.y, s0.px, s0.py]])
    )
    return PerturbedRun(points=points, drift=drift, events=events, samples=samples)


def section_ensemble(
    seeds: list[CartesianState],
    n: int,
    p: Params,
    cfg: IntegratorConfig | None = None,
) -> list[SeedOutcome]:
    """Section clouds for several seeds sharing one energy surface.

    Per-seed failures are recorded in the outcome and do not disturb the
    other seeds.

    Raises:
        ValueError: if the seeds do not share the same energy A.
    """
    cfg = cfg or IntegratorConfig()
    if seeds:
        A0 = seeds[0].energy_A(p)
        for i, s in enumerate(seeds[1:], start=1):
            if abs(s.energy_A(p) - A0) > 1e-9 * max(1.0, abs(A0)):
                raise ValueError(f"seed {i} has A = {s.energy_A(p):g} != {A0:g}")
    outcomes: list[SeedOutcome] = []
    for i, seed in enumerate(seeds):
        try:
            res = run_perturbed(seed, n, p, cfg)
            outcomes.append(SeedOutcome(seed_index=i, points=res.points))
        except Exception as exc:  # noqa: BLE001 - isolation is the contract
            outcomes.append(
                SeedOutcome(seed_index=i, points=[], error=f"{type(exc).__name__}: {exc}")
            )
    return outcomes
