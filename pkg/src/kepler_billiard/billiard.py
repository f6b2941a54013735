"""Event-driven dynamics against the wall y = h, with invariant certification.

Between collisions the particle follows its Kepler ellipse exactly; the wall
crossing is located in closed form because the height along the orbit is a
pure sinusoid of the eccentric anomaly,

    y(E) = Cy + aM*uy*cos(E) + b*vy*sin(E) = Cy + rho*cos(E - E*),

so the upward crossing (dy/dt > 0) is ``E* - arccos((h - Cy)/rho)`` modulo one
revolution.  Reflection negates py, preserving energy and the semi-major axis;
the quantity

    R = a^2 + h*alpha*e*sin(theta0)
      = alpha/(2*aM) * (h^2 + aM^2 - R0^2)

is conserved across collisions, where R0 is the distance from the wall foot
Q = (0, h) to the ellipse center.  Each collision is certified through an
:class:`InvariantReport` that cross-checks the two routes to R0 and R and the
box bounds on both.

The tangent-wall angle ``lambda`` recorded on events is the direction of the
incoming velocity reduced modulo pi into (0, pi); since reflections send
lambda to pi - lambda and the R0 formula depends on cos(2*lambda) only, this
convention is insensitive to the sense of parametrization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DomainError,
    EmptyLevelSet,
    EmptyRegion,
    GrazingContact,
    NoCollision,
    NotOnWall,
)
from .kepler import (
    TWO_PI,
    CartesianState,
    OrbitalElements,
    Params,
    eccentric_of_state,
    elements_from_cartesian,
    mean_from_eccentric,
    state_at_eccentric,
    time_to_anomaly,
)

TOL_EVENT = 1e-12
TOL_GRAZE = 1e-10
TOL_LEVEL = 1e-10


@dataclass(frozen=True)
class CollisionEvent:
    """One wall impact: geometry at the impact point plus both ellipses."""

    n: int
    t: float
    x_impact: float
    r: float
    lam: float
    pre: OrbitalElements
    post: OrbitalElements


@dataclass(frozen=True)
class InvariantReport:
    """Per-collision certification of the conserved quantity and its bounds."""

    n: int
    A: float
    R_eq16: float
    R0: float
    R_eq17: float
    residual_identity: float
    bounds_ok: bool


@dataclass(frozen=True)
class ConstantRCurve:
    """Level set of R in the (x, lambda) rectangle, as a closed polyline."""

    A: float
    R: float
    points: np.ndarray  # shape (N, 2): columns x, lambda


@dataclass(frozen=True)
class WallCrossing:
    """Earliest forward wall crossing of an ellipse, with impact geometry."""

    E_hit: float
    t_hit: float
    x_impact: float
    r: float
    lam: float


@dataclass(frozen=True)
class BilliardRun:
    """Output of :func:`run`: events, reports, and optional dense samples."""

    events: list[CollisionEvent]
    reports: list[InvariantReport]
    samples: np.ndarray  # shape (N, 5): columns t, x, y, px, py
    no_collision: bool = False
    halted: str | None = None
    final_state: CartesianState | None = None


def conserved_R(el: OrbitalElements, p: Params) -> float:
    """The conserved quantity R = a^2 + h*alpha*e*sin(theta0)."""
    if p.g != 0.0:
        raise ValueError("R is only conserved at g = 0")
    return el.a * el.a + p.h * p.alpha * el.e * math.sin(el.theta0)


def R0_from_geometry(r: float, aM: float, lam: float) -> float:
    """Distance wall-foot-to-center from impact geometry (r, aM, lambda).

    Raises:
        DomainError: unless 0 < r < 2*aM.
    """
    if not 0.0 < r < 2.0 * aM:
        raise DomainError(f"need 0 < r < 2*aM, got r = {r:g}, aM = {aM:g}")
    q = 2.0 * aM - r
    val = 0.25 * r * r + 0.25 * q * q + 0.5 * r * q * math.cos(2.0 * lam)
    return math.sqrt(max(val, 0.0))


def R0_from_center(el: OrbitalElements, p: Params) -> float:
    """Distance |Q - C| from the wall foot Q = (0, h) to the ellipse center."""
    _ = p.h  # Q depends on the wall only
    cx, cy = el.center
    return math.hypot(cx, p.h - cy)


def R_from_R0(R0: float, aM: float, p: Params) -> float:
    """R recovered from R0: alpha/(2*aM) * (h^2 + aM^2 - R0^2)."""
    if R0 < 0.0:
        raise DomainError("R0 must be non-negative")
    return p.alpha / (2.0 * aM) * (p.h * p.h + aM * aM - R0 * R0)


def tangent_angle(el: OrbitalElements, E: float) -> float:
    """Tangent-line angle against the wall at anomaly E, reduced to [0, pi)."""
    aM, b = el.aM, el.semi_minor
    ux, uy, vx, vy = el.frame()
    tx = -aM * math.sin(E) * ux + b * math.cos(E) * vx
    ty = -aM * math.sin(E) * uy + b * math.cos(E) * vy
    lam = math.atan2(ty, tx) % math.pi
    return lam


def next_wall_crossing(
    el: OrbitalElements, E_now: float, p: Params, tol_graze: float = TOL_GRAZE
) -> WallCrossing:
    """Earliest forward anomaly at which the ellipse meets y = h going up.

    Raises:
        NoCollision: if the ellipse stays below (or entirely above) the wall.
        GrazingContact: if the normal velocity at the contact is below
            ``tol_graze``.
    """
    aM, b, e = el.aM, el.semi_minor, el.e
    cx, cy = el.center
    ux, uy, vx, vy = el.frame()
    P = aM * uy
    Q = b * vy
    rho = math.hypot(P, Q)
    d = p.h - cy
    if rho < abs(d):
        if d > 0.0:
            raise NoCollision(f"max y = {cy + rho:g} below wall y = {p.h:g}")
        raise NoCollision("ellipse lies entirely above the wall")
    E_star = math.atan2(Q, P)
    delta = math.acos(max(-1.0, min(1.0, d / rho)))
    E_up = E_star - delta
    dE = (E_up - E_now) % TWO_PI
    E_hit = E_now + dE
    # outgoing-normal filter: dy/dt must be positive (approaching the wall)
    Edot = el.mean_motion() / (1.0 - e * math.cos(E_hit))
    vy_hit = rho * math.sin(delta) * Edot
    if vy_hit <= tol_graze:
        raise GrazingContact(
            f"normal velocity {vy_hit:g} at contact below tol {tol_graze:g}"
        )
    cE, sE = math.cos(E_hit), math.sin(E_hit)
    x_impact = cx + aM * cE * ux + b * sE * vx
    r = aM * (1.0 - e * cE)
    tx = -aM * sE * ux + b * cE * vx
    ty = -aM * sE * uy + b * cE * vy
    lam = math.atan2(ty, tx) % math.pi
    t_hit = time_to_anomaly(el, E_now, E_hit, p)
    return WallCrossing(E_hit=E_hit, t_hit=t_hit, x_impact=x_impact, r=r, lam=lam)


def reflect(s: CartesianState, p: Params, tol_event: float = TOL_EVENT) -> CartesianState:
    """Elastic reflection off the wall: negate py, keep everything else.

    Raises:
        NotOnWall: if the state is farther than ``tol_event`` from y = h.
    """
    if abs(s.y - p.h) >= tol_event:
        raise NotOnWall(f"|y - h| = {abs(s.y - p.h):g} >= {tol_event:g}")
    return replace(s, py=-s.py)


def step(
    s: CartesianState, p: Params, n: int = 0, tol_graze: float = TOL_GRAZE
) -> tuple[CartesianState, CollisionEvent]:
    """Propagate to the next wall impact and reflect.

    Returns the post-reflection state (on the wall, moving away) and the
    fully populated collision event.
    """
    if p.g != 0.0:
        raise ValueError("event-driven stepping requires g = 0")
    if s.y > p.h + TOL_EVENT:
        raise NotOnWall(f"state starts above the wall (y = {s.y:g})")
    el_pre = elements_from_cartesian(s, p)
    E0 = eccentric_of_state(el_pre, s)
    cr = next_wall_crossing(el_pre, E0, p, tol_graze=tol_graze)
    hit = state_at_eccentric(el_pre, cr.E_hit, p, t=s.t + cr.t_hit)
    hit = replace(hit, y=p.h)  # pin the contact exactly onto the wall
    out = reflect(hit, p)
    el_post = elements_from_cartesian(out, p)
    event = CollisionEvent(
        n=n,
        t=hit.t,
        x_impact=hit.x,
        r=cr.r,
        lam=cr.lam,
        pre=el_pre,
        post=el_post,
    )
    return out, event


def invariant_report(event: CollisionEvent, p: Params) -> InvariantReport:
    """Certify one collision: both routes to R plus the inequality box."""
    el = event.post
    aM = el.aM
    R16 = conserved_R(el, p)
    R0 = R0_from_geometry(event.r, aM, event.lam)
    R17 = R_from_R0(R0, aM, p)
    residual = abs(R16 - R17)
    lower = p.alpha * p.h * p.h / (2.0 * aM)
    upper = (
        1.0 + (aM / p.h) ** 2 - ((aM - event.r) / p.h) ** 2
    ) * lower
    bounds_ok = (
        event.r < 2.0 * aM
        and (aM - event.r) ** 2 < R0 * R0 < aM * aM
        and lower < R16 < upper
    )
    return InvariantReport(
        n=event.n,
        A=el.A,
        R_eq16=R16,
        R0=R0,
        R_eq17=R17,
        residual_identity=residual,
        bounds_ok=bounds_ok,
    )


def _arc_samples(
    el: OrbitalElements, E0: float, E1: float, t0: float, p: Params, m: int
) -> np.ndarray:
    """Sample an orbital arc at m points (excluding the final anomaly)."""
    aM, b, e = el.aM, el.semi_minor, el.e
    cx, cy = el.center
    ux, uy, vx, vy = el.frame()
    E = np.linspace(E0, E1, m, endpoint=False)
    cE, sE = np.cos(E), np.sin(E)
    x = cx + aM * cE * ux + b * sE * vx
    y = cy + aM * cE * uy + b * sE * vy
    Edot = el.mean_motion() / (1.0 - e * cE)
    px = (-aM * sE * ux + b * cE * vx) * Edot
    py = (-aM * sE * uy + b * cE * vy) * Edot
    M0 = mean_from_eccentric(E0, e)
    t = t0 + ((E - e * np.sin(E)) - M0) / el.mean_motion()
    return np.column_stack([t, x, y, px, py])


def run(
    s0: CartesianState,
    n: int,
    p: Params,
    samples_per_arc: int = 0,
    tol_graze: float = TOL_GRAZE,
) -> BilliardRun:
    """Run ``n`` collisions from ``s0``, certifying every event.

    Orbits that never reach the wall are legal: the run returns one sampled
    revolution of the untouched Kepler orbit with ``no_collision`` set.
    A grazing contact halts the run early with partial output and a
    diagnostic in ``halted``.
    """
    events: list[CollisionEvent] = []
    reports: list[InvariantReport] = []
    chunks: list[np.ndarray] = []
    state = s0
    halted = None
    no_collision = False
    for k in range(n):
        try:
            nxt, event = step(state, p, n=k, tol_graze=tol_graze)
        except NoCollision:
            if k == 0:
                no_collision = True
                el = elements_from_cartesian(state, p)
                E0 = eccentric_of_state(el, state)
                m = samples_per_arc if samples_per_arc > 0 else 256
                chunks.append(_arc_samples(el, E0, E0 + TWO_PI, state.t, p, m))
            else:  # pragma: no cover - reflected orbits keep hitting the wall
                halted = f"no further collision after event {k - 1}"
            break
        except GrazingContact as exc:
            halted = f"grazing contact at event {k}: {exc}"
            break
        if samples_per_arc > 0:
            el = event.pre
            E0 = eccentric_of_state(el, state)
            E1 = next_wall_crossing(el, E0, p, tol_graze).E_hit
            chunks.append(_arc_samples(el, E0, E1, state.t, p, samples_per_arc))
        events.append(event)
        reports.append(invariant_report(event, p))
        state = nxt
    if chunks:
        samples = np.vstack(chunks)
    else:
        samples = np.array([[s0.t, s0.x, s0.y, s0.px, s0.py]])
    return BilliardRun(
        events=events,
        reports=reports,
        samples=samples,
        no_collision=no_collision,
        halted=halted,
        final_state=state,
    )


def accessible_interval(A: float, p: Params) -> tuple[float, float]:
    """Abscissa interval of the energy surface on the wall.

    Returns the outermost roots (x_min, x_max) = (-x_max, x_max) of
    ``A = g/(x^2+h^2) - alpha/sqrt(x^2+h^2)``.

    Raises:
        EmptyRegion: if the energy surface never reaches the wall.
    """
    if A >= 0.0:
        raise ValueError("accessible region is defined for A < 0")
    disc = p.alpha * p.alpha + 4.0 * p.g * A
    if disc < 0.0:
        raise EmptyRegion("energy below the minimum of the effective potential")
    # smaller root of g*u^2 - alpha*u - A in u = 1/r, rationalized so the
    # g -> 0 limit alpha/|A| comes out without cancellation
    u_minus = -2.0 * A / (p.alpha + math.sqrt(disc))
    r_max = 1.0 / u_minus
    if r_max < p.h:
        raise EmptyRegion(f"turning radius {r_max:g} below wall height {p.h:g}")
    x_max = math.sqrt(max(r_max * r_max - p.h * p.h, 0.0))
    return (-x_max, x_max)


def r_value_on_section(x: float, lam: float, A: float, p: Params) -> float:
    """R evaluated at a section point (x, lambda) at energy A/2, g = 0."""
    aM = -p.alpha / (2.0 * A)
    r = math.hypot(x, p.h)
    return R_from_R0(R0_from_geometry(r, aM, lam), aM, p)


def level_set_R(
    A: float, R: float, p: Params, n_points: int = 1000
) -> ConstantRCurve:
    """Trace the level set R(x, lambda) = R inside the section rectangle.

    For each x the relation is affine in cos(2*lambda), so the lower-branch
    angle is recovered by a direct arccos and mirrored about pi/2; the two
    branches are returned as one closed polyline.

    Raises:
        EmptyLevelSet: if no interior point of the rectangle carries R.
    """
    aM = -p.alpha / (2.0 * A)
    R0_sq = p.h * p.h + aM * aM - 2.0 * aM * R / p.alpha
    if R0_sq < 0.0:
        raise EmptyLevelSet(f"R = {R:g} exceeds the value at R0 = 0")
    x_min, x_max = accessible_interval(A, Params(alpha=p.alpha, g=0.0, h=p.h))
    xs = np.linspace(x_min, x_max, n_points + 2)[1:-1]
    lower: list[tuple[float, float]] = []
    upper: list[tuple[float, float]] = []
    for x in xs:
        r = math.hypot(x, p.h)
        q = 2.0 * aM - r
        if q <= 0.0:
            continue
        c2 = (4.0 * R0_sq - r * r - q * q) / (2.0 * r * q)
        # the 1e-12 guard keeps round-off at the lambda = 0 boundary from
        # turning the degenerate R0 = aM level into spurious interior points
        if not -1.0 <= c2 <= 1.0 - 1e-12:
            continue
        lam = 0.5 * math.acos(c2)  # in (0, pi/2]
        lower.append((x, lam))
        if lam < 0.5 * math.pi:
            upper.append((x, math.pi - lam))
    if not lower:
        raise EmptyLevelSet(f"level R = {R:g} does not intersect the rectangle")
    pts = lower + upper[::-1]
    return ConstantRCurve(A=A, R=R, points=np.array(pts))
