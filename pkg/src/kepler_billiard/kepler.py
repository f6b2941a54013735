"""Closed-form planar two-body motion (the unperturbed, g = 0 case).

The attracting center sits at the origin with potential -alpha/(2r), so the
effective gravitational parameter is mu = alpha/2.  Bound orbits are ellipses
with one focus at the origin, identified by the triplet (A, a, theta0):

* ``A``      twice the orbital energy, ``A = p^2 - alpha/r`` (negative when bound),
* ``a``      the angular momentum ``x*py - y*px`` (its sign is the sense of rotation),
* ``theta0`` the polar angle of the aphelion, reduced to [0, 2*pi).

Derived quantities follow from the triplet: semi-major axis ``aM = -alpha/(2A)``,
eccentricity ``e = sqrt(1 + 4*A*a^2/alpha^2)``, and the Delaunay action
``L = -sqrt(alpha*aM/2)``.  The negative sign of ``L`` is a convention; it makes
the raw mean-motion rate ``alpha^2/(4L^3)`` negative, so elapsed times are always
computed from the magnitude ``|alpha^2/(4L^3)|``.

Anomalies use the standard conventions: true anomaly ``nu`` measured from the
perihelion in the direction of motion, eccentric anomaly ``E`` with
``r = aM*(1 - e*cos E)``, mean anomaly ``M = E - e*sin E``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import Degenerate, NoConvergence, Unbound

TWO_PI = 2.0 * math.pi

# Degeneracy and solver tolerances (double-precision headroom).
TOL_ECC = 1e-12
TOL_GEOM = 1e-12
TOL_KEPLER = 1e-14
MAX_KEPLER_ITER = 50


def wrap_angle(x: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    x = math.fmod(x, TWO_PI)
    return x + TWO_PI if x < 0.0 else x


@dataclass(frozen=True)
class Params:
    """Physical constants: attraction strength, centrifugal coefficient, wall height.

    The in-between-collisions Hamiltonian is
    ``H = (px^2 + py^2)/2 - alpha/(2r) + g/(2r^2)`` and the wall is the line
    ``y = h``.  Everything is dimensionless; the defaults ``alpha = 1, h = 1``
    are the values used throughout the reference runs.
    """

    alpha: float = 1.0
    g: float = 0.0
    h: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError("alpha must be > 0")
        if self.g < 0.0:
            raise ValueError("g must be >= 0")
        if not self.h > 0.0:
            raise ValueError("h must be > 0")

    @property
    def mu(self) -> float:
        """Gravitational parameter of the -alpha/(2r) potential."""
        return 0.5 * self.alpha


@dataclass(frozen=True)
class CartesianState:
    """Phase-space point (x, y, px, py) at time t."""

    x: float
    y: float
    px: float
    py: float
    t: float = 0.0

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def speed_sq(self) -> float:
        return self.px * self.px + self.py * self.py

    @property
    def angular_momentum(self) -> float:
        return self.x * self.py - self.y * self.px

    def energy_A(self, p: Params) -> float:
        """Twice the energy: ``p^2 - alpha/r + g/r^2``."""
        r = self.r
        return self.speed_sq - p.alpha / r + p.g / (r * r)

    def hamiltonian(self, p: Params) -> float:
        return 0.5 * self.energy_A(p)


@dataclass(frozen=True)
class OrbitalElements:
    """Bound Kepler ellipse (A, a, theta0) with the system constant alpha.

    ``alpha`` is carried along so the derived quantities (aM, e, L, center)
    are self-contained; operations that also receive :class:`Params` check
    the two agree.
    """

    A: float
    a: float
    theta0: float
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not self.A < 0.0:
            raise ValueError("bound orbit requires A < 0")
        if not self.alpha > 0.0:
            raise ValueError("alpha must be > 0")

    @property
    def aM(self) -> float:
        """Semi-major axis, -alpha/(2A)."""
        return -self.alpha / (2.0 * self.A)

    @property
    def e(self) -> float:
        """Eccentricity, sqrt(1 + 4*A*a^2/alpha^2), clipped against round-off."""
        e2 = 1.0 + 4.0 * self.A * self.a * self.a / (self.alpha * self.alpha)
        return math.sqrt(e2) if e2 > 0.0 else 0.0

    @property
    def L(self) -> float:
        """Delaunay action -sqrt(alpha*aM/2) (negative by convention)."""
        return -math.sqrt(0.5 * self.alpha * self.aM)

    @property
    def semi_minor(self) -> float:
        e = self.e
        return self.aM * math.sqrt(max(1.0 - e * e, 0.0))

    @property
    def is_circular(self) -> bool:
        return self.e <= TOL_ECC

    @property
    def center(self) -> tuple[float, float]:
        """Center of the ellipse, aM*e*(cos theta0, sin theta0)."""
        c = self.aM * self.e
        return (c * math.cos(self.theta0), c * math.sin(self.theta0))

    def frame(self) -> tuple[float, float, float, float]:
        """Unit axes (ux, uy, vx, vy) of the orbit.

        ``u`` points from the center toward the perihelion; ``v`` is ``u``
        rotated a quarter turn in the direction of motion, so the eccentric
        anomaly always increases with time regardless of the rotation sense.
        """
        ux = -math.cos(self.theta0)
        uy = -math.sin(self.theta0)
        if self.a >= 0.0:
            return ux, uy, -uy, ux
        return ux, uy, uy, -ux

    def mean_motion(self) -> float:
        """Magnitude of the mean-anomaly rate, |alpha^2 / (4 L^3)|."""
        L = self.L
        return self.alpha * self.alpha / (4.0 * abs(L) ** 3)

    def period(self) -> float:
        return TWO_PI / self.mean_motion()

    def max_y(self) -> float:
        """Largest y reached on the full ellipse."""
        ux, uy, vx, vy = self.frame()
        return self.center[1] + math.hypot(self.aM * uy, self.semi_minor * vy)


@dataclass(frozen=True)
class AnomalyTriple:
    """Mean, eccentric, and true anomaly of the same orbital position (radians)."""

    M: float
    E: float
    nu: float


@dataclass(frozen=True)
class DelaunayState:
    """Delaunay variables: actions (L, a), conjugate angles (M, theta0)."""

    L: float
    a: float
    M: float
    theta0: float


def _check_params(el: OrbitalElements, p: Params) -> None:
    if el.alpha != p.alpha:
        raise ValueError("elements were built with a different alpha than params")


def elements_from_cartesian(s: CartesianState, p: Params) -> OrbitalElements:
    """Osculating elements of a state under the g = 0 Hamiltonian.

    Uses the eccentricity vector ``(p x a)/mu - r_hat`` (which points at the
    perihelion) and takes the aphelion angle ``theta0`` from its opposite.
    Circular orbits get ``theta0 = 0`` by convention and are flagged through
    :attr:`OrbitalElements.is_circular`.

    Raises:
        Unbound: if the energy is non-negative.
        Degenerate: if r is (numerically) zero or the orbit is near-radial.
    """
    if p.g != 0.0:
        raise ValueError("closed-form elements require g = 0")
    r = s.r
    if r <= TOL_GEOM:
        raise Degenerate(f"state at r = {r:g} is too close to the center")
    A = s.speed_sq - p.alpha / r
    if A >= 0.0:
        raise Unbound(f"A = {A:g} >= 0: not a bound orbit")
    a = s.angular_momentum
    e2 = 1.0 + 4.0 * A * a * a / (p.alpha * p.alpha)
    e = math.sqrt(e2) if e2 > 0.0 else 0.0
    if e >= 1.0 - TOL_ECC:
        raise Degenerate(f"eccentricity {e:g} too close to 1 (radial orbit)")
    if e <= TOL_ECC:
        theta0 = 0.0
    else:
        # eccentricity vector (points at perihelion); aphelion is opposite
        ex = 2.0 * a * s.py / p.alpha - s.x / r
        ey = -2.0 * a * s.px / p.alpha - s.y / r
        theta0 = wrap_angle(math.atan2(-ey, -ex))
    return OrbitalElements(A=A, a=a, theta0=theta0, alpha=p.alpha)


def cartesian_from_elements(
    el: OrbitalElements, nu: float, p: Params, t: float = 0.0
) -> CartesianState:
    """State on the ellipse at true anomaly ``nu`` (measured from perihelion).

    For retrograde orbits (a < 0) the polar angle runs backwards while ``nu``
    still increases with time.
    """
    _check_params(el, p)
    e = el.e
    if e >= 1.0 - TOL_ECC:
        raise Degenerate(f"eccentricity {e:g} too close to 1")
    aM = el.aM
    ell = aM * (1.0 - e * e)  # semi-latus rectum
    r = ell / (1.0 + e * math.cos(nu))
    sigma = 1.0 if el.a >= 0.0 else -1.0
    phi = el.theta0 + math.pi + sigma * nu
    cphi, sphi = math.cos(phi), math.sin(phi)
    hmom = math.sqrt(p.mu * ell)  # = |a|
    vr = p.mu / hmom * e * math.sin(nu)
    vt = p.mu / hmom * (1.0 + e * math.cos(nu))
    return CartesianState(
        x=r * cphi,
        y=r * sphi,
        px=vr * cphi - sigma * vt * sphi,
        py=vr * sphi + sigma * vt * cphi,
        t=t,
    )


def state_at_eccentric(
    el: OrbitalElements, E: float, p: Params, t: float = 0.0
) -> CartesianState:
    """State on the ellipse at eccentric anomaly ``E`` (exact parametrization)."""
    _check_params(el, p)
    aM, b, e = el.aM, el.semi_minor, el.e
    cx, cy = el.center
    ux, uy, vx, vy = el.frame()
    cE, sE = math.cos(E), math.sin(E)
    x = cx + aM * cE * ux + b * sE * vx
    y = cy + aM * cE * uy + b * sE * vy
    Edot = el.mean_motion() / (1.0 - e * cE)
    px = (-aM * sE * ux + b * cE * vx) * Edot
    py = (-aM * sE * uy + b * cE * vy) * Edot
    return CartesianState(x=x, y=y, px=px, py=py, t=t)


def true_from_eccentric(E: float, e: float) -> float:
    """True anomaly from eccentric anomaly (continuous across revolutions)."""
    beta = e / (1.0 + math.sqrt(max(1.0 - e * e, 0.0)))
    return E + 2.0 * math.atan2(beta * math.sin(E), 1.0 - beta * math.cos(E))


def eccentric_from_true(nu: float, e: float) -> float:
    """Eccentric anomaly from true anomaly (continuous across revolutions)."""
    beta = e / (1.0 + math.sqrt(max(1.0 - e * e, 0.0)))
    return nu - 2.0 * math.atan2(beta * math.sin(nu), 1.0 + beta * math.cos(nu))


def mean_from_eccentric(E: float, e: float) -> float:
    return E - e * math.sin(E)


def anomaly_triple(el: OrbitalElements, nu: float) -> AnomalyTriple:
    """All three anomalies for the position at true anomaly ``nu``."""
    E = eccentric_from_true(nu, el.e)
    return AnomalyTriple(M=mean_from_eccentric(E, el.e), E=E, nu=nu)


def eccentric_of_state(el: OrbitalElements, s: CartesianState) -> float:
    """Eccentric anomaly in [0, 2*pi) of a state lying on the ellipse ``el``."""
    sigma = 1.0 if el.a >= 0.0 else -1.0
    phi = math.atan2(s.y, s.x)
    nu = wrap_angle(sigma * (phi - el.theta0 - math.pi))
    return wrap_angle(eccentric_from_true(nu, el.e))


def solve_kepler(
    M: float, e: float, tol: float = TOL_KEPLER, max_iter: int = MAX_KEPLER_ITER
) -> float:
    """Solve Kepler's equation E - e*sin(E) = M for the eccentric anomaly.

    Newton iteration started at ``M + e*sin(M)`` inside the bracket
    ``[M - e, M + e]``; any Newton step leaving the bracket falls back to
    bisection.  The returned anomaly keeps M's revolution offset.

    Raises:
        NoConvergence: if the residual is still above ``tol`` after
            ``max_iter`` iterations.
    """
    if not 0.0 <= e < 1.0:
        raise ValueError(f"eccentricity {e:g} outside [0, 1)")
    k = math.floor(M / TWO_PI)
    Mr = M - TWO_PI * k
    if e == 0.0:
        return Mr + TWO_PI * k
    lo, hi = Mr - e, Mr + e
    E = Mr + e * math.sin(Mr)
    f = E - e * math.sin(E) - Mr
    for _ in range(max_iter):
        if abs(f) < tol:
            return E + TWO_PI * k
        if f > 0.0:
            hi = E
        else:
            lo = E
        dE = f / (1.0 - e * math.cos(E))
        En = E - dE
        if not lo < En < hi:
            En = 0.5 * (lo + hi)
        E = En
        f = E - e * math.sin(E) - Mr
    if abs(f) < tol:
        return E + TWO_PI * k
    raise NoConvergence(f"Kepler solver stalled at |f| = {abs(f):g} (e = {e:g})")


def time_to_anomaly(
    el: OrbitalElements, E_from: float, E_to: float, p: Params
) -> float:
    """Elapsed time along the orbit from ``E_from`` to ``E_to``.

    Positive whenever ``E_to >= E_from`` (forward traversal); the paper's
    negative-L convention is absorbed into the magnitude of the mean motion.
    """
    _check_params(el, p)
    e = el.e
    dM = mean_from_eccentric(E_to, e) - mean_from_eccentric(E_from, e)
    return dM / el.mean_motion()


def delaunay_from_elements(
    el: OrbitalElements, nu: float, p: Params
) -> DelaunayState:
    """Delaunay variables (L, a; M, theta0) of the position at true anomaly nu.

    Raises:
        Degenerate: for circular orbits, where theta0 is undefined.
    """
    _check_params(el, p)
    if el.is_circular:
        raise Degenerate("theta0 undefined for a circular orbit")
    tri = anomaly_triple(el, nu)
    return DelaunayState(L=el.L, a=el.a, M=tri.M, theta0=el.theta0)


def elements_from_delaunay(d: DelaunayState, p: Params) -> OrbitalElements:
    """Inverse of :func:`delaunay_from_elements` (the A = -alpha^2/(4L^2) leg)."""
    A = -p.alpha * p.alpha / (4.0 * d.L * d.L)
    return OrbitalElements(A=A, a=d.a, theta0=wrap_angle(d.theta0), alpha=p.alpha)


def advance_state(s: CartesianState, dt: float, p: Params) -> CartesianState:
    """Propagate a g = 0 state by ``dt`` along its Kepler ellipse."""
    el = elements_from_cartesian(s, p)
    E0 = eccentric_of_state(el, s)
    M1 = mean_from_eccentric(E0, el.e) + el.mean_motion() * dt
    E1 = solve_kepler(M1, el.e)
    return replace(state_at_eccentric(el, E1, p), t=s.t + dt)
