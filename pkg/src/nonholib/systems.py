"""Hand-coded reference systems: knife-edge sleigh and planar pendulum.

Closed-form right-hand sides live here so that the generic frame machinery
in :mod:`nonholib.dynamics` can be cross-checked against them, and so that
experiment runs do not pay the generic machinery's per-evaluation cost.

Sleigh conventions.  Chart (x, y, phi): skate contact point and blade
angle; mass m, inertia I about the center of mass, which sits a distance
a ahead of the contact point along the blade.  Quasi-velocities:

* u      speed along the blade
* v      sideways slip speed (the constrained direction, v = 0 on D)
* omega  angular velocity
* psi    = omega + (m a / (I + m a^2)) v, the angular coordinate that
         diagonalizes the kinetic metric; psi = omega on D.

The friction force is -v/eps times the unit covector normal to the blade
(unit friction coefficient in the slip direction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import RayleighFriction
from .geometry import MechanicalSystem, MovingFrame


class OriginSingularity(ValueError):
    """Pendulum fields are undefined at the origin (no radial direction)."""


# ---------------------------------------------------------------------------
# sleigh
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SleighParams:
    m: float = 1.0
    I: float = 1.0
    a: float = 0.2

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be positive")
        if not self.I > 0:
            raise ValueError("I must be positive")
        if self.a < 0:
            raise ValueError("a must be nonnegative")

    @property
    def itot(self) -> float:
        """Moment of inertia about the contact point, I + m a^2."""
        return self.I + self.m * self.a**2

    @property
    def coupling(self) -> float:
        """m a / (I + m a^2): psi = omega + coupling * v."""
        return self.m * self.a / self.itot

    @property
    def slaving(self) -> float:
        """m I / (I + m a^2): slip drift is v ~ -eps * slaving * u * psi.
        Also the metric weight of the slip direction."""
        return self.m * self.I / self.itot

    def fast_rate(self, eps: float) -> float:
        """Exponential decay rate of the slip velocity, (I + m a^2)/(I m eps)."""
        return self.itot / (self.I * self.m * eps)


def sleigh_nh_rhs(p: SleighParams, u: float, omega: float):
    """Constrained sleigh: udot = a omega^2, omegadot = -m a u omega / (I + m a^2)."""
    return p.a * omega * omega, -p.coupling * u * omega


def sleigh_constraint_force(p: SleighParams, u, omega, omegadot) -> float:
    """Reaction force magnitude m (u omega + a omegadot); it acts along
    (-sin phi, cos phi).  On constrained orbits this is m u omega I/(I + m a^2)."""
    return p.m * (u * omega + p.a * omegadot)


def sleigh_friction_rhs(p: SleighParams, eps: float, u, v, omega):
    """Slip-friction sleigh rates in the (u, v, omega) frame."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    udot = v * omega + p.a * omega * omega
    omegadot = p.a * v / (p.I * eps)
    vdot = -u * omega - p.itot * v / (p.m * p.I * eps)
    return udot, vdot, omegadot


def sleigh_friction_ortho_rhs(p: SleighParams, eps: float, u, v, psi):
    """Slip-friction sleigh rates in the orthogonal (u, v, psi) frame."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    c = p.coupling
    udot = (
        -(p.m * p.a**2 - p.I) / p.itot * v * psi
        - p.m * p.a * p.I / p.itot**2 * v * v
        + p.a * psi * psi
    )
    vdot = -u * psi + c * u * v - p.fast_rate(eps) * v
    psidot = -c * u * psi + c * c * u * v
    return udot, vdot, psidot


def sleigh_fast_closed_form(p: SleighParams, eps: float, u, omega, v0, t):
    """Frozen-coefficient slip relaxation:
    v(t) = (v0 + u omega / rho) exp(-rho t) - u omega / rho."""
    rho = p.fast_rate(eps)
    settle = -u * omega / rho
    return (v0 - settle) * np.exp(-rho * np.asarray(t, dtype=float)) + settle


def sleigh_h1_rhs(p: SleighParams, u: float, psi: float) -> float:
    """First-order slip drift: the slow manifold is v = eps * h1 + O(eps^2)
    with h1 = -m I u psi / (I + m a^2)."""
    return -p.slaving * u * psi


def sleigh_x1_rhs(p: SleighParams, x, y, phi, u, psi):
    """First-order correction field on (x, y, phi, u, psi).

    The (x, y) drift is the slip velocity along the blade normal; phi picks
    up the difference between omega and psi off the constraint.  Note the
    phi rate is -coupling * h1, i.e. positive for u psi > 0.
    """
    h1 = sleigh_h1_rhs(p, u, psi)
    s, c = math.sin(phi), math.cos(phi)
    return (
        -h1 * s,
        h1 * c,
        -p.coupling * h1,
        p.slaving * (p.m * p.a**2 - p.I) / p.itot * u * psi * psi,
        -p.slaving * p.coupling**2 * u * u * psi,
    )


def sleigh_energy(p: SleighParams, u, v, omega) -> float:
    """Kinetic energy in the (u, v, omega) frame (the metric couples v and
    omega through m a)."""
    return (
        0.5 * p.m * (u * u + v * v)
        + 0.5 * p.itot * omega * omega
        + p.m * p.a * omega * v
    )


def sleigh_energy_ortho(p: SleighParams, u, v, psi) -> float:
    """Kinetic energy in the diagonalizing (u, v, psi) frame."""
    return 0.5 * (p.m * u * u + p.slaving * v * v + p.itot * psi * psi)


# full-state fields used by the experiment driver ---------------------------


def sleigh_nh_field(p: SleighParams) -> Callable:
    """State (x, y, phi, u, omega)."""

    def rhs(st):
        x, y, phi, u, om = st
        udot, omdot = sleigh_nh_rhs(p, u, om)
        return np.array(
            [u * math.cos(phi), u * math.sin(phi), om, udot, omdot]
        )

    return rhs


def sleigh_friction_field(p: SleighParams, eps: float) -> Callable:
    """State (x, y, phi, u, v, omega)."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")

    def rhs(st):
        x, y, phi, u, v, om = st
        s, c = math.sin(phi), math.cos(phi)
        udot, vdot, omdot = sleigh_friction_rhs(p, eps, u, v, om)
        return np.array([u * c - v * s, u * s + v * c, om, udot, vdot, omdot])

    return rhs


def sleigh_fast_field(p: SleighParams) -> Callable:
    """Fast-time limit field on (x, y, phi, u, v, psi): only v relaxes."""
    rate = p.itot / (p.I * p.m)

    def rhs(st):
        out = np.zeros(6)
        out[4] = -rate * st[4]
        return out

    return rhs


def sleigh_corrected_field(p: SleighParams, eps: float) -> Callable:
    """Nonholonomic field plus eps times the first-order correction,
    state (x, y, phi, u, psi)."""
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")

    def rhs(st):
        x, y, phi, u, psi = st
        udot, psidot = sleigh_nh_rhs(p, u, psi)
        nh = np.array([u * math.cos(phi), u * math.sin(phi), psi, udot, psidot])
        if eps == 0.0:
            return nh
        return nh + eps * np.asarray(sleigh_x1_rhs(p, x, y, phi, u, psi))

    return rhs


# generic-machinery builders -------------------------------------------------


def sleigh_system(p: SleighParams) -> MechanicalSystem:
    """Chart metric of the sleigh with analytic derivatives, no potential."""

    def metric(q):
        phi = q[2]
        s, c = math.sin(phi), math.cos(phi)
        ma = p.m * p.a
        return np.array(
            [
                [p.m, 0.0, -ma * s],
                [0.0, p.m, ma * c],
                [-ma * s, ma * c, p.itot],
            ]
        )

    def metric_derivs(q):
        phi = q[2]
        s, c = math.sin(phi), math.cos(phi)
        ma = p.m * p.a
        out = np.zeros((3, 3, 3))
        out[:, :, 2] = np.array(
            [
                [0.0, 0.0, -ma * c],
                [0.0, 0.0, -ma * s],
                [-ma * c, -ma * s, 0.0],
            ]
        )
        return out

    return MechanicalSystem(n=3, metric=metric, metric_derivs=metric_derivs)


def sleigh_ortho_frame(p: SleighParams) -> MovingFrame:
    """Adapted orthogonal frame, columns ordered (u, psi, v), k = 2.

    The first two fields span the constraint distribution, the third its
    orthogonal complement; the frame metric is diag(m, I + m a^2,
    m I/(I + m a^2)).
    """
    c0 = p.coupling

    def fields(q):
        phi = q[2]
        s, c = math.sin(phi), math.cos(phi)
        return np.array(
            [
                [c, 0.0, -s],
                [s, 0.0, c],
                [0.0, 1.0, -c0],
            ]
        )

    def field_derivs(q):
        phi = q[2]
        s, c = math.sin(phi), math.cos(phi)
        out = np.zeros((3, 3, 3))
        out[:, :, 2] = np.array(
            [
                [-s, 0.0, -c],
                [c, 0.0, -s],
                [0.0, 0.0, 0.0],
            ]
        )
        return out

    return MovingFrame(k=2, fields=fields, field_derivs=field_derivs, orthogonal=True)


def sleigh_uvw_frame(p: SleighParams) -> MovingFrame:
    """Blade-aligned frame with columns (u, v, omega).

    Convenient for geometry checks (the frame metric couples v and omega);
    it is not orthogonally adapted, so the friction dynamics uses
    :func:`sleigh_ortho_frame` instead.
    """

    def fields(q):
        phi = q[2]
        s, c = math.sin(phi), math.cos(phi)
        return np.array(
            [
                [c, -s, 0.0],
                [s, c, 0.0],
                [0.0, 0.0, 1.0],
            ]
        )

    def field_derivs(q):
        phi = q[2]
        s, c = math.sin(phi), math.cos(phi)
        out = np.zeros((3, 3, 3))
        out[:, :, 2] = np.array(
            [
                [-s, -c, 0.0],
                [c, -s, 0.0],
                [0.0, 0.0, 0.0],
            ]
        )
        return out

    return MovingFrame(k=2, fields=fields, field_derivs=field_derivs, orthogonal=False)


def sleigh_friction_form(p: SleighParams) -> RayleighFriction:
    """Unit sideways-slip friction: nu = w w^T with w the blade normal."""

    def nu(q):
        phi = q[2]
        w = np.array([-math.sin(phi), math.cos(phi), 0.0])
        return np.outer(w, w)

    return RayleighFriction(nu=nu, kernel_rank=2)


def sleigh_uvw_to_ortho_matrix(p: SleighParams) -> np.ndarray:
    """Linear map (x, y, phi, u, v, omega) -> (x, y, phi, u, psi, v).

    Target layout matches the generic frame-state convention (q, xi, eta)
    for :func:`sleigh_ortho_frame`.
    """
    m = np.zeros((6, 6))
    for i in range(4):
        m[i, i] = 1.0
    m[4, 5] = 1.0  # psi = omega + coupling * v
    m[4, 4] = p.coupling
    m[5, 4] = 1.0  # eta = v
    return m


def sleigh_projection_matrix(p: SleighParams) -> np.ndarray:
    """Linear map (x, y, phi, u, v, omega) -> (x, y, phi, u, psi): project
    the friction state onto the constraint distribution by dropping the
    slip component."""
    m = np.zeros((5, 6))
    for i in range(4):
        m[i, i] = 1.0
    m[4, 5] = 1.0
    m[4, 4] = p.coupling
    return m


# ---------------------------------------------------------------------------
# pendulum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PendulumParams:
    g: float = 9.81
    eps: float = 1e-2

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


PENDULUM_VARIANTS = ("potential", "friction", "inertial")

_R_MIN = 1e-8


def _radial(qx, qy):
    r = math.hypot(qx, qy)
    if r < _R_MIN:
        raise OriginSingularity("pendulum state too close to the origin")
    return r, qx / r, qy / r


def make_pendulum(variant: str, p: PendulumParams) -> Callable:
    """Unit-mass planar pendulum realizations on states (x, y, xdot, ydot).

    variant "potential": stiff radial spring (r - 1)^2 / (2 eps) keeps the
    mass near the unit circle.  variant "friction": radial Rayleigh
    friction rdot^2/(2 eps) damps motion off concentric circles.  variant
    "inertial": a heavy radial mass term rdot^2/(2 eps) slows radial
    motion; the modified mass matrix is assembled in Cartesian coordinates
    and inverted pointwise.
    """
    if variant not in PENDULUM_VARIANTS:
        raise ValueError(f"unknown pendulum variant {variant!r}")
    g, eps = p.g, p.eps

    if variant == "potential":

        def rhs(st):
            x, y, vx, vy = st
            r, ex, ey = _radial(x, y)
            k = (r - 1.0) / eps
            return np.array([vx, vy, -k * ex, -g - k * ey])

    elif variant == "friction":

        def rhs(st):
            x, y, vx, vy = st
            r, ex, ey = _radial(x, y)
            rdot = ex * vx + ey * vy
            k = rdot / eps
            return np.array([vx, vy, -k * ex, -g - k * ey])

    else:  # inertial

        def rhs(st):
            x, y, vx, vy = st
            r, ex, ey = _radial(x, y)
            e_r = np.array([ex, ey])
            v = np.array([vx, vy])
            v_perp = v - (e_r @ v) * e_r
            mass = np.eye(2) + np.outer(e_r, e_r) / eps
            force = np.array([0.0, -g]) - (v_perp @ v_perp) / (eps * r) * e_r
            acc = np.linalg.solve(mass, force)
            return np.array([vx, vy, acc[0], acc[1]])

    return rhs


def pendulum_nh_field(p: PendulumParams) -> Callable:
    """Limit dynamics on concentric circles: tangential gravity only plus
    the centripetal acceleration that keeps r constant."""
    g = p.g

    def rhs(st):
        x, y, vx, vy = st
        r, ex, ey = _radial(x, y)
        e_r = np.array([ex, ey])
        v = np.array([vx, vy])
        grav = np.array([0.0, -g])
        tang = grav - (grav @ e_r) * e_r
        acc = tang - (v @ v) / r * e_r
        return np.array([vx, vy, acc[0], acc[1]])

    return rhs


def pendulum_fast_field(p: PendulumParams) -> Callable:
    """Fast-time limit of the friction variant: the radial velocity
    component relaxes, everything else is frozen."""

    def rhs(st):
        x, y, vx, vy = st
        r, ex, ey = _radial(x, y)
        rdot = ex * vx + ey * vy
        return np.array([0.0, 0.0, -rdot * ex, -rdot * ey])

    return rhs


def pendulum_system(p: PendulumParams) -> MechanicalSystem:
    """Euclidean metric with gravity, for the friction-variant cross checks."""
    return MechanicalSystem(
        n=2,
        metric=lambda q: np.eye(2),
        metric_derivs=lambda q: np.zeros((2, 2, 2)),
        potential=lambda q: p.g * q[1],
        potential_grad=lambda q: np.array([0.0, p.g]),
    )


def pendulum_frame(p: PendulumParams) -> MovingFrame:
    """Adapted frame (tangential, radial) for the circle distribution, k = 1."""

    def fields(q):
        r, ex, ey = _radial(q[0], q[1])
        return np.array([[-ey, ex], [ex, ey]])

    def field_derivs(q):
        r, ex, ey = _radial(q[0], q[1])
        e_r = np.array([ex, ey])
        proj = (np.eye(2) - np.outer(e_r, e_r)) / r
        out = np.empty((2, 2, 2))
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        out[:, 0, :] = rot @ proj  # d(e_theta)/dq
        out[:, 1, :] = proj  # d(e_r)/dq
        return out

    return MovingFrame(k=1, fields=fields, field_derivs=field_derivs, orthogonal=True)


def pendulum_friction_form(p: PendulumParams) -> RayleighFriction:
    """Unit radial friction form nu = e_r e_r^T."""

    def nu(q):
        r, ex, ey = _radial(q[0], q[1])
        e_r = np.array([ex, ey])
        return np.outer(e_r, e_r)

    return RayleighFriction(nu=nu, kernel_rank=1)


def pendulum_default_state() -> np.ndarray:
    """At rest on the unit circle, 45 degrees from the downward vertical."""
    return np.array([math.sin(math.pi / 4), -math.cos(math.pi / 4), 0.0, 0.0])


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """One runnable model of a registered system."""

    columns: tuple
    needs_eps: bool
    build: Callable  # (params: dict, eps: float | None) -> field callable
    default_state: Callable  # (params: dict) -> ndarray
    fast_rate: Callable = None  # (params: dict, eps) -> 1/s, None if nonstiff


@dataclass(frozen=True)
class SystemEntry:
    """Registry entry: models plus the adapters the analysis driver needs."""

    name: str
    param_defaults: dict
    models: dict
    # friction-state -> reduced-state linear map (None: identity)
    reduce_matrix: Callable = None
    # friction-state -> (q, xi, eta) frame layout linear map (None: identity)
    frame_state_matrix: Callable = None
    # constraint-compatible reduced state -> friction-model state (None: identity)
    lift_state: Callable = None
    # (params: dict, friction-model state) -> total energy, used to flag
    # runs started outside the moderate-energy regime in the reports
    energy_of_state: Callable = None
    reduced_dims: tuple = None  # (n, k) of the reduced frame layout
    compare_components: tuple = ()
    supports_manifold: bool = False
    # (params: dict) -> (system, frame, friction) for manifold extraction
    generic_builders: Callable = None


def _sleigh_params(params: dict) -> SleighParams:
    return SleighParams(
        m=params.get("m", 1.0), I=params.get("I", 1.0), a=params.get("a", 0.2)
    )


def _pendulum_params(params: dict, eps: float) -> PendulumParams:
    return PendulumParams(g=params.get("g", 9.81), eps=eps)


def _sleigh_entry() -> SystemEntry:
    def nh_state(params):
        return np.array([0.0, 0.0, 0.0, -1.0, 0.5])

    def friction_state(params):
        return np.array([0.0, 0.0, 0.0, -1.0, 0.0, 0.5])

    models = {
        "nh": ModelSpec(
            columns=("x", "y", "phi", "u", "omega"),
            needs_eps=False,
            build=lambda params, eps: sleigh_nh_field(_sleigh_params(params)),
            default_state=nh_state,
        ),
        "friction": ModelSpec(
            columns=("x", "y", "phi", "u", "v", "omega"),
            needs_eps=True,
            build=lambda params, eps: sleigh_friction_field(
                _sleigh_params(params), eps
            ),
            default_state=friction_state,
            fast_rate=lambda params, eps: _sleigh_params(params).fast_rate(eps),
        ),
        "corrected": ModelSpec(
            columns=("x", "y", "phi", "u", "psi"),
            needs_eps=True,
            build=lambda params, eps: sleigh_corrected_field(
                _sleigh_params(params), eps
            ),
            default_state=nh_state,
        ),
        "fast": ModelSpec(
            columns=("x", "y", "phi", "u", "v", "psi"),
            needs_eps=False,
            build=lambda params, eps: sleigh_fast_field(_sleigh_params(params)),
            default_state=friction_state,
        ),
    }

    def builders(params):
        p = _sleigh_params(params)
        return sleigh_system(p), sleigh_ortho_frame(p), sleigh_friction_form(p)

    def lift(params, reduced_state):
        x, y, phi, u, omega = reduced_state
        return np.array([x, y, phi, u, 0.0, omega])

    def energy_of(params, state):
        p = _sleigh_params(params)
        return sleigh_energy(p, state[3], state[4], state[5])

    return SystemEntry(
        name="sleigh",
        param_defaults={"m": 1.0, "I": 1.0, "a": 0.2},
        models=models,
        reduce_matrix=lambda params: sleigh_projection_matrix(_sleigh_params(params)),
        frame_state_matrix=lambda params: sleigh_uvw_to_ortho_matrix(
            _sleigh_params(params)
        ),
        lift_state=lift,
        energy_of_state=energy_of,
        reduced_dims=(3, 2),
        compare_components=(3, 4),
        supports_manifold=True,
        generic_builders=builders,
    )


def _pendulum_entry(variant: str) -> SystemEntry:
    columns = ("x", "y", "vx", "vy")

    def state(params):
        return pendulum_default_state()

    models = {
        "nh": ModelSpec(
            columns=columns,
            needs_eps=False,
            build=lambda params, eps: pendulum_nh_field(
                PendulumParams(g=params.get("g", 9.81), eps=1.0)
            ),
            default_state=state,
        ),
        # "friction" selects the eps-scaled realization field of this
        # variant (stiff potential / radial friction / heavy radial mass).
        "friction": ModelSpec(
            columns=columns,
            needs_eps=True,
            build=lambda params, eps: make_pendulum(
                variant, _pendulum_params(params, eps)
            ),
            default_state=state,
            fast_rate=(
                (lambda params, eps: 1.0 / eps) if variant == "friction" else None
            ),
        ),
    }
    if variant == "friction":
        models["fast"] = ModelSpec(
            columns=columns,
            needs_eps=False,
            build=lambda params, eps: pendulum_fast_field(
                PendulumParams(g=params.get("g", 9.81), eps=1.0)
            ),
            default_state=state,
        )

    def energy_of(params, state):
        g = params.get("g", 9.81)
        return 0.5 * float(state[2] ** 2 + state[3] ** 2) + g * float(state[1])

    return SystemEntry(
        name=f"pendulum-{variant}",
        param_defaults={"g": 9.81},
        models=models,
        energy_of_state=energy_of,
        compare_components=(0, 1, 2, 3),
    )


REGISTRY = {
    "sleigh": _sleigh_entry(),
    "pendulum-potential": _pendulum_entry("potential"),
    "pendulum-friction": _pendulum_entry("friction"),
    "pendulum-inertial": _pendulum_entry("inertial"),
}


def get_system(name: str) -> SystemEntry:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown system {name!r}; available: {', '.join(sorted(REGISTRY))}"
        ) from None
