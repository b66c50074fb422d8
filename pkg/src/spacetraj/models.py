"""Scenario dynamics: spacecraft attitude, orbital rendezvous, powered descent.

All right-hand sides are continuous-time; discretization happens via
`dynamics.DiscreteModel` (explicit Euler). Unit conventions:

Attitude (6 states, SI):
    x = [psi, theta, phi, w1, w2, w3]   3-2-1 Euler angles (rad), body rates (rad/s)
    u = [M1, M2, M3]                    body torques (N*m)

    angle rates = (1/cos(theta)) * [[0,  sin(phi),            cos(phi)          ],
                                    [0,  cos(theta)cos(phi), -cos(theta)sin(phi)],
                                    [cos(theta), sin(theta)sin(phi), sin(theta)cos(phi)]] @ w
    wdot = -J^-1 (w x J w) + J^-1 M

    The kinematics are singular at theta = +/-90 deg; evaluations with
    |cos(theta)| < COS_THETA_MIN raise SingularityError rather than clamping
    (silent clamping corrupts gradients).

Rendezvous (13 states, km / km/s / kg / kN):
    x = [e_r (3), e_v (3), m, r_t (3), v_t (3)]
    u = thrust (kN); accelerations come out in km/s^2 because mu is km^3/s^2.

    e_r = r_t - r_c is the chaser's relative position error, e_v the velocity
    error; the target's inertial state (r_t, v_t) is propagated alongside
    because the error equations depend on it:

    e_r'  = e_v
    e_v'  = -mu r_t/|r_t|^3 + mu r_c/|r_c|^3 - u/m,   r_c = r_t - e_r
    m'    = -alpha ||u||
    r_t'  = v_t
    v_t'  = -mu r_t/|r_t|^3

Powered descent (13 states, normalized):
    x = [psi, theta, phi, w1, w2, w3, r1, r2, r3, v1, v2, v3, m]
    u = [torque (3), thrust (3)]

    Position/velocity/controls are normalized so all coordinates are of
    comparable magnitude: r/1e4 (m), v/1e3 (m/s), torque/1e2 (N*m),
    thrust/1e4 (N). Mass stays in kg. In normalized variables:

    r'   = (1e3/1e4) v
    v'   = (1e4/1e3) u/m + g/1e3,   g = [0, 0, -g_ref] m/s^2
    m'   = -1e4 ||u|| / (Isp * g_ref)

    plus the attitude block above driven by the normalized torque. r3 is the
    altitude above the landing point; the dynamics remain valid for r3 < 0
    but simulations terminate at the zero crossing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .dynamics import ContinuousModel, DiscreteModel
from .errors import DynamicsDomainError, SingularityError, UnsupportedOrbitError

COS_THETA_MIN = 1e-8

EARTH_MU = 398600.0  # km^3/s^2
MARS_GRAVITY = 3.7114  # m/s^2, surface reference

# Normalization factors for the powered-descent problem.
LANDER_R_SCALE = 1.0e4  # m per normalized position unit
LANDER_V_SCALE = 1.0e3  # m/s per normalized velocity unit
LANDER_M_SCALE = 1.0e2  # N*m per normalized torque unit
LANDER_U_SCALE = 1.0e4  # N per normalized thrust unit

LANDER_STATE_SCALE = np.array(
    [1.0] * 6 + [LANDER_R_SCALE] * 3 + [LANDER_V_SCALE] * 3 + [1.0]
)
LANDER_CONTROL_SCALE = np.array([LANDER_M_SCALE] * 3 + [LANDER_U_SCALE] * 3)

LANDER_ALTITUDE_INDEX = 8  # r3 within the lander state vector


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def _euler_rate_matrix(theta: float, phi: float) -> np.ndarray:
    """Body rates -> 3-2-1 Euler angle rates map; caller guards cos(theta)."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    return (
        np.array(
            [
                [0.0, sp, cp],
                [0.0, ct * cp, -ct * sp],
                [ct, st * sp, st * cp],
            ]
        )
        / ct
    )


def _check_theta(theta: float, state: np.ndarray) -> None:
    if abs(np.cos(theta)) < COS_THETA_MIN:
        raise SingularityError(
            f"attitude kinematics singular at pitch {theta!r} rad", state=state
        )


def _euler_rate_angle_partials(
    theta: float, phi: float, w: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Columns d(angle rates)/d theta and d(angle rates)/d phi."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    g = sp * w[1] + cp * w[2]
    h = cp * w[1] - sp * w[2]
    d_theta = np.array([g * st / ct**2, 0.0, g / ct**2])
    d_phi = np.array([h / ct, -g, (st / ct) * h])
    return d_theta, d_phi


# ---------------------------------------------------------------------------
# Attitude
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttitudeParams:
    """Rigid-body inertia; must be symmetric positive definite (kg*m^2)."""

    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([4500.0, 2000.0, 7500.0])
    )

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.inertia, dtype=float))
        assert J.shape == (3, 3)
        assert np.allclose(J, J.T), "inertia must be symmetric"
        assert np.all(np.linalg.eigvalsh(J) > 0.0), "inertia must be positive definite"
        object.__setattr__(self, "inertia", J)


def attitude_deriv(x: np.ndarray, torque: np.ndarray, p: AttitudeParams) -> np.ndarray:
    theta, phi = x[1], x[2]
    _check_theta(theta, x)
    w = x[3:6]
    J = p.inertia
    angle_rates = _euler_rate_matrix(theta, phi) @ w
    wdot = np.linalg.solve(J, -np.cross(w, J @ w) + torque)
    return np.concatenate([angle_rates, wdot])


def attitude_deriv_jacobians(
    x: np.ndarray, torque: np.ndarray, p: AttitudeParams
) -> Tuple[np.ndarray, np.ndarray]:
    theta, phi = x[1], x[2]
    _check_theta(theta, x)
    w = x[3:6]
    J = p.inertia
    Jinv = np.linalg.inv(J)

    dfdx = np.zeros((6, 6))
    d_theta, d_phi = _euler_rate_angle_partials(theta, phi, w)
    dfdx[0:3, 1] = d_theta
    dfdx[0:3, 2] = d_phi
    dfdx[0:3, 3:6] = _euler_rate_matrix(theta, phi)
    dfdx[3:6, 3:6] = -Jinv @ (_skew(w) @ J - _skew(J @ w))

    dfdu = np.zeros((6, 3))
    dfdu[3:6, :] = Jinv
    return dfdx, dfdu


def attitude_model(p: AttitudeParams | None = None, dt: float = 0.1) -> DiscreteModel:
    p = p or AttitudeParams()
    return DiscreteModel(
        inner=ContinuousModel(
            state_dim=6,
            control_dim=3,
            deriv=lambda x, u: attitude_deriv(x, u, p),
            deriv_jacobians=lambda x, u: attitude_deriv_jacobians(x, u, p),
            name="attitude",
        ),
        dt=dt,
    )


# ---------------------------------------------------------------------------
# Rendezvous
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RendezvousParams:
    mu: float = EARTH_MU  # km^3/s^2
    alpha: float = 5.0e-4  # kg/s of propellant per kN of thrust
    min_radius_km: float = 1000.0  # domain guard on |r_t| and |r_c|

    def __post_init__(self):
        assert self.mu > 0.0 and self.alpha > 0.0 and self.min_radius_km > 0.0


REND_ERROR_INDICES = np.arange(6)  # (e_r, e_v) block regulated by the LQR phase


def _inv_cube_grad(r: np.ndarray, mu: float) -> np.ndarray:
    """d(mu * r / |r|^3)/dr."""
    R = np.linalg.norm(r)
    return mu * (np.eye(3) / R**3 - 3.0 * np.outer(r, r) / R**5)


def rendezvous_deriv(x: np.ndarray, u: np.ndarray, p: RendezvousParams) -> np.ndarray:
    e_r, e_v, m = x[0:3], x[3:6], x[6]
    r_t, v_t = x[7:10], x[10:13]
    if m <= 0.0:
        raise DynamicsDomainError(f"non-positive chaser mass {m}")
    r_c = r_t - e_r
    R_t = np.linalg.norm(r_t)
    R_c = np.linalg.norm(r_c)
    if R_t <= p.min_radius_km or R_c <= p.min_radius_km:
        raise DynamicsDomainError(
            f"orbit radius below {p.min_radius_km} km (target {R_t:.1f}, chaser {R_c:.1f})"
        )
    e_v_dot = -p.mu * r_t / R_t**3 + p.mu * r_c / R_c**3 - u / m
    return np.concatenate(
        [
            e_v,
            e_v_dot,
            [-p.alpha * np.linalg.norm(u)],
            v_t,
            -p.mu * r_t / R_t**3,
        ]
    )


def rendezvous_deriv_jacobians(
    x: np.ndarray, u: np.ndarray, p: RendezvousParams
) -> Tuple[np.ndarray, np.ndarray]:
    e_r, m = x[0:3], x[6]
    r_t = x[7:10]
    r_c = r_t - e_r
    G_t = _inv_cube_grad(r_t, p.mu)
    G_c = _inv_cube_grad(r_c, p.mu)

    dfdx = np.zeros((13, 13))
    dfdx[0:3, 3:6] = np.eye(3)
    dfdx[3:6, 0:3] = -G_c
    dfdx[3:6, 6] = u / m**2
    dfdx[3:6, 7:10] = G_c - G_t
    dfdx[7:10, 10:13] = np.eye(3)
    dfdx[10:13, 7:10] = -G_t

    dfdu = np.zeros((13, 3))
    dfdu[3:6, :] = -np.eye(3) / m
    norm_u = np.linalg.norm(u)
    if norm_u > 0.0:
        # kink at u = 0; the zero subgradient is used there
        dfdu[6, :] = -p.alpha * u / norm_u
    return dfdx, dfdu


def rendezvous_model(p: RendezvousParams | None = None, dt: float = 2.0) -> DiscreteModel:
    p = p or RendezvousParams()
    return DiscreteModel(
        inner=ContinuousModel(
            state_dim=13,
            control_dim=3,
            deriv=lambda x, u: rendezvous_deriv(x, u, p),
            deriv_jacobians=lambda x, u: rendezvous_deriv_jacobians(x, u, p),
            name="rendezvous",
        ),
        dt=dt,
    )


def rendezvous_error_model(
    r_t_frozen: np.ndarray, mass: float, p: RendezvousParams | None = None, dt: float = 2.0
) -> DiscreteModel:
    """Relative-error subsystem (e_r, e_v) with the target position and chaser
    mass frozen; its origin is an equilibrium, which the full 13-state model
    lacks. Used to design the stationary regulation gain."""
    p = p or RendezvousParams()
    r_t = np.array(r_t_frozen, dtype=float)
    R_t = np.linalg.norm(r_t)
    G_t = _inv_cube_grad(r_t, p.mu)

    def deriv(x, u):
        e_r, e_v = x[0:3], x[3:6]
        r_c = r_t - e_r
        R_c = np.linalg.norm(r_c)
        if R_c <= p.min_radius_km:
            raise DynamicsDomainError(f"chaser radius below {p.min_radius_km} km")
        e_v_dot = -p.mu * r_t / R_t**3 + p.mu * r_c / R_c**3 - u / mass
        return np.concatenate([e_v, e_v_dot])

    def deriv_jac(x, u):
        e_r = x[0:3]
        G_c = _inv_cube_grad(r_t - e_r, p.mu)
        dfdx = np.zeros((6, 6))
        dfdx[0:3, 3:6] = np.eye(3)
        dfdx[3:6, 0:3] = -G_c
        dfdu = np.zeros((6, 3))
        dfdu[3:6, :] = -np.eye(3) / mass
        return dfdx, dfdu

    return DiscreteModel(
        inner=ContinuousModel(6, 3, deriv, deriv_jac, name="rendezvous_error"), dt=dt
    )


# ---------------------------------------------------------------------------
# Powered descent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LanderParams:
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([4500.0, 2000.0, 7500.0])
    )
    isp: float = 225.0  # s
    g_ref: float = MARS_GRAVITY  # m/s^2
    initial_mass: float = 1000.0  # kg

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.inertia, dtype=float))
        assert J.shape == (3, 3) and np.allclose(J, J.T)
        assert np.all(np.linalg.eigvalsh(J) > 0.0)
        object.__setattr__(self, "inertia", J)
        assert self.isp > 0.0 and self.g_ref > 0.0 and self.initial_mass > 0.0


def lander_deriv(x: np.ndarray, control: np.ndarray, p: LanderParams) -> np.ndarray:
    """Normalized-variable right-hand side; `control` is [torque(3), thrust(3)]."""
    theta, phi = x[1], x[2]
    _check_theta(theta, x)
    w = x[3:6]
    v_bar = x[9:12]
    m = x[12]
    if m <= 0.0:
        raise DynamicsDomainError(f"non-positive lander mass {m}")
    J = p.inertia
    torque = LANDER_M_SCALE * control[0:3]
    u_bar = control[3:6]

    angle_rates = _euler_rate_matrix(theta, phi) @ w
    wdot = np.linalg.solve(J, -np.cross(w, J @ w) + torque)
    r_dot = (LANDER_V_SCALE / LANDER_R_SCALE) * v_bar
    v_dot = (LANDER_U_SCALE / LANDER_V_SCALE) * u_bar / m
    v_dot = v_dot + np.array([0.0, 0.0, -p.g_ref / LANDER_V_SCALE])
    m_dot = -LANDER_U_SCALE * np.linalg.norm(u_bar) / (p.isp * p.g_ref)
    return np.concatenate([angle_rates, wdot, r_dot, v_dot, [m_dot]])


def lander_deriv_jacobians(
    x: np.ndarray, control: np.ndarray, p: LanderParams
) -> Tuple[np.ndarray, np.ndarray]:
    theta, phi = x[1], x[2]
    _check_theta(theta, x)
    w = x[3:6]
    m = x[12]
    J = p.inertia
    Jinv = np.linalg.inv(J)
    u_bar = control[3:6]

    dfdx = np.zeros((13, 13))
    d_theta, d_phi = _euler_rate_angle_partials(theta, phi, w)
    dfdx[0:3, 1] = d_theta
    dfdx[0:3, 2] = d_phi
    dfdx[0:3, 3:6] = _euler_rate_matrix(theta, phi)
    dfdx[3:6, 3:6] = -Jinv @ (_skew(w) @ J - _skew(J @ w))
    dfdx[6:9, 9:12] = (LANDER_V_SCALE / LANDER_R_SCALE) * np.eye(3)
    dfdx[9:12, 12] = -(LANDER_U_SCALE / LANDER_V_SCALE) * u_bar / m**2

    dfdu = np.zeros((13, 6))
    dfdu[3:6, 0:3] = LANDER_M_SCALE * Jinv
    dfdu[9:12, 3:6] = (LANDER_U_SCALE / LANDER_V_SCALE) * np.eye(3) / m
    norm_u = np.linalg.norm(u_bar)
    if norm_u > 0.0:
        dfdu[12, 3:6] = -LANDER_U_SCALE * u_bar / (norm_u * p.isp * p.g_ref)
    return dfdx, dfdu


def lander_model(p: LanderParams | None = None, dt: float = 0.2) -> DiscreteModel:
    p = p or LanderParams()
    return DiscreteModel(
        inner=ContinuousModel(
            state_dim=13,
            control_dim=6,
            deriv=lambda x, u: lander_deriv(x, u, p),
            deriv_jacobians=lambda x, u: lander_deriv_jacobians(x, u, p),
            name="lander",
        ),
        dt=dt,
    )


def scale_lander(x_si: np.ndarray, u_si: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """SI state/control -> normalized solver variables."""
    return np.asarray(x_si) / LANDER_STATE_SCALE, np.asarray(u_si) / LANDER_CONTROL_SCALE


def unscale_lander(x_bar: np.ndarray, u_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized solver variables -> SI state/control; exact inverse of scale_lander."""
    return np.asarray(x_bar) * LANDER_STATE_SCALE, np.asarray(u_bar) * LANDER_CONTROL_SCALE


def lander_hover_control(mass: float, p: LanderParams) -> np.ndarray:
    """Normalized control that cancels gravity at the given mass (zero torque)."""
    thrust = np.array([0.0, 0.0, mass * p.g_ref])  # N
    return np.concatenate([np.zeros(3), thrust / LANDER_U_SCALE])


# ---------------------------------------------------------------------------
# Orbital elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitalElements:
    """Classical elements, angles in radians; only elliptical orbits (0 <= e < 1)."""

    a: float  # semi-major axis, km
    e: float
    i: float
    raan: float
    argp: float
    nu: float

    def __post_init__(self):
        if not (self.a > 0.0 and 0.0 <= self.e < 1.0):
            raise UnsupportedOrbitError(
                f"need a > 0 and 0 <= e < 1, got a={self.a}, e={self.e}"
            )


def _rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def kepler_to_cartesian(
    el: OrbitalElements, mu: float = EARTH_MU
) -> Tuple[np.ndarray, np.ndarray]:
    """Perifocal construction rotated into the inertial frame (3-1-3: raan, i, argp).

    Returns position (km) and velocity (km/s); outputs satisfy the conic
    equation and vis-viva by construction.
    """
    p_lr = el.a * (1.0 - el.e**2)  # semi-latus rectum
    r_mag = p_lr / (1.0 + el.e * np.cos(el.nu))
    r_pf = r_mag * np.array([np.cos(el.nu), np.sin(el.nu), 0.0])
    h = np.sqrt(mu * p_lr)
    v_pf = (mu / h) * np.array([-np.sin(el.nu), el.e + np.cos(el.nu), 0.0])
    rot = _rot_z(el.raan) @ _rot_x(el.i) @ _rot_z(el.argp)
    return rot @ r_pf, rot @ v_pf


def specific_orbital_energy(r: np.ndarray, v: np.ndarray, mu: float = EARTH_MU) -> float:
    """v^2/2 - mu/|r|; conserved by the exact two-body flow, drifts O(dt) under Euler."""
    return 0.5 * float(np.dot(v, v)) - mu / float(np.linalg.norm(r))
