"""Four-loop nonlinear-dynamic-inversion cascade.

position -> velocity -> attitude -> rate, each loop inverting the
modeled dynamics so that, with matched parameters, the closed error
dynamics of every loop is first order with pole at minus the loop gain.
Reference derivative terms are dropped (references are assumed slow).

The velocity loop computes the thrust command first and then solves the
tilt equation

    [tan(phi_d); sin(theta_d)] =
        m~ / (F_T cos(phi)) * inv(G3(psi)) (K_v e_v,xy + drag feedforward)

with the same-cycle thrust command as F_T and the measured roll in the
denominator.  G3(psi) = [[-sin, -cos], [cos, -sin]] is invertible for
all psi, which is what keeps position control working while the craft
spins with an abandoned yaw channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .vehicle import (
    KinematicSingularityError,
    RigidBodyState,
    VehicleParams,
    euler_kinematics,
    wrap_angle,
)

_DEF_TILT_MAX = math.radians(35.0)


def _as_diag3(k) -> np.ndarray:
    arr = np.asarray(k, dtype=float)
    if arr.ndim == 0:
        arr = np.full(3, float(arr))
    if arr.shape != (3,):
        raise ValueError("gain must be a scalar or a length-3 diagonal")
    return arr


@dataclass(frozen=True)
class Gains:
    """Diagonal loop gains with enforced time-scale separation.

    Construction requires min(k_omega) >= c * max(k_phi) and so on down
    the cascade (c = separation, default 4); the default gain ladder
    1 / 2 / 8 / 32 sits exactly on that factor.
    """

    k_x: np.ndarray
    k_v: np.ndarray
    k_phi: np.ndarray
    k_omega: np.ndarray
    tilt_max: float = _DEF_TILT_MAX
    separation: float = 4.0

    def __post_init__(self):
        for name in ("k_x", "k_v", "k_phi", "k_omega"):
            arr = _as_diag3(getattr(self, name))
            if np.any(arr <= 0.0):
                raise ValueError(f"{name} must be positive definite")
            object.__setattr__(self, name, arr)
        if not 0.0 < self.tilt_max < 0.5 * math.pi:
            raise ValueError("tilt_max must be in (0, 90) deg")
        # the two inversion-critical inner pairs need the full factor; the
        # outermost pair closes over an exact kinematic integrator and gets
        # half of it, which is where the default ladder sits
        c = self.separation
        tol = 1e-12
        ladder = [("k_omega", "k_phi", c), ("k_phi", "k_v", c), ("k_v", "k_x", 0.5 * c)]
        for fast, slow, ratio in ladder:
            if np.min(getattr(self, fast)) + tol < ratio * np.max(getattr(self, slow)):
                raise ValueError(
                    f"time-scale separation violated: min({fast}) must be >= "
                    f"{ratio} * max({slow})"
                )

    @classmethod
    def default(cls) -> "Gains":
        return cls(k_x=1.0, k_v=2.0, k_phi=8.0, k_omega=32.0)


@dataclass(frozen=True)
class EstimatedParams:
    """Controller-side copies of the plant parameters.

    Settable independently of the plant to exercise robustness to
    parameter mismatch.
    """

    mass: float
    inertia: tuple[float, float, float]
    kappa_d: float
    kappa_r: float

    def __post_init__(self):
        if self.mass <= 0.0 or any(j <= 0.0 for j in self.inertia):
            raise ValueError("estimated mass and inertia must be positive")
        if self.kappa_d < 0.0 or self.kappa_r < 0.0:
            raise ValueError("estimated drag factors must be non-negative")
        object.__setattr__(self, "inertia", tuple(float(j) for j in self.inertia))

    @classmethod
    def from_params(cls, params: VehicleParams) -> "EstimatedParams":
        return cls(
            mass=params.mass,
            inertia=params.inertia,
            kappa_d=params.kappa_d,
            kappa_r=params.kappa_r,
        )


def gamma3(psi: float) -> np.ndarray:
    s, c = math.sin(psi), math.cos(psi)
    return np.array([[-s, -c], [c, -s]])


def gamma3_inv(psi: float) -> np.ndarray:
    # determinant is identically 1
    s, c = math.sin(psi), math.cos(psi)
    return np.array([[-s, c], [-c, -s]])


def position_loop(x, x_d, k_x) -> np.ndarray:
    """v_d = K_x (x_d - x)."""
    return _as_diag3(k_x) * (np.asarray(x_d, dtype=float) - np.asarray(x, dtype=float))


def velocity_loop(
    v,
    v_d,
    att,
    est: EstimatedParams,
    k_v,
    gravity: float = 9.81,
    tilt_max: float = _DEF_TILT_MAX,
    f_td_limit: float | None = None,
    eps_thrust: float = 1e-6,
    fallback_tilt: tuple[float, float] = (0.0, 0.0),
):
    """Thrust command and tilt commands from the velocity error.

    Returns (phi_d, theta_d, f_td).  The thrust line is evaluated first
    and its output is the F_T used by the tilt equation; when that
    thrust is at or below ``eps_thrust`` the tilt command falls back to
    ``fallback_tilt`` (the caller's latch) instead of dividing by zero.
    """
    v = np.asarray(v, dtype=float)
    e_v = np.asarray(v_d, dtype=float) - v
    k = _as_diag3(k_v)
    phi, theta, psi = (float(a) for a in att)
    cf, ct = math.cos(phi), math.cos(theta)
    if abs(cf) < 1e-9 or abs(ct) < 1e-9:
        raise KinematicSingularityError("velocity loop at +/-90 deg attitude")

    m_est = est.mass
    speed = math.sqrt(float(v @ v))
    drag = est.kappa_d * speed / m_est  # drag acceleration per unit velocity
    f_td = (m_est / (cf * ct)) * (gravity - k[2] * e_v[2] - drag * v[2])
    f_td = max(0.0, f_td)
    if f_td_limit is not None:
        f_td = min(f_td, f_td_limit)

    if f_td <= eps_thrust:
        phi_d, theta_d = fallback_tilt
    else:
        rhs = np.array([k[0] * e_v[0] + drag * v[0], k[1] * e_v[1] + drag * v[1]])
        tan_phi, sin_theta = (m_est / (f_td * cf)) * (gamma3_inv(psi) @ rhs)
        tan_lim = math.tan(tilt_max)
        sin_lim = math.sin(tilt_max)
        phi_d = math.atan(min(max(tan_phi, -tan_lim), tan_lim))
        theta_d = math.asin(min(max(sin_theta, -sin_lim), sin_lim))
    return phi_d, theta_d, f_td


def attitude_loop(att, att_d, omega, k_phi, drop_yaw: bool = False) -> np.ndarray:
    """omega_d = Gamma1^-1 (K_phi e_Phi - Gamma2), psi error wrapped."""
    att = np.asarray(att, dtype=float)
    att_d = np.asarray(att_d, dtype=float)
    e = att_d - att
    e[2] = 0.0 if drop_yaw else wrap_angle(e[2])
    gamma1, gamma2 = euler_kinematics(att, omega)
    if abs(gamma1[1]) < 1e-9:
        raise KinematicSingularityError("attitude loop at phi = +/-90 deg")
    return (_as_diag3(k_phi) * e - gamma2) / gamma1


def rate_loop(omega, omega_d, est: EstimatedParams, k_omega) -> np.ndarray:
    """T_d = omega x J~ omega + kappa_r~ omega + J~ K_omega e_omega."""
    p, q, r = (float(w) for w in omega)
    jx, jy, jz = est.inertia
    k = _as_diag3(k_omega)
    kr = est.kappa_r
    return np.array(
        [
            (jz - jy) * q * r + kr * p + jx * k[0] * (float(omega_d[0]) - p),
            (jx - jz) * r * p + kr * q + jy * k[1] * (float(omega_d[1]) - q),
            (jy - jx) * p * q + kr * r + jz * k[2] * (float(omega_d[2]) - r),
        ]
    )


@dataclass
class ControlDemand:
    """Desired wrench plus the rows the allocator should satisfy."""

    wrench: np.ndarray  # [F_Td, L_d, M_d, N_d]
    mask: tuple[bool, bool, bool, bool]  # False = row left unallocated
    v_d: np.ndarray
    att_d: np.ndarray
    omega_d: np.ndarray


# wrench row per reduction channel, mirrored from the controllability module
_ROW = {"h": 0, "phi": 1, "theta": 2, "psi": 3}


class NdiController:
    """Stateful cascade wrapper.

    The only state is the tilt-command latch used when the thrust
    command collapses; everything else is a pure function of the inputs.
    In a reduced mode the corresponding error is forced to zero, the
    demand row is masked out for the allocator, and all four loops keep
    running on the measured state.
    """

    def __init__(
        self,
        gains: Gains,
        est: EstimatedParams,
        gravity: float = 9.81,
        f_td_limit: float | None = None,
        eps_thrust: float | None = None,
    ):
        self.gains = gains
        self.est = est
        self.gravity = gravity
        self.f_td_limit = f_td_limit
        self.eps_thrust = (
            eps_thrust if eps_thrust is not None else 1e-2 * est.mass * gravity
        )
        self._tilt_latch = (0.0, 0.0)

    def step(self, state: RigidBodyState, x_d, psi_d: float, mode: str = "full") -> ControlDemand:
        if mode != "full" and mode not in _ROW:
            raise ValueError(f"unknown control mode {mode!r}")
        g = self.gains

        x_d = np.asarray(x_d, dtype=float)
        if mode == "h":
            # altitude abandoned: do not let the vertical error drive anything
            x_d = x_d.copy()
            x_d[2] = state.x[2]
        v_d = position_loop(state.x, x_d, g.k_x)
        if mode == "h":
            v_d[2] = state.v[2]

        phi_d, theta_d, f_td = velocity_loop(
            state.v,
            v_d,
            state.att,
            self.est,
            g.k_v,
            gravity=self.gravity,
            tilt_max=g.tilt_max,
            f_td_limit=self.f_td_limit,
            eps_thrust=self.eps_thrust,
            fallback_tilt=self._tilt_latch,
        )
        self._tilt_latch = (phi_d, theta_d)

        att_d = np.array([phi_d, theta_d, psi_d])
        if mode == "phi":
            att_d[0] = state.att[0]
        elif mode == "theta":
            att_d[1] = state.att[1]
        omega_d = attitude_loop(state.att, att_d, state.omega, g.k_phi, drop_yaw=(mode == "psi"))
        t_d = rate_loop(state.omega, omega_d, self.est, g.k_omega)

        mask = [True, True, True, True]
        if mode != "full":
            mask[_ROW[mode]] = False
        return ControlDemand(
            wrench=np.array([f_td, t_d[0], t_d[1], t_d[2]]),
            mask=tuple(mask),
            v_d=v_d,
            att_d=att_d,
            omega_d=omega_d,
        )
