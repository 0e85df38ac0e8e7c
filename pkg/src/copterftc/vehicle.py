"""Physical model of a generalized co-planar multicopter.

Conventions used throughout the package:

* NED inertial frame, body z axis pointing down.  Altitude is ``-z``.
* Euler angles (phi, theta, psi) are ZYX (yaw-pitch-roll); the rotation
  matrix maps body coordinates to inertial coordinates.
* Rotor angular speeds are rad/s internally.  RPM only ever appears at
  the configuration / logging boundary.
* A wrench is the stacked vector ``[F_T, L, M, N]`` (total thrust plus
  roll, pitch and yaw body moments), produced from per-rotor thrusts by
  the 4xN effectiveness matrix.
* Rotor health is a binary vector: 1 = healthy, 0 = failed.  A failed
  rotor produces zero thrust instantaneously while its speed state keeps
  following the first-order motor lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# cos(theta) below this is treated as a kinematic singularity
_COS_SINGULARITY = 1e-9


class KinematicSingularityError(RuntimeError):
    """Euler kinematics evaluated too close to theta = +/-90 deg."""


def parse_spin_string(config: str) -> tuple[int, ...]:
    """Convert a spin-direction string like ``"PNPNPN"`` to (+1, -1, ...).

    ``P`` marks a counter-clockwise rotor (gamma = +1), ``N`` clockwise
    (gamma = -1).
    """
    spins = []
    for i, ch in enumerate(config.upper()):
        if ch == "P":
            spins.append(1)
        elif ch == "N":
            spins.append(-1)
        else:
            raise ValueError(
                f"invalid spin character {ch!r} at position {i + 1}; expected 'P' or 'N'"
            )
    return tuple(spins)


def spin_string(spins) -> str:
    return "".join("P" if s > 0 else "N" for s in spins)


@dataclass(frozen=True)
class RotorSpec:
    """Geometry of a single rotor: arm length, azimuth and spin direction."""

    arm_length: float  # distance from CG to rotor center [m]
    angle: float  # azimuth from body x axis [rad], stored in [0, 2*pi)
    spin: int  # +1 CCW, -1 CW

    def __post_init__(self):
        if self.arm_length <= 0.0:
            raise ValueError("rotor arm length must be positive")
        if self.spin not in (1, -1):
            raise ValueError("rotor spin must be +1 or -1")
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)


@dataclass(frozen=True)
class VehicleParams:
    """Full physical description of a co-planar multicopter.

    Inertia is restricted to a diagonal matrix (the reduced-model
    decoupling used by the controllability analysis requires it).
    """

    rotors: tuple[RotorSpec, ...]
    mass: float  # [kg]
    inertia: tuple[float, float, float]  # (Jx, Jy, Jz) [kg m^2]
    kappa_t: float  # thrust factor, f = kappa_t * Omega^2 [N s^2]
    kappa_mu: float  # torque factor, yaw moment per unit thrust [m]
    kappa_d: float  # quadratic drag factor [kg/m]
    kappa_r: float  # rotational damping factor [N m s]
    f_max: float  # per-rotor thrust limit [N]
    tau_motor: float  # motor first-order time constant [s]
    gravity: float = 9.81  # [m/s^2]

    def __post_init__(self):
        if len(self.rotors) < 4:
            raise ValueError("a co-planar multicopter needs at least 4 rotors")
        object.__setattr__(self, "rotors", tuple(self.rotors))
        object.__setattr__(self, "inertia", tuple(float(j) for j in self.inertia))
        for name in ("mass", "kappa_t", "kappa_mu", "f_max", "tau_motor", "gravity"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.kappa_d < 0.0 or self.kappa_r < 0.0:
            raise ValueError("kappa_d and kappa_r must be non-negative")
        if any(j <= 0.0 for j in self.inertia):
            raise ValueError("inertia entries must be positive")

    @classmethod
    def symmetric(cls, config: str, arm_length: float, **kwargs) -> "VehicleParams":
        """Build a symmetric layout: equal arms, rotor n at 2*pi*(n-1)/N.

        Rotors are numbered counter-clockwise starting on the body x axis;
        ``config`` gives the spin directions ("PNPNPN" style).
        """
        spins = parse_spin_string(config)
        n = len(spins)
        rotors = tuple(
            RotorSpec(arm_length, TWO_PI * i / n, spins[i]) for i in range(n)
        )
        return cls(rotors=rotors, **kwargs)

    @property
    def n_rotors(self) -> int:
        return len(self.rotors)

    @property
    def spins(self) -> tuple[int, ...]:
        return tuple(r.spin for r in self.rotors)

    @property
    def config_string(self) -> str:
        return spin_string(self.spins)

    @property
    def hover_thrust_total(self) -> float:
        return self.mass * self.gravity

    @property
    def hover_thrust_per_rotor(self) -> float:
        return self.mass * self.gravity / self.n_rotors

    @property
    def hover_speed(self) -> float:
        """Rotor speed [rad/s] that produces the per-rotor hover thrust."""
        return math.sqrt(self.hover_thrust_per_rotor / self.kappa_t)

    def gravity_wrench(self) -> np.ndarray:
        return np.array([self.mass * self.gravity, 0.0, 0.0, 0.0])


def full_health(n: int) -> np.ndarray:
    return np.ones(n)


def health_from_failures(n: int, failed) -> np.ndarray:
    """Health vector with the listed 1-based rotor indices set to 0."""
    eps = np.ones(n)
    for idx in failed:
        if not 1 <= idx <= n:
            raise ValueError(f"rotor index {idx} out of range 1..{n}")
        eps[idx - 1] = 0.0
    return eps


def build_effectiveness(params: VehicleParams, health=None) -> np.ndarray:
    """4xN map from rotor thrusts to the wrench [F_T, L, M, N].

    Column n is ``eps_n * [1, r_n sin(d_n), r_n cos(d_n), gamma_n kappa_mu]``,
    so a failed rotor contributes an exactly zero column.
    """
    n = params.n_rotors
    if health is None:
        health = np.ones(n)
    eps = np.asarray(health, dtype=float)
    if eps.shape != (n,):
        raise ValueError(f"health vector length {eps.shape} does not match N={n}")
    b = np.empty((4, n))
    for i, rotor in enumerate(params.rotors):
        b[0, i] = eps[i]
        b[1, i] = eps[i] * rotor.arm_length * math.sin(rotor.angle)
        b[2, i] = eps[i] * rotor.arm_length * math.cos(rotor.angle)
        b[3, i] = eps[i] * rotor.spin * params.kappa_mu
    return b


def rotor_thrusts(omega, params: VehicleParams, health=None) -> np.ndarray:
    """Per-rotor thrusts f_n = eps_n * kappa_t * Omega_n^2.

    Health is applied at thrust production: a failed rotor may keep
    spinning but produces nothing.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise ValueError("rotor speeds must be non-negative")
    f = params.kappa_t * w * w
    if health is not None:
        f = f * np.asarray(health, dtype=float)
    return f


@dataclass
class RigidBodyState:
    """Rigid-body state: inertial position/velocity, Euler angles, body rates."""

    x: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    att: np.ndarray = field(default_factory=lambda: np.zeros(3))  # (phi, theta, psi)
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))  # (p, q, r)

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(
            self.x.copy(), self.v.copy(), self.att.copy(), self.omega.copy()
        )

    @property
    def altitude(self) -> float:
        return -float(self.x[2])


@dataclass
class MotorState:
    """Rotor speed vector [rad/s]."""

    omega: np.ndarray

    def copy(self) -> "MotorState":
        return MotorState(self.omega.copy())


def rotation_matrix(phi: float, theta: float, psi: float) -> np.ndarray:
    """ZYX Euler body-to-inertial rotation matrix."""
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array(
        [
            [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
            [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
            [-st, ct * sf, ct * cf],
        ]
    )


def euler_kinematics(att, omega):
    """Gamma1 (diagonal) and Gamma2 of the Euler-angle kinematics.

    Phi_dot = Gamma1 @ omega + Gamma2 with
    Gamma1 = diag(1, cos(phi), cos(phi)/cos(theta)).
    Raises KinematicSingularityError as |theta| approaches 90 deg.
    """
    phi, theta = float(att[0]), float(att[1])
    ct = math.cos(theta)
    if abs(ct) < _COS_SINGULARITY:
        raise KinematicSingularityError(f"theta = {theta:.6f} rad is singular")
    cf, sf = math.cos(phi), math.sin(phi)
    tt = math.tan(theta)
    p, q, r = float(omega[0]), float(omega[1]), float(omega[2])
    gamma1 = np.array([1.0, cf, cf / ct])
    gamma2 = np.array([q * sf * tt + r * cf * tt, -r * sf, q * sf / ct])
    return gamma1, gamma2


def dynamics_deriv(state: RigidBodyState, f_t: float, moments, params: VehicleParams):
    """Continuous rigid-body dynamics.

    Returns (x_dot, v_dot, att_dot, omega_dot):

    * x_dot   = v
    * att_dot = Gamma1 omega + Gamma2
    * v_dot   = g e3 - (F_T/m) R e3 - (kappa_d/m) v ||v||
    * omega_dot = J^-1 (T - omega x J omega - kappa_r omega)
    """
    phi, theta, psi = (float(a) for a in state.att)
    gamma1, gamma2 = euler_kinematics(state.att, state.omega)
    att_dot = gamma1 * state.omega + gamma2

    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    # third column of the body-to-inertial rotation matrix
    r_e3 = np.array([cp * st * cf + sp * sf, sp * st * cf - cp * sf, ct * cf])
    speed = float(np.linalg.norm(state.v))
    v_dot = (
        np.array([0.0, 0.0, params.gravity])
        - (f_t / params.mass) * r_e3
        - (params.kappa_d / params.mass) * state.v * speed
    )

    jx, jy, jz = params.inertia
    p, q, r = (float(w) for w in state.omega)
    lm, mm, nm = (float(m) for m in moments)
    omega_dot = np.array(
        [
            (lm - (jz - jy) * q * r - params.kappa_r * p) / jx,
            (mm - (jx - jz) * p * r - params.kappa_r * q) / jy,
            (nm - (jy - jx) * p * q - params.kappa_r * r) / jz,
        ]
    )
    return state.v.copy(), v_dot, att_dot, omega_dot


def motor_deriv(omega, omega_cmd, tau_motor: float) -> np.ndarray:
    """First-order motor lag: dOmega/dt = (Omega_cmd - Omega) / tau."""
    if tau_motor <= 0.0:
        raise ValueError("tau_motor must be positive")
    return (np.asarray(omega_cmd, dtype=float) - np.asarray(omega, dtype=float)) / tau_motor


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


class PlantOde:
    """Coupled rigid-body + motor ODE with an RK4 stepper.

    Flat state layout: [x(3), v(3), att(3), omega(3), Omega(N)].  The
    effectiveness matrix is rebuilt whenever the health vector changes;
    the wrench is recomputed from the motor state at every RK4 stage.
    Scalar math keeps the per-step cost low enough for kHz simulation.
    """

    def __init__(self, params: VehicleParams, health=None):
        self.params = params
        self.n = params.n_rotors
        self._jx, self._jy, self._jz = params.inertia
        self._m = params.mass
        self._g = params.gravity
        self._kd = params.kappa_d
        self._kr = params.kappa_r
        self._kt = params.kappa_t
        self._tau = params.tau_motor
        self.set_health(np.ones(self.n) if health is None else health)

    def set_health(self, health) -> None:
        self.health = np.asarray(health, dtype=float).copy()
        self.b = build_effectiveness(self.params, self.health)

    def wrench(self, motor_omega) -> np.ndarray:
        f = self._kt * np.asarray(motor_omega) ** 2
        return self.b @ f

    def deriv(self, y: np.ndarray, omega_cmd: np.ndarray) -> np.ndarray:
        s = y.tolist()
        vx, vy, vz = s[3], s[4], s[5]
        phi, theta, psi = s[6], s[7], s[8]
        p, q, r = s[9], s[10], s[11]

        ct = math.cos(theta)
        if abs(ct) < _COS_SINGULARITY:
            raise KinematicSingularityError(f"theta = {theta:.6f} rad is singular")
        cf, sf = math.cos(phi), math.sin(phi)
        st = math.sin(theta)
        cp, sp = math.cos(psi), math.sin(psi)
        tt = st / ct

        motor = y[12:]
        f_t, lm, mm, nm = (self.b @ (self._kt * motor * motor)).tolist()

        speed = math.sqrt(vx * vx + vy * vy + vz * vz)
        drag = self._kd * speed / self._m
        ft_m = f_t / self._m
        inv_tau = 1.0 / self._tau

        out = [
            vx,
            vy,
            vz,
            -ft_m * (cp * st * cf + sp * sf) - drag * vx,
            -ft_m * (sp * st * cf - cp * sf) - drag * vy,
            self._g - ft_m * ct * cf - drag * vz,
            p + q * sf * tt + r * cf * tt,
            q * cf - r * sf,
            (q * sf + r * cf) / ct,
            (lm - (self._jz - self._jy) * q * r - self._kr * p) / self._jx,
            (mm - (self._jx - self._jz) * p * r - self._kr * q) / self._jy,
            (nm - (self._jy - self._jx) * p * q - self._kr * r) / self._jz,
        ]
        cmd = omega_cmd.tolist()
        out.extend((cmd[i] - s[12 + i]) * inv_tau for i in range(self.n))
        return np.array(out)

    def rk4_step(self, y: np.ndarray, omega_cmd: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.deriv(y, omega_cmd)
        k2 = self.deriv(y + (0.5 * dt) * k1, omega_cmd)
        k3 = self.deriv(y + (0.5 * dt) * k2, omega_cmd)
        k4 = self.deriv(y + dt * k3, omega_cmd)
        y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y_next[8] = wrap_angle(y_next[8])
        return y_next

    @staticmethod
    def pack(state: RigidBodyState, motor: MotorState) -> np.ndarray:
        return np.concatenate([state.x, state.v, state.att, state.omega, motor.omega])

    @staticmethod
    def unpack(y: np.ndarray) -> tuple[RigidBodyState, MotorState]:
        return (
            RigidBodyState(
                y[0:3].copy(), y[3:6].copy(), y[6:9].copy(), y[9:12].copy()
            ),
            MotorState(y[12:].copy()),
        )


def step_rk4(
    state: RigidBodyState,
    motor: MotorState,
    omega_cmd,
    health,
    params: VehicleParams,
    dt: float,
):
    """One classical RK4 step of the coupled 12+N state.

    Returns the new (RigidBodyState, MotorState); psi is wrapped to
    (-pi, pi] after the step.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    ode = PlantOde(params, health)
    y = PlantOde.pack(state, motor)
    y_next = ode.rk4_step(y, np.asarray(omega_cmd, dtype=float), dt)
    return PlantOde.unpack(y_next)
