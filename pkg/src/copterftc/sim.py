"""Closed-loop scenario engine.

Plant integration runs at the base step (RK4); the controller, FDI and
allocator run every ``control_divisor`` steps and their zero-order-held
speed commands drive the motors in between.  Faults flip the true health
vector at their injection times; the controller and allocator only ever
see the FDI estimate.  When the estimated failure set becomes
uncontrollable, the reduction planner picks the channel to abandon and
the loop switches to the reduced allocation problem; the switch is
one-way (reduced never reverts to full within a run).

A run is deterministic: the only randomness is the optional FDI
measurement noise, drawn from the scenario seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .allocation import reduced_allocate, rpi_allocate, thrust_to_speed_cmd
from .controller import NdiController
from .controllability import ReductionPlanner
from .fdi import FaultDetector, ThrustModel
from .scenario import ScenarioModel
from .trajectory import ReferencePath
from .vehicle import KinematicSingularityError, PlantOde, RigidBodyState, VehicleParams

_MASK_ROW = {"h": 0, "phi": 1, "theta": 2, "psi": 3}


@dataclass
class SimLog:
    """Time series sampled at the control rate, plus run-level outcomes."""

    name: str
    config: str
    n_rotors: int
    dt_control: float
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    pos: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    vel: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    att: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    omega: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    ref_pos: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    ref_psi: np.ndarray = field(default_factory=lambda: np.empty(0))
    tau_d: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))
    thrust: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    omega_cmd: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    omega_rotor: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    residuals: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    eps_hat: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    mode: list[str] = field(default_factory=list)
    alloc_residual: np.ndarray = field(default_factory=lambda: np.empty(0))
    alloc_iterations: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    status: str = "completed"
    crash_time: float | None = None
    crash_reason: str | None = None
    detections: list[tuple[int, float]] = field(default_factory=list)
    mode_changes: list[tuple[float, str]] = field(default_factory=list)

    @property
    def pos_error(self) -> np.ndarray:
        return np.linalg.norm(self.pos - self.ref_pos, axis=1)

    @property
    def altitude(self) -> np.ndarray:
        return -self.pos[:, 2]


def run_scenario(spec: ScenarioModel) -> SimLog:
    """Integrate one scenario end to end and return its log.

    A kinematic singularity, excessive tilt, non-finite state or ground
    contact terminates the run with status "crashed" and the reason
    recorded; the log keeps everything sampled up to that point.
    """
    params = spec.vehicle.to_params()
    n = params.n_rotors
    gains = spec.gains.to_gains()
    est = spec.estimator.to_estimates(params)
    alloc_cfg = spec.allocator.to_config()
    fdi_cfg = spec.fdi.to_config(params)
    sim = spec.sim

    planner = ReductionPlanner(params, max_failures=2)
    b_geom = _healthy_effectiveness(params)
    controller = NdiController(
        gains, est, gravity=params.gravity, f_td_limit=n * params.f_max
    )

    north, east, alt = spec.initial.position_m
    x0 = np.array([north, east, -alt])
    psi0 = np.radians(spec.initial.yaw_deg)
    path = ReferencePath(
        x0,
        psi0,
        [s.to_segment() for s in spec.trajectory],
        smoothing=sim.ref_smoothing_s,
        yaw_rate_limit=sim.yaw_rate_limit_radps,
    )

    motor0 = (
        np.full(n, params.hover_speed) if spec.initial.motors == "hover" else np.zeros(n)
    )
    y = np.concatenate([x0, np.zeros(3), [0.0, 0.0, psi0], np.zeros(3), motor0])

    ode = PlantOde(params)
    detector = FaultDetector(n, fdi_cfg)
    thrust_model = ThrustModel(params.kappa_t, params.tau_motor, motor0)
    rng = np.random.default_rng(sim.seed)

    dt = sim.dt_s
    div = sim.control_divisor
    dt_ctrl = dt * div
    n_steps = int(round(sim.duration_s / dt))
    n_log = (n_steps + div - 1) // div

    log = SimLog(name=spec.name, config=params.config_string, n_rotors=n, dt_control=dt_ctrl)
    log.t = np.empty(n_log)
    log.pos = np.empty((n_log, 3))
    log.vel = np.empty((n_log, 3))
    log.att = np.empty((n_log, 3))
    log.omega = np.empty((n_log, 3))
    log.ref_pos = np.empty((n_log, 3))
    log.ref_psi = np.empty(n_log)
    log.tau_d = np.empty((n_log, 4))
    log.thrust = np.empty((n_log, n))
    log.omega_cmd = np.empty((n_log, n))
    log.omega_rotor = np.empty((n_log, n))
    log.residuals = np.empty((n_log, n))
    log.eps_hat = np.empty((n_log, n))
    log.alloc_residual = np.empty(n_log)
    log.alloc_iterations = np.empty(n_log, dtype=int)

    eps_true = np.ones(n)
    faults = sorted(spec.faults, key=lambda f: f.time_s)
    fault_idx = 0

    mode = "full"
    channel: str | None = None
    failure_key: tuple[int, ...] = ()
    omega_cmd = motor0.copy()
    last_cmd = motor0.copy()
    tilt_limit = np.radians(sim.crash_tilt_deg)
    row = 0

    for k in range(n_steps):
        t = k * dt
        while fault_idx < len(faults) and faults[fault_idx].time_s <= t:
            eps_true[faults[fault_idx].rotor - 1] = 0.0
            ode.set_health(eps_true)
            fault_idx += 1

        if k % div == 0:
            motor = y[12:]
            f_meas = params.kappa_t * motor * motor * eps_true
            if fdi_cfg.noise_std > 0.0:
                f_meas = f_meas + fdi_cfg.noise_std * rng.standard_normal(n)
            f_model = thrust_model.advance(last_cmd, dt_ctrl) if k > 0 else thrust_model.thrusts()
            eps_hat = detector.update(t, f_meas, f_model)

            failed = detector.failed_rotors
            if failed != failure_key:
                failure_key = failed
                decision = planner.plan(failed)
                if decision.mode == "reduced":
                    if mode != "reduced" or channel != decision.channel:
                        mode, channel = "reduced", decision.channel
                        log.mode_changes.append((t, f"reduced:{channel}"))
                elif decision.mode == "lost":
                    # keep flying the last reduced problem best-effort; the
                    # crash detector reports the physical outcome honestly
                    if mode != "lost":
                        mode = "lost"
                        channel = channel or "psi"
                        log.mode_changes.append((t, "lost"))
                # decision "full": mode never reverts from reduced

            x_d, psi_d = path.sample(t)
            state = RigidBodyState(y[0:3], y[3:6], y[6:9], y[9:12])
            ctl_mode = "full" if mode == "full" else channel
            demand = controller.step(state, x_d, psi_d, mode=ctl_mode)
            if mode == "full":
                res = rpi_allocate(demand.wrench, b_geom, params.f_max, eps_hat, alloc_cfg)
            else:
                keep = [i for i in range(4) if i != _MASK_ROW[channel]]
                res = reduced_allocate(
                    demand.wrench[keep], channel, b_geom, params.f_max, eps_hat, alloc_cfg
                )
            omega_cmd = thrust_to_speed_cmd(res.thrusts, params.kappa_t, eps_hat)
            last_cmd = omega_cmd

            log.t[row] = t
            log.pos[row] = y[0:3]
            log.vel[row] = y[3:6]
            log.att[row] = y[6:9]
            log.omega[row] = y[9:12]
            log.ref_pos[row] = x_d
            log.ref_psi[row] = psi_d
            log.tau_d[row] = demand.wrench
            log.thrust[row] = res.thrusts
            log.omega_cmd[row] = omega_cmd
            log.omega_rotor[row] = y[12:]
            log.residuals[row] = detector.residuals
            log.eps_hat[row] = eps_hat
            log.mode.append("full" if mode == "full" else (f"reduced:{channel}" if mode == "reduced" else "lost"))
            log.alloc_residual[row] = res.residual
            log.alloc_iterations[row] = res.iterations
            row += 1

        try:
            y = ode.rk4_step(y, omega_cmd, dt)
        except KinematicSingularityError as exc:
            _mark_crash(log, (k + 1) * dt, f"kinematic singularity: {exc}")
            break
        # cheap scalar checks every plant step; the full finiteness sweep
        # rides along with the next control step
        full_check = (k + 1) % div == 0
        reason = _crash_reason(y, tilt_limit, sim.min_altitude_m, full=full_check)
        if reason is not None:
            _mark_crash(log, (k + 1) * dt, reason)
            break

    _trim(log, row)
    log.detections = list(detector.detections)
    return log


def _healthy_effectiveness(params: VehicleParams):
    from .vehicle import build_effectiveness

    return build_effectiveness(params)


def _crash_reason(y, tilt_limit: float, min_altitude: float, full: bool = True) -> str | None:
    phi, theta, z = y[6], y[7], y[2]
    if not (math.isfinite(phi) and math.isfinite(theta) and math.isfinite(z)):
        return "non-finite state"
    if abs(phi) >= tilt_limit or abs(theta) >= tilt_limit:
        return f"tilt exceeded {math.degrees(tilt_limit):.0f} deg"
    if -z < min_altitude:
        return "below minimum altitude"
    if full and not np.all(np.isfinite(y)):
        return "non-finite state"
    return None


def _mark_crash(log: SimLog, t: float, reason: str) -> None:
    log.status = "crashed"
    log.crash_time = t
    log.crash_reason = reason


def _trim(log: SimLog, row: int) -> None:
    for name in (
        "t",
        "pos",
        "vel",
        "att",
        "omega",
        "ref_pos",
        "ref_psi",
        "tau_d",
        "thrust",
        "omega_cmd",
        "omega_rotor",
        "residuals",
        "eps_hat",
        "alloc_residual",
        "alloc_iterations",
    ):
        setattr(log, name, getattr(log, name)[:row])
    log.mode = log.mode[:row]


@dataclass
class SpinCheck:
    """Steady-spin statistics over a trailing window of a log."""

    r_ss: float  # mean yaw rate [rad/s]
    std_ratio: float  # std(r) / |mean(r)| over the window
    balance_residual: float  # |mean(N_achieved) - kappa_r * r_ss|
    mean_abs_deviation: float  # mean |N_achieved(t) - kappa_r * r_ss|
    steady: bool  # std within 5% of |mean|
    window: float


def steady_spin_check(log: SimLog, params: VehicleParams, window: float = 5.0) -> SpinCheck:
    """Mean yaw rate and yaw-torque balance over the last ``window`` seconds.

    At steady spin the produced yaw moment balances the rotational
    damping: N = kappa_r * r.  The produced moment is reconstructed from
    the logged rotor speeds with the estimated health mask (exact once
    the failed rotors are isolated).
    """
    if len(log.t) == 0:
        raise ValueError("empty log")
    t_end = log.t[-1]
    sel = log.t >= t_end - window
    if not np.any(sel):
        raise ValueError("window longer than the log")
    r = log.omega[sel, 2]
    r_ss = float(np.mean(r))
    std_ratio = float(np.std(r) / abs(r_ss)) if r_ss != 0.0 else float("inf")

    spins = np.array(params.spins, dtype=float)
    f_true = params.kappa_t * log.omega_rotor[sel] ** 2 * log.eps_hat[sel]
    n_achieved = params.kappa_mu * (f_true @ spins)
    target = params.kappa_r * r_ss
    return SpinCheck(
        r_ss=r_ss,
        std_ratio=std_ratio,
        balance_residual=float(abs(np.mean(n_achieved) - target)),
        mean_abs_deviation=float(np.mean(np.abs(n_achieved - target))),
        steady=std_ratio <= 0.05,
        window=window,
    )


@dataclass
class RunSummary:
    """Run-level digest used by the service and the CLI."""

    name: str
    status: str
    config: str
    duration: float
    samples: int
    detections: list[tuple[int, float]]
    mode_changes: list[tuple[float, str]]
    final_mode: str
    max_pos_error: float
    final_pos_error: float
    max_tilt_deg: float
    crash_time: float | None = None
    crash_reason: str | None = None


def summarize(log: SimLog) -> RunSummary:
    err = log.pos_error
    tilt = np.degrees(np.max(np.abs(log.att[:, 0:2]), axis=1)) if len(log.t) else np.zeros(1)
    return RunSummary(
        name=log.name,
        status=log.status,
        config=log.config,
        duration=float(log.t[-1]) if len(log.t) else 0.0,
        samples=len(log.t),
        detections=list(log.detections),
        mode_changes=list(log.mode_changes),
        final_mode=log.mode[-1] if log.mode else "full",
        max_pos_error=float(np.max(err)) if len(err) else 0.0,
        final_pos_error=float(err[-1]) if len(err) else 0.0,
        max_tilt_deg=float(np.max(tilt)),
        crash_time=log.crash_time,
        crash_reason=log.crash_reason,
    )
