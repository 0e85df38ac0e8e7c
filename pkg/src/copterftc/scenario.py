"""Scenario files: strict schema, YAML loading, and core-object builders.

A scenario fully describes one closed-loop run: vehicle, controller
gains, estimator values, allocator and FDI settings, mission segments,
fault injections and simulation settings.  Unknown keys are rejected and
every field is unit-suffixed.  Altitudes in scenario files are positive
up; the simulation converts to the internal NED frame (z down).
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .allocation import AllocatorConfig
from .controller import EstimatedParams, Gains
from .fdi import FdiConfig
from .trajectory import Segment
from .vehicle import RotorSpec, VehicleParams


class ScenarioError(ValueError):
    """Configuration rejected; message carries field-precise diagnostics."""


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RotorModel(StrictModel):
    arm_length_m: float = Field(gt=0.0)
    angle_deg: float
    spin: Literal["P", "N"]


class VehicleModel(StrictModel):
    """Either a symmetric layout (config + arm_length_m) or explicit rotors."""

    config: Optional[str] = None  # spin string, e.g. "PPNNPN"
    n_rotors: Optional[int] = None  # optional cross-check against config length
    arm_length_m: Optional[float] = Field(default=None, gt=0.0)
    rotors: Optional[list[RotorModel]] = None
    mass_kg: float = Field(gt=0.0)
    inertia_kgm2: tuple[float, float, float]
    kappa_t_ns2: float = Field(gt=0.0)
    kappa_mu_m: float = Field(gt=0.0)
    kappa_d_kgpm: float = Field(ge=0.0)
    kappa_r_nms: float = Field(ge=0.0)
    f_max_n: float = Field(gt=0.0)
    tau_motor_s: float = Field(gt=0.0)
    gravity_mps2: float = Field(default=9.81, gt=0.0)

    @model_validator(mode="after")
    def _check_layout(self):
        if self.rotors is not None:
            if self.config is not None or self.arm_length_m is not None:
                raise ValueError(
                    "rotors: give either an explicit rotor list or config + arm_length_m, not both"
                )
            if len(self.rotors) < 4:
                raise ValueError("rotors: at least 4 rotors are required")
            if self.n_rotors is not None and self.n_rotors != len(self.rotors):
                raise ValueError(
                    f"n_rotors: declared {self.n_rotors} but {len(self.rotors)} rotors listed"
                )
        else:
            if self.config is None or self.arm_length_m is None:
                raise ValueError(
                    "config: symmetric layout needs both config and arm_length_m"
                )
            if any(ch not in "PN" for ch in self.config.upper()):
                raise ValueError("config: spin string may contain only 'P' and 'N'")
            if len(self.config) < 4:
                raise ValueError("config: at least 4 rotors are required")
            if self.n_rotors is not None and self.n_rotors != len(self.config):
                raise ValueError(
                    f"config: length {len(self.config)} does not match n_rotors={self.n_rotors}"
                )
        return self

    @property
    def rotor_count(self) -> int:
        return len(self.rotors) if self.rotors is not None else len(self.config)

    def to_params(self) -> VehicleParams:
        common = dict(
            mass=self.mass_kg,
            inertia=self.inertia_kgm2,
            kappa_t=self.kappa_t_ns2,
            kappa_mu=self.kappa_mu_m,
            kappa_d=self.kappa_d_kgpm,
            kappa_r=self.kappa_r_nms,
            f_max=self.f_max_n,
            tau_motor=self.tau_motor_s,
            gravity=self.gravity_mps2,
        )
        if self.rotors is not None:
            specs = tuple(
                RotorSpec(r.arm_length_m, math.radians(r.angle_deg), 1 if r.spin == "P" else -1)
                for r in self.rotors
            )
            return VehicleParams(rotors=specs, **common)
        return VehicleParams.symmetric(self.config.upper(), self.arm_length_m, **common)


class GainsModel(StrictModel):
    k_x: float | tuple[float, float, float] = 1.0
    k_v: float | tuple[float, float, float] = 2.0
    k_phi: float | tuple[float, float, float] = 8.0
    k_omega: float | tuple[float, float, float] = 32.0
    tilt_max_deg: float = Field(default=35.0, gt=0.0, lt=90.0)

    def to_gains(self) -> Gains:
        return Gains(
            k_x=self.k_x,
            k_v=self.k_v,
            k_phi=self.k_phi,
            k_omega=self.k_omega,
            tilt_max=math.radians(self.tilt_max_deg),
        )


class EstimatorModel(StrictModel):
    """Controller-side parameter estimates; unset fields copy the plant."""

    mass_kg: Optional[float] = Field(default=None, gt=0.0)
    inertia_kgm2: Optional[tuple[float, float, float]] = None
    kappa_d_kgpm: Optional[float] = Field(default=None, ge=0.0)
    kappa_r_nms: Optional[float] = Field(default=None, ge=0.0)

    def to_estimates(self, plant: VehicleParams) -> EstimatedParams:
        return EstimatedParams(
            mass=self.mass_kg if self.mass_kg is not None else plant.mass,
            inertia=self.inertia_kgm2 if self.inertia_kgm2 is not None else plant.inertia,
            kappa_d=self.kappa_d_kgpm if self.kappa_d_kgpm is not None else plant.kappa_d,
            kappa_r=self.kappa_r_nms if self.kappa_r_nms is not None else plant.kappa_r,
        )


class AllocatorModel(StrictModel):
    weights: Optional[list[float]] = None
    eps_reg: float = Field(default=1e-9, ge=0.0)
    max_iter: Optional[int] = Field(default=None, ge=1)

    def to_config(self) -> AllocatorConfig:
        return AllocatorConfig(
            weights=tuple(self.weights) if self.weights is not None else None,
            eps_reg=self.eps_reg,
            max_iter=self.max_iter,
        )


class FdiModel(StrictModel):
    """Detection settings; the unset threshold defaults to 25% of the
    per-rotor hover thrust of the configured vehicle."""

    threshold_n: Optional[float] = Field(default=None, gt=0.0)
    start_time_s: float = Field(default=2.0, gt=0.0)
    persistence: int = Field(default=2, ge=1)
    noise_std_n: float = Field(default=0.0, ge=0.0)

    def to_config(self, plant: VehicleParams) -> FdiConfig:
        threshold = (
            self.threshold_n
            if self.threshold_n is not None
            else 0.25 * plant.hover_thrust_per_rotor
        )
        return FdiConfig(
            threshold=threshold,
            start_time=self.start_time_s,
            persistence=self.persistence,
            noise_std=self.noise_std_n,
        )


class SegmentModel(StrictModel):
    kind: Literal["takeoff-climb", "cruise-leg", "hover-hold", "descend-land"]
    target_m: Optional[tuple[float, float, float]] = None  # (north, east, altitude-up)
    speed_mps: Optional[float] = Field(default=None, gt=0.0)
    duration_s: Optional[float] = Field(default=None, gt=0.0)
    heading: Literal["hold", "track"] = "hold"

    def to_segment(self) -> Segment:
        target = None
        if self.target_m is not None:
            north, east, alt = self.target_m
            target = (north, east, -alt)  # NED internally
        return Segment(
            kind=self.kind,
            target=target,
            speed=self.speed_mps,
            duration=self.duration_s,
            heading=self.heading,
        )


class FaultEventModel(StrictModel):
    time_s: float = Field(ge=0.0)
    rotor: int = Field(ge=1)  # 1-based rotor index


class SimSettingsModel(StrictModel):
    dt_s: float = Field(default=1e-3, gt=0.0)
    control_divisor: int = Field(default=2, ge=1)  # controller/FDI every k plant steps
    duration_s: float = Field(gt=0.0)
    seed: int = Field(default=0, ge=0)
    ref_smoothing_s: float = Field(default=0.5, gt=0.0)
    yaw_rate_limit_radps: float = Field(default=0.5, gt=0.0)
    min_altitude_m: float = -0.25  # below this the run counts as crashed
    crash_tilt_deg: float = Field(default=85.0, gt=0.0, le=89.0)


class InitialStateModel(StrictModel):
    position_m: tuple[float, float, float] = (0.0, 0.0, 0.0)  # (north, east, altitude)
    yaw_deg: float = 0.0
    motors: Literal["hover", "off"] = "hover"


class ScenarioModel(StrictModel):
    name: str = "scenario"
    vehicle: VehicleModel
    gains: GainsModel = GainsModel()
    estimator: EstimatorModel = EstimatorModel()
    allocator: AllocatorModel = AllocatorModel()
    fdi: FdiModel = FdiModel()
    trajectory: list[SegmentModel] = Field(min_length=1)
    faults: list[FaultEventModel] = Field(default_factory=list)
    sim: SimSettingsModel
    initial: InitialStateModel = InitialStateModel()

    @model_validator(mode="after")
    def _cross_checks(self):
        n = self.vehicle.rotor_count
        for i, fault in enumerate(self.faults):
            if fault.rotor > n:
                raise ValueError(f"faults[{i}].rotor: rotor {fault.rotor} exceeds N={n}")
        if self.allocator.weights is not None and len(self.allocator.weights) != n:
            raise ValueError(
                f"allocator.weights: length {len(self.allocator.weights)} does not match N={n}"
            )
        for i, seg in enumerate(self.trajectory):
            try:
                seg.to_segment()
            except ValueError as exc:
                raise ValueError(f"trajectory[{i}]: {exc}") from exc
        return self


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def scenario_from_dict(data: dict) -> ScenarioModel:
    try:
        return ScenarioModel.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(_format_validation_error(exc)) from exc


def load_scenario(path) -> ScenarioModel:
    """Parse and validate a YAML scenario file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"{path}: YAML syntax error{where}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    try:
        return scenario_from_dict(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def dump_scenario(scenario: ScenarioModel) -> str:
    """Serialize back to YAML; load(dump(s)) == s."""
    data = scenario.model_dump(mode="json", exclude_none=True)
    return yaml.safe_dump(data, sort_keys=False)


def save_scenario(scenario: ScenarioModel, path) -> None:
    Path(path).write_text(dump_scenario(scenario))


def packaged_scenario_path(name: str) -> Path:
    """Path of a scenario file shipped inside the package."""
    return Path(resources.files("copterftc").joinpath("data", name))


def load_packaged_scenario(name: str) -> ScenarioModel:
    return load_scenario(packaged_scenario_path(name))


def default_vehicle() -> VehicleModel:
    """The documented default hexacopter (PPNNPN)."""
    return load_packaged_scenario("scenario_default.yaml").vehicle


def default_scenario() -> ScenarioModel:
    return load_packaged_scenario("scenario_default.yaml")
