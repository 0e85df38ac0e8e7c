"""HTTP service wrapping the analysis and simulation core.

Endpoints:

* ``GET  /healthz``       liveness probe
* ``POST /analyze/acai``  failure grid of the full-authority index
* ``POST /analyze/arcai`` single-failure table of reduced indices
* ``POST /simulate``      run one scenario, return summary + CSV/SVG
* ``POST /plot``          render a previously produced log CSV to SVG

Requests and responses are strict pydantic models; scenario payloads use
the same schema as the YAML files.  Simulation crashes are results, not
transport errors: they come back as status "crashed" in the summary.
"""

from __future__ import annotations

import math
from typing import Optional

from fastapi import FastAPI, HTTPException

from . import __version__
from .controllability import arcai_table, failure_grid
from .output import (
    grid_to_csv,
    grid_to_svg,
    log_to_csv,
    parse_log_csv,
    table_to_csv,
    table_to_svg,
    timeseries_svg,
)
from .scenario import (
    ScenarioError,
    ScenarioModel,
    StrictModel,
    VehicleModel,
    default_vehicle,
)
from .sim import run_scenario, steady_spin_check, summarize

app = FastAPI(
    title="copterftc",
    description="Controllability analysis and fault-tolerant control simulation "
    "for co-planar multicopters",
    version=__version__,
)


# ---------------------------------------------------------------------------
# request / response models


class HealthzResponse(StrictModel):
    status: str
    version: str


class AnalyzeRequest(StrictModel):
    """Vehicle defaults to the packaged hexacopter; ``config`` overrides
    just its spin string (any length >= 4)."""

    vehicle: Optional[VehicleModel] = None
    config: Optional[str] = None
    max_failures: int = 2
    include_csv: bool = True
    include_svg: bool = False


class CellOut(StrictModel):
    failure_set: list[int]
    rho: float
    controllable: bool
    rank_ok: bool
    degenerate: bool
    channel: str


class AcaiResponse(StrictModel):
    config: str
    nominal: CellOut
    singles: list[CellOut]
    pairs: list[CellOut]
    csv: Optional[str] = None
    svg: Optional[str] = None


class ArcaiResponse(StrictModel):
    config: str
    row_labels: list[str]
    full: list[float]
    phi: list[float]
    theta: list[float]
    psi: list[float]
    h_extrapolated: list[float]  # beyond the usual attitude columns
    csv: Optional[str] = None
    svg: Optional[str] = None


class SimulateRequest(StrictModel):
    scenario: ScenarioModel
    seed: Optional[int] = None  # overrides scenario.sim.seed
    include_csv: bool = True
    include_svg: bool = False


class DetectionOut(StrictModel):
    rotor: int
    time_s: float


class ModeChangeOut(StrictModel):
    time_s: float
    mode: str


class SpinOut(StrictModel):
    r_ss_radps: float
    r_ss_degps: float
    std_ratio: float
    balance_residual_nm: float
    steady: bool
    window_s: float


class SummaryOut(StrictModel):
    name: str
    status: str
    config: str
    duration_s: float
    samples: int
    detections: list[DetectionOut]
    mode_changes: list[ModeChangeOut]
    final_mode: str
    max_pos_error_m: float
    final_pos_error_m: float
    max_tilt_deg: float
    crash_time_s: Optional[float] = None
    crash_reason: Optional[str] = None
    steady_spin: Optional[SpinOut] = None


class SimulateResponse(StrictModel):
    summary: SummaryOut
    csv: Optional[str] = None
    svg: Optional[str] = None


class PlotRequest(StrictModel):
    csv: str
    title: str = "simulation log"


class PlotResponse(StrictModel):
    svg: str


# ---------------------------------------------------------------------------
# handlers (plain functions so batch runners can call them in-process)


def _resolve_vehicle(req: AnalyzeRequest) -> VehicleModel:
    vehicle = req.vehicle if req.vehicle is not None else default_vehicle()
    if req.config is not None:
        if vehicle.rotors is not None:
            raise ScenarioError("config override only applies to symmetric layouts")
        vehicle = vehicle.model_copy(update={"config": req.config.upper(), "n_rotors": None})
        vehicle = VehicleModel.model_validate(vehicle.model_dump())
    return vehicle


def _cell(report) -> CellOut:
    return CellOut(
        failure_set=list(report.failure_set),
        rho=report.rho,
        controllable=report.controllable,
        rank_ok=report.rank_ok,
        degenerate=report.degenerate,
        channel=report.channel,
    )


def analyze_acai_payload(req: AnalyzeRequest) -> AcaiResponse:
    if not 1 <= req.max_failures <= 2:
        raise ScenarioError("max_failures must be 1 or 2")
    params = _resolve_vehicle(req).to_params()
    grid = failure_grid(params, max_failures=req.max_failures)
    n = grid.n
    singles = [grid.cell(i, i) for i in range(1, n + 1)]
    pairs = (
        [grid.cell(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        if req.max_failures >= 2
        else []
    )
    return AcaiResponse(
        config=grid.config,
        nominal=_cell(grid.nominal),
        singles=[_cell(r) for r in singles],
        pairs=[_cell(r) for r in pairs],
        csv=grid_to_csv(grid) if req.include_csv else None,
        svg=grid_to_svg(grid) if req.include_svg else None,
    )


def analyze_arcai_payload(req: AnalyzeRequest) -> ArcaiResponse:
    params = _resolve_vehicle(req).to_params()
    table = arcai_table(params)
    return ArcaiResponse(
        config=table.config,
        row_labels=list(table.row_labels),
        full=table.full.tolist(),
        phi=table.phi.tolist(),
        theta=table.theta.tolist(),
        psi=table.psi.tolist(),
        h_extrapolated=table.h_extrapolated.tolist(),
        csv=table_to_csv(table) if req.include_csv else None,
        svg=table_to_svg(table) if req.include_svg else None,
    )


def simulate_payload(req: SimulateRequest) -> SimulateResponse:
    scenario = req.scenario
    if req.seed is not None:
        scenario = scenario.model_copy(deep=True)
        scenario.sim.seed = req.seed
    log = run_scenario(scenario)
    summary = summarize(log)

    spin = None
    if summary.final_mode.startswith("reduced") or summary.final_mode == "lost":
        params = scenario.vehicle.to_params()
        window = min(5.0, max(log.t[-1] - log.mode_changes[0][0], log.dt_control))
        chk = steady_spin_check(log, params, window=window)
        spin = SpinOut(
            r_ss_radps=chk.r_ss,
            r_ss_degps=math.degrees(chk.r_ss),
            std_ratio=chk.std_ratio,
            balance_residual_nm=chk.balance_residual,
            steady=chk.steady,
            window_s=chk.window,
        )

    out = SummaryOut(
        name=summary.name,
        status=summary.status,
        config=summary.config,
        duration_s=summary.duration,
        samples=summary.samples,
        detections=[DetectionOut(rotor=r, time_s=t) for r, t in summary.detections],
        mode_changes=[ModeChangeOut(time_s=t, mode=m) for t, m in summary.mode_changes],
        final_mode=summary.final_mode,
        max_pos_error_m=summary.max_pos_error,
        final_pos_error_m=summary.final_pos_error,
        max_tilt_deg=summary.max_tilt_deg,
        crash_time_s=summary.crash_time,
        crash_reason=summary.crash_reason,
        steady_spin=spin,
    )
    csv_text = log_to_csv(log) if (req.include_csv or req.include_svg) else None
    svg = (
        timeseries_svg(parse_log_csv(csv_text), title=scenario.name)
        if req.include_svg
        else None
    )
    return SimulateResponse(
        summary=out,
        csv=csv_text if req.include_csv else None,
        svg=svg,
    )


def plot_payload(req: PlotRequest) -> PlotResponse:
    frame = parse_log_csv(req.csv)
    return PlotResponse(svg=timeseries_svg(frame, title=req.title))


# ---------------------------------------------------------------------------
# routes


@app.get("/healthz", response_model=HealthzResponse)
def healthz() -> HealthzResponse:
    return HealthzResponse(status="ok", version=__version__)


@app.post("/analyze/acai", response_model=AcaiResponse)
def analyze_acai(req: AnalyzeRequest) -> AcaiResponse:
    try:
        return analyze_acai_payload(req)
    except (ScenarioError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.post("/analyze/arcai", response_model=ArcaiResponse)
def analyze_arcai(req: AnalyzeRequest) -> ArcaiResponse:
    try:
        return analyze_arcai_payload(req)
    except (ScenarioError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    try:
        return simulate_payload(req)
    except (ScenarioError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.post("/plot", response_model=PlotResponse)
def plot(req: PlotRequest) -> PlotResponse:
    try:
        return plot_payload(req)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
