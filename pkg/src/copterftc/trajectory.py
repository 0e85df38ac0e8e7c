"""Waypoint reference generation with bounded derivatives.

A mission is a contiguous list of segments (takeoff-climb, cruise-leg,
hover-hold, descend-land).  The raw reference moves along straight legs
at the segment speed, so its rate is bounded by construction; heading
targets are additionally ramped at a configured yaw-rate limit.  Both
are then passed through a first-order smoother so the reference fed to
the controller has continuous, slow derivatives, matching the cascade's
slow-reference assumption.

The smoothed response to a piecewise-linear input has a closed form per
segment, so sampling is an exact pure function of time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SEGMENT_KINDS = ("takeoff-climb", "cruise-leg", "hover-hold", "descend-land")


@dataclass(frozen=True)
class Segment:
    """One mission leg.  Positions are NED; use duration for hover-hold."""

    kind: str
    target: tuple[float, float, float] | None = None  # NED waypoint [m]
    speed: float | None = None  # along-track speed [m/s]
    duration: float | None = None  # hover-hold length [s]
    heading: str = "hold"  # "hold" current heading or "track" the leg azimuth

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.heading not in ("hold", "track"):
            raise ValueError("heading must be 'hold' or 'track'")
        if self.kind == "hover-hold":
            if self.duration is None or self.duration <= 0.0:
                raise ValueError("hover-hold needs a positive duration")
        else:
            if self.target is None:
                raise ValueError(f"{self.kind} needs a target waypoint")
            if self.speed is None or self.speed <= 0.0:
                raise ValueError(f"{self.kind} needs a positive speed")


@dataclass
class _Piece:
    """Linear raw-reference piece plus smoother boundary state."""

    t0: float
    t1: float
    r0: np.ndarray  # raw value at t0 (pos3 + psi)
    slope: np.ndarray
    y0: np.ndarray  # smoothed value at t0

    def raw(self, t: float) -> np.ndarray:
        return self.r0 + self.slope * (t - self.t0)

    def smoothed(self, t: float, tau: float) -> np.ndarray:
        # first-order lag response to a ramp: lags the input by slope*tau,
        # plus the decaying mismatch carried in from the piece boundary
        dt = t - self.t0
        lagged = self.r0 + self.slope * (dt - tau)
        return lagged + (self.y0 - self.r0 + self.slope * tau) * math.exp(-dt / tau)


class ReferencePath:
    """Precomputed, exactly sampleable reference trajectory."""

    def __init__(
        self,
        start_position,
        start_psi: float,
        segments,
        smoothing: float = 0.5,
        yaw_rate_limit: float = 0.5,
    ):
        if smoothing <= 0.0:
            raise ValueError("smoothing time constant must be positive")
        if yaw_rate_limit <= 0.0:
            raise ValueError("yaw rate limit must be positive")
        self.smoothing = smoothing
        self.segments = tuple(segments)
        if not self.segments:
            raise ValueError("at least one segment is required")

        self._pieces: list[_Piece] = []
        pos = np.asarray(start_position, dtype=float).copy()
        psi = float(start_psi)
        y = np.concatenate([pos, [psi]])  # smoother state at piece boundaries
        t = 0.0
        for seg in self.segments:
            if seg.kind == "hover-hold":
                legs = [(seg.duration, pos.copy(), psi)]
            else:
                target = np.asarray(seg.target, dtype=float)
                delta = target - pos
                dist = float(np.linalg.norm(delta))
                if seg.heading == "track" and np.hypot(delta[0], delta[1]) > 1e-9:
                    psi_goal = math.atan2(delta[1], delta[0])
                else:
                    psi_goal = psi
                legs = []
                # heading ramp first (craft turns, then translates)
                dpsi = self._shortest(psi_goal - psi)
                if abs(dpsi) > 1e-12:
                    legs.append((abs(dpsi) / yaw_rate_limit, pos.copy(), psi + dpsi))
                legs.append((dist / seg.speed if dist > 1e-12 else 0.0, target, psi + dpsi))
            for duration, leg_pos, leg_psi in legs:
                if duration <= 0.0:
                    pos, psi = leg_pos, leg_psi
                    continue
                r0 = np.concatenate([pos, [psi]])
                r1 = np.concatenate([leg_pos, [leg_psi]])
                slope = (r1 - r0) / duration
                piece = _Piece(t0=t, t1=t + duration, r0=r0, slope=slope, y0=y.copy())
                self._pieces.append(piece)
                y = piece.smoothed(piece.t1, self.smoothing)
                t = piece.t1
                pos, psi = leg_pos, leg_psi
        self._final_raw = np.concatenate([pos, [psi]])
        self._final_y0 = y.copy()
        self._end_time = t

    @staticmethod
    def _shortest(dpsi: float) -> float:
        return (dpsi + math.pi) % (2.0 * math.pi) - math.pi

    @property
    def total_time(self) -> float:
        return self._end_time

    def sample(self, t: float):
        """Smoothed (x_d, psi_d) at time t; holds the final point afterwards."""
        if t < 0.0:
            t = 0.0
        for piece in self._pieces:
            if t <= piece.t1:
                y = piece.smoothed(t, self.smoothing)
                return y[:3], float(y[3])
        # past the mission end: exponential settle onto the final waypoint
        dt = t - self._end_time
        y = self._final_raw + (self._final_y0 - self._final_raw) * math.exp(
            -dt / self.smoothing
        )
        return y[:3], float(y[3])


def generate_reference(t: float, path: ReferencePath):
    """Reference position and heading at time t."""
    return path.sample(t)
