"""Residual-based rotor fault detection and isolation.

Per-rotor residual = |estimated actual thrust - onboard-model thrust|.
The onboard model drives the commanded speed through the healthy
first-order motor lag and squares it through the thrust map, so in
nominal flight the residuals stay negligible.  A rotor whose residual
exceeds the threshold for ``persistence`` consecutive samples is
declared failed and latched: once isolated, it stays isolated.  No
detection happens before the start time, which masks powered-up
transients.

The estimated actual thrust is assumed observable (extra sensing such as
motor-current measurement); the simulation feeds the plant's true rotor
thrust, optionally with additive noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FdiConfig:
    threshold: float  # residual trip level [N]
    start_time: float = 2.0  # no detections before this [s]
    persistence: int = 2  # consecutive samples above threshold to latch
    noise_std: float = 0.0  # optional measurement noise on thrust estimates [N]

    def __post_init__(self):
        if self.threshold <= 0.0:
            raise ValueError("threshold must be positive")
        if self.start_time <= 0.0:
            raise ValueError("start_time must be positive")
        if self.persistence < 1:
            raise ValueError("persistence must be at least 1")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be non-negative")


class ThrustModel:
    """Onboard healthy-motor thrust model.

    Propagates the commanded speed through the first-order lag with an
    exact exponential step and returns kappa_t * Omega_model^2.
    """

    def __init__(self, kappa_t: float, tau_motor: float, omega0):
        self.kappa_t = kappa_t
        self.tau_motor = tau_motor
        self.omega = np.asarray(omega0, dtype=float).copy()

    def advance(self, omega_cmd, dt: float) -> np.ndarray:
        alpha = 1.0 - math.exp(-dt / self.tau_motor)
        self.omega += alpha * (np.asarray(omega_cmd, dtype=float) - self.omega)
        return self.thrusts()

    def thrusts(self) -> np.ndarray:
        return self.kappa_t * self.omega * self.omega


class FaultDetector:
    """Threshold-latch state machine over the thrust residuals."""

    def __init__(self, n: int, cfg: FdiConfig):
        self.cfg = cfg
        self.eps_hat = np.ones(n)
        self.latched = np.zeros(n, dtype=bool)
        self.counters = np.zeros(n, dtype=int)
        self.residuals = np.zeros(n)
        self.detections: list[tuple[int, float]] = []  # (1-based rotor, time)

    def update(self, t: float, f_measured, f_model) -> np.ndarray:
        """One detection pass; returns the current health estimate."""
        f_measured = np.asarray(f_measured, dtype=float)
        f_model = np.asarray(f_model, dtype=float)
        self.residuals = np.abs(f_measured - f_model)
        if t < self.cfg.start_time:
            return self.eps_hat
        above = self.residuals > self.cfg.threshold
        self.counters = np.where(above, self.counters + 1, 0)
        newly = (self.counters >= self.cfg.persistence) & ~self.latched
        for idx in np.flatnonzero(newly):
            self.latched[idx] = True
            self.eps_hat[idx] = 0.0
            self.detections.append((int(idx) + 1, t))
        return self.eps_hat

    @property
    def failed_rotors(self) -> tuple[int, ...]:
        return tuple(int(i) + 1 for i in np.flatnonzero(self.latched))
