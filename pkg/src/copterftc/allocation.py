"""Constrained wrench-to-thrust distribution.

Redistributed pseudo-inverse: solve the weighted minimum-norm allocation

    f = c + W^-1 B^T (B W^-1 B^T + eps I)^-1 (tau_d - B0 c)

then freeze any thrust that violates its box at the violated bound (0 or
F_max), zero the frozen columns of the working matrix B, and re-solve on
the remainder.  Rotors reported failed are frozen at zero up front, in
both B and B0; saturation freezing keeps the column in B0 so that the
offset term subtracts the wrench those rotors already produce.  Each
pass freezes at least one new column, so at most N passes run.

The scheme is knowingly suboptimal against exact constrained
optimization; unattainable demands terminate with the best-effort
clamped solution and a recorded residual rather than failing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# wrench row per reduction channel (order [F_T, L, M, N])
_ROW = {"h": 0, "phi": 1, "theta": 2, "psi": 3}


@dataclass(frozen=True)
class AllocatorConfig:
    """Weighting, regularization and iteration cap for the allocator."""

    weights: tuple | None = None  # diagonal of W, defaults to identity
    eps_reg: float = 1e-9  # ridge term guarding rank collapse
    max_iter: int | None = None  # defaults to N

    def __post_init__(self):
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if any(x <= 0.0 for x in w):
                raise ValueError("allocator weights must be positive")
            object.__setattr__(self, "weights", w)
        if self.eps_reg < 0.0:
            raise ValueError("eps_reg must be non-negative")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class AllocationResult:
    thrusts: np.ndarray  # length N, clamped to [0, F_max]
    achieved: np.ndarray  # wrench rows actually produced (B0 f on demand rows)
    residual: float  # || achieved - tau_d || over the demanded rows
    iterations: int
    saturated: tuple[int, ...]  # 1-based rotor indices frozen by saturation
    mode: str  # "full" or "reduced:<channel>"


def _rpi_core(tau, b_rows, f_max, fault_mask, cfg: AllocatorConfig, mode: str) -> AllocationResult:
    tau = np.asarray(tau, dtype=float)
    b0 = np.array(b_rows, dtype=float)
    m, n = b0.shape
    if tau.shape != (m,):
        raise ValueError(f"demand has {tau.shape}, expected ({m},)")
    if not np.all(np.isfinite(tau)):
        raise ValueError("demand wrench must be finite")

    w_inv = np.ones(n) if cfg.weights is None else 1.0 / np.asarray(cfg.weights)
    if cfg.weights is not None and len(w_inv) != n:
        raise ValueError("weights length does not match rotor count")
    max_iter = cfg.max_iter if cfg.max_iter is not None else n

    faults = np.asarray(fault_mask, dtype=bool)
    frozen = faults.copy()
    c = np.zeros(n)
    have_offsets = False
    b0[:, frozen] = 0.0  # failed rotors produce nothing
    b = b0  # aliased until a saturation freeze forces the copy
    ridge = cfg.eps_reg * np.eye(m)

    f = c.copy()
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        bw = b * w_inv  # B W^-1
        gram_raw = bw @ b.T
        gram = gram_raw + ridge
        rhs = tau - b0 @ c if have_offsets else tau
        try:
            y = np.linalg.solve(gram, rhs)
            # one refinement pass recovers the digits the ridge costs
            y += np.linalg.solve(gram, rhs - gram_raw @ y)
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(gram, rhs, rcond=None)[0]
        f = c + bw.T @ y  # frozen columns contribute exactly c
        free = ~frozen
        low = free & (f < 0.0)
        high = free & (f > f_max)
        if not (low.any() or high.any()):
            break
        c[high] = f_max
        have_offsets = have_offsets or bool(high.any())
        frozen |= low | high
        if b is b0:
            b = b0.copy()  # keep saturated columns alive in the offset term
        b[:, low | high] = 0.0
        if frozen.all():
            f = c.copy()
            break

    f = np.clip(f, 0.0, f_max)
    f[frozen] = c[frozen]
    achieved = b0 @ f
    saturated = tuple(int(i) + 1 for i in np.flatnonzero(frozen & ~faults))
    return AllocationResult(
        thrusts=f,
        achieved=achieved,
        residual=float(np.linalg.norm(achieved - tau)),
        iterations=iterations,
        saturated=saturated,
        mode=mode,
    )


def _fault_mask(health_estimate, n: int) -> np.ndarray:
    if health_estimate is None:
        return np.zeros(n, dtype=bool)
    eps = np.asarray(health_estimate, dtype=float)
    if eps.shape != (n,):
        raise ValueError("health estimate length does not match rotor count")
    return eps == 0.0


def rpi_allocate(tau_d, b_full, f_max: float, health_estimate=None, cfg: AllocatorConfig | None = None) -> AllocationResult:
    """Distribute a full 4-row wrench demand over the rotors.

    ``b_full`` is the healthy-geometry effectiveness matrix; estimated
    faults are applied here by freezing the matching columns at zero.
    Never raises in flight: with every column frozen the best-effort
    offset vector is returned with its residual.
    """
    cfg = cfg or AllocatorConfig()
    b = np.asarray(b_full, dtype=float)
    return _rpi_core(tau_d, b, f_max, _fault_mask(health_estimate, b.shape[1]), cfg, "full")


def reduced_allocate(
    tau_alpha_d,
    channel: str,
    b_full,
    f_max: float,
    health_estimate=None,
    cfg: AllocatorConfig | None = None,
) -> AllocationResult:
    """Same redistribution loop on the 3-row problem of a dropped channel."""
    if channel not in _ROW:
        raise ValueError(f"unknown reduction channel {channel!r}")
    cfg = cfg or AllocatorConfig()
    b = np.asarray(b_full, dtype=float)
    keep = [i for i in range(4) if i != _ROW[channel]]
    return _rpi_core(
        tau_alpha_d,
        b[keep, :],
        f_max,
        _fault_mask(health_estimate, b.shape[1]),
        cfg,
        f"reduced:{channel}",
    )


def thrust_to_speed_cmd(f, kappa_t: float, health_estimate=None) -> np.ndarray:
    """Invert the thrust map: Omega_cmd = sqrt(f / kappa_t).

    Rotors estimated faulty are commanded to zero.  Negative thrusts are
    rejected; the allocator's clamp guarantees non-negative input.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0.0):
        raise ValueError("thrust command must be non-negative")
    omega = np.sqrt(f / kappa_t)
    if health_estimate is not None:
        omega = omega * (np.asarray(health_estimate, dtype=float) != 0.0)
    return omega
