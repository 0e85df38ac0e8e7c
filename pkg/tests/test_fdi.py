import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from copterftc.fdi import FaultDetector, FdiConfig, ThrustModel


def test_config_validation():
    with pytest.raises(ValueError):
        FdiConfig(threshold=0.0)
    with pytest.raises(ValueError):
        FdiConfig(threshold=0.5, start_time=0.0)
    with pytest.raises(ValueError):
        FdiConfig(threshold=0.5, persistence=0)


def test_thrust_model_steady_state():
    model = ThrustModel(kappa_t=1e-5, tau_motor=0.02, omega0=np.zeros(2))
    cmd = np.array([400.0, 200.0])
    for _ in range(1000):  # 2 s >> tau
        f = model.advance(cmd, 0.002)
    assert_allclose(f, [1e-5 * 400.0**2, 1e-5 * 200.0**2], rtol=1e-12)


def test_thrust_model_step_response_analytic():
    tau = 0.05
    model = ThrustModel(kappa_t=1e-5, tau_motor=tau, omega0=np.zeros(1))
    cmd = np.array([300.0])
    dt = 0.002
    t = 0.0
    for _ in range(40):
        f = model.advance(cmd, dt)
        t += dt
        expect = 1e-5 * (300.0 * (1.0 - math.exp(-t / tau))) ** 2
        assert f[0] == pytest.approx(expect, rel=1e-12)


def test_no_detection_below_threshold():
    det = FaultDetector(4, FdiConfig(threshold=0.5, start_time=1.0))
    for k in range(100):
        eps = det.update(k * 0.1, np.full(4, 2.0), np.full(4, 2.0) + 0.1)
        assert_allclose(eps, np.ones(4))
    assert det.detections == []


def test_startup_guard_blocks_early_detection():
    det = FaultDetector(2, FdiConfig(threshold=0.5, start_time=2.0, persistence=1))
    # large residual before the start time must not trip
    eps = det.update(1.0, np.array([0.0, 2.0]), np.array([2.0, 2.0]))
    assert_allclose(eps, np.ones(2))
    # the same residual after the start time trips immediately
    eps = det.update(2.5, np.array([0.0, 2.0]), np.array([2.0, 2.0]))
    assert eps[0] == 0.0 and eps[1] == 1.0
    assert det.detections == [(1, 2.5)]


def test_persistence_counts_consecutive_samples():
    det = FaultDetector(1, FdiConfig(threshold=0.5, start_time=0.1, persistence=3))
    t = 0.2
    for _ in range(2):
        det.update(t, np.array([0.0]), np.array([2.0]))
        t += 0.002
    assert det.eps_hat[0] == 1.0
    det.update(t, np.array([0.0]), np.array([0.1]))  # residual drops: counter resets
    t += 0.002
    for _ in range(2):
        det.update(t, np.array([0.0]), np.array([2.0]))
        t += 0.002
    assert det.eps_hat[0] == 1.0  # only two consecutive again
    det.update(t, np.array([0.0]), np.array([2.0]))
    assert det.eps_hat[0] == 0.0


def test_latch_is_permanent():
    det = FaultDetector(2, FdiConfig(threshold=0.5, start_time=0.1, persistence=1))
    det.update(0.2, np.array([0.0, 2.0]), np.array([2.0, 2.0]))
    assert det.eps_hat[0] == 0.0
    # residual back to zero: the rotor stays isolated
    for k in range(50):
        eps = det.update(0.3 + 0.002 * k, np.array([2.0, 2.0]), np.array([2.0, 2.0]))
        assert eps[0] == 0.0
    assert det.failed_rotors == (1,)


def test_eps_hat_monotone_nonincreasing(rng):
    det = FaultDetector(6, FdiConfig(threshold=0.3, start_time=0.1, persistence=2))
    prev = det.eps_hat.copy()
    t = 0.2
    for _ in range(300):
        f_meas = rng.uniform(0.0, 3.0, size=6)
        f_model = rng.uniform(0.0, 3.0, size=6)
        eps = det.update(t, f_meas, f_model)
        assert np.all(eps <= prev + 1e-15)
        prev = eps.copy()
        t += 0.002


def test_detection_latency_analytic_bound():
    """Instantaneous thrust masking makes the residual equal the model
    thrust, so detection takes exactly `persistence` samples once the
    model thrust clears the threshold."""
    cfg = FdiConfig(threshold=0.61, start_time=2.0, persistence=2)
    det = FaultDetector(1, cfg)
    model = ThrustModel(kappa_t=1e-5, tau_motor=0.02, omega0=np.array([495.0]))
    dt = 0.002
    t_fault = 5.0
    detected_at = None
    t = 4.99
    while t < 5.2:
        f_model = model.advance(np.array([495.0]), dt)
        f_meas = f_model.copy() if t < t_fault else np.array([0.0])
        det.update(t, f_meas, f_model)
        if det.latched[0]:
            detected_at = t
            break
        t += dt
    assert detected_at is not None
    assert detected_at - t_fault <= cfg.persistence * dt + 1e-9
