import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from copterftc.trajectory import ReferencePath, Segment, generate_reference


def climb_and_cruise(smoothing=0.5):
    return ReferencePath(
        start_position=(0.0, 0.0, 0.0),
        start_psi=0.0,
        segments=[
            Segment("takeoff-climb", target=(0.0, 0.0, -5.0), speed=1.0),
            Segment("cruise-leg", target=(10.0, 0.0, -5.0), speed=2.0),
            Segment("hover-hold", duration=3.0),
        ],
        smoothing=smoothing,
    )


def test_segment_validation():
    with pytest.raises(ValueError):
        Segment("warp", target=(0, 0, 0), speed=1.0)
    with pytest.raises(ValueError):
        Segment("cruise-leg", target=(1, 0, 0))  # speed missing
    with pytest.raises(ValueError):
        Segment("hover-hold")  # duration missing
    with pytest.raises(ValueError):
        Segment("cruise-leg", target=(1, 0, 0), speed=1.0, heading="spin")


def test_reference_starts_at_initial_state():
    path = climb_and_cruise()
    x_d, psi_d = path.sample(0.0)
    assert_allclose(x_d, np.zeros(3), atol=1e-12)
    assert psi_d == 0.0


def test_hover_hold_constant():
    path = ReferencePath((1.0, 2.0, -4.0), 0.3, [Segment("hover-hold", duration=5.0)])
    for t in (0.0, 1.0, 4.9, 20.0):
        x_d, psi_d = path.sample(t)
        assert_allclose(x_d, [1.0, 2.0, -4.0], atol=1e-12)
        assert psi_d == pytest.approx(0.3)


def test_smoothing_adds_lag_on_cruise_leg():
    # 10 m at 2 m/s: the raw ramp arrives at t = 5 s after the climb, the
    # smoothed reference only afterwards
    path = ReferencePath(
        (0.0, 0.0, -5.0),
        0.0,
        [Segment("cruise-leg", target=(10.0, 0.0, -5.0), speed=2.0)],
        smoothing=0.5,
    )
    x_at_5, _ = path.sample(5.0)
    assert x_at_5[0] < 10.0 - 0.3  # still about one lag constant short
    t = 5.0
    while t < 12.0:
        if abs(path.sample(t)[0][0] - 10.0) < 0.01:
            break
        t += 0.01
    assert t >= 5.0 + 0.5  # arrival no earlier than raw time + smoothing


def test_reference_rate_bounded():
    path = climb_and_cruise()
    dt = 1e-3
    ts = np.arange(0.0, path.total_time + 2.0, dt)
    xs = np.array([path.sample(t)[0] for t in ts])
    rates = np.linalg.norm(np.diff(xs, axis=0), axis=1) / dt
    # never faster than the fastest segment speed
    assert rates.max() <= 2.0 + 1e-6


def test_reference_continuity_across_segments():
    path = climb_and_cruise()
    dt = 1e-3
    prev = path.sample(0.0)[0]
    for t in np.arange(dt, path.total_time + 1.0, dt):
        cur = path.sample(t)[0]
        assert np.linalg.norm(cur - prev) < 2.5 * dt  # bounded by max speed
        prev = cur


def test_track_heading_mode_turns_then_translates():
    path = ReferencePath(
        (0.0, 0.0, -5.0),
        0.0,
        [Segment("cruise-leg", target=(0.0, 8.0, -5.0), speed=2.0, heading="track")],
        smoothing=0.2,
        yaw_rate_limit=0.5,
    )
    # east leg: heading goal is +90 deg, ramped at 0.5 rad/s
    t_turn = (math.pi / 2) / 0.5
    _, psi_mid = path.sample(0.5 * t_turn)
    assert 0.0 < psi_mid < math.pi / 2
    _, psi_end = path.sample(t_turn + 5.0)
    assert psi_end == pytest.approx(math.pi / 2, abs=1e-3)


def test_generate_reference_wrapper():
    path = climb_and_cruise()
    assert_allclose(generate_reference(3.0, path)[0], path.sample(3.0)[0])


def test_settles_on_final_waypoint():
    path = climb_and_cruise()
    x_d, _ = path.sample(path.total_time + 30.0)
    assert_allclose(x_d, [10.0, 0.0, -5.0], atol=1e-9)
