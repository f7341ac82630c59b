"""Closed-loop temperature control: PID, servo model, and the safety latch.

The PID output is a fraction of maximum hob power, mapped onto a knob
angle through a calibration table and driven by a slew-limited servo.
The safety gate forces delivered power to zero whenever the stop latch
is set or the pan is off the hob.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ConfigurationError(ValueError):
    """Invalid controller or calibration configuration detected at startup."""


@dataclass(frozen=True)
class PowerCommand:
    """Requested hob power as a fraction of maximum."""

    fraction: float

    def __post_init__(self):
        if not (math.isfinite(self.fraction) and 0.0 <= self.fraction <= 1.0):
            raise ValueError(f"power fraction must be in [0, 1], got {self.fraction}")


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.03  # power fraction per kelvin
    ki: float = 0.001  # per kelvin-second
    kd: float = 0.05  # per kelvin/second
    output_min: float = 0.0
    output_max: float = 1.0
    integral_limit: float = 400.0  # kelvin-seconds

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ConfigurationError("gains must be >= 0")
        if not self.output_min < self.output_max:
            raise ConfigurationError("output_min must be < output_max")
        if not self.integral_limit > 0:
            raise ConfigurationError("integral_limit must be > 0")


@dataclass(frozen=True)
class PidState:
    setpoint: float
    integral: float = 0.0
    last_error: float = 0.0
    last_output: float = 0.0
    last_measurement: float | None = None
    sensor_faults: int = 0


def pid_step(
    state: PidState, gains: PidGains, measurement: float, dt: float
) -> tuple[PidState, PowerCommand]:
    """One controller update.

    Derivative acts on the measurement (no setpoint-step kick). The
    integral is frozen while the output saturates and is hard-bounded by
    integral_limit. A non-finite measurement holds the last output and
    bumps the sensor fault counter instead of propagating.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not math.isfinite(measurement):
        held = min(max(state.last_output, gains.output_min), gains.output_max)
        return (
            replace(state, sensor_faults=state.sensor_faults + 1, last_output=held),
            PowerCommand(held),
        )

    error = state.setpoint - measurement
    if state.last_measurement is None:
        derivative = 0.0
    else:
        derivative = -(measurement - state.last_measurement) / dt

    limit = gains.integral_limit
    candidate = min(max(state.integral + error * dt, -limit), limit)
    unsaturated = gains.kp * error + gains.ki * candidate + gains.kd * derivative
    if gains.output_min <= unsaturated <= gains.output_max:
        integral = candidate
        output = unsaturated
    else:
        # Saturated: keep the previous integral so it cannot wind up.
        integral = state.integral
        raw = gains.kp * error + gains.ki * integral + gains.kd * derivative
        output = min(max(raw, gains.output_min), gains.output_max)

    new_state = PidState(
        setpoint=state.setpoint,
        integral=integral,
        last_error=error,
        last_output=output,
        last_measurement=measurement,
        sensor_faults=state.sensor_faults,
    )
    return new_state, PowerCommand(output)


@dataclass(frozen=True)
class ServoCalibration:
    """Monotone (power fraction, knob angle) pairs; validated at startup."""

    points: tuple[tuple[float, float], ...] = ((0.0, 0.0), (1.0, 180.0))

    def __post_init__(self):
        if len(self.points) < 2:
            raise ConfigurationError("calibration table needs at least two points")
        fractions = [p[0] for p in self.points]
        angles = [p[1] for p in self.points]
        if any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise ConfigurationError("calibration fractions must be strictly increasing")
        if any(b < a for a, b in zip(angles, angles[1:])):
            raise ConfigurationError("calibration angles must be non-decreasing")
        if fractions[0] != 0.0 or fractions[-1] != 1.0:
            raise ConfigurationError("calibration must cover the full [0, 1] power range")

    @property
    def angle_min(self) -> float:
        return self.points[0][1]

    @property
    def angle_max(self) -> float:
        return self.points[-1][1]


def power_to_angle(power: PowerCommand, calibration: ServoCalibration) -> float:
    """Piecewise-linear map from power fraction to knob angle (monotone)."""
    fractions = [p[0] for p in calibration.points]
    angles = [p[1] for p in calibration.points]
    return float(np.interp(power.fraction, fractions, angles))


@dataclass(frozen=True)
class ServoModel:
    """Slew-limited knob servo with optional feedback noise."""

    angle: float = 0.0
    target_angle: float = 0.0
    slew_rate: float = 90.0  # degrees/second
    feedback_noise: float = 0.0  # degrees, amplitude
    angle_min: float = 0.0
    angle_max: float = 180.0
    feedback_angle: float = 0.0

    def __post_init__(self):
        if not self.slew_rate > 0:
            raise ConfigurationError("slew_rate must be > 0")


def servo_step(
    servo: ServoModel, dt: float, rng: np.random.Generator | None = None
) -> ServoModel:
    """Move the servo toward its target by at most slew_rate*dt."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    target = min(max(servo.target_angle, servo.angle_min), servo.angle_max)
    gap = target - servo.angle
    step = min(abs(gap), servo.slew_rate * dt)
    angle = servo.angle + math.copysign(step, gap) if gap else servo.angle
    noise = 0.0
    if servo.feedback_noise > 0 and rng is not None:
        noise = float(rng.uniform(-servo.feedback_noise, servo.feedback_noise))
    return replace(servo, angle=angle, feedback_angle=angle + noise)


class StopReason(str, Enum):
    NONE = "none"
    USER_STOP = "user_stop"
    PAN_REMOVED = "pan_removed"


@dataclass(frozen=True)
class SafetyState:
    stopped: bool = False
    reason: StopReason = StopReason.NONE


def stop(safety: SafetyState) -> SafetyState:
    return SafetyState(stopped=True, reason=StopReason.USER_STOP)


def restart(safety: SafetyState) -> SafetyState:
    return SafetyState(stopped=False, reason=StopReason.NONE)


def safety_gate(
    safety: SafetyState, cmd: PowerCommand, pan_present: bool
) -> tuple[SafetyState, PowerCommand]:
    """Force zero power while stopped or with the pan off the hob.

    Pan return restores pass-through on its own; the user stop latch
    only clears via restart().
    """
    if safety.stopped:
        return replace(safety, reason=StopReason.USER_STOP), PowerCommand(0.0)
    if not pan_present:
        return replace(safety, reason=StopReason.PAN_REMOVED), PowerCommand(0.0)
    return replace(safety, reason=StopReason.NONE), cmd
