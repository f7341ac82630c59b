"""Deterministic induction-hob plant simulation.

Stands in for all physical hardware: lumped-capacitance pan thermals,
scripted cooking events, synthetic thermal frames, and a ground-truth
classifier source for closed-loop tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

WATER_SPECIFIC_HEAT = 4186.0  # J/(kg·K)

# Thermal sensor grid (32x24 far-infrared array).
FRAME_ROWS = 24
FRAME_COLS = 32
PAN_CENTER = (12, 16)  # (row, col)
PAN_RADIUS = 8.0  # cells

SIM_DT = 0.1  # s, fixed integration step of the control loop

# Auto-boilover: sustained high power while simmering eventually boils over.
BOILOVER_POWER_FRACTION = 0.8
BOILOVER_HOLD_S = 20.0

INITIAL_MILESTONE = "background"


class PlantError(Exception):
    """State-integrity violation in the plant simulation."""


class ScriptError(ValueError):
    """Malformed or invalid simulation script."""


@dataclass(frozen=True)
class PlantConfig:
    """Physical parameters of the simulated hob, pan, and surroundings."""

    max_power_w: float = 3000.0
    ambient_temp_c: float = 20.0
    pan_heat_capacity_j_per_k: float = 800.0
    loss_coefficient_w_per_k: float = 5.0
    coupling_efficiency: float = 0.85
    water_boil_temp_c: float = 100.0
    rng_seed: int = 0
    frame_noise_c: float = 0.5
    auto_boilover: bool = False

    def __post_init__(self):
        if not self.max_power_w > 0:
            raise ValueError("max_power_w must be > 0")
        if not self.pan_heat_capacity_j_per_k > 0:
            raise ValueError("pan_heat_capacity_j_per_k must be > 0")
        if self.loss_coefficient_w_per_k < 0:
            raise ValueError("loss_coefficient_w_per_k must be >= 0")
        if not 0 < self.coupling_efficiency <= 1:
            raise ValueError("coupling_efficiency must be in (0, 1]")
        if self.frame_noise_c < 0:
            raise ValueError("frame_noise_c must be >= 0")


@dataclass(frozen=True)
class PlantState:
    """Ground-truth world snapshot. Immutable; safe to hand across components."""

    time: float = 0.0
    pan_present: bool = True
    pan_temp_c: float = 20.0
    water_mass_kg: float = 0.0
    milestone: str = INITIAL_MILESTONE
    boilover_active: bool = False
    stir_elapsed_s: float = 0.0
    # Internal bookkeeping for the optional auto-boilover path.
    high_power_elapsed_s: float = 0.0


@dataclass(frozen=True)
class ScriptEvent:
    at_time: float
    kind: str
    args: dict = field(default_factory=dict)


# kind -> required arg names
EVENT_KINDS = {
    "add_water": ("kg",),
    "add_ingredient": ("label",),
    "remove_pan": (),
    "return_pan": (),
    "stir": (),
    "trigger_boilover": (),
    "clear_boilover": (),
    "set_milestone": ("label",),
}


@dataclass(frozen=True)
class SimScript:
    """Ordered, timestamped ground-truth events replayed into the plant."""

    events: tuple[ScriptEvent, ...]

    def __post_init__(self):
        last = -math.inf
        for ev in self.events:
            if ev.at_time <= last:
                raise ScriptError(
                    f"script event times must be strictly increasing (t={ev.at_time})"
                )
            last = ev.at_time
            if ev.kind not in EVENT_KINDS:
                raise ScriptError(f"unknown script event kind {ev.kind!r}")
            for arg in EVENT_KINDS[ev.kind]:
                if arg not in ev.args:
                    raise ScriptError(f"event {ev.kind!r} at t={ev.at_time} missing arg {arg!r}")


def load_script(source) -> SimScript:
    """Load a SimScript from a path, JSON string, or already-parsed dict.

    Document shape: {"events": [{"t": 5.0, "type": "set_milestone", "args": {...}}]}
    """
    if isinstance(source, (str, Path)) and Path(source).exists():
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    if not isinstance(doc, dict) or "events" not in doc:
        raise ScriptError("script document must be an object with an 'events' list")
    events = []
    for i, raw in enumerate(doc["events"]):
        if not isinstance(raw, dict) or "t" not in raw or "type" not in raw:
            raise ScriptError(f"event #{i} must carry 't' and 'type'")
        events.append(ScriptEvent(float(raw["t"]), str(raw["type"]), dict(raw.get("args", {}))))
    return SimScript(tuple(events))


def validate_script_labels(script: SimScript, vocabulary) -> list[str]:
    """Check milestone labels against a recipe vocabulary before a run starts."""
    vocab = set(vocabulary)
    problems = []
    for ev in script.events:
        if ev.kind == "set_milestone" and ev.args["label"] not in vocab:
            problems.append(
                f"set_milestone at t={ev.at_time} references undeclared label {ev.args['label']!r}"
            )
    return problems


def _power_fraction(power) -> float:
    # Accepts a control.PowerCommand or a bare float.
    fraction = getattr(power, "fraction", power)
    return float(fraction)


def step_plant(state: PlantState, power, dt: float, config: PlantConfig) -> PlantState:
    """Advance the plant one explicit-Euler step.

    dT/dt = (eta*P - h*(T - T_amb)) / C with a hard clamp at the boil
    temperature while water is present. Delivered power is zero when the
    pan is off the hob.
    """
    fraction = _power_fraction(power)
    if not (dt > 0):
        raise PlantError(f"dt must be > 0, got {dt}")
    if not math.isfinite(fraction) or not 0.0 <= fraction <= 1.0:
        raise PlantError(f"power fraction must be finite in [0, 1], got {fraction}")
    if not (math.isfinite(state.pan_temp_c) and math.isfinite(state.water_mass_kg)):
        raise PlantError("non-finite plant state")

    delivered_w = fraction * config.max_power_w if state.pan_present else 0.0
    c_eff = config.pan_heat_capacity_j_per_k + state.water_mass_kg * WATER_SPECIFIC_HEAT
    heat_in = config.coupling_efficiency * delivered_w
    heat_out = config.loss_coefficient_w_per_k * (state.pan_temp_c - config.ambient_temp_c)
    temp = state.pan_temp_c + (heat_in - heat_out) / c_eff * dt
    if state.water_mass_kg > 0:
        temp = min(temp, config.water_boil_temp_c)

    boilover = state.boilover_active
    high_power = 0.0
    if (
        config.auto_boilover
        and state.water_mass_kg > 0
        and fraction > BOILOVER_POWER_FRACTION
        and state.pan_temp_c >= config.water_boil_temp_c - 0.5
    ):
        high_power = state.high_power_elapsed_s + dt
        if high_power > BOILOVER_HOLD_S:
            boilover = True

    return replace(
        state,
        time=state.time + dt,
        pan_temp_c=temp,
        stir_elapsed_s=state.stir_elapsed_s + dt,
        boilover_active=boilover,
        high_power_elapsed_s=high_power,
    )


def _apply_event(state: PlantState, ev: ScriptEvent) -> PlantState:
    if ev.kind == "add_water":
        # Negative amounts drain (e.g. pasta water tipped out off-hob).
        return replace(state, water_mass_kg=max(0.0, state.water_mass_kg + float(ev.args["kg"])))
    if ev.kind == "add_ingredient":
        # Food mass is thermally negligible; the visual change arrives via
        # a paired set_milestone event.
        return state
    if ev.kind == "remove_pan":
        return replace(state, pan_present=False)
    if ev.kind == "return_pan":
        return replace(state, pan_present=True)
    if ev.kind == "stir":
        return replace(state, stir_elapsed_s=0.0)
    if ev.kind == "trigger_boilover":
        return replace(state, boilover_active=True)
    if ev.kind == "clear_boilover":
        return replace(state, boilover_active=False, high_power_elapsed_s=0.0)
    if ev.kind == "set_milestone":
        return replace(state, milestone=str(ev.args["label"]))
    raise ScriptError(f"unknown script event kind {ev.kind!r}")


def apply_script(state: PlantState, script: SimScript, window: tuple[float, float]) -> PlantState:
    """Apply every script event with at_time in [window[0], window[1])."""
    t0, t1 = window
    for ev in script.events:
        if t0 <= ev.at_time < t1:
            state = _apply_event(state, ev)
        elif ev.at_time >= t1:
            break
    return state


@dataclass(frozen=True, eq=False)
class ThermalFrame:
    grid: np.ndarray  # (FRAME_ROWS, FRAME_COLS) degrees C
    timestamp: float


def _frame_rng(config: PlantConfig, time: float) -> np.random.Generator:
    # Seeded per (config seed, sim time) so identical calls yield identical frames.
    return np.random.default_rng([config.rng_seed, int(round(time * 1000))])


def render_thermal(state: PlantState, config: PlantConfig) -> ThermalFrame:
    """Synthesize one far-infrared frame: pan disc over ambient background."""
    rng = _frame_rng(config, state.time)
    noise = rng.uniform(-config.frame_noise_c, config.frame_noise_c, (FRAME_ROWS, FRAME_COLS))
    grid = np.full((FRAME_ROWS, FRAME_COLS), config.ambient_temp_c)
    if state.pan_present:
        rr, cc = np.ogrid[:FRAME_ROWS, :FRAME_COLS]
        mask = (rr - PAN_CENTER[0]) ** 2 + (cc - PAN_CENTER[1]) ** 2 <= PAN_RADIUS**2
        grid[mask] = state.pan_temp_c
    return ThermalFrame(grid + noise, state.time)


def ground_truth_confidences(
    state: PlantState,
    label_vocabulary,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
    """Per-label scores a perfect-ish classifier would emit for this state.

    The true milestone draws from [1-noise, 1]; the remainder is split
    evenly over the other labels so the vector sums to 1.
    """
    labels = list(label_vocabulary)
    if not labels:
        raise ValueError("label vocabulary is empty")
    if state.milestone not in labels:
        raise ValueError(f"milestone {state.milestone!r} not in vocabulary")
    if rng is None:
        rng = _frame_rng_for_scores(state)
    true_conf = 1.0 if noise == 0 else 1.0 - noise * rng.uniform()
    rest = (1.0 - true_conf) / (len(labels) - 1) if len(labels) > 1 else 0.0
    return {label: (true_conf if label == state.milestone else rest) for label in labels}


def _frame_rng_for_scores(state: PlantState) -> np.random.Generator:
    return np.random.default_rng([1, int(round(state.time * 1000))])
