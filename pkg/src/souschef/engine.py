"""Recipe FSM interpreter.

Each tick: milestone events update the engine's view of the world,
overlay rules are evaluated (warnings, power modulation, pan interlock),
then the main state chain advances at most once. All effects leave as an
ordered action list applied atomically by the control loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .perception import MilestoneEvent
from .recipes import (
    NodeKind,
    OverlayActionKind,
    Predicate,
    PredicateKind,
    Recipe,
    STIR_TIMER_ID,
    STIRRING_LABEL,
    StateNode,
)

PAN_OFF_TEXT = "return pan to hob to continue"
WARNING_CANCEL_COOLDOWN_S = 60.0
INITIAL_MILESTONE = "background"


# ---------------------------------------------------------------------------
# Actions emitted toward the control loop / UI
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SetSetpoint:
    celsius: float


@dataclass(frozen=True)
class PowerScale:
    factor: float


@dataclass(frozen=True)
class HeatOff:
    pass


@dataclass(frozen=True)
class HeatOn:
    pass


@dataclass(frozen=True)
class Display:
    text: str


@dataclass(frozen=True)
class RaiseWarning:
    overlay_id: str
    text: str


@dataclass(frozen=True)
class ClearWarning:
    overlay_id: str


@dataclass(frozen=True)
class StartTimer:
    timer_id: str
    seconds: float


@dataclass(frozen=True)
class RecipeComplete:
    pass


Action = (
    SetSetpoint | PowerScale | HeatOff | HeatOn | Display
    | RaiseWarning | ClearWarning | StartTimer | RecipeComplete
)


@dataclass(frozen=True)
class Transition:
    time: float
    from_state: str
    to_state: str
    by: str  # milestone | timer | pan | override


@dataclass(frozen=True)
class EngineInputs:
    events: tuple[MilestoneEvent, ...] = ()
    pan_present: bool = True
    dt: float = 0.1


@dataclass
class EngineStatus:
    current_state: str
    display_text: str = ""
    current_milestone: str = INITIAL_MILESTONE
    time: float = 0.0
    active_overlays: set[str] = field(default_factory=set)
    timers: dict[str, float] = field(default_factory=dict)  # remaining seconds
    history: list[Transition] = field(default_factory=list)
    suppressed_until: dict[str, float] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)
    heating_on: bool = False
    power_scale: float = 1.0
    setpoint_c: float | None = None
    complete: bool = False
    pan_present: bool | None = None  # None until the first tick
    saved_display: str = ""
    heat_was_on: bool = False


def start_engine(recipe: Recipe, initial_milestone: str = INITIAL_MILESTONE):
    """Create engine state positioned at the recipe's start node."""
    start = recipe.start_state
    status = EngineStatus(
        current_state=start.id,
        display_text=start.instruction,
        current_milestone=initial_milestone,
    )
    return status, [HeatOff(), Display(start.instruction)]


def _predicate_true(status: EngineStatus, pred: Predicate, pan_present: bool) -> bool:
    if pred.kind is PredicateKind.MILESTONE_IS:
        return status.current_milestone == pred.label
    if pred.kind is PredicateKind.TIMER_EXPIRED:
        if pred.timer_id not in status.timers:
            return False
        return status.timers[pred.timer_id] <= 0.0
    if pred.kind is PredicateKind.PAN_ABSENT:
        return not pan_present
    if pred.kind is PredicateKind.PAN_PRESENT:
        return pan_present
    return False


def _transition_kind(pred: Predicate) -> str:
    if pred.kind is PredicateKind.MILESTONE_IS:
        return "milestone"
    if pred.kind is PredicateKind.TIMER_EXPIRED:
        return "timer"
    return "pan"


def _deactivate_overlay(status, rule, actions):
    status.active_overlays.discard(rule.id)
    actions.append(ClearWarning(rule.id))
    if rule.action is OverlayActionKind.REDUCE_POWER:
        status.power_scale = 1.0
        actions.append(PowerScale(1.0))
    elif rule.action is OverlayActionKind.HEAT_OFF:
        node_kind = None
        if status.pan_present:
            # Restore heat only where the main state actually heats.
            status.heat_was_on = False
        if status.heat_was_on and not status.pan_present:
            return
        if status.setpoint_c is not None and status.pan_present and _state_heats(status):
            status.heating_on = True
            actions.append(HeatOn())


def _activate_overlay(status, rule, actions):
    status.active_overlays.add(rule.id)
    actions.append(RaiseWarning(rule.id, rule.text))
    if rule.action is OverlayActionKind.REDUCE_POWER:
        status.power_scale = rule.power_scale
        actions.append(PowerScale(rule.power_scale))
    elif rule.action is OverlayActionKind.HEAT_OFF:
        if status.heating_on:
            status.heating_on = False
            actions.append(HeatOff())


def _state_heats(status: EngineStatus) -> bool:
    return status.heating_on or status.setpoint_c is not None


def pan_interlock(status: EngineStatus, pan_present: bool) -> list[Action]:
    """Edge-triggered pan handling: heat off on removal (when heating),
    heat and prior display restored on return."""
    actions: list[Action] = []
    if status.pan_present is None:
        status.pan_present = pan_present
        return actions
    if pan_present == status.pan_present:
        return actions
    status.pan_present = pan_present
    if not pan_present:
        status.saved_display = status.display_text
        status.heat_was_on = status.heating_on
        if status.heating_on:
            status.heating_on = False
            actions.append(HeatOff())
        if not _is_start(status):
            status.display_text = PAN_OFF_TEXT
            actions.append(Display(PAN_OFF_TEXT))
    else:
        if status.heat_was_on:
            status.heating_on = True
            actions.append(HeatOn())
            status.heat_was_on = False
        if status.saved_display and status.display_text == PAN_OFF_TEXT:
            status.display_text = status.saved_display
            actions.append(Display(status.saved_display))
    return actions


def _is_start(status: EngineStatus) -> bool:
    return not status.history and status.setpoint_c is None and not status.heating_on


def _arm_stir_timer(status: EngineStatus, recipe: Recipe, state_id: str):
    for rule in recipe.overlays:
        if (
            rule.entry.kind is PredicateKind.TIMER_EXPIRED
            and rule.entry.timer_id == STIR_TIMER_ID
            and state_id in rule.applies_in
        ):
            status.timers[STIR_TIMER_ID] = recipe.stir_timeout_s
            return


def _enter_state(status: EngineStatus, recipe: Recipe, target_id: str, by: str, actions):
    prev = status.current_state
    prev_node = recipe.state(prev)
    status.history.append(Transition(status.time, prev, target_id, by))

    if prev_node.kind is NodeKind.AUTO_TIMER and prev_node.timer_id in status.timers:
        del status.timers[prev_node.timer_id]

    # Overlays that no longer apply exit with the state.
    for rule in recipe.overlays:
        if rule.id in status.active_overlays and target_id not in rule.applies_in:
            _deactivate_overlay(status, rule, actions)

    status.current_state = target_id
    node = recipe.state(target_id)
    status.display_text = node.instruction
    if status.pan_present is False and by != "pan":
        status.saved_display = node.instruction
    else:
        actions.append(Display(node.instruction))

    if node.kind in (NodeKind.AUTO_SETPOINT, NodeKind.AUTO_TIMER):
        status.setpoint_c = node.setpoint_c
        actions.append(SetSetpoint(node.setpoint_c))
        if status.pan_present is not False:
            status.heating_on = True
            actions.append(HeatOn())
        else:
            status.heat_was_on = True
    if node.kind is NodeKind.AUTO_TIMER:
        status.timers[node.timer_id] = node.duration_s
        actions.append(StartTimer(node.timer_id, node.duration_s))
    if node.kind is NodeKind.END:
        status.setpoint_c = None
        if status.heating_on:
            status.heating_on = False
        actions.append(HeatOff())
        actions.append(RecipeComplete())
        status.complete = True
    if node.kind is NodeKind.WAIT and node is not None:
        pass  # heating carries over unchanged

    _arm_stir_timer(status, recipe, target_id)


def engine_tick(
    status: EngineStatus, recipe: Recipe, inputs: EngineInputs
) -> tuple[EngineStatus, list[Action]]:
    """Advance the engine by one control tick."""
    if not inputs.dt > 0:
        raise ValueError("dt must be > 0")
    actions: list[Action] = []
    status.time += inputs.dt

    # 1. Ingest milestone events (last writer by timestamp wins).
    for ev in sorted(inputs.events, key=lambda e: e.timestamp):
        if ev.label not in recipe.vocabulary:
            status.diagnostics.append(
                f"ignored event with undeclared label {ev.label!r} at t={ev.timestamp}"
            )
            continue
        status.current_milestone = ev.label
        if ev.label == STIRRING_LABEL and STIR_TIMER_ID in status.timers:
            status.timers[STIR_TIMER_ID] = recipe.stir_timeout_s

    # 2. Pan interlock (safety first).
    actions.extend(pan_interlock(status, inputs.pan_present))

    # 3. Timers count down.
    for timer_id in list(status.timers):
        status.timers[timer_id] = max(0.0, status.timers[timer_id] - inputs.dt)

    # 4. Overlay rules, evaluated before any main-state advance.
    for rule in recipe.overlays:
        applicable = status.current_state in rule.applies_in
        active = rule.id in status.active_overlays
        if active and not applicable:
            _deactivate_overlay(status, rule, actions)
        elif active and _predicate_true(status, rule.exit, inputs.pan_present):
            _deactivate_overlay(status, rule, actions)
        elif (
            not active
            and applicable
            and _predicate_true(status, rule.entry, inputs.pan_present)
            and status.time >= status.suppressed_until.get(rule.id, float("-inf"))
        ):
            _activate_overlay(status, rule, actions)

    # 5. Main-state advance: at most one transition per tick.
    node = recipe.state(status.current_state)
    if node.kind is NodeKind.AUTO_TIMER:
        if status.timers.get(node.timer_id, 1.0) <= 0.0:
            actions.append(HeatOff())
            status.heating_on = False
            _enter_state(status, recipe, node.next_id, "timer", actions)
    elif node.advance is not None and node.kind is not NodeKind.END:
        if _predicate_true(status, node.advance, inputs.pan_present):
            _enter_state(status, recipe, node.next_id, _transition_kind(node.advance), actions)

    return status, actions


def manual_override(
    status: EngineStatus, recipe: Recipe, command: str, overlay_id: str | None = None
) -> tuple[EngineStatus, list[Action]]:
    """Apply a corrective input: skip_forward, skip_back, or cancel_warning."""
    actions: list[Action] = []
    node = recipe.state(status.current_state)

    if command == "skip_forward":
        if node.kind is NodeKind.END:
            status.diagnostics.append("skip_forward ignored: already at end")
            return status, actions
        if node.kind is NodeKind.AUTO_TIMER:
            actions.append(HeatOff())
            status.heating_on = False
        _enter_state(status, recipe, node.next_id, "override", actions)
        return status, actions

    if command == "skip_back":
        idx = recipe.index_of(status.current_state)
        if node.kind is NodeKind.START or idx == 0:
            status.diagnostics.append("skip_back ignored: already at start")
            return status, actions
        _enter_state(status, recipe, recipe.states[idx - 1].id, "override", actions)
        return status, actions

    if command == "cancel_warning":
        rule = next((r for r in recipe.overlays if r.id == overlay_id), None)
        if rule is None or rule.id not in status.active_overlays:
            status.diagnostics.append(f"cancel_warning ignored: {overlay_id!r} not active")
            return status, actions
        _deactivate_overlay(status, rule, actions)
        status.suppressed_until[rule.id] = status.time + WARNING_CANCEL_COOLDOWN_S
        return status, actions

    status.diagnostics.append(f"unknown override {command!r}")
    return status, actions
