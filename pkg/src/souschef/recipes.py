"""Declarative recipe documents and their validation.

A recipe is a linear finite state machine (start -> ... -> end) whose
transitions fire on milestone events or timers, plus overlay rules that
raise warnings and modulate power alongside the main chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

SCHEMA_VERSION = 1

# Engine-owned timer armed in states where a stir overlay applies and
# reset by stirring events; usable in predicates without a declaring state.
STIR_TIMER_ID = "stir_timeout"
DEFAULT_STIR_TIMEOUT_S = 300.0

STIRRING_LABEL = "stirring"


class NodeKind(str, Enum):
    START = "start"
    WAIT = "wait"
    AUTO_SETPOINT = "auto_setpoint"
    AUTO_TIMER = "auto_timer"
    END = "end"


class PredicateKind(str, Enum):
    MILESTONE_IS = "milestone_is"
    TIMER_EXPIRED = "timer_expired"
    PAN_ABSENT = "pan_absent"
    PAN_PRESENT = "pan_present"


class OverlayActionKind(str, Enum):
    SHOW_WARNING = "show_warning"
    REDUCE_POWER = "reduce_power"
    HEAT_OFF = "heat_off"


@dataclass(frozen=True)
class Predicate:
    kind: PredicateKind
    label: str | None = None  # milestone_is
    timer_id: str | None = None  # timer_expired


@dataclass(frozen=True)
class StateNode:
    id: str
    kind: NodeKind
    instruction: str
    advance: Predicate | None = None  # start/wait/auto_setpoint
    next_id: str | None = None
    setpoint_c: float | None = None  # auto_setpoint/auto_timer
    duration_s: float | None = None  # auto_timer
    timer_id: str | None = None  # auto_timer


@dataclass(frozen=True)
class OverlayRule:
    id: str
    entry: Predicate
    exit: Predicate
    action: OverlayActionKind
    text: str
    applies_in: frozenset[str]
    power_scale: float | None = None  # reduce_power


@dataclass(frozen=True)
class Recipe:
    id: str
    title: str
    vocabulary: tuple[str, ...]
    states: tuple[StateNode, ...]
    overlays: tuple[OverlayRule, ...]
    stir_timeout_s: float = DEFAULT_STIR_TIMEOUT_S
    schema_version: int = SCHEMA_VERSION

    def state(self, state_id: str) -> StateNode:
        for node in self.states:
            if node.id == state_id:
                return node
        raise KeyError(state_id)

    def index_of(self, state_id: str) -> int:
        for i, node in enumerate(self.states):
            if node.id == state_id:
                return i
        raise KeyError(state_id)

    @property
    def start_state(self) -> StateNode:
        return next(node for node in self.states if node.kind is NodeKind.START)


class RecipeValidationError(ValueError):
    """Raised when a recipe document fails validation; carries every diagnostic."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


def _parse_predicate(raw, where: str, diagnostics: list[str]) -> Predicate | None:
    if not isinstance(raw, dict) or "kind" not in raw:
        diagnostics.append(f"{where}: predicate must be an object with 'kind'")
        return None
    try:
        kind = PredicateKind(raw["kind"])
    except ValueError:
        diagnostics.append(f"{where}: unknown predicate kind {raw['kind']!r}")
        return None
    if kind is PredicateKind.MILESTONE_IS:
        if "label" not in raw:
            diagnostics.append(f"{where}: milestone_is predicate missing 'label'")
            return None
        return Predicate(kind, label=str(raw["label"]))
    if kind is PredicateKind.TIMER_EXPIRED:
        if "timer" not in raw:
            diagnostics.append(f"{where}: timer_expired predicate missing 'timer'")
            return None
        return Predicate(kind, timer_id=str(raw["timer"]))
    return Predicate(kind)


def load_recipe(document) -> Recipe:
    """Parse and fully validate a recipe document (dict, JSON string, or path).

    Every violation is collected; validation failure raises
    RecipeValidationError listing all of them, not just the first.
    """
    if isinstance(document, (str, Path)) and Path(str(document)).exists():
        doc = json.loads(Path(document).read_text())
    elif isinstance(document, str):
        doc = json.loads(document)
    else:
        doc = document

    diagnostics: list[str] = []
    if not isinstance(doc, dict):
        raise RecipeValidationError(["recipe document must be a JSON object"])

    recipe_id = str(doc.get("id", "")) or "unnamed"
    if not doc.get("id"):
        diagnostics.append("missing recipe id")
    title = str(doc.get("title", recipe_id))
    vocabulary = tuple(str(v) for v in doc.get("vocabulary", []))
    if not vocabulary:
        diagnostics.append("vocabulary must declare at least one milestone label")
    if len(set(vocabulary)) != len(vocabulary):
        diagnostics.append("vocabulary contains duplicate labels")

    raw_states = doc.get("states", [])
    if not raw_states:
        diagnostics.append("recipe declares no states")

    states: list[StateNode] = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(raw_states):
        where = f"state #{i}"
        if not isinstance(raw, dict):
            diagnostics.append(f"{where}: must be an object")
            continue
        sid = str(raw.get("id", ""))
        if not sid:
            diagnostics.append(f"{where}: missing id")
            continue
        where = f"state {sid!r}"
        if sid in seen_ids:
            diagnostics.append(f"duplicate state id {sid!r}")
        seen_ids.add(sid)
        try:
            kind = NodeKind(raw.get("kind", ""))
        except ValueError:
            diagnostics.append(f"{where}: unknown kind {raw.get('kind')!r}")
            continue
        instruction = str(raw.get("instruction", ""))
        advance = None
        if kind in (NodeKind.START, NodeKind.WAIT, NodeKind.AUTO_SETPOINT):
            if "advance" not in raw:
                diagnostics.append(f"{where}: {kind.value} state needs exactly one advance predicate")
            else:
                advance = _parse_predicate(raw["advance"], where, diagnostics)
        setpoint = raw.get("setpoint_c")
        duration = raw.get("duration_s")
        timer_id = raw.get("timer_id")
        if kind in (NodeKind.AUTO_SETPOINT, NodeKind.AUTO_TIMER):
            if setpoint is None:
                diagnostics.append(f"{where}: missing setpoint_c")
            elif not 0 < float(setpoint) <= 300:
                diagnostics.append(f"{where}: setpoint_c must be in (0, 300]")
        if kind is NodeKind.AUTO_TIMER:
            if duration is None or not float(duration) > 0:
                diagnostics.append(f"{where}: auto_timer duration_s must be > 0")
            if not timer_id:
                diagnostics.append(f"{where}: auto_timer needs a timer_id")
        states.append(
            StateNode(
                id=sid,
                kind=kind,
                instruction=instruction,
                advance=advance,
                next_id=raw.get("next"),
                setpoint_c=float(setpoint) if setpoint is not None else None,
                duration_s=float(duration) if duration is not None else None,
                timer_id=str(timer_id) if timer_id else None,
            )
        )

    # Fill default next pointers (next state in declared order).
    filled: list[StateNode] = []
    for i, node in enumerate(states):
        next_id = node.next_id
        if node.kind is not NodeKind.END and next_id is None:
            next_id = states[i + 1].id if i + 1 < len(states) else None
            if next_id is None:
                diagnostics.append(f"state {node.id!r}: non-end state has no next state")
        filled.append(replace(node, next_id=next_id))
    states = filled

    ids = {node.id for node in states}
    starts = [node for node in states if node.kind is NodeKind.START]
    ends = [node for node in states if node.kind is NodeKind.END]
    if len(starts) != 1:
        diagnostics.append(f"recipe must have exactly one start state, found {len(starts)}")
    if len(ends) != 1:
        diagnostics.append(f"recipe must have exactly one end state, found {len(ends)}")

    declared_timers = {node.timer_id for node in states if node.timer_id}
    vocab_set = set(vocabulary)
    for node in states:
        if node.next_id is not None and node.next_id not in ids:
            diagnostics.append(f"state {node.id!r}: unknown target {node.next_id!r}")
        if node.advance is not None:
            _check_predicate(
                node.advance, f"state {node.id!r} advance", vocab_set,
                declared_timers, diagnostics,
            )

    overlays: list[OverlayRule] = []
    seen_overlay_ids: set[str] = set()
    for i, raw in enumerate(doc.get("overlays", [])):
        where = f"overlay #{i}"
        if not isinstance(raw, dict):
            diagnostics.append(f"{where}: must be an object")
            continue
        oid = str(raw.get("id", ""))
        if not oid:
            diagnostics.append(f"{where}: missing id")
            continue
        where = f"overlay {oid!r}"
        if oid in seen_overlay_ids:
            diagnostics.append(f"duplicate overlay id {oid!r}")
        seen_overlay_ids.add(oid)
        entry = _parse_predicate(raw.get("entry"), f"{where} entry", diagnostics)
        exit_ = _parse_predicate(raw.get("exit"), f"{where} exit", diagnostics)
        if entry is not None and exit_ is not None and entry == exit_:
            diagnostics.append(f"{where}: entry and exit predicates must differ")
        try:
            action = OverlayActionKind(raw.get("action", ""))
        except ValueError:
            diagnostics.append(f"{where}: unknown action {raw.get('action')!r}")
            continue
        scale = raw.get("power_scale")
        if action is OverlayActionKind.REDUCE_POWER:
            if scale is None or not 0 < float(scale) < 1:
                diagnostics.append(f"{where}: reduce_power needs power_scale in (0, 1)")
        applies = frozenset(str(s) for s in raw.get("applies_in", []))
        if not applies:
            diagnostics.append(f"{where}: applies_in must be non-empty")
        for sid in applies:
            if sid not in ids:
                diagnostics.append(f"{where}: applies_in references unknown state {sid!r}")
        if entry is not None:
            _check_predicate(entry, f"{where} entry", vocab_set, declared_timers, diagnostics)
        if exit_ is not None:
            _check_predicate(exit_, f"{where} exit", vocab_set, declared_timers, diagnostics)
        if entry is None or exit_ is None:
            continue
        overlays.append(
            OverlayRule(
                id=oid,
                entry=entry,
                exit=exit_,
                action=action,
                text=str(raw.get("text", "")),
                applies_in=applies,
                power_scale=float(scale) if scale is not None else None,
            )
        )

    if not diagnostics and not _end_reachable(states):
        diagnostics.append("end state is not reachable from start through forward transitions")

    if diagnostics:
        raise RecipeValidationError(diagnostics)

    return Recipe(
        id=recipe_id,
        title=title,
        vocabulary=vocabulary,
        states=tuple(states),
        overlays=tuple(overlays),
        stir_timeout_s=float(doc.get("stir_timeout_s", DEFAULT_STIR_TIMEOUT_S)),
        schema_version=int(doc.get("schema_version", SCHEMA_VERSION)),
    )


def _check_predicate(pred, where, vocab, declared_timers, diagnostics):
    if pred.kind is PredicateKind.MILESTONE_IS and pred.label not in vocab:
        diagnostics.append(f"{where}: undeclared label {pred.label!r}")
    if pred.kind is PredicateKind.TIMER_EXPIRED:
        if pred.timer_id != STIR_TIMER_ID and pred.timer_id not in declared_timers:
            diagnostics.append(f"{where}: unknown timer {pred.timer_id!r}")


def _end_reachable(states: list[StateNode]) -> bool:
    by_id = {node.id: node for node in states}
    starts = [node for node in states if node.kind is NodeKind.START]
    if not starts:
        return False
    node = starts[0]
    visited = set()
    while node.id not in visited:
        visited.add(node.id)
        if node.kind is NodeKind.END:
            return True
        if node.next_id is None or node.next_id not in by_id:
            return False
        node = by_id[node.next_id]
    return False


def bundled_recipe_ids() -> list[str]:
    root = resources.files("souschef.data") / "recipes"
    return sorted(path.name[: -len(".json")] for path in root.iterdir() if path.name.endswith(".json"))


def load_bundled_recipe(recipe_id: str) -> Recipe:
    doc = (resources.files("souschef.data") / "recipes" / f"{recipe_id}.json").read_text()
    return load_recipe(doc)
