"""Goal management and monitoring: drives in, instructions and verdicts out.

The goal stack holds priority-ordered persistent drives plus a stack of task
goals; the monitor matches triggers before a cycle and applies the fixed
post-cycle check order: termination, then sub-task spawning, then the step
threshold.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .kernel import AgentConfig, Directive, Drive, Finish, Plan, Trigger, normalize_text

DEFAULT_INSTRUCTIONS = "Assist the user."


class NoCurrentGoal(LookupError):
    pass


class EmptyStack(LookupError):
    pass


class DuplicateTriggerId(ValueError):
    pass


@dataclass
class GoalRecord:
    goal_id: str
    text: str
    parent: str | None
    status: str = "active"


@dataclass
class GoalStack:
    """Persistent drives plus a LIFO stack of task goals; top is current."""

    long_term: list[Drive] = field(default_factory=list)
    short_term: list[GoalRecord] = field(default_factory=list)
    _ids: itertools.count = field(default_factory=itertools.count, repr=False)

    def current(self) -> GoalRecord | None:
        return self.short_term[-1] if self.short_term else None

    def _next_id(self) -> str:
        return f"g{next(self._ids)}"

    def set_task(self, text: str) -> GoalRecord:
        """Start or refocus the root task goal from a user utterance."""
        root = self.short_term[0] if self.short_term else None
        if root is None:
            record = GoalRecord(goal_id=self._next_id(), text=text, parent=None)
            self.short_term.append(record)
            return record
        root.text = text
        return root

    def open_goal_count(self) -> int:
        return len(self.short_term)


def install_drives(config: AgentConfig) -> tuple[GoalStack, "TriggerTable"]:
    """Split config drives into the goal stack and the trigger table.

    Long-term drives are kept priority-descending; reactive drives become
    triggers (substring mode) appended after the config's explicit triggers.
    Short-term drives start nothing: task goals come from user input.
    """
    long_term = sorted(
        (d for d in config.drives if d.kind == "long_term"),
        key=lambda d: -d.priority,
    )
    table = TriggerTable()
    for trigger in config.triggers:
        table.register(trigger)
    for drive in config.drives:
        if drive.kind == "reactive":
            table.register(
                Trigger(
                    trigger_id=drive.drive_id,
                    pattern=drive.pattern,
                    mode="substring",
                    response=drive.response,
                    enabled=True,
                )
            )
    return GoalStack(long_term=long_term), table


def push_subgoals(stack: GoalStack, goals: list[str], parent: str) -> GoalStack:
    """Push subgoals above the current goal so goals[0] runs first."""
    current = stack.current()
    if current is None or current.goal_id != parent:
        raise NoCurrentGoal(f"parent {parent!r} is not the current goal")
    for text in reversed(goals):
        stack.short_term.append(
            GoalRecord(goal_id=stack._next_id(), text=text, parent=parent)
        )
    return stack


def complete_current_goal(stack: GoalStack) -> GoalStack:
    if not stack.short_term:
        raise EmptyStack("no current goal")
    done = stack.short_term.pop()
    done.status = "satisfied"
    return stack


def compose_instructions(stack: GoalStack) -> str:
    """Long-term drive texts in priority order, then the current goal line."""
    lines = [d.prompt_text for d in stack.long_term if d.prompt_text]
    current = stack.current()
    if current is not None:
        lines.append(f"Current goal: {current.text}")
    if not lines:
        return DEFAULT_INSTRUCTIONS
    return "\n".join(lines)


# --- Monitor -----------------------------------------------------------------


@dataclass(frozen=True)
class Continue:
    pass


@dataclass(frozen=True)
class Bypass:
    response: str


@dataclass(frozen=True)
class SpawnSubgoals:
    goals: tuple[str, ...]


@dataclass(frozen=True)
class Halt:
    reason: str  # "finished" | "step_limit"


MonitorVerdict = Continue | Bypass | SpawnSubgoals | Halt


class TriggerTable:
    """Ordered trigger set; evaluation order is registration order."""

    def __init__(self, triggers: list[Trigger] | None = None):
        self._triggers: list[Trigger] = []
        for trigger in triggers or []:
            self.register(trigger)

    def register(self, trigger: Trigger) -> None:
        if any(t.trigger_id == trigger.trigger_id for t in self._triggers):
            raise DuplicateTriggerId(trigger.trigger_id)
        self._triggers.append(trigger)

    def triggers(self) -> list[Trigger]:
        return list(self._triggers)

    def __len__(self) -> int:
        return len(self._triggers)


def check_pre(table: TriggerTable, perception: str) -> Bypass | None:
    """First enabled trigger matching the normalized perception wins."""
    haystack = normalize_text(perception)
    for trigger in table.triggers():
        if not trigger.enabled:
            continue
        needle = normalize_text(trigger.pattern)
        if trigger.mode == "exact":
            if haystack == needle:
                return Bypass(response=trigger.response)
        elif needle in haystack:
            return Bypass(response=trigger.response)
    return None


def check_post(directive: Directive, step_count: int, step_limit: int) -> MonitorVerdict:
    """Fixed check order: termination, sub-task spawning, step threshold."""
    if isinstance(directive, Finish):
        return Halt(reason="finished")
    if isinstance(directive, Plan):
        return SpawnSubgoals(goals=directive.subgoals)
    if step_count >= step_limit:
        return Halt(reason="step_limit")
    return Continue()
