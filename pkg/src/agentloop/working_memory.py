"""Short-term event store and the assembler that builds structured thought prompts.

The thought prompt has eight sections in a fixed order; instructions and date
are always present, the rest render only when supplied. Serialization is a
bit-exact contract covered by golden files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

EVENT_KINDS = ("agent_action", "user_action", "conversation", "scene_info")
ACTORS = ("agent", "user", "system")

DEFAULT_CAPACITY = 64

# Per-section character budget for dialog context and history; oldest lines
# are dropped first once the joined section exceeds this.
SECTION_CHAR_BUDGET = 4000

SECTION_ORDER = (
    ("instructions", "Instructions"),
    ("dialog_context", "Dialog Context"),
    ("perception", "Perception"),
    ("user_profile", "User Profile"),
    ("agent_profile", "Agent Profile"),
    ("related_memory", "Related Memory"),
    ("history", "History"),
    ("date", "Date"),
)


class SeqRegression(ValueError):
    """Event sequence number did not increase."""


class CorruptSnapshot(ValueError):
    """Snapshot blob is malformed."""


class EmptyInstructions(ValueError):
    """A thought cannot be assembled without instructions."""


@dataclass(frozen=True)
class EventRecord:
    seq: int
    kind: str
    actor: str
    payload: str
    timestamp: datetime


@dataclass
class ShortTermStore:
    """Bounded chronological event list; oldest events evicted first."""

    capacity: int = DEFAULT_CAPACITY
    events: list[EventRecord] = field(default_factory=list)

    def max_seq(self) -> int:
        return self.events[-1].seq if self.events else -1


def record_event(store: ShortTermStore, event: EventRecord) -> ShortTermStore:
    if event.seq <= store.max_seq():
        raise SeqRegression(f"seq {event.seq} not greater than stored max {store.max_seq()}")
    events = store.events + [event]
    if len(events) > store.capacity:
        events = events[len(events) - store.capacity :]
    return ShortTermStore(capacity=store.capacity, events=events)


@dataclass(frozen=True)
class Thought:
    instructions: str
    date: datetime
    dialog_context: str | None = None
    perception: str | None = None
    user_profile: str | None = None
    agent_profile: str | None = None
    related_memory: str | None = None
    history: str | None = None


def _fit_budget(lines: list[str], budget: int = SECTION_CHAR_BUDGET) -> list[str]:
    kept = list(lines)
    while kept and len("\n".join(kept)) > budget:
        kept.pop(0)
    return kept


def assemble_thought(
    store: ShortTermStore,
    instructions: str,
    perception: str | None = None,
    user_profile: str | None = None,
    agent_profile: str | None = None,
    related_memory: list[str] | None = None,
    now: datetime | None = None,
) -> Thought:
    """Build a thought from the store plus the caller-supplied sections.

    Pure: time enters only through ``now`` and ordering only through event seq.
    """
    if not instructions.strip():
        raise EmptyInstructions("instructions must be non-empty")
    if now is None:
        raise ValueError("now is required; inject the time source explicitly")

    ordered = sorted(store.events, key=lambda e: e.seq)
    dialog_lines = [
        f"{e.actor}: {e.payload}" for e in ordered if e.kind == "conversation"
    ]
    history_lines = [
        f"[{e.kind}] {e.payload}"
        for e in ordered
        if e.kind in ("agent_action", "user_action")
    ]
    dialog_lines = _fit_budget(dialog_lines)
    history_lines = _fit_budget(history_lines)

    return Thought(
        instructions=instructions,
        dialog_context="\n".join(dialog_lines) if dialog_lines else None,
        perception=perception,
        user_profile=user_profile,
        agent_profile=agent_profile,
        related_memory="\n\n".join(related_memory) if related_memory else None,
        history="\n".join(history_lines) if history_lines else None,
        date=now,
    )


def format_instant(dt: datetime) -> str:
    """ISO-8601 UTC with seconds precision, e.g. 2023-03-01T00:00:00Z."""
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def serialize_thought(thought: Thought) -> str:
    """Render the thought in its canonical text form (byte-exact contract).

    Each present section is a ``## <Name>`` header line followed by its text;
    sections are separated by exactly one blank line; absent sections are
    omitted entirely.
    """
    blocks: list[str] = []
    for attr, header in SECTION_ORDER:
        if attr == "date":
            value: str | None = format_instant(thought.date)
        else:
            value = getattr(thought, attr)
        if value is None:
            continue
        blocks.append(f"## {header}\n{value}\n")
    return "\n".join(blocks)


def snapshot(store: ShortTermStore) -> str:
    """Serialize the store's events as a UTF-8 JSON array."""
    return json.dumps(
        [
            {
                "seq": e.seq,
                "kind": e.kind,
                "actor": e.actor,
                "payload": e.payload,
                "timestamp": format_instant(e.timestamp),
            }
            for e in store.events
        ],
        ensure_ascii=False,
    )


def restore(blob: str, capacity: int = DEFAULT_CAPACITY) -> ShortTermStore:
    """Rebuild a store from a snapshot blob.

    The blob format carries events only; capacity travels out-of-band and
    defaults to the standard capacity.
    """
    try:
        payload = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, list):
        raise CorruptSnapshot("snapshot must be a JSON array")
    events: list[EventRecord] = []
    for entry in payload:
        if not isinstance(entry, dict):
            raise CorruptSnapshot("event record must be an object")
        try:
            raw_ts = entry["timestamp"]
            events.append(
                EventRecord(
                    seq=int(entry["seq"]),
                    kind=str(entry["kind"]),
                    actor=str(entry["actor"]),
                    payload=str(entry["payload"]),
                    timestamp=datetime.strptime(raw_ts, "%Y-%m-%dT%H:%M:%SZ").replace(
                        tzinfo=timezone.utc
                    ),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptSnapshot(f"bad event record: {exc}") from exc
    return ShortTermStore(capacity=capacity, events=events)
