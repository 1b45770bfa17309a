"""Language user interface: heterogeneous input in, perception text and
structured output layouts out.

Input normalization templates are frozen (fixture-covered); layout planning
is the deterministic default rule: one text block, then one button per
offered action.
"""

from __future__ import annotations

from dataclasses import dataclass


class EmptyResponse(ValueError):
    pass


class UnknownElement(LookupError):
    pass


@dataclass(frozen=True)
class Utterance:
    text: str


@dataclass(frozen=True)
class FileUpload:
    name: str
    media_type: str
    byte_count: int


@dataclass(frozen=True)
class UiAction:
    element_id: str
    label: str


@dataclass(frozen=True)
class ImageRef:
    caption: str | None = None


InputEvent = Utterance | FileUpload | UiAction | ImageRef


def normalize_input(event: InputEvent) -> str:
    """Convert any input event into perception text."""
    if isinstance(event, Utterance):
        return event.text
    if isinstance(event, FileUpload):
        return f"User uploaded file '{event.name}' ({event.media_type}, {event.byte_count} bytes)."
    if isinstance(event, UiAction):
        return f"User clicked '{event.label}'."
    if isinstance(event, ImageRef):
        if event.caption:
            return f"User shared an image: {event.caption}"
        return "User shared an image."
    raise TypeError(f"not an input event: {event!r}")


def input_event_to_dict(event: InputEvent) -> dict:
    if isinstance(event, Utterance):
        return {"kind": "utterance", "text": event.text}
    if isinstance(event, FileUpload):
        return {
            "kind": "file_upload",
            "name": event.name,
            "media_type": event.media_type,
            "byte_count": event.byte_count,
        }
    if isinstance(event, UiAction):
        return {"kind": "ui_action", "element_id": event.element_id, "label": event.label}
    if isinstance(event, ImageRef):
        return {"kind": "image_ref", "caption": event.caption}
    raise TypeError(f"not an input event: {event!r}")


def input_event_from_dict(payload: dict) -> InputEvent:
    kind = payload.get("kind")
    if kind == "utterance":
        return Utterance(text=str(payload["text"]))
    if kind == "file_upload":
        return FileUpload(
            name=str(payload["name"]),
            media_type=str(payload["media_type"]),
            byte_count=int(payload["byte_count"]),
        )
    if kind == "ui_action":
        return UiAction(element_id=str(payload["element_id"]), label=str(payload["label"]))
    if kind == "image_ref":
        caption = payload.get("caption")
        return ImageRef(caption=None if caption is None else str(caption))
    raise ValueError(f"unknown input event kind {kind!r}")


@dataclass(frozen=True)
class LayoutElement:
    kind: str  # text_block | button | option_list | file_ref
    text: str | None = None
    label: str | None = None
    element_id: str | None = None
    options: tuple[str, ...] = ()


@dataclass(frozen=True)
class LayoutPlan:
    elements: tuple[LayoutElement, ...]


def plan_layout(response_text: str, offered_actions: list[dict] | None = None) -> LayoutPlan:
    """One text block, then one button per offered action, in order."""
    if not response_text:
        raise EmptyResponse("response text must be non-empty")
    elements = [LayoutElement(kind="text_block", text=response_text)]
    seen: set[str] = set()
    for action in offered_actions or []:
        element_id = str(action["action_id"])
        if element_id in seen:
            raise ValueError(f"duplicate element_id {element_id!r}")
        seen.add(element_id)
        elements.append(
            LayoutElement(kind="button", label=str(action["label"]), element_id=element_id)
        )
    return LayoutPlan(elements=tuple(elements))


def resolve_action(plan: LayoutPlan, element_id: str) -> UiAction:
    """Turn a click on a plan element back into an input event."""
    for element in plan.elements:
        if element.element_id == element_id and element.kind in ("button", "option_list"):
            return UiAction(element_id=element_id, label=element.label or "")
    raise UnknownElement(element_id)


def layout_to_dict(plan: LayoutPlan) -> dict:
    """Canonical wire shape consumed by the web console."""
    elements = []
    for element in plan.elements:
        if element.kind == "text_block":
            elements.append({"kind": "text_block", "text": element.text})
        elif element.kind == "button":
            elements.append(
                {"kind": "button", "label": element.label, "element_id": element.element_id}
            )
        elif element.kind == "option_list":
            elements.append(
                {
                    "kind": "option_list",
                    "label": element.label,
                    "element_id": element.element_id,
                    "options": list(element.options),
                }
            )
        else:
            elements.append({"kind": "file_ref", "text": element.text})
    return {"elements": elements}
