"""Language-model layer: model pool, prompt templates, and task scheduling.

Two provider kinds ship in-tree: a deterministic scripted provider (rule
table matched against the normalized prompt) for offline runs and tests, and
an HTTP provider speaking the one-field completion wire format.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import httpx

from .kernel import normalize_text

TASK_KINDS = ("decide", "plan", "respond", "lui_layout")

PLACEHOLDER = "{{thought}}"

PASS_THROUGH_TEMPLATE_ID = "__pass_through__"

HTTP_RETRIES = 2
HTTP_BACKOFF_BASE_S = 0.25


class DuplicateModelId(ValueError):
    pass


class InvalidDescriptor(ValueError):
    pass


class NoModels(LookupError):
    pass


class UnknownModel(LookupError):
    pass


class BadTemplate(ValueError):
    pass


class NoRuleAndNoDefault(LookupError):
    """Scripted provider had no matching rule and no default completion."""


class ProviderUnreachable(ConnectionError):
    """HTTP provider failed after retries."""


@dataclass(frozen=True)
class ModelDescriptor:
    model_id: str
    provider_kind: str  # "scripted" | "http"
    endpoint: str | None = None
    default: bool = False


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    model_id: str
    task_kind: str
    body: str


@dataclass(frozen=True)
class ScriptedRule:
    order: int
    pattern: str
    completion: str


def _pass_through(model_id: str, task_kind: str) -> PromptTemplate:
    return PromptTemplate(
        template_id=PASS_THROUGH_TEMPLATE_ID,
        model_id=model_id,
        task_kind=task_kind,
        body=PLACEHOLDER,
    )


@dataclass
class ScriptedConfig:
    rules: list[ScriptedRule] = field(default_factory=list)
    default: str | None = None


class ModelRegistry:
    """Holds descriptors, their templates, and scripted rule tables.

    ``call_count`` counts every provider invocation (scripted or HTTP) so
    scenarios can assert exact call budgets.
    """

    def __init__(self, sleep=time.sleep):
        self._models: dict[str, ModelDescriptor] = {}
        self._templates: dict[tuple[str, str], PromptTemplate] = {}
        self._scripts: dict[str, ScriptedConfig] = {}
        self._sleep = sleep
        self.call_count = 0

    def register_model(self, descriptor: ModelDescriptor) -> None:
        if descriptor.model_id in self._models:
            raise DuplicateModelId(descriptor.model_id)
        if descriptor.provider_kind not in ("scripted", "http"):
            raise InvalidDescriptor(f"unknown provider kind {descriptor.provider_kind!r}")
        if descriptor.provider_kind == "http" and not descriptor.endpoint:
            raise InvalidDescriptor("http models require an endpoint")
        if descriptor.default:
            for mid, existing in self._models.items():
                if existing.default:
                    self._models[mid] = replace(existing, default=False)
        elif not any(m.default for m in self._models.values()):
            # Keep the invariant: a non-empty registry always has exactly one default.
            descriptor = replace(descriptor, default=True)
        self._models[descriptor.model_id] = descriptor

    def lookup(self, model_id: str) -> ModelDescriptor:
        try:
            return self._models[model_id]
        except KeyError:
            raise UnknownModel(model_id) from None

    def register_template(self, template: PromptTemplate) -> None:
        if template.body.count(PLACEHOLDER) != 1:
            raise BadTemplate(f"template body must contain {PLACEHOLDER} exactly once")
        if template.task_kind not in TASK_KINDS:
            raise BadTemplate(f"unknown task kind {template.task_kind!r}")
        self.lookup(template.model_id)
        self._templates[(template.model_id, template.task_kind)] = template

    def attach_script(
        self, model_id: str, rules: list[ScriptedRule], default: str | None = None
    ) -> None:
        self.lookup(model_id)
        self._scripts[model_id] = ScriptedConfig(
            rules=sorted(rules, key=lambda r: r.order), default=default
        )

    def default_model(self) -> ModelDescriptor:
        if not self._models:
            raise NoModels("registry is empty")
        for descriptor in self._models.values():
            if descriptor.default:
                return descriptor
        raise NoModels("no default model")  # unreachable: register_model keeps one default

    def schedule(self, task_kind: str) -> tuple[ModelDescriptor, PromptTemplate]:
        """Pick the (model, template) pair for a task kind.

        Deterministic: the default model, plus its template for the kind, or
        the built-in pass-through template when none is registered.
        """
        model = self.default_model()
        template = self._templates.get((model.model_id, task_kind))
        if template is None:
            template = _pass_through(model.model_id, task_kind)
        return model, template

    def complete(self, descriptor: ModelDescriptor, prompt: str) -> str:
        self.lookup(descriptor.model_id)
        self.call_count += 1
        if descriptor.provider_kind == "scripted":
            return self._complete_scripted(descriptor.model_id, prompt)
        if descriptor.provider_kind == "http":
            return self._complete_http(descriptor, prompt)
        raise ValueError(f"unknown provider kind {descriptor.provider_kind!r}")

    def _complete_scripted(self, model_id: str, prompt: str) -> str:
        config = self._scripts.get(model_id, ScriptedConfig())
        haystack = normalize_text(prompt)
        for rule in config.rules:
            if normalize_text(rule.pattern) in haystack:
                return rule.completion
        if config.default is not None:
            return config.default
        raise NoRuleAndNoDefault(f"no rule matched and no default set for {model_id!r}")

    def _complete_http(self, descriptor: ModelDescriptor, prompt: str) -> str:
        assert descriptor.endpoint is not None
        last_error: Exception | None = None
        for attempt in range(1 + HTTP_RETRIES):
            if attempt:
                self._sleep(HTTP_BACKOFF_BASE_S * (2 ** (attempt - 1)))
            try:
                response = httpx.post(
                    descriptor.endpoint, json={"prompt": prompt}, timeout=30.0
                )
                response.raise_for_status()
                return str(response.json()["text"])
            except (httpx.HTTPError, json.JSONDecodeError, KeyError) as exc:
                last_error = exc
        raise ProviderUnreachable(f"{descriptor.endpoint}: {last_error}")


def render_prompt(template: PromptTemplate, thought_text: str) -> str:
    """Substitute the placeholder exactly once; inserted text is never re-expanded."""
    return template.body.replace(PLACEHOLDER, thought_text, 1)


def load_scripted_rules(text: str) -> tuple[list[ScriptedRule], str | None]:
    """Parse a scripted-rules file.

    Accepts ``{"rules": [...], "default": "..."}`` or a bare JSON list whose
    entries are rule objects, optionally including one ``{"default": ...}``
    entry.
    """
    payload = json.loads(text)
    if isinstance(payload, dict):
        entries = payload.get("rules", [])
        default = payload.get("default")
    elif isinstance(payload, list):
        entries = [e for e in payload if "pattern" in e]
        defaults = [e["default"] for e in payload if "default" in e and "pattern" not in e]
        default = defaults[0] if defaults else None
    else:
        raise ValueError("scripted rules file must be a JSON object or list")
    rules = [
        ScriptedRule(
            order=int(e.get("order", i)),
            pattern=str(e["pattern"]),
            completion=str(e["completion"]),
        )
        for i, e in enumerate(entries)
    ]
    return rules, None if default is None else str(default)
