"""Tool registry: OpenAPI import, validated invocation, and chain execution.

Registering a tool is how the runtime grows a new skill; specs are mirrored
into the long-term tools store so retrieval can surface what is callable.
Dispatch is direct (only the named tool is contacted) and chains run strictly
in order, aborting on the first failing step with the partial trace kept.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field

import httpx
import yaml

from .kernel import ChainStep, normalize_text
from .memory import MemoryStore

PARAM_LOCATIONS = ("query", "body", "path")
PARAM_TYPES = ("string", "number", "boolean")

HTTP_METHODS = ("delete", "get", "patch", "post", "put")

WEB_SEARCH_TOOL_ID = "web_search"
IMAGE_CREATE_TOOL_ID = "image_create"

DEFAULT_CACHE_TTL_S = 3600.0

_PLACEHOLDER = re.compile(r"^\$\{([^.}]+)\.([^}]+)\}$")


class ToolError(Exception):
    pass


class MalformedDocument(ToolError):
    pass


class MissingOperationId(ToolError):
    def __init__(self, path: str, method: str):
        super().__init__(f"operation {method.upper()} {path} has no operationId")
        self.path = path
        self.method = method


class UnsupportedParamType(ToolError):
    pass


class DuplicateToolId(ToolError):
    pass


class UnknownTool(ToolError):
    pass


class MissingRequiredParam(ToolError):
    def __init__(self, name: str):
        super().__init__(f"missing required param {name!r}")
        self.name = name


class TypeMismatch(ToolError):
    def __init__(self, name: str):
        super().__init__(f"param {name!r} has the wrong type")
        self.name = name


class UpstreamError(ToolError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"upstream returned {status}")
        self.status = status
        self.body = body


class UnknownBinding(ToolError):
    pass


class UnknownField(ToolError):
    pass


@dataclass(frozen=True)
class ToolParam:
    name: str
    location: str
    type: str
    required: bool


@dataclass(frozen=True)
class OutputField:
    name: str
    type: str


@dataclass(frozen=True)
class ToolSpec:
    tool_id: str
    name: str
    description: str
    endpoint: str
    method: str
    params: tuple[ToolParam, ...] = ()
    output_fields: tuple[OutputField, ...] = ()
    builtin: bool = False


@dataclass(frozen=True)
class ToolResult:
    status: str  # "ok" | "error"
    fields: dict
    raw: str


@dataclass(frozen=True)
class ChainOutcome:
    completed: tuple[tuple[ChainStep, ToolResult], ...]
    failed_at: int | None = None


def _scalar_type(schema: dict, where: str) -> str:
    kind = schema.get("type")
    if kind in ("object", "array") or "properties" in schema or "items" in schema:
        raise UnsupportedParamType(f"{where}: nested schemas are not supported")
    if kind == "integer":
        return "number"
    if kind in PARAM_TYPES:
        return kind
    if kind is None:
        return "string"
    raise UnsupportedParamType(f"{where}: unsupported type {kind!r}")


def import_openapi(document: str) -> list[ToolSpec]:
    """Derive one tool spec per (path, method) operation of an OpenAPI 3.x doc.

    Accepts YAML or JSON text. Output order is path-lexicographic then
    method-lexicographic, so identical documents import identically.
    """
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise MalformedDocument(f"unparseable document: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("document root must be a mapping")
    if "paths" not in doc or not isinstance(doc["paths"], dict):
        raise MalformedDocument("document has no paths object")

    servers = doc.get("servers") or []
    base_url = ""
    if servers and isinstance(servers[0], dict):
        base_url = str(servers[0].get("url", "")).rstrip("/")

    specs: list[ToolSpec] = []
    for path in sorted(doc["paths"]):
        path_item = doc["paths"][path]
        if not isinstance(path_item, dict):
            raise MalformedDocument(f"path item {path!r} must be a mapping")
        for method in sorted(path_item):
            if method.lower() not in HTTP_METHODS:
                continue
            operation = path_item[method]
            if not isinstance(operation, dict):
                raise MalformedDocument(f"operation {method.upper()} {path} must be a mapping")
            operation_id = operation.get("operationId")
            if not operation_id:
                raise MissingOperationId(path, method)
            where = f"{method.upper()} {path}"
            params: list[ToolParam] = []
            for entry in operation.get("parameters", []):
                location = entry.get("in", "query")
                if location not in ("query", "path"):
                    raise UnsupportedParamType(f"{where}: parameter location {location!r}")
                params.append(
                    ToolParam(
                        name=str(entry["name"]),
                        location=location,
                        type=_scalar_type(entry.get("schema", {}), where),
                        required=bool(entry.get("required", location == "path")),
                    )
                )
            body = operation.get("requestBody", {})
            body_schema = (
                body.get("content", {}).get("application/json", {}).get("schema", {})
            )
            required_names = set(body_schema.get("required", []))
            for prop_name, prop_schema in body_schema.get("properties", {}).items():
                params.append(
                    ToolParam(
                        name=str(prop_name),
                        location="body",
                        type=_scalar_type(prop_schema, f"{where} body.{prop_name}"),
                        required=prop_name in required_names,
                    )
                )
            outputs: list[OutputField] = []
            ok_response = operation.get("responses", {}).get("200", {})
            response_schema = (
                ok_response.get("content", {}).get("application/json", {}).get("schema", {})
            )
            for prop_name, prop_schema in response_schema.get("properties", {}).items():
                kind = prop_schema.get("type", "string")
                outputs.append(
                    OutputField(name=str(prop_name), type="number" if kind == "integer" else kind)
                )
            specs.append(
                ToolSpec(
                    tool_id=str(operation_id),
                    name=str(operation.get("summary", operation_id)),
                    description=str(
                        operation.get("description", operation.get("summary", ""))
                    ),
                    endpoint=f"{base_url}{path}",
                    method=method.lower(),
                    params=tuple(params),
                    output_fields=tuple(outputs),
                )
            )
    return specs


def _builtin_specs() -> list[ToolSpec]:
    return [
        ToolSpec(
            tool_id=WEB_SEARCH_TOOL_ID,
            name="Web search",
            description="Search the web for a text query; results are cached.",
            endpoint="builtin:web_search",
            method="post",
            params=(ToolParam(name="query", location="body", type="string", required=True),),
            output_fields=(OutputField(name="result", type="string"),),
            builtin=True,
        ),
        ToolSpec(
            tool_id=IMAGE_CREATE_TOOL_ID,
            name="Image creation",
            description="Create an image from a text prompt (returns a placeholder reference).",
            endpoint="builtin:image_create",
            method="post",
            params=(ToolParam(name="prompt", location="body", type="string", required=True),),
            output_fields=(OutputField(name="image_ref", type="string"),),
            builtin=True,
        ),
    ]


@dataclass
class _CacheEntry:
    result: str
    stored_at: float


class WebSearchCache:
    """Query cache keyed by normalized query text, with a TTL.

    Timestamps are wall-clock epoch seconds so the cache file survives
    restarts.
    """

    def __init__(self, ttl_s: float = DEFAULT_CACHE_TTL_S, clock=time.time):
        self.ttl_s = ttl_s
        self.clock = clock
        self._entries: dict[str, _CacheEntry] = {}

    def get(self, query: str) -> str | None:
        entry = self._entries.get(normalize_text(query))
        if entry is None:
            return None
        if self.clock() - entry.stored_at >= self.ttl_s:
            return None
        return entry.result

    def put(self, query: str, result: str) -> None:
        self._entries[normalize_text(query)] = _CacheEntry(result, self.clock())

    def to_json(self) -> str:
        return json.dumps(
            {q: {"result": e.result, "stored_at": e.stored_at} for q, e in self._entries.items()},
            ensure_ascii=False,
            sort_keys=True,
        )

    def load_json(self, text: str) -> None:
        for query, entry in json.loads(text).items():
            self._entries[query] = _CacheEntry(str(entry["result"]), float(entry["stored_at"]))


class ToolRegistry:
    """Per-agent tool set. Builtins are registered at construction."""

    def __init__(
        self,
        memory: MemoryStore | None = None,
        offline: bool = False,
        live_search=None,
        base_url: str | None = None,
        cache: WebSearchCache | None = None,
        http_timeout_s: float = 10.0,
    ):
        self.memory = memory
        self.offline = offline
        self.live_search = live_search
        self.base_url = base_url
        self.cache = cache or WebSearchCache()
        self.http_timeout_s = http_timeout_s
        self.invocation_count = 0
        self._specs: dict[str, ToolSpec] = {}
        for spec in _builtin_specs():
            self.register(spec)

    def register(self, spec: ToolSpec) -> None:
        if spec.tool_id in self._specs:
            raise DuplicateToolId(spec.tool_id)
        self._specs[spec.tool_id] = spec
        if self.memory is not None:
            self.memory.ingest_document(
                "tools",
                f"tool:{spec.tool_id}",
                f"{spec.name}: {spec.description} "
                f"(params: {', '.join(p.name for p in spec.params) or 'none'})",
            )

    def lookup(self, tool_id: str) -> ToolSpec:
        try:
            return self._specs[tool_id]
        except KeyError:
            raise UnknownTool(tool_id) from None

    def specs(self) -> list[ToolSpec]:
        return list(self._specs.values())

    def imported_specs(self) -> list[ToolSpec]:
        return [s for s in self._specs.values() if not s.builtin]

    # --- invocation -----------------------------------------------------

    def _validate_args(self, spec: ToolSpec, args: dict) -> None:
        for param in spec.params:
            if param.name not in args:
                if param.required:
                    raise MissingRequiredParam(param.name)
                continue
            value = args[param.name]
            if param.type == "string" and not isinstance(value, str):
                raise TypeMismatch(param.name)
            if param.type == "number" and (
                isinstance(value, bool) or not isinstance(value, (int, float))
            ):
                raise TypeMismatch(param.name)
            if param.type == "boolean" and not isinstance(value, bool):
                raise TypeMismatch(param.name)

    def invoke(self, tool_id: str, args: dict) -> ToolResult:
        """Validate args, dispatch to exactly this tool, map outputs.

        Validation failures raise before any network traffic; upstream
        failures raise UpstreamError.
        """
        spec = self.lookup(tool_id)
        self.invocation_count += 1
        self._validate_args(spec, args)
        if spec.builtin:
            return self._invoke_builtin(spec, args)
        return self._invoke_http(spec, args)

    def _invoke_builtin(self, spec: ToolSpec, args: dict) -> ToolResult:
        if spec.tool_id == WEB_SEARCH_TOOL_ID:
            query = args["query"]
            cached = self.cache.get(query)
            if cached is not None:
                return ToolResult(status="ok", fields={"result": cached}, raw=cached)
            if self.offline or self.live_search is None:
                return ToolResult(
                    status="error",
                    fields={"error": "no cached result and live search is unavailable"},
                    raw="",
                )
            result = str(self.live_search(query))
            self.cache.put(query, result)
            return ToolResult(status="ok", fields={"result": result}, raw=result)
        if spec.tool_id == IMAGE_CREATE_TOOL_ID:
            digest = hashlib.sha256(args["prompt"].encode("utf-8")).hexdigest()[:16]
            ref = f"placeholder://image/{digest}"
            return ToolResult(status="ok", fields={"image_ref": ref}, raw=ref)
        raise UnknownTool(spec.tool_id)

    def _resolve_endpoint(self, spec: ToolSpec) -> str:
        if spec.endpoint.startswith(("http://", "https://")):
            return spec.endpoint
        if self.base_url:
            return f"{self.base_url.rstrip('/')}{spec.endpoint}"
        raise UpstreamError(0, f"no base URL to resolve relative endpoint {spec.endpoint!r}")

    def _invoke_http(self, spec: ToolSpec, args: dict) -> ToolResult:
        url = self._resolve_endpoint(spec)
        query_params: dict = {}
        body: dict = {}
        for param in spec.params:
            if param.name not in args:
                continue
            value = args[param.name]
            if param.location == "path":
                url = url.replace("{" + param.name + "}", str(value))
            elif param.location == "query":
                query_params[param.name] = value
            else:
                body[param.name] = value
        try:
            response = httpx.request(
                spec.method.upper(),
                url,
                params=query_params or None,
                json=body if body or spec.method != "get" else None,
                timeout=self.http_timeout_s,
            )
        except httpx.HTTPError as exc:
            raise UpstreamError(0, str(exc)) from exc
        if response.status_code >= 400:
            raise UpstreamError(response.status_code, response.text)
        try:
            payload = response.json()
        except json.JSONDecodeError:
            payload = {}
        if not isinstance(payload, dict):
            payload = {}
        fields = {}
        for output in spec.output_fields:
            if output.name not in payload:
                return ToolResult(
                    status="error",
                    fields={"error": f"response missing declared field {output.name!r}"},
                    raw=response.text,
                )
            fields[output.name] = payload[output.name]
        if not spec.output_fields:
            fields = {k: v for k, v in payload.items() if isinstance(v, (str, int, float, bool))}
        return ToolResult(status="ok", fields=fields, raw=response.text)


def tool_spec_to_dict(spec: ToolSpec) -> dict:
    return {
        "tool_id": spec.tool_id,
        "name": spec.name,
        "description": spec.description,
        "endpoint": spec.endpoint,
        "method": spec.method,
        "params": [
            {"name": p.name, "location": p.location, "type": p.type, "required": p.required}
            for p in spec.params
        ],
        "output_fields": [{"name": o.name, "type": o.type} for o in spec.output_fields],
    }


def tool_spec_from_dict(payload: dict) -> ToolSpec:
    return ToolSpec(
        tool_id=str(payload["tool_id"]),
        name=str(payload["name"]),
        description=str(payload["description"]),
        endpoint=str(payload["endpoint"]),
        method=str(payload["method"]),
        params=tuple(
            ToolParam(
                name=str(p["name"]),
                location=str(p["location"]),
                type=str(p["type"]),
                required=bool(p["required"]),
            )
            for p in payload.get("params", [])
        ),
        output_fields=tuple(
            OutputField(name=str(o["name"]), type=str(o["type"]))
            for o in payload.get("output_fields", [])
        ),
    )


def substitute_bindings(args: dict, bindings: dict[str, ToolResult]) -> dict:
    """Replace "${bind.field}" placeholders with earlier step outputs as text."""
    resolved: dict = {}
    for key, value in args.items():
        if isinstance(value, str):
            match = _PLACEHOLDER.match(value)
            if match:
                bind, fname = match.group(1), match.group(2)
                if bind not in bindings:
                    raise UnknownBinding(bind)
                result = bindings[bind]
                if fname not in result.fields:
                    raise UnknownField(f"{bind}.{fname}")
                resolved[key] = str(result.fields[fname])
                continue
        resolved[key] = value
    return resolved


def run_chain(registry: ToolRegistry, plan: list[ChainStep]) -> ChainOutcome:
    """Execute steps strictly in order; the first error aborts the chain.

    The partial trace (including the failing result) is always returned;
    steps after a failure are never invoked.
    """
    if not plan:
        raise ValueError("chain plan must be non-empty")
    completed: list[tuple[ChainStep, ToolResult]] = []
    bindings: dict[str, ToolResult] = {}
    for index, step in enumerate(plan):
        try:
            args = substitute_bindings(step.args, bindings)
            result = registry.invoke(step.tool_id, args)
        except ToolError as exc:
            failing = ToolResult(status="error", fields={"error": str(exc)}, raw=str(exc))
            completed.append((step, failing))
            return ChainOutcome(completed=tuple(completed), failed_at=index)
        completed.append((step, result))
        if result.status != "ok":
            return ChainOutcome(completed=tuple(completed), failed_at=index)
        if step.bind:
            bindings[step.bind] = result
    return ChainOutcome(completed=tuple(completed), failed_at=None)
