"""agentloop: a workspace-cycle agent runtime.

Structured thought prompts in, directives out; tools, retrieval memory, and
a goal-driven monitor around the loop. See README.md for the tour.
"""

from .kernel import (
    AgentConfig,
    Chain,
    ChainStep,
    Directive,
    Drive,
    Finish,
    InvokeTool,
    MemoryPolicy,
    Plan,
    QueryMemory,
    Respond,
    Trigger,
    config_from_dict,
    config_from_json,
    config_to_dict,
    directive_to_dict,
    normalize_text,
    validate_agent_config,
)
from .llm import ModelDescriptor, ModelRegistry, PromptTemplate, ScriptedRule
from .lui import FileUpload, ImageRef, LayoutPlan, UiAction, Utterance
from .memory import MemoryStore, chunk_document, embed_text
from .orchestrator import Runtime, Session, WorkflowTrace
from .thought_stream import ThoughtStream, parse_directive
from .tools import ToolRegistry, import_openapi, run_chain
from .working_memory import ShortTermStore, Thought, assemble_thought, serialize_thought

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "Chain",
    "ChainStep",
    "Directive",
    "Drive",
    "FileUpload",
    "Finish",
    "ImageRef",
    "InvokeTool",
    "LayoutPlan",
    "MemoryPolicy",
    "MemoryStore",
    "ModelDescriptor",
    "ModelRegistry",
    "Plan",
    "PromptTemplate",
    "QueryMemory",
    "Respond",
    "Runtime",
    "ScriptedRule",
    "Session",
    "ShortTermStore",
    "Thought",
    "ThoughtStream",
    "ToolRegistry",
    "Trigger",
    "UiAction",
    "Utterance",
    "WorkflowTrace",
    "assemble_thought",
    "chunk_document",
    "config_from_dict",
    "config_from_json",
    "config_to_dict",
    "directive_to_dict",
    "embed_text",
    "import_openapi",
    "normalize_text",
    "parse_directive",
    "run_chain",
    "serialize_thought",
    "validate_agent_config",
]
