"""Controller contract, directive wire formats, and the two implementations."""

from .base import (
    ContextBundle,
    Controller,
    ControllerError,
    ControllerTransportError,
    ScriptMissError,
)
from .directives import (
    AddGroup,
    ChildSpec,
    CompletionVerdict,
    DirectiveParseError,
    ExpansionDirective,
    GlobalUpdateDirective,
    ItemConstraints,
    RepairDirective,
    SummaryUpdate,
)
from .remote import RemoteLLMController
from .scripted import (
    ControllerScript,
    ScriptError,
    ScriptedController,
    compose_response_from_notes,
)

__all__ = [
    "AddGroup",
    "ChildSpec",
    "CompletionVerdict",
    "ContextBundle",
    "Controller",
    "ControllerError",
    "ControllerScript",
    "ControllerTransportError",
    "DirectiveParseError",
    "ExpansionDirective",
    "GlobalUpdateDirective",
    "ItemConstraints",
    "RemoteLLMController",
    "RepairDirective",
    "ScriptError",
    "ScriptMissError",
    "ScriptedController",
    "SummaryUpdate",
    "compose_response_from_notes",
]
