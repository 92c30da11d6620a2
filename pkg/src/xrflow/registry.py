"""Node kind registry: port signatures, parameter schemas, evaluators.

A node kind declares fixed input/output ports (each port accepts one or more
DataKinds; the sentinel kind "any" defers checking to runtime) and a flat
parameter schema. Evaluators are pure callables
``evaluate(ctx, node, inputs) -> {port name: DataValue}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import InvalidParam, UnknownNodeKind
from .values import DataKind

ANY_KIND = "any"

CATEGORIES = (
    "Device",
    "Input",
    "Processing/Data",
    "Processing/Position",
    "Processing/Sensor",
    "Processing/Encoding",
    "Rendering",
)


@dataclass(frozen=True)
class PortSpec:
    name: str
    kinds: tuple
    required: bool = True

    def accepts(self, kind) -> bool:
        if ANY_KIND in self.kinds:
            return True
        value = kind.value if isinstance(kind, DataKind) else str(kind)
        return value in self.kinds


def port(name: str, *kinds, required: bool = True) -> PortSpec:
    names = tuple(k.value if isinstance(k, DataKind) else str(k) for k in kinds)
    return PortSpec(name=name, kinds=names, required=required)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str  # number | text | boolean | json
    required: bool = False
    default: object = None


@dataclass(frozen=True)
class NodeSpec:
    kind: str
    category: str
    inputs: tuple = ()
    outputs: tuple = ()
    params: tuple = ()
    evaluator: Optional[Callable] = None
    description: str = ""

    def input(self, name: str) -> Optional[PortSpec]:
        for p in self.inputs:
            if p.name == name:
                return p
        return None

    def output(self, name: str) -> Optional[PortSpec]:
        for p in self.outputs:
            if p.name == name:
                return p
        return None

    def param(self, name: str) -> Optional[ParamSpec]:
        for p in self.params:
            if p.name == name:
                return p
        return None


def _type_ok(expected: str, value) -> bool:
    if expected == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected == "text":
        return isinstance(value, str)
    if expected == "boolean":
        return isinstance(value, bool)
    if expected == "json":
        return isinstance(value, (dict, list))
    return False


def validate_params(spec: NodeSpec, params: dict) -> None:
    """Raise InvalidParam on unknown names or type mismatches."""
    params = params or {}
    for name, value in params.items():
        ps = spec.param(name)
        if ps is None:
            raise InvalidParam(f"{spec.kind} has no param {name!r}")
        if not _type_ok(ps.type, value):
            raise InvalidParam(
                f"{spec.kind}.{name} must be {ps.type}, got {type(value).__name__}")
    for ps in spec.params:
        if ps.required and ps.name not in params:
            raise InvalidParam(f"{spec.kind} requires param {ps.name!r}")


def param_value(spec: NodeSpec, params: dict, name: str):
    """Param value with the schema default applied."""
    if name in (params or {}):
        return params[name]
    ps = spec.param(name)
    if ps is None:
        raise InvalidParam(f"{spec.kind} has no param {name!r}")
    return ps.default


class Registry:
    def __init__(self):
        self._specs: dict = {}

    def register(self, spec: NodeSpec) -> NodeSpec:
        if spec.kind in self._specs:
            raise ValueError(f"node kind {spec.kind!r} registered twice")
        if spec.category not in CATEGORIES:
            raise ValueError(f"unknown category {spec.category!r}")
        self._specs[spec.kind] = spec
        return spec

    def get(self, kind: str) -> NodeSpec:
        try:
            return self._specs[kind]
        except KeyError:
            raise UnknownNodeKind(f"no node kind {kind!r}") from None

    def kinds(self) -> list:
        return sorted(self._specs)

    def __contains__(self, kind: str) -> bool:
        return kind in self._specs

    def describe(self) -> list:
        """JSON-ready listing for clients (the UI node panel reads this)."""
        out = []
        for kind in self.kinds():
            s = self._specs[kind]
            out.append({
                "kind": s.kind,
                "category": s.category,
                "description": s.description,
                "inputs": [{"name": p.name, "kinds": list(p.kinds),
                            "required": p.required} for p in s.inputs],
                "outputs": [{"name": p.name, "kinds": list(p.kinds)} for p in s.outputs],
                "params": [{"name": p.name, "type": p.type, "required": p.required,
                            "default": p.default} for p in s.params],
            })
        return out
