"""Reactive dataflow workflows for immersive analytics.

A workflow is a typed DAG of nodes. Processing runs server side; connected
headsets receive declarative visualization specs through a polling gateway
and push sensor streams back over TCP.
"""
from .errors import FlowError
from .geometry import Pose, Similarity
from .graph import ExecutionContext, ExecutionReport, Workflow
from .grammar import VisSpec, build_spec, parse_spec, resolve_link, serialize_spec
from .nodes import build_default_registry
from .registry import NodeSpec, ParamSpec, PortSpec, Registry
from .values import (
    DataKind,
    DataValue,
    Image2D,
    Mesh,
    PointCloud,
    StreamHandle,
    Table,
    Volume3D,
)

__version__ = "0.1.0"

__all__ = [
    "DataKind", "DataValue", "ExecutionContext", "ExecutionReport", "FlowError",
    "Image2D", "Mesh", "NodeSpec", "ParamSpec", "PointCloud", "Pose", "PortSpec",
    "Registry", "Similarity", "StreamHandle", "Table", "VisSpec", "Volume3D",
    "Workflow", "build_default_registry", "build_spec", "parse_spec",
    "resolve_link", "serialize_spec", "__version__",
]
