"""Exception types shared across the package.

Everything raised on purpose derives from :class:`FlowError` so callers can
catch one base type. ``http_status`` is the status code the REST layer uses
when an error crosses the service boundary; it is advisory everywhere else.
"""


class FlowError(Exception):
    """Base class for all errors raised by this package."""

    http_status = 400


class NotFound(FlowError):
    http_status = 404


class Conflict(FlowError):
    http_status = 409


# ---------------------------------------------------------------- graph core

class UnknownNodeKind(NotFound):
    """Node kind is not registered."""


class InvalidParam(FlowError):
    """Parameter name or value type does not match the node's schema."""


class UnknownNode(NotFound):
    """Node id not present in the workflow."""


class UnknownPort(NotFound):
    """Port name not declared by the node's kind."""


class TypeMismatch(Conflict):
    """Edge endpoints carry different data kinds."""


class CycleDetected(Conflict):
    """Edge or link would close a cycle."""


class PortOccupied(Conflict):
    """Input port already has an incoming edge."""


class SchemaVersionMismatch(FlowError):
    """Document schema version is not supported."""


class MalformedDocument(FlowError):
    """Workspace document is missing fields or structurally invalid."""


# -------------------------------------------------------------- node library

class FileNotFound(NotFound):
    """Input path does not exist under the data root."""


class ParseError(FlowError):
    """Input file content could not be parsed."""


class KindMismatch(FlowError):
    """File format does not match the loader kind."""


class DegenerateCloud(FlowError):
    """Point cloud is rank deficient; rigid alignment is ill posed."""


class RoiOutsideVolume(FlowError):
    """Region of interest does not intersect the volume."""


class RectOutOfBounds(FlowError):
    """Pixel rectangle extends outside the image."""


class AllPixelsInvalid(FlowError):
    """Every pixel in the selection has zero depth."""


class EmptyMesh(FlowError):
    """Mesh has no triangles."""


class NoGesture(FlowError):
    """No air tap found in the observed hand-tracking window."""


class UnknownMarker(NotFound):
    """Marker id never reported by the device's stream."""


class StreamClosed(FlowError):
    """Sensor stream has no usable data."""


class EndpointUnreachable(FlowError):
    """Remote custom-function endpoint did not answer."""

    http_status = 502


class UnknownFunction(NotFound):
    """Function name absent from the remote listing."""


class RemoteError(FlowError):
    """Remote custom function returned a failure payload."""

    http_status = 502


# ----------------------------------------------------------------- grammar

class MarkDataMismatch(FlowError):
    """Mark is incompatible with the supplied data kind."""


class UnknownField(FlowError):
    """Referenced field does not exist in the data."""


class EmptyData(FlowError):
    """Encoding requires non-empty data."""


class DanglingLink(FlowError):
    """Link target cannot be resolved."""


class SharedFieldMissing(FlowError):
    """Axis link field is not encoded by both specs."""


class MalformedSpec(FlowError):
    """Serialized visualization spec is invalid."""


class UnknownSchemaVersion(FlowError):
    """Spec schema version is not supported."""


# ----------------------------------------------------------------- gateway

class UnknownDevice(NotFound):
    """Device key does not name a live session."""


class BadCredentials(FlowError):
    """Credential pair matches no pending registration."""

    http_status = 401


class AlreadyConnected(Conflict):
    """Credential pair already has a live session."""


class UnknownWorkspace(NotFound):
    """Access code not present in the store."""


class ConflictingVersion(Conflict):
    """Save was based on a stale workspace version."""


class StreamAlreadyOpen(Conflict):
    """A sensor stream of this kind is already open for the device."""


# --------------------------------------------------------------- sim device

class ServerUnreachable(FlowError):
    """Gateway did not answer."""


class HandshakeFailed(FlowError):
    """Connection handshake was rejected."""


class OutOfTrackRange(FlowError):
    """Sample time outside the scripted track domain."""


# ---------------------------------------------------------------------- cli

class AddressInUse(FlowError):
    """Requested listen address is already bound."""


class DataRootUnwritable(FlowError):
    """Data root directory cannot be created or written."""
