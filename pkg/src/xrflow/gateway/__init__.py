"""Gateway: sessions, schedulers, workspace store, HTTP service."""
from .service import GatewayServer, GatewayState, create_app
from .sessions import SessionManager
from .workspaces import LiveWorkspace, WorkspaceStore

__all__ = ["GatewayServer", "GatewayState", "LiveWorkspace", "SessionManager",
           "WorkspaceStore", "create_app"]
