"""HTTP gateway: device handshake/polling, workspace CRUD, data fetch.

The app is a plain FastAPI application over one GatewayState; GatewayServer
runs it on a background uvicorn so tests and the scenario runner can own the
process. Endpoints are sync functions: uvicorn's threadpool plus the state
locks give the concurrency contract (linearizable queues, serialized
per-workspace edits).
"""
from __future__ import annotations

import json
import logging
import threading
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from ..datastore import DataStore
from ..errors import FlowError, UnknownWorkspace
from ..nodes import build_default_registry
from ..registry import Registry
from ..streams import StreamHub
from .sessions import SessionManager
from .workspaces import LiveWorkspace, WorkspaceStore

log = logging.getLogger(__name__)

POLL_INTERVAL_MS = 100  # recommended device poll cadence


class GatewayState:
    """Everything the endpoints touch; shared across requests."""

    def __init__(self, data_root, registry: Optional[Registry] = None,
                 seed: Optional[int] = None,
                 poll_log: Optional[Path] = None,
                 webui_dir: Optional[Path] = None):
        self.store = DataStore(data_root)
        self.webui_dir = Path(webui_dir) if webui_dir else None
        self.registry = registry or build_default_registry()
        self.sessions = SessionManager(seed=seed)
        self.hub = StreamHub(session_lookup=self._session_alive)
        self.workspaces = WorkspaceStore(self.store.workspaces_dir)
        self._live: dict = {}
        self._live_lock = threading.Lock()
        self._poll_log_path = Path(poll_log) if poll_log else None
        self._poll_log_lock = threading.Lock()

    def _session_alive(self, device_key: str) -> bool:
        try:
            self.sessions.get(device_key)
            return True
        except FlowError:
            return False

    def live_workspace(self, code: str) -> LiveWorkspace:
        with self._live_lock:
            ws = self._live.get(code)
            if ws is None:
                ws = LiveWorkspace(code, self.workspaces, self.registry,
                                   self.store, self)
                self._live[code] = ws
            return ws

    def save_workspace(self, code: str, document: dict,
                       version: Optional[int] = None,
                       anchors: Optional[list] = None,
                       layout: Optional[dict] = None) -> dict:
        with self._live_lock:
            live = self._live.get(code)
        if live is not None and anchors is None and layout is None:
            return live.replace_document(document, version=version)
        record = self.workspaces.save(code, document, version=version,
                                      anchors=anchors, layout=layout)
        if live is not None:
            with live.lock:
                from ..graph import Workflow
                live.workflow = Workflow.deserialize(document, self.registry)
                live.stored_version = record["version"]
        return record

    def log_poll(self, device_key: str, result: dict) -> None:
        if self._poll_log_path is None:
            return
        line = json.dumps({"t": time.time(), "device_key": device_key,
                           "result": result.get("status") or result.get("task_id")},
                          sort_keys=True)
        with self._poll_log_lock:
            with open(self._poll_log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def create_app(state: GatewayState) -> FastAPI:
    app = FastAPI(title="xrflow gateway", docs_url=None, redoc_url=None)
    app.state.gateway = state

    @app.exception_handler(FlowError)
    async def _flow_error(request: Request, exc: FlowError):
        return JSONResponse(status_code=exc.http_status,
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    @app.get("/api/health")
    def health():
        from .. import __version__
        return {"status": "ok", "version": __version__}

    @app.get("/api/registry")
    def registry_panel():
        return {"nodes": state.registry.describe()}

    # ------------------------------------------------------------- devices
    @app.post("/api/device/request")
    def device_request():
        return state.sessions.request_connection()

    @app.post("/api/device/connect")
    def device_connect(body: dict):
        key = state.sessions.connect_device(body.get("username", ""),
                                            body.get("password", ""))
        return {"device_key": key, "scheduler": "created",
                "poll_interval_ms": POLL_INTERVAL_MS,
                "stream": {"host": state.hub.host, "port": state.hub.port}}

    @app.get("/api/device/{key}/poll")
    def device_poll(key: str):
        result = state.sessions.poll(key)
        state.log_poll(key, result)
        return result

    @app.post("/api/device/{key}/render")
    def device_render(key: str, body: dict):
        spec = body.get("spec")
        if not isinstance(spec, str):
            from ..errors import MalformedSpec
            raise MalformedSpec("body must carry a serialized spec string")
        return {"task_id": state.sessions.enqueue_render(key, spec)}

    @app.post("/api/device/{key}/stream")
    def device_stream(key: str, body: dict):
        kinds = body.get("kinds") or []
        endpoint = state.hub.open_stream(key, kinds)
        return {"host": endpoint["host"], "port": endpoint["port"],
                "kinds": list(kinds)}

    # ---------------------------------------------------------- workspaces
    @app.post("/api/workspace/{code}/save")
    def workspace_save(code: str, body: dict):
        record = state.save_workspace(code, body.get("document"),
                                      version=body.get("version"),
                                      anchors=body.get("anchors"),
                                      layout=body.get("layout"))
        return {"access_code": record["access_code"],
                "version": record["version"],
                "updated_at": record["updated_at"]}

    @app.get("/api/workspace/{code}")
    def workspace_load(code: str):
        return state.workspaces.load(code)

    @app.post("/api/workspace/{code}/node/{node_id}/execute")
    def workspace_execute(code: str, node_id: str, body: Optional[dict] = None):
        if not state.workspaces.exists(code):
            raise UnknownWorkspace(f"no workspace {code!r}")
        live = state.live_workspace(code)
        params = (body or {}).get("params") or None
        report, outputs = live.execute_node(node_id, params)
        return {"report": report.to_jsonable(), "outputs": outputs,
                "version": live.workflow.version}

    # ---------------------------------------------------------------- data
    @app.get("/api/data/{ref}")
    def data_fetch(ref: str):
        kind, payload = state.store.get_bytes(ref)
        return Response(content=payload, media_type="application/octet-stream",
                        headers={"X-Data-Kind": kind})

    @app.get("/api/files")
    def files_list():
        root = state.store.files_dir
        entries = []
        if root.is_dir():
            for p in sorted(root.iterdir()):
                if p.is_file():
                    entries.append({"name": p.name, "size": p.stat().st_size,
                                    "suffix": p.suffix.lstrip(".")})
        return {"files": entries}

    # UI bundle, when one was built; /api/* routes above take precedence.
    if state.webui_dir is not None and state.webui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=state.webui_dir, html=True),
                  name="webui")

    return app


class GatewayServer:
    """The gateway on a background thread; port 0 picks a free port."""

    def __init__(self, data_root, host: str = "127.0.0.1", port: int = 0,
                 registry: Optional[Registry] = None,
                 seed: Optional[int] = None,
                 poll_log: Optional[Path] = None,
                 webui_dir: Optional[Path] = None):
        self.state = GatewayState(data_root, registry=registry, seed=seed,
                                  poll_log=poll_log, webui_dir=webui_dir)
        self.host = host
        self._requested_port = port
        self.port: Optional[int] = None
        self._server = None
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self, wait: float = 10.0) -> "GatewayServer":
        import uvicorn

        self.state.hub.start()
        app = create_app(self.state)
        config = uvicorn.Config(app, host=self.host, port=self._requested_port,
                                log_level="warning", access_log=False)
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run,
                                        name="gateway-http", daemon=True)
        self._thread.start()
        deadline = time.time() + wait
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("gateway failed to start in time")
            if not self._thread.is_alive():
                raise OSError("gateway could not bind its address")
            time.sleep(0.01)
        self.port = self._server.servers[0].sockets[0].getsockname()[1]
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.state.hub.stop()
