"""Device sessions: two-phase credential handshake and per-device task queues.

Delivery is pull-only. Each live session owns one FIFO; poll dequeues exactly
one task or answers {"status": "empty"}. All operations are linearizable under
one manager lock (queues are tiny; contention is not a concern at desk scale).
"""
from __future__ import annotations

import logging
import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..errors import AlreadyConnected, BadCredentials, MalformedSpec, UnknownDevice

log = logging.getLogger(__name__)

HIGH_WATER = 1024       # queue length that triggers a backpressure warning
STALE_AFTER = 30.0      # seconds without a poll before a session is called stale


@dataclass
class DeviceSession:
    device_key: str
    username: str
    password: str
    queue: deque = field(default_factory=deque)
    task_seq: int = 0
    last_poll: Optional[float] = None
    created_at: float = field(default_factory=time.time)
    warned_high_water: bool = False


@dataclass
class _Pending:
    username: str
    password: str
    device_key: str


class SessionManager:
    """All session state. Thread safe; one lock, no lock-order hazards."""

    def __init__(self, seed: Optional[int] = None):
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self._pending: dict = {}    # username -> _Pending
        self._sessions: dict = {}   # device_key -> DeviceSession
        self._by_username: dict = {}  # username -> device_key (live only)

    # ------------------------------------------------------------ handshake
    def _fresh_token(self, nbits: int, taken) -> str:
        while True:
            token = format(self._rng.getrandbits(nbits), f"0{nbits // 4}x")
            if token not in taken:
                return token

    def request_connection(self) -> dict:
        """Mint a pending registration; the caller relays the credentials."""
        with self._lock:
            taken_users = set(self._pending) | set(self._by_username)
            username = "u" + self._fresh_token(32, taken_users)
            password = format(self._rng.getrandbits(48), "012x")
            taken_keys = {p.device_key for p in self._pending.values()}
            taken_keys.update(self._sessions)
            device_key = self._fresh_token(128, taken_keys)
            self._pending[username] = _Pending(username, password, device_key)
            return {"username": username, "password": password,
                    "device_key": device_key}

    def connect_device(self, username: str, password: str) -> str:
        with self._lock:
            if username in self._by_username:
                live = self._sessions[self._by_username[username]]
                if live.password == password:
                    raise AlreadyConnected(f"{username!r} already has a live session")
                raise BadCredentials("invalid username or password")
            pending = self._pending.get(username)
            if pending is None or pending.password != password:
                raise BadCredentials("invalid username or password")
            del self._pending[username]  # credentials are single-use
            session = DeviceSession(device_key=pending.device_key,
                                    username=username, password=password)
            self._sessions[session.device_key] = session
            self._by_username[username] = session.device_key
            return session.device_key

    def resolve(self, username: str, password: str) -> str:
        """Connect-or-return for the workflow-side connector node.

        The node is re-evaluated on every dirty run, so unlike the device
        endpoint this is idempotent for a live session with matching
        credentials.
        """
        with self._lock:
            key = self._by_username.get(username)
            if key is not None:
                if self._sessions[key].password == password:
                    return key
                raise BadCredentials("invalid username or password")
        try:
            return self.connect_device(username, password)
        except AlreadyConnected:  # lost a race with the device itself
            with self._lock:
                return self._by_username[username]

    # ------------------------------------------------------------- lookups
    def get(self, device_key: str) -> DeviceSession:
        with self._lock:
            session = self._sessions.get(device_key)
        if session is None:
            raise UnknownDevice(f"no live session for key {device_key!r}")
        return session

    def live_keys(self) -> list:
        with self._lock:
            return sorted(self._sessions)

    # ------------------------------------------------------------ the queue
    def enqueue(self, device_key: str, kind: str, payload) -> str:
        with self._lock:
            session = self._sessions.get(device_key)
            if session is None:
                raise UnknownDevice(f"no live session for key {device_key!r}")
            session.task_seq += 1
            task_id = f"t{session.task_seq}"
            session.queue.append({"task_id": task_id, "kind": kind,
                                  "payload": payload,
                                  "enqueued_at": time.time()})
            depth = len(session.queue)
            stale = (session.last_poll is not None
                     and time.time() - session.last_poll > STALE_AFTER)
        if depth > HIGH_WATER and not session.warned_high_water:
            session.warned_high_water = True
            log.warning("queue for %s past high water (%d tasks)",
                        device_key[:8], depth)
        if stale:
            log.warning("device %s has not polled for over %.0f s",
                        device_key[:8], STALE_AFTER)
        return task_id

    def enqueue_render(self, device_key: str, spec_payload: str) -> str:
        from ..grammar import parse_spec
        try:
            parse_spec(spec_payload)
        except Exception as e:
            raise MalformedSpec(f"refusing to queue an unparseable spec: {e}")
        return self.enqueue(device_key, "RenderSpec", spec_payload)

    def poll(self, device_key: str) -> dict:
        with self._lock:
            session = self._sessions.get(device_key)
            if session is None:
                raise UnknownDevice(f"no live session for key {device_key!r}")
            session.last_poll = time.time()
            if not session.queue:
                return {"status": "empty"}
            return session.queue.popleft()

    def disconnect(self, device_key: str) -> None:
        with self._lock:
            session = self._sessions.pop(device_key, None)
            if session is not None:
                self._by_username.pop(session.username, None)
