"""Remote custom functions.

An endpoint serves GET {endpoint}/functions with a JSON list of
{name, source_text} and POST {endpoint}/functions/{name} with body
{"params": {...}, "input": <wire value>} answering {"output": <wire value>}
or {"error": "..."}. Values cross the wire as
{"kind": <DataKind>, "data": base64(canonical bytes)} so every kind survives
the trip losslessly.
"""
from __future__ import annotations

import base64

import requests

from ..errors import EndpointUnreachable, RemoteError, UnknownFunction
from ..values import DataValue, canonical_bytes, parse_bytes

TIMEOUT = 10.0


def value_to_wire(value: DataValue) -> dict:
    return {"kind": value.kind.value,
            "data": base64.b64encode(canonical_bytes(value)).decode("ascii")}


def value_from_wire(obj: dict) -> DataValue:
    return parse_bytes(base64.b64decode(obj["data"]))


def _endpoint_url(endpoint: str) -> str:
    if not endpoint.startswith(("http://", "https://")):
        endpoint = "http://" + endpoint
    return endpoint.rstrip("/")


def list_functions(endpoint: str) -> list:
    """[{name, source_text}, ...] from the endpoint's listing route."""
    url = _endpoint_url(endpoint) + "/functions"
    try:
        resp = requests.get(url, timeout=TIMEOUT)
    except requests.RequestException as e:
        raise EndpointUnreachable(f"{url}: {e}") from e
    if resp.status_code != 200:
        raise EndpointUnreachable(f"{url} answered {resp.status_code}")
    listing = resp.json()
    if not isinstance(listing, list):
        raise RemoteError(f"{url} returned a malformed listing")
    return listing


def run_custom(endpoint: str, function: str, params: dict,
               input_value: DataValue) -> DataValue:
    listing = list_functions(endpoint)
    names = {f.get("name") for f in listing if isinstance(f, dict)}
    if function not in names:
        raise UnknownFunction(f"{function!r} not in remote listing {sorted(names)}")
    url = _endpoint_url(endpoint) + f"/functions/{function}"
    body = {"params": dict(params or {}), "input": value_to_wire(input_value)}
    try:
        resp = requests.post(url, json=body, timeout=TIMEOUT)
    except requests.RequestException as e:
        raise EndpointUnreachable(f"{url}: {e}") from e
    if resp.status_code != 200:
        raise RemoteError(f"{url} answered {resp.status_code}: {resp.text[:200]}")
    payload = resp.json()
    if "error" in payload:
        raise RemoteError(str(payload["error"]))
    if "output" not in payload:
        raise RemoteError("remote reply has neither output nor error")
    return value_from_wire(payload["output"])
