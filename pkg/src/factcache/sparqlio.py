"""Low-level SPARQL-over-HTTP plumbing shared by the KB clients and the
remote slow source: request execution, results-JSON parsing, URI helpers.

The transport is injectable so every test can run against recorded
responses; the default transport issues a real GET via requests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .errors import HttpError, MalformedResponse, RateLimited

RESULTS_JSON = "application/sparql-results+json"


@dataclass
class TransportReply:
    """What a transport hands back: status, response headers, and body."""

    status: int
    text: str
    headers: Mapping[str, str] = field(default_factory=dict)


Transport = Callable[[str, Mapping[str, str], Mapping[str, str]], TransportReply]


def requests_transport(url: str, params: Mapping[str, str],
                       headers: Mapping[str, str]) -> TransportReply:
    import requests

    resp = requests.get(url, params=params, headers=headers, timeout=60)
    return TransportReply(status=resp.status_code, text=resp.text,
                          headers=dict(resp.headers))


def exec_sparql(endpoint: str, query: str,
                transport: Optional[Transport] = None) -> dict:
    """Run one SPARQL query and return the parsed results-JSON document.

    Raises RateLimited on 429 (carrying any Retry-After hint), HttpError on
    other non-2xx statuses or transport failures, MalformedResponse when the
    body is not a SPARQL results document.
    """
    transport = transport or requests_transport
    try:
        reply = transport(endpoint, {"query": query, "format": "json"},
                          {"Accept": RESULTS_JSON})
    except Exception as exc:  # connection errors from the real transport
        raise HttpError(f"request to {endpoint} failed: {exc}") from exc
    if reply.status == 429:
        retry_after = _parse_retry_after(reply.headers)
        raise RateLimited(f"{endpoint} rate-limited", retry_after=retry_after)
    if not 200 <= reply.status < 300:
        raise HttpError(f"{endpoint} returned HTTP {reply.status}",
                        status=reply.status)
    try:
        payload = json.loads(reply.text)
    except ValueError as exc:
        raise MalformedResponse(f"not JSON: {exc}") from exc
    if "results" not in payload or "bindings" not in payload.get("results", {}):
        raise MalformedResponse("missing results.bindings")
    return payload


def _parse_retry_after(headers: Mapping[str, str]) -> Optional[float]:
    for name, value in headers.items():
        if name.lower() == "retry-after":
            try:
                return float(value)
            except ValueError:
                return None
    return None


def parse_bindings(payload: dict) -> list[dict[str, Optional[str]]]:
    """Flatten a results document into rows of variable -> plain value."""
    vars_ = payload.get("head", {}).get("vars", [])
    rows = []
    for binding in payload["results"]["bindings"]:
        row: dict[str, Optional[str]] = {}
        for var in vars_:
            cell = binding.get(var)
            row[var] = cell.get("value") if cell else None
        rows.append(row)
    return rows


def uri_tail(uri: str) -> str:
    """Last path segment of a URI: the bare id for Wikidata/DBpedia items."""
    return uri.rstrip("/").rsplit("/", 1)[-1]
