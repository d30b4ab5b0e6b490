"""Thin client for the pipeline service.

Without a server URL, requests run against the FastAPI app in-process
through an ASGI transport, so the CLI works with no daemon and still
exercises the exact HTTP surface a remote deployment exposes.
"""

from __future__ import annotations

import asyncio
from typing import Optional

import httpx


class ServiceError(Exception):
    def __init__(self, stage: str, message: str, status: int):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message
        self.status = status


class ServiceClient:
    def __init__(self, server: Optional[str] = None):
        self.server = server.rstrip("/") if server else None

    def _request_inprocess(self, method: str, path: str, payload: Optional[dict]) -> httpx.Response:
        from .service.app import app   # deferred: keeps plain CLI startup light

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=app, raise_app_exceptions=False)
            async with httpx.AsyncClient(transport=transport, base_url="http://itrc",
                                         timeout=None) as client:
                return await client.request(method, path, json=payload)

        return asyncio.run(go())

    def _request(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                resp = client.request(method, path, json=payload)
        else:
            resp = self._request_inprocess(method, path, payload)
        if resp.status_code != 200:
            detail = {}
            try:
                detail = resp.json().get("detail", {})
            except Exception:
                pass
            if isinstance(detail, dict) and "message" in detail:
                raise ServiceError(detail.get("stage", path.strip("/")), detail["message"],
                                   resp.status_code)
            raise ServiceError(path.strip("/"), detail if detail else resp.text,
                               resp.status_code)
        return resp.json()

    def get(self, path: str) -> dict:
        return self._request("GET", path)

    def post(self, path: str, payload: dict) -> dict:
        return self._request("POST", path, payload)
