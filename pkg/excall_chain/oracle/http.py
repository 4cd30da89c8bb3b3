"""HTTP front end of the oracle service (starlette app served by uvicorn)."""

import asyncio
import logging
import threading
import time
from typing import Optional

import uvicorn
from starlette.applications import Starlette
from starlette.requests import Request
from starlette.responses import JSONResponse
from starlette.routing import Route

from ..crypto import InvalidNonce, parse_nonce_hex
from .service import OracleService

logger = logging.getLogger(__name__)


def _parse_nonce(raw: Optional[str]) -> Optional[bytes]:
    try:
        return parse_nonce_hex(raw)
    except InvalidNonce:
        return None


def create_app(service: OracleService, latency_ms: int = 0) -> Starlette:
    """
    Build the oracle's HTTP app.

    Routes:
        GET /excallrand?nonce=<64 hex chars>: signed outcome envelope, 400 on a bad nonce.
        GET /health: 200 with the service public key.
    """

    async def excallrand(request: Request) -> JSONResponse:
        nonce = _parse_nonce(request.query_params.get("nonce"))
        if nonce is None:
            return JSONResponse({"error": "nonce must be 64 hex characters"}, status_code=400)
        if latency_ms:
            await asyncio.sleep(latency_ms / 1000)
        return JSONResponse(service.answer(nonce).to_wire())

    async def health(request: Request) -> JSONResponse:
        return JSONResponse({"status": "ok", "pubkey": service.public_key.hex(), "served": service.served})

    return Starlette(routes=[
        Route("/excallrand", excallrand, methods=["GET"]),
        Route("/health", health, methods=["GET"]),
    ])


class OracleServer:
    """Runs the app with uvicorn on a background thread."""

    def __init__(self, service: OracleService, host: str = "127.0.0.1", port: int = 8080, latency_ms: int = 0) -> None:
        self.service = service
        config = uvicorn.Config(create_app(service, latency_ms), host=host, port=port, log_level="warning")
        self._server = uvicorn.Server(config)
        self._thread: Optional[threading.Thread] = None
        self.url = f"http://{host}:{port}"

    def start(self, timeout: float = 10.0) -> "OracleServer":
        self._thread = threading.Thread(target=self._server.run, name="oracle-http", daemon=True)
        self._thread.start()
        deadline = time.monotonic() + timeout
        while not self._server.started:
            if time.monotonic() > deadline or not self._thread.is_alive():
                raise RuntimeError(f"oracle service did not start on {self.url}")
            time.sleep(0.01)
        logger.info("oracle service listening on %s (pubkey %s)", self.url, self.service.public_key.hex())
        return self

    def stop(self) -> None:
        self._server.should_exit = True
        if self._thread is not None:
            self._thread.join(timeout=5)
        logger.info("oracle service on %s stopped", self.url)

    def __enter__(self) -> "OracleServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(service: OracleService, host: str, port: int, latency_ms: int = 0) -> None:
    """Serve in the foreground until interrupted."""
    logger.info("oracle service starting on %s:%d (pubkey %s)", host, port, service.public_key.hex())
    uvicorn.run(create_app(service, latency_ms), host=host, port=port, log_level="warning")
