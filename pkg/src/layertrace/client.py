"""Thin HTTP client for an external grid-generation service.

The service is a black box: it receives a prompt (or a reference image)
and answers with a PNG grid at the layout's canonical resolution.
"""

from __future__ import annotations

import base64
import io
import os
import time
from dataclasses import dataclass
from typing import Callable

import httpx
from PIL import Image, UnidentifiedImageError

from .errors import InferenceError, UnknownResolution
from .grid import GridLayout

ENDPOINT_ENV = "LAYERTRACE_ENDPOINT"
TOKEN_ENV = "LAYERTRACE_TOKEN"
BACKOFF = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class InferenceRequest:
    prompt: str
    rows: int
    cols: int
    seed: int | None = None
    image: bytes | None = None  # PNG of a reference design, for image-conditioned generation

    @classmethod
    def for_layout(cls, prompt: str, layout: GridLayout, seed: int | None = None, image: bytes | None = None):
        return cls(prompt, layout.rows, layout.cols, seed, image)

    def payload(self) -> dict:
        body = {"prompt": self.prompt, "rows": self.rows, "cols": self.cols, "seed": self.seed}
        if self.image is not None:
            body["image"] = base64.b64encode(self.image).decode("ascii")
        return body


def png_size(data: bytes) -> tuple[int, int]:
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != "PNG":
                raise InferenceError(f"expected PNG, got {im.format}")
            return im.size
    except UnidentifiedImageError as e:
        raise InferenceError("response body is not an image") from e


class InferenceClient:
    """POSTs to ``{endpoint}/generate``; retries 5xx replies and transport errors.

    ``attempts`` counts every request made; after failed attempt ``i`` the
    client sleeps ``backoff[i]`` seconds before trying again.
    """

    def __init__(
        self,
        endpoint: str,
        token: str | None = None,
        timeout: float = 120.0,
        attempts: int = 3,
        backoff=BACKOFF,
        sleep: Callable[[float], None] | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        if not endpoint:
            raise InferenceError(f"no inference endpoint configured (set {ENDPOINT_ENV})")
        if attempts < 1:
            raise ValueError("attempts must be >= 1")
        self.url = endpoint.rstrip("/") + "/generate"
        self.token = token
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = tuple(backoff)
        self.sleep = sleep if sleep is not None else time.sleep
        self.transport = transport

    @classmethod
    def from_env(cls, env=None, **kw) -> "InferenceClient":
        env = os.environ if env is None else env
        return cls(env.get(ENDPOINT_ENV, ""), env.get(TOKEN_ENV) or None, **kw)

    def _headers(self) -> dict:
        h = {"Accept": "image/png"}
        if self.token:
            h["Authorization"] = f"Bearer {self.token}"
        return h

    def _post(self, client: httpx.Client, body: dict) -> bytes:
        """One attempt. Returns the PNG or raises; ``_Retry`` marks transient failures."""
        try:
            r = client.post(self.url, json=body, headers=self._headers())
        except (httpx.TimeoutException, httpx.TransportError) as e:
            raise _Retry(f"request failed: {e}") from e
        if r.status_code >= 500:
            raise _Retry(f"server error {r.status_code}")
        if r.status_code != 200:
            raise InferenceError(f"endpoint answered {r.status_code}: {r.text[:200]}")
        ctype = r.headers.get("content-type", "").split(";")[0].strip().lower()
        if ctype != "image/png":
            raise InferenceError(f"expected image/png, got {ctype or 'no content type'}")
        return r.content

    def generate(self, request: InferenceRequest) -> bytes:
        """PNG bytes of a grid at the requested layout's canonical size."""
        layout = GridLayout.parse(f"{request.rows}x{request.cols}")
        body = request.payload()
        last = None
        with httpx.Client(timeout=self.timeout, transport=self.transport) as client:
            for i in range(self.attempts):
                try:
                    data = self._post(client, body)
                    break
                except _Retry as e:
                    last = e
                    if i + 1 < self.attempts:
                        self.sleep(self.backoff[min(i, len(self.backoff) - 1)])
            else:
                raise InferenceError(f"gave up after {self.attempts} attempts: {last}")
        size = png_size(data)
        if size != layout.size:
            raise UnknownResolution(f"endpoint returned {size[0]}x{size[1]}, expected {layout.size[0]}x{layout.size[1]} for {layout}")
        return data


class _Retry(Exception):
    pass
