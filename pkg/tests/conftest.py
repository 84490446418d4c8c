import io
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from layertrace import client as client_mod
from layertrace.raster import RasterImage

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CORPUS = Path(__file__).parent / "corpus"


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


def solid(h, w, rgba=(255, 255, 255, 255)) -> RasterImage:
    return RasterImage(np.broadcast_to(np.array(rgba, np.uint8), (h, w, 4)).copy())


def svg(body: str, w=64, h=64) -> str:
    return f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">{body}</svg>'


# off-white card, then three shapes added one per frame
SYNTHETIC_SVG = svg(
    '<g><rect x="4" y="4" width="56" height="56" fill="#eeeeee"/></g>'
    '<g><rect x="10" y="10" width="24" height="24" fill="#2040c0"/></g>'
    '<g><circle cx="42" cy="40" r="11" fill="#e02020"/></g>'
    '<g><rect x="12" y="48" width="40" height="6" fill="#20a040"/></g>'
)


def synthetic_frames():
    from layertrace.decomposer import build_sequence, sequence_images
    from layertrace.grid import GRID_2X2
    from layertrace.svg_parse import parse_svg

    return sequence_images(build_sequence(parse_svg(SYNTHETIC_SVG), 4), GRID_2X2)


def png_bytes(img: RasterImage) -> bytes:
    buf = io.BytesIO()
    img.to_pil().save(buf, format="PNG")
    return buf.getvalue()


# -- mock inference endpoint --------------------------------------------------


class Mock:
    """Scripted endpoint: each request pops the next (status, ctype, body); the last one repeats."""

    def __init__(self):
        self.script = []
        self.requests = []

    def reply(self):
        return self.script.pop(0) if len(self.script) > 1 else self.script[0]


@pytest.fixture
def mock():
    state = Mock()

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
            state.requests.append((self.path, dict(self.headers), json.loads(body)))
            status, ctype, data = state.reply()
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *a):
            pass

    srv = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    state.url = f"http://127.0.0.1:{srv.server_address[1]}"
    yield state
    srv.shutdown()
    srv.server_close()


@pytest.fixture
def sleeps(monkeypatch):
    calls = []
    monkeypatch.setattr(client_mod.time, "sleep", calls.append)
    return calls


@pytest.fixture
def endpoint(mock, monkeypatch):
    monkeypatch.setenv("LAYERTRACE_ENDPOINT", mock.url)
    monkeypatch.delenv("LAYERTRACE_TOKEN", raising=False)
    return mock
