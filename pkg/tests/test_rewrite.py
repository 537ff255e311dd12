from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from exrw.corpus import split_sentences
from exrw.rewrite import (
    IdentityRewriter,
    RemoteRewriter,
    RewriteError,
    RewriteRequest,
    RewriterConfig,
    make_rewriter,
    rewrite_identity,
    rewrite_remote,
)


def test_identity_join():
    result = rewrite_identity(RewriteRequest(sentences=["A.", "B."]))
    assert result.text == "A. B."
    assert result.source == "identity"
    assert result.latency_ms == 0


def test_identity_singleton():
    assert rewrite_identity(RewriteRequest(sentences=["X."])).text == "X."


def test_identity_idempotent_through_splitter():
    sentences = ["Rain fell hard.", "Roads flooded fast.", "Crews worked all night."]
    text = rewrite_identity(RewriteRequest(sentences=sentences)).text
    assert split_sentences(text) == sentences
    again = rewrite_identity(RewriteRequest(sentences=split_sentences(text))).text
    assert again == text


def test_request_validation():
    with pytest.raises(ValueError, match="at least one"):
        RewriteRequest(sentences=[])
    with pytest.raises(ValueError, match="nonempty"):
        RewriteRequest(sentences=["ok", "  "])


class _RewriteHandler(BaseHTTPRequestHandler):
    behavior = "echo"  # echo | empty | error
    calls = 0

    def do_POST(self):
        cls = type(self)
        cls.calls += 1
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        if cls.behavior == "error":
            self.send_response(503)
            self.end_headers()
            self.wfile.write(b'{"error":"overloaded"}')
            return
        text = "" if cls.behavior == "empty" else " ".join(body["sentences"])
        payload = json.dumps({"text": text}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def rewrite_server():
    server = HTTPServer(("127.0.0.1", 0), _RewriteHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _RewriteHandler.behavior = "echo"
    _RewriteHandler.calls = 0
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_remote_echo_matches_identity(rewrite_server):
    req = RewriteRequest(sentences=["One here.", "Two here."])
    remote = rewrite_remote(req, RewriterConfig(kind="remote", endpoint_url=rewrite_server))
    assert remote.text == rewrite_identity(req).text
    assert remote.source == "remote"
    assert remote.latency_ms >= 0


def test_remote_empty_text_is_error(rewrite_server):
    _RewriteHandler.behavior = "empty"
    client = RemoteRewriter(rewrite_server, backoff_s=0.01)
    with pytest.raises(RewriteError, match="empty rewrite"):
        client.rewrite(RewriteRequest(sentences=["One."]))


def test_remote_non_200_carries_status_and_body(rewrite_server):
    _RewriteHandler.behavior = "error"
    client = RemoteRewriter(rewrite_server, backoff_s=0.01)
    with pytest.raises(RewriteError, match="status 503") as excinfo:
        client.rewrite(RewriteRequest(sentences=["One."]))
    assert "overloaded" in str(excinfo.value)
    assert _RewriteHandler.calls == 3


def test_remote_down_retries_with_backoff():
    backoff = 0.05
    client = RemoteRewriter("http://127.0.0.1:9", timeout_ms=300, backoff_s=backoff)
    started = time.monotonic()
    with pytest.raises(RewriteError, match="after 3 attempts"):
        client.rewrite(RewriteRequest(sentences=["One."]))
    elapsed = time.monotonic() - started
    assert elapsed >= backoff * (1 + 2)  # waits of b and 2b between 3 attempts


def test_make_rewriter():
    assert isinstance(make_rewriter(RewriterConfig(kind="identity")), IdentityRewriter)
    assert isinstance(
        make_rewriter(RewriterConfig(kind="remote", endpoint_url="http://x")), RemoteRewriter
    )
    with pytest.raises(ValueError):
        make_rewriter(RewriterConfig(kind="remote"))
    with pytest.raises(ValueError):
        make_rewriter(RewriterConfig(kind="nope"))
