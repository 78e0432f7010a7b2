"""Line-delimited JSON transport over standard streams or a local TCP socket."""
from __future__ import annotations

import io
import json
import socket
import socketserver
import threading

from ..queryapi import canonical
from .session import ToolServer, error_payload


def handle_line(server: ToolServer, line: str) -> str:
    try:
        req = json.loads(line)
    except ValueError as exc:
        resp = {"id": None, "tag": None, "ok": False, "payload": error_payload("ParamValidation", f"malformed request: {exc}")}
    else:
        resp = server.request(req)
    return canonical(resp)


def serve_stream(server: ToolServer, rfile, wfile):
    """Answer one request per input line until EOF."""
    for raw in rfile:
        line = raw.decode() if isinstance(raw, bytes) else raw
        if not line.strip():
            continue
        out = handle_line(server, line) + "\n"
        wfile.write(out.encode() if _binary(wfile) else out)
        wfile.flush()


def _binary(f) -> bool:
    return not isinstance(f, io.TextIOBase)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        serve_stream(self.server.tool_server, self.rfile, self.wfile)


class TCPToolServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, tool_server: ToolServer):
        super().__init__(addr, _Handler)
        self.tool_server = tool_server

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


def parse_addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must be HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


class Client:
    """Minimal synchronous client; ``call`` returns the decoded response record."""

    def __init__(self, addr: tuple[str, int]):
        self.sock = socket.create_connection(addr)
        self.rfile = self.sock.makefile("rb")
        self._ids = 0

    def raw(self, line: str) -> str:
        self.sock.sendall(line.encode() + b"\n")
        return self.rfile.readline().decode().rstrip("\n")

    def call(self, method: str, params=None, session=None) -> dict:
        self._ids += 1
        req = {"id": self._ids, "method": method, "params": params or {}}
        if session is not None:
            req["session"] = session
        return json.loads(self.raw(canonical(req)))

    def close(self):
        self.rfile.close()
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
