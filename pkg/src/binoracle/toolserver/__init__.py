"""Agent-facing tool service: tagged transcripts, discard, wire protocol and CLI."""
from .session import (PLACEHOLDER, PROTOCOL_VERSION, SIGNATURES, Session, ToolError, ToolResponse, ToolServer,
                      error_payload, validate)
from .wire import Client, TCPToolServer, handle_line, parse_addr, serve_stream

__all__ = [
    "Client", "PLACEHOLDER", "PROTOCOL_VERSION", "SIGNATURES", "Session", "TCPToolServer", "ToolError",
    "ToolResponse", "ToolServer", "error_payload", "handle_line", "parse_addr", "serve_stream", "validate",
]
