"""Sessions, tagged transcripts and method dispatch onto BinaryAPI."""
from __future__ import annotations

import itertools
import threading
import time

from ..container import ContainerError
from ..queryapi import DIALECT, METHODS, BinaryAPI, Page, QueryError, canonical

PROTOCOL_VERSION = "1.0"
PLACEHOLDER = "[discarded]"

# method -> ((param, type, default); required when default is _REQ)
_REQ = object()
_PAGED = (("offset", int, 0), ("limit", int, 100))
_FUNC = (("func", str, _REQ),)
_SEARCH = (("pattern", str, _REQ), ("limit", int, 200))
SIGNATURES = {
    "list_functions": _PAGED, "get_imports": _PAGED, "get_strings": _PAGED,
    "find_callers_of_import": (("import_name", str, _REQ),),
    "find_functions_referencing_string": (("s", str, _REQ), ("case_sensitive", bool, False)),
    "get_callees": _FUNC, "get_callers": _FUNC, "decompile": _FUNC, "get_pcode": _FUNC,
    "get_assembly": _FUNC, "get_cfg": _FUNC,
    "search_decompiled": _SEARCH, "search_pcode": _SEARCH, "search_assembly": _SEARCH,
    "discard_tool_result": (("tag", str, _REQ),),
}
assert set(SIGNATURES) == set(METHODS) | {"discard_tool_result"}


class ToolError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def error_payload(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


def validate(method: str, params) -> dict:
    if method not in SIGNATURES:
        raise ToolError("UnknownMethod", f"unknown method {method!r}")
    if params is None:
        params = {}
    if not isinstance(params, dict):
        raise ToolError("ParamValidation", "params must be an object")
    sig = SIGNATURES[method]
    names = {n for n, _, _ in sig}
    extra = sorted(set(params) - names)
    if extra:
        raise ToolError("ParamValidation", f"{method}: unexpected parameter(s) {', '.join(extra)}")
    out = {}
    for name, typ, default in sig:
        if name not in params:
            if default is _REQ:
                raise ToolError("ParamValidation", f"{method}: missing required parameter {name!r}")
            out[name] = default
            continue
        val = params[name]
        ok = isinstance(val, typ) and (typ is bool or not isinstance(val, bool))
        if not ok:
            raise ToolError("ParamValidation", f"{method}: {name!r} must be {typ.__name__}")
        out[name] = val
    return out


class Session:
    """One agent's view of one binary: tag counter plus transcript."""

    def __init__(self, session_id: str, api: BinaryAPI, deadline: float | None = None,
                 max_outstanding_bytes: int | None = None, clock=time.monotonic):
        self.session_id = session_id
        self.api = api
        self.next_tag = 1
        self.transcript: dict[str, str] = {}      # tag -> serialized payload or placeholder
        self.discarded: set[str] = set()
        self.clock = clock
        self.deadline = None if deadline is None else clock() + deadline
        self.max_outstanding_bytes = max_outstanding_bytes
        self.lock = threading.Lock()

    @property
    def outstanding_bytes(self) -> int:
        return sum(len(v) for t, v in self.transcript.items() if t not in self.discarded)

    def diagnostics(self) -> dict:
        return {"session": self.session_id, "entries": len(self.transcript), "discarded": len(self.discarded),
                "outstanding_bytes": self.outstanding_bytes, "next_tag": f"t{self.next_tag}"}

    def _budget_error(self):
        if self.deadline is not None and self.clock() > self.deadline:
            return error_payload("BudgetExceeded", "session wall-clock budget exhausted")
        if self.max_outstanding_bytes is not None and self.outstanding_bytes > self.max_outstanding_bytes:
            return error_payload("BudgetExceeded", "outstanding transcript bytes over budget; discard results")
        return None

    def _dispatch(self, method: str, params: dict):
        if method == "discard_tool_result":
            tag = params["tag"]
            if tag not in self.transcript:
                raise ToolError("UnknownTag", f"tag {tag!r} was not issued in this session")
            self.transcript[tag] = PLACEHOLDER
            self.discarded.add(tag)
            return {"discarded": tag}
        result = getattr(self.api, method)(**params)
        return result.to_dict() if isinstance(result, Page) else result

    def call(self, method: str, params=None) -> "ToolResponse":
        with self.lock:
            tag = f"t{self.next_tag}"
            self.next_tag += 1
            ok = False
            try:
                clean = validate(method, params)
                payload = self._budget_error() if method != "discard_tool_result" else None
                if payload is None:
                    payload = self._dispatch(method, clean)
                    ok = True
            except ToolError as exc:
                payload = error_payload(exc.code, str(exc))
            except QueryError as exc:
                payload = error_payload(exc.code, str(exc))
            self.transcript[tag] = canonical(payload)
            return ToolResponse(tag, method, ok, payload)

    def fetch(self, tag: str):
        """Stored transcript entry for ``tag`` (the placeholder once discarded)."""
        if tag not in self.transcript:
            raise ToolError("UnknownTag", f"tag {tag!r} was not issued in this session")
        return self.transcript[tag]


class ToolResponse:
    __slots__ = ("tag", "method", "ok", "payload")

    def __init__(self, tag, method, ok, payload):
        self.tag, self.method, self.ok, self.payload = tag, method, ok, payload

    def to_dict(self) -> dict:
        return {"tag": self.tag, "method": self.method, "ok": self.ok, "payload": self.payload}

    def text(self) -> str:
        """What an agent sees: the payload behind its ``[tag=tN]`` prefix."""
        return f"[tag={self.tag}] {canonical(self.payload)}"


class ToolServer:
    """Shared immutable BinaryAPI handles plus independent per-session transcripts."""

    def __init__(self, cache_dir=None, cache: bool = True, clock=time.monotonic):
        self.cache_dir = cache_dir
        self.cache = cache
        self.clock = clock
        self._handles: dict[tuple, BinaryAPI] = {}
        self._sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self._lock = threading.Lock()

    def capabilities(self) -> dict:
        return {"version": PROTOCOL_VERSION, "methods": list(METHODS) + ["discard_tool_result"],
                "regex_dialect": DIALECT}

    def handle(self, path: str, strict: bool = True) -> BinaryAPI:
        key = (path, strict)
        with self._lock:
            if key not in self._handles:
                self._handles[key] = BinaryAPI(path, cache_dir=self.cache_dir, cache=self.cache, strict=strict)
            return self._handles[key]

    def open_session(self, path: str, strict: bool = True, deadline: float | None = None,
                     max_outstanding_bytes: int | None = None) -> Session:
        api = self.handle(path, strict)
        with self._lock:
            sid = f"s{next(self._ids)}"
            sess = Session(sid, api, deadline, max_outstanding_bytes, self.clock)
            self._sessions[sid] = sess
        return sess

    def session(self, sid: str) -> Session:
        try:
            return self._sessions[sid]
        except KeyError:
            raise ToolError("UnknownSession", f"no session {sid!r}") from None

    def close_session(self, sid: str) -> dict:
        with self._lock:
            if self._sessions.pop(sid, None) is None:
                raise ToolError("UnknownSession", f"no session {sid!r}")
        return {"closed": sid}

    def handle_call(self, session: Session | str, method: str, params=None) -> ToolResponse:
        sess = self.session(session) if isinstance(session, str) else session
        return sess.call(method, params)

    # -- wire requests: {id, op?, session?, method, params}
    def request(self, req: dict) -> dict:
        rid = req.get("id") if isinstance(req, dict) else None
        try:
            if not isinstance(req, dict):
                raise ToolError("ParamValidation", "request must be an object")
            method = req.get("method")
            params = req.get("params") or {}
            if method == "capabilities":
                return {"id": rid, "tag": None, "ok": True, "payload": self.capabilities()}
            if method == "open_session":
                if not isinstance(params.get("path"), str):
                    raise ToolError("ParamValidation", "open_session: 'path' must be str")
                try:
                    sess = self.open_session(params["path"], bool(params.get("strict", True)),
                                             params.get("deadline"), params.get("max_outstanding_bytes"))
                except (ContainerError, OSError) as exc:
                    raise ToolError(type(exc).__name__, str(exc)) from None
                return {"id": rid, "tag": None, "ok": True, "payload": {"session": sess.session_id}}
            if method == "close_session":
                return {"id": rid, "tag": None, "ok": True, "payload": self.close_session(req.get("session"))}
            if method == "diagnostics":
                return {"id": rid, "tag": None, "ok": True, "payload": self.session(req.get("session")).diagnostics()}
            if method == "fetch_tool_result":
                sess = self.session(req.get("session"))
                return {"id": rid, "tag": None, "ok": True, "payload": {"tag": params.get("tag"),
                                                                        "content": sess.fetch(params.get("tag"))}}
            resp = self.handle_call(self.session(req.get("session")), method, params)
            return {"id": rid, **resp.to_dict()}
        except ToolError as exc:
            return {"id": rid, "tag": None, "ok": False, "payload": error_payload(exc.code, str(exc))}
