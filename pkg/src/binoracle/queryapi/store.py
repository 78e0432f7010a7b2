"""On-disk analysis cache: one ``{sha256}.analysis`` file per binary.

File layout: a JSON header line ``{"format", "format_version", "key", "payload_sha256"}``
followed by the canonical JSON payload. Anything that fails to verify is deleted
and treated as a miss.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .pipeline import FORMAT_VERSION

MAGIC = "binoracle-analysis"


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def default_cache_dir() -> Path:
    env = os.environ.get("BINORACLE_CACHE_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "binoracle"


class AnalysisStore:
    def __init__(self, root: str | os.PathLike | None = None, format_version: int = FORMAT_VERSION):
        self.root = Path(root) if root is not None else default_cache_dir()
        self.format_version = format_version

    def path(self, key: str, variant: str = "") -> Path:
        suffix = f".{variant}" if variant else ""
        return self.root / f"{key}{suffix}.analysis"

    def load(self, key: str, variant: str = "") -> dict | None:
        p = self.path(key, variant)
        try:
            raw = p.read_bytes()
        except OSError:
            return None
        payload = self._decode(raw, key)
        if payload is None:
            try:
                p.unlink()
            except OSError:
                pass
        return payload

    def _decode(self, raw: bytes, key: str) -> dict | None:
        head, sep, body = raw.partition(b"\n")
        if not sep:
            return None
        try:
            header = json.loads(head)
            if (header.get("format") != MAGIC or header.get("format_version") != self.format_version
                    or header.get("key") != key
                    or header.get("payload_sha256") != hashlib.sha256(body).hexdigest()):
                return None
            payload = json.loads(body)
        except (ValueError, AttributeError):
            return None
        return payload if isinstance(payload, dict) else None

    def save(self, key: str, payload: dict, variant: str = "") -> Path:
        body = canonical(payload).encode()
        header = canonical({"format": MAGIC, "format_version": self.format_version, "key": key,
                            "payload_sha256": hashlib.sha256(body).hexdigest()}).encode()
        self.root.mkdir(parents=True, exist_ok=True)
        dest = self.path(key, variant)
        fd, tmp = tempfile.mkstemp(prefix=dest.name, suffix=".tmp", dir=self.root)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(header + b"\n" + body)
            os.replace(tmp, dest)       # atomic, so concurrent opens never see a partial file
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return dest
