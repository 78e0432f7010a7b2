"""The accepted regex dialect: a subset of Python ``re``.

Accepted: literals, escapes, character classes (incl. \\d \\w \\s and negations),
alternation, ``^``/``$``/``\\b``/``\\B``/``\\A``/``\\Z`` anchors, ``.``, greedy and lazy
repetition and plain or non-capturing groups. Lookaround, backreferences,
conditionals, named groups and inline flags are rejected.
"""
from __future__ import annotations

import re

try:                                     # pragma: no cover - depends on interpreter version
    import re._parser as _sre_parse      # 3.11+
except ImportError:                      # pragma: no cover
    import sre_parse as _sre_parse

from .errors import InvalidPattern

DIALECT = "py-re-subset/1"

_ALLOWED = {"LITERAL", "NOT_LITERAL", "ANY", "IN", "BRANCH", "SUBPATTERN", "MAX_REPEAT", "MIN_REPEAT",
            "AT", "NEGATE", "RANGE", "CATEGORY"}


def _walk(parsed):
    for op, av in parsed:
        name = str(op)
        if name not in _ALLOWED:
            raise InvalidPattern(f"unsupported regex construct: {name.lower()}")
        if name == "SUBPATTERN":
            group, add_flags, del_flags, sub = av
            if add_flags or del_flags:
                raise InvalidPattern("inline flags are not supported")
            _walk(sub)
        elif name in ("MAX_REPEAT", "MIN_REPEAT"):
            _walk(av[2])
        elif name == "BRANCH":
            for alt in av[1]:
                _walk(alt)
        elif name == "IN":
            _walk(av)


def compile_pattern(pattern: str) -> re.Pattern:
    if not isinstance(pattern, str):
        raise InvalidPattern("pattern must be text")
    try:
        parsed = _sre_parse.parse(pattern)
    except re.error as exc:
        raise InvalidPattern(f"invalid regex {pattern!r}: {exc}") from None
    if parsed.state.groupdict:
        raise InvalidPattern("named groups are not supported")
    if parsed.state.flags & ~re.UNICODE:
        raise InvalidPattern("inline flags are not supported")
    _walk(parsed)
    return re.compile(pattern)
