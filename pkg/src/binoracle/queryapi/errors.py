"""The three query error codes. Each subclasses the builtin the interface documents."""
from __future__ import annotations


class QueryError(Exception):
    code = "QueryError"

    def __str__(self):
        # KeyError would otherwise repr() its message
        return str(self.args[0]) if self.args else self.code


class UnknownName(QueryError, KeyError):
    code = "UnknownName"


class InvalidPattern(QueryError, ValueError):
    code = "InvalidPattern"


class InvalidPage(QueryError, ValueError):
    code = "InvalidPage"


ERROR_CODES = ("UnknownName", "InvalidPattern", "InvalidPage")
