# Folder: platter/pl_core
# File:   errors.py

from __future__ import annotations

from typing import Any, Dict, List, Optional

__all__ = ["PlatterError", "ConfigError", "DataError", "NumericError", "EXIT_OK"]

EXIT_OK = 0


class PlatterError(Exception):
    """Base error. `exit_code` is what the CLI returns when this escapes a command."""

    exit_code = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.__class__.__name__, "message": self.message, "details": self.details}


class ConfigError(PlatterError):
    exit_code = 2

    def __init__(self, message: str, problems: Optional[List[str]] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.problems: List[str] = list(problems or [])

    def __str__(self) -> str:
        if not self.problems:
            return self.message
        return self.message + "\n" + "\n".join(f"  - {p}" for p in self.problems)

    def to_dict(self) -> Dict[str, Any]:
        out = super().to_dict()
        out["problems"] = list(self.problems)
        return out


class DataError(PlatterError):
    exit_code = 3


class NumericError(PlatterError):
    exit_code = 4
