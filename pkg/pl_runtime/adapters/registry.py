# Folder: platter/pl_runtime/adapters
# File:   registry.py
# Binds the command suite by stable names; the CLI and the dev API both dispatch through it.

from __future__ import annotations

from typing import Any, Callable, Dict, Optional

from pl_core.errors import ConfigError
from pl_runtime.cli.commands import COMMANDS, execute, replay, runs_table


def build_registry() -> Dict[str, Callable[..., Any]]:
    """
    name -> callable. Command entries take (output_dir=None, **kwargs) and return the execute() result;
    "replay" and "runs" are the two bookkeeping views.
    """
    reg: Dict[str, Callable[..., Any]] = {}
    for name, fn in COMMANDS.items():
        reg[name] = _bound(name, fn)
    reg["replay"] = replay
    reg["runs"] = runs_table
    return reg


def _bound(name: str, fn: Callable[..., None]) -> Callable[..., Dict[str, Any]]:
    def run(output_dir: Optional[str] = None, **kwargs: Any) -> Dict[str, Any]:
        return execute(name, fn, output_dir=output_dir, **kwargs)

    run.__name__ = f"run_{name}"
    run.__doc__ = fn.__doc__
    return run


def dispatch(name: str, **kwargs: Any) -> Any:
    reg = build_registry()
    if name not in reg:
        raise ConfigError(f"unknown command {name!r}", [f"known: {', '.join(sorted(reg))}"])
    return reg[name](**kwargs)
