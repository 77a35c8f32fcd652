"""
Console status lines
"""
import sys

import config

_PREFIX = {
    "info": "🔍",
    "ok": "✅",
    "error": "❌",
    "warn": "⚠️",
    "run": "🚀",
    "save": "💾",
}


def status(message: str, kind: str = "info") -> None:
    """Print a status line when verbose output is enabled"""
    if config.VERBOSE:
        print(f"{_PREFIX.get(kind, '•')} {message}")


def warn(message: str) -> None:
    print(f"{_PREFIX['warn']} {message}", file=sys.stderr)
