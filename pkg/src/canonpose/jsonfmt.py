"""Deterministic JSON/CSV formatting.

Floats are written with 17 significant digits, enough to round-trip any
64-bit value exactly, so re-serializing loaded data reproduces the original
bytes. Dict keys keep insertion order; nothing here depends on hash order or
locale.
"""

from __future__ import annotations

import json

import numpy as np


def format_float(value: float) -> str:
    """17-significant-digit decimal form of a float (round-trip exact)."""
    return format(float(value), ".17g")


def dumps(obj, indent: int | None = None) -> str:
    """Serialize nested dicts/lists/scalars with deterministic float text."""
    return "".join(_emit(obj, indent, 0))


def _emit(obj, indent, depth):
    if isinstance(obj, dict):
        yield from _emit_container(
            obj.items(), indent, depth, "{}", lambda item, d: _emit_pair(item, indent, d)
        )
    elif isinstance(obj, (list, tuple)):
        yield from _emit_container(obj, indent, depth, "[]", lambda item, d: _emit(item, indent, d))
    elif isinstance(obj, str):
        yield json.dumps(obj)
    elif isinstance(obj, bool) or obj is None:
        yield json.dumps(obj)
    elif isinstance(obj, (int, np.integer)):
        yield str(int(obj))
    elif isinstance(obj, (float, np.floating)):
        yield format_float(obj)
    elif isinstance(obj, np.ndarray):
        yield from _emit(obj.tolist(), indent, depth)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit_pair(item, indent, depth):
    key, value = item
    yield json.dumps(str(key))
    yield ": "
    yield from _emit(value, indent, depth)


def _emit_container(items, indent, depth, brackets, emit_item):
    items = list(items)
    if not items:
        yield brackets
        return
    open_b, close_b = brackets
    if indent is None:
        yield open_b
        for i, item in enumerate(items):
            if i:
                yield ", "
            yield from emit_item(item, depth)
        yield close_b
    else:
        pad = " " * (indent * (depth + 1))
        yield open_b + "\n"
        for i, item in enumerate(items):
            if i:
                yield ",\n"
            yield pad
            yield from emit_item(item, depth + 1)
        yield "\n" + " " * (indent * depth) + close_b
