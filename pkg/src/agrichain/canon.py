"""Canonical, platform-stable binary encoding for block payloads.

Every value is a one-byte type tag followed by a fixed-width body. Integers are
signed 64-bit big-endian, floats IEEE-754 binary64 big-endian, containers carry
a u32 length, and dict keys are sorted by their UTF-8 bytes, so equal values
always encode to identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

_NONE, _FALSE, _TRUE, _INT, _FLOAT, _BYTES, _STR, _LIST, _DICT = range(9)


def encode(value) -> bytes:
    out = bytearray()
    _encode(value, out)
    return bytes(out)


def _encode(value, out: bytearray) -> None:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    elif isinstance(value, np.generic):
        value = value.item()

    if value is None:
        out.append(_NONE)
    elif value is True:
        out.append(_TRUE)
    elif value is False:
        out.append(_FALSE)
    elif isinstance(value, int):
        out.append(_INT)
        out += struct.pack(">q", value)
    elif isinstance(value, float):
        out.append(_FLOAT)
        out += struct.pack(">d", value)
    elif isinstance(value, (bytes, bytearray)):
        out.append(_BYTES)
        out += struct.pack(">I", len(value))
        out += value
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(_STR)
        out += struct.pack(">I", len(raw))
        out += raw
    elif isinstance(value, (list, tuple)):
        out.append(_LIST)
        out += struct.pack(">I", len(value))
        for item in value:
            _encode(item, out)
    elif isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: kv[0].encode("utf-8"))
        out.append(_DICT)
        out += struct.pack(">I", len(items))
        for key, item in items:
            if not isinstance(key, str):
                raise TypeError("dict keys must be str")
            _encode(key, out)
            _encode(item, out)
    else:
        raise TypeError(f"cannot canonically encode {type(value).__name__}")


def decode(data: bytes):
    value, pos = _decode(memoryview(data), 0)
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes after canonical value")
    return value


def _take(buf, pos, n):
    if pos + n > len(buf):
        raise ValueError("truncated canonical value")
    return bytes(buf[pos:pos + n]), pos + n


def _decode(buf, pos):
    tag, pos = _take(buf, pos, 1)
    tag = tag[0]
    if tag == _NONE:
        return None, pos
    if tag == _TRUE:
        return True, pos
    if tag == _FALSE:
        return False, pos
    if tag == _INT:
        raw, pos = _take(buf, pos, 8)
        return struct.unpack(">q", raw)[0], pos
    if tag == _FLOAT:
        raw, pos = _take(buf, pos, 8)
        return struct.unpack(">d", raw)[0], pos
    if tag in (_BYTES, _STR, _LIST, _DICT):
        raw, pos = _take(buf, pos, 4)
        n = struct.unpack(">I", raw)[0]
        if tag == _BYTES:
            return _take(buf, pos, n)
        if tag == _STR:
            raw, pos = _take(buf, pos, n)
            return raw.decode("utf-8"), pos
        if tag == _LIST:
            items = []
            for _ in range(n):
                item, pos = _decode(buf, pos)
                items.append(item)
            return items, pos
        result = {}
        for _ in range(n):
            key, pos = _decode(buf, pos)
            if not isinstance(key, str):
                raise ValueError("dict key is not a string")
            result[key], pos = _decode(buf, pos)
        return result, pos
    raise ValueError(f"unknown type tag {tag}")
