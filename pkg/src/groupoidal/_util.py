"""Shared helpers: stable identifier ordering and identifier formatting."""

from __future__ import annotations


def sort_key(obj):
    """Stable total order on identifiers (ints, strings, nested tuples).

    Used wherever a canonical orbit representative or a deterministic
    iteration order is needed.  The order is arbitrary but reproducible.
    """
    if isinstance(obj, bool):
        return (0, int(obj))
    if isinstance(obj, int):
        return (0, obj)
    if isinstance(obj, str):
        return (1, obj)
    if isinstance(obj, tuple):
        return (2, len(obj)) + tuple(sort_key(o) for o in obj)
    return (3, repr(obj))


def canonical_min(items):
    """Minimal element of ``items`` under :func:`sort_key`."""
    return min(items, key=sort_key)


def fmt(obj) -> str:
    """Compact, whitespace-free text form of an identifier.

    Tuples render as ``(a,b)``; the output is parseable back by the model
    reader and safe to embed in reports.
    """
    if isinstance(obj, tuple):
        return "(" + ",".join(fmt(o) for o in obj) + ")"
    return str(obj)


def parse_ident(text: str):
    """Inverse of :func:`fmt`: parse ``(a,(b,c))`` style identifiers."""
    ident, rest = _parse_ident_prefix(text)
    if rest:
        raise ValueError(f"trailing characters {rest!r} in identifier {text!r}")
    return ident


def _parse_ident_prefix(text: str):
    if not text:
        raise ValueError("empty identifier")
    if text[0] == "(":
        items = []
        rest = text[1:]
        while True:
            item, rest = _parse_ident_prefix(rest)
            items.append(item)
            if not rest:
                raise ValueError(f"unterminated tuple in identifier {text!r}")
            sep, rest = rest[0], rest[1:]
            if sep == ")":
                return tuple(items), rest
            if sep != ",":
                raise ValueError(f"bad separator {sep!r} in identifier {text!r}")
    else:
        i = 0
        while i < len(text) and text[i] not in "(),":
            i += 1
        if i == 0:
            raise ValueError(f"bad identifier {text!r}")
        atom = text[:i]
        try:
            return int(atom), text[i:]
        except ValueError:
            return atom, text[i:]
