"""Tiny sectioned key/value text format shared by model and scenario files.

Syntax::

    # comment
    [section]
    key = value        ; values are arbitrary strings, parsed by the caller

Keys are case-sensitive and must be unique within their section.
"""
from __future__ import annotations

from .errors import ScenarioError

__all__ = ["parse_sections", "read_sections", "format_sections"]


def parse_sections(text: str, filename: str = "<string>"):
    """Parse into {section: {key: (value, line_number)}}."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ScenarioError(f"{filename}:{lineno}: empty section name")
            if name in sections:
                raise ScenarioError(f"{filename}:{lineno}: duplicate section "
                                    f"[{name}]")
            current = sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ScenarioError(f"{filename}:{lineno}: expected 'key = value', "
                                f"got {line!r}")
        if current is None:
            raise ScenarioError(f"{filename}:{lineno}: key/value before any "
                                f"[section] header")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in current:
            raise ScenarioError(f"{filename}:{lineno}: duplicate key {key!r}")
        current[key] = (value.strip(), lineno)
    return sections


def read_sections(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    return parse_sections(text, filename=str(path))


def format_sections(sections: dict) -> str:
    """Inverse of parse_sections for plain {section: {key: value}} input."""
    parts = []
    for name, body in sections.items():
        parts.append(f"[{name}]")
        for key, value in body.items():
            parts.append(f"{key} = {value}")
        parts.append("")
    return "\n".join(parts)
