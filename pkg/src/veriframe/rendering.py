"""Rendering of human-readable output from Jinja2 templates shipped inside
the package.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional, Union, TYPE_CHECKING

if TYPE_CHECKING:
    from jinja2 import Environment

__all__ = ("TemplateRenderer", "format_frame_ranges", "render_template")


TEMPLATE_DIR = Path(__file__).parent / "templates"


class TemplateRenderer:
    """Renders templates from files in a given folder on the filesystem."""

    _root: Path
    """Root folder that contains the templates."""

    _jinja_env: Environment
    """Jinja2 environment that resolves template names from the filesystem."""

    def __init__(self, root: Union[str, Path] = TEMPLATE_DIR):
        from jinja2 import Environment, FileSystemLoader, StrictUndefined

        self._root = Path(root)
        self._jinja_env = Environment(
            loader=FileSystemLoader(self._root),
            autoescape=False,
            keep_trailing_newline=True,
            trim_blocks=True,
            lstrip_blocks=True,
            undefined=StrictUndefined,
        )
        self._jinja_env.filters["frame_ranges"] = format_frame_ranges

    def __call__(self, name: str, **context: Any) -> str:
        return self._jinja_env.get_template(f"{name}.txt.j2").render(**context)


def format_frame_ranges(frame_ids, limit: int = 20) -> str:
    """Formats a sorted sequence of frame ids compactly, e.g. ``0-29, 31``."""
    ranges = []
    start: Optional[int] = None
    prev: Optional[int] = None
    for frame_id in frame_ids:
        if prev is not None and frame_id == prev + 1:
            prev = frame_id
            continue
        if start is not None:
            ranges.append((start, prev))
        start = prev = frame_id
    if start is not None:
        ranges.append((start, prev))

    parts = [str(a) if a == b else f"{a}-{b}" for a, b in ranges[:limit]]
    if len(ranges) > limit:
        parts.append(f"... ({len(ranges) - limit} more)")
    return ", ".join(parts)


_default_renderer: Optional[TemplateRenderer] = None


def render_template(name: str, **context: Any) -> str:
    """Renders one of the templates shipped with the package."""
    global _default_renderer

    if _default_renderer is None:
        _default_renderer = TemplateRenderer()
    return _default_renderer(name, **context)
