"""Reference output encoders and left-to-right encoder chains.

``escapeHtml`` deliberately leaves the apostrophe alone, like the legacy
body encoders that get misused in JavaScript contexts.  ``escapeHtmlFull`` is
the fixed variant.
"""

from __future__ import annotations

from typing import Callable, Iterable
from urllib.parse import quote

from .errors import UnknownEncoder

__all__ = ["ENCODERS", "encode", "apply_chain", "parse_chain"]


def _table_encoder(table: dict[str, str]) -> Callable[[str], str]:
    trans = str.maketrans(table)

    def encoder(text: str) -> str:
        return text.translate(trans)

    return encoder


_HTML = {"&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;"}
_HTML_FULL = {**_HTML, "'": "&#x27;"}
_HTML_DECIMAL = {c: f"&#{ord(c)};" for c in "&<>\"'"}
_JAVASCRIPT = {"'": "\\'", '"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _identity(text: str) -> str:
    return text


def _escape_url(text: str) -> str:
    # quote() keeps A-Za-z0-9 and "_.-~" unescaped when safe is empty.
    return quote(text, safe="", encoding="utf-8", errors="surrogatepass")


ENCODERS: dict[str, Callable[[str], str]] = {
    "identity": _identity,
    "escapeHtml": _table_encoder(_HTML),
    "escapeHtmlFull": _table_encoder(_HTML_FULL),
    "escapeJavaScript": _table_encoder(_JAVASCRIPT),
    "escapeHtmlDecimal": _table_encoder(_HTML_DECIMAL),
    "escapeUrl": _escape_url,
}


def encode(name: str, text: str) -> str:
    try:
        encoder = ENCODERS[name]
    except KeyError:
        raise UnknownEncoder(name) from None
    return encoder(text)


def apply_chain(chain: Iterable[str], text: str) -> str:
    """Apply encoders left to right: the first name in ``chain`` runs first."""
    names = tuple(chain)
    if not names:
        raise ValueError("an encoder chain needs at least one encoder")
    for name in names:
        text = encode(name, text)
    return text


def parse_chain(spec: str | Iterable[str]) -> tuple[str, ...]:
    """Turn ``"escapeHtmlDecimal,escapeJavaScript"`` (or a list) into a
    validated chain tuple."""
    names = spec.split(",") if isinstance(spec, str) else list(spec)
    chain = tuple(n.strip() for n in names if n.strip())
    if not chain:
        raise ValueError("an encoder chain needs at least one encoder")
    for name in chain:
        if name not in ENCODERS:
            raise UnknownEncoder(name)
    return chain
