"""A small browser model: HTML tokenizer, script-region collection and a
lexical JavaScript check.

The model never runs JavaScript.  A payload counts as executed when the
sentinel identifier appears as a call in code the browser would hand to its
JavaScript interpreter: ``<script>`` bodies, ``on*`` attributes (after the
single entity-decoding hop the HTML parser performs on attribute values),
``javascript:`` URLs, and, with ``legacy=True``, CSS ``expression()`` and
``url(javascript:...)``.  Every event handler is assumed to fire.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .attack_fsm import ATTRIBUTE_VALUE, JAVASCRIPT, JAVASCRIPT_DOUBLE, TAG_CONTENT, StartContext
from .errors import PlaceholderDuplicated, PlaceholderMissing

DEFAULT_SENTINEL = "attack"
PLACEHOLDER = "{{INJECT}}"

RAW_TEXT_ELEMENTS = frozenset({"script", "style", "title", "textarea"})
URL_ATTRIBUTES = frozenset({"href", "src"})
_WS = " \t\n\r\f"


@dataclass(frozen=True)
class Attribute:
    name: str
    value: str
    quote: str = ""
    span: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class HtmlEvent:
    """One token of the HTML stream.

    ``kind`` is one of ``Text``, ``StartTag``, ``EndTag``, ``Comment`` or
    ``RawText``.  ``name`` holds the tag (or raw-text element) name and
    ``data`` the text, comment or raw-text body.
    """

    kind: str
    span: tuple[int, int]
    name: str = ""
    data: str = ""
    attributes: tuple[Attribute, ...] = ()
    self_closing: bool = False
    malformed: bool = False

    def attribute_map(self) -> dict[str, Attribute]:
        """Attributes by name; on duplicates the first one wins, as in HTML5."""
        out: dict[str, Attribute] = {}
        for attr in self.attributes:
            out.setdefault(attr.name, attr)
        return out


@dataclass
class TokenizerSnapshot:
    state: str
    tag_name: str = ""
    attr_name: str = ""
    attr_value: str = ""
    raw_element: str = ""
    raw_body: str = ""


class _Tokenizer:
    """Single forward pass over the document, loosely following the HTML5
    tokenizer.  Handlers take the current index and return the next one."""

    def __init__(self, doc: str, legacy: bool = False, stop: int | None = None) -> None:
        self.doc = doc
        self.legacy = legacy
        self.stop = stop
        self.events: list[HtmlEvent] = []
        self.state = "Data"
        self.text_start = 0
        self.tag_start = 0
        self.is_end = False
        self.tag_name: list[str] = []
        self.attrs: list[Attribute] = []
        self.attr_name: list[str] | None = None
        self.attr_value: list[str] = []
        self.attr_start = 0
        self.attr_quote = ""
        self.self_closing = False
        self.raw_element = ""
        self.raw_start = 0
        self.comment_start = 0
        self.handlers = {
            "Data": self._data,
            "TagOpen": self._tag_open,
            "EndTagOpen": self._end_tag_open,
            "TagName": self._tag_name,
            "BeforeAttrName": self._before_attr_name,
            "AttrName": self._attr_name,
            "AfterAttrName": self._after_attr_name,
            "BeforeAttrValue": self._before_attr_value,
            "AttrValueDouble": self._attr_value_quoted,
            "AttrValueSingle": self._attr_value_quoted,
            "AttrValueBacktick": self._attr_value_quoted,
            "AttrValueUnquoted": self._attr_value_unquoted,
            "SelfClosingStartTag": self._self_closing_start_tag,
            "RawText": self._raw_text,
            "Comment": self._comment,
            "BogusComment": self._bogus_comment,
        }

    # -- driver ---------------------------------------------------------------

    def run(self) -> int:
        i, n = 0, len(self.doc)
        while i < n:
            if self.stop is not None and i >= self.stop:
                return i
            i = self.handlers[self.state](i)
        if self.stop is None or self.stop >= n:
            self._eof(n)
        return n

    def _clamp(self, j: int, i: int) -> int:
        if self.stop is not None and i < self.stop < j:
            return self.stop
        return j

    def snapshot(self) -> TokenizerSnapshot:
        state = self.state
        if state == "RawText":
            state = f"RawText({self.raw_element})"
        pos = self.stop if self.stop is not None else len(self.doc)
        return TokenizerSnapshot(
            state=state,
            tag_name="".join(self.tag_name),
            attr_name="".join(self.attr_name or ()),
            attr_value="".join(self.attr_value),
            raw_element=self.raw_element,
            raw_body=self.doc[self.raw_start:pos] if self.state == "RawText" else "",
        )

    # -- emit helpers ---------------------------------------------------------

    def _emit_text(self, end: int) -> None:
        if end > self.text_start:
            self.events.append(HtmlEvent("Text", (self.text_start, end), data=self.doc[self.text_start:end]))

    def _begin_tag(self, i: int, first: str, end_tag: bool) -> None:
        self.is_end = end_tag
        self.tag_name = [first.lower()]
        self.attrs = []
        self.attr_name = None
        self.self_closing = False
        self.state = "TagName"

    def _start_attr(self, i: int, first: str) -> None:
        self.attr_name = [first.lower()]
        self.attr_value = []
        self.attr_start = i
        self.attr_quote = ""
        self.state = "AttrName"

    def _finish_attr(self, end: int) -> None:
        if self.attr_name is not None:
            self.attrs.append(Attribute("".join(self.attr_name), "".join(self.attr_value),
                                        self.attr_quote, (self.attr_start, end)))
        self.attr_name = None
        self.attr_value = []

    def _emit_tag(self, end: int, malformed: bool = False) -> None:
        self._finish_attr(end)
        name = "".join(self.tag_name)
        if self.is_end:
            self.events.append(HtmlEvent("EndTag", (self.tag_start, end), name=name, malformed=malformed))
        else:
            self.events.append(HtmlEvent("StartTag", (self.tag_start, end), name=name,
                                         attributes=tuple(self.attrs),
                                         self_closing=self.self_closing, malformed=malformed))
        if not self.is_end and not malformed and name in RAW_TEXT_ELEMENTS:
            self.state = "RawText"
            self.raw_element = name
            self.raw_start = end
        else:
            self.state = "Data"
            self.text_start = end

    def _eof(self, n: int) -> None:
        state = self.state
        if state == "Data":
            self._emit_text(n)
        elif state in ("TagOpen", "EndTagOpen"):
            self.text_start = self.tag_start
            self._emit_text(n)
        elif state == "RawText":
            self.events.append(HtmlEvent("RawText", (self.raw_start, n), name=self.raw_element,
                                         data=self.doc[self.raw_start:n], malformed=True))
        elif state in ("Comment", "BogusComment"):
            self.events.append(HtmlEvent("Comment", (self.tag_start, n),
                                         data=self.doc[self.comment_start:n], malformed=True))
        else:
            self._emit_tag(n, malformed=True)

    # -- states ---------------------------------------------------------------

    def _data(self, i: int) -> int:
        if self.doc[i] == "<":
            self._emit_text(i)
            self.tag_start = i
            self.state = "TagOpen"
            return i + 1
        j = self.doc.find("<", i)
        return self._clamp(len(self.doc) if j < 0 else j, i)

    def _tag_open(self, i: int) -> int:
        c = self.doc[i]
        if c.isascii() and c.isalpha():
            self._begin_tag(i, c, end_tag=False)
            return i + 1
        if c == "/":
            self.state = "EndTagOpen"
            return i + 1
        if c == "!":
            if self.doc.startswith("--", i + 1):
                self.state = "Comment"
                self.comment_start = i + 3
                return i + 3
            self.state = "BogusComment"
            self.comment_start = i + 1
            return i + 1
        if c == "?":
            self.state = "BogusComment"
            self.comment_start = i
            return i
        # Not a tag after all: the "<" is plain text.
        self.state = "Data"
        self.text_start = self.tag_start
        return i

    def _end_tag_open(self, i: int) -> int:
        c = self.doc[i]
        if c.isascii() and c.isalpha():
            self._begin_tag(i, c, end_tag=True)
            return i + 1
        if c == ">":
            self.state = "Data"
            self.text_start = i + 1
            return i + 1
        self.state = "BogusComment"
        self.comment_start = i
        return i

    def _tag_name(self, i: int) -> int:
        c = self.doc[i]
        if c in _WS:
            self.state = "BeforeAttrName"
        elif c == "/":
            self.state = "SelfClosingStartTag"
        elif c == ">":
            self._emit_tag(i + 1)
        else:
            self.tag_name.append(c.lower())
        return i + 1

    def _before_attr_name(self, i: int) -> int:
        c = self.doc[i]
        if c in _WS:
            pass
        elif c == "/":
            self.state = "SelfClosingStartTag"
        elif c == ">":
            self._emit_tag(i + 1)
        else:
            self._start_attr(i, c)
        return i + 1

    def _attr_name(self, i: int) -> int:
        c = self.doc[i]
        if c in _WS:
            self.state = "AfterAttrName"
        elif c == "/":
            self._finish_attr(i)
            self.state = "SelfClosingStartTag"
        elif c == "=":
            self.state = "BeforeAttrValue"
        elif c == ">":
            self._emit_tag(i + 1)
        else:
            self.attr_name.append(c.lower())
        return i + 1

    def _after_attr_name(self, i: int) -> int:
        c = self.doc[i]
        if c in _WS:
            pass
        elif c == "/":
            self._finish_attr(i)
            self.state = "SelfClosingStartTag"
        elif c == "=":
            self.state = "BeforeAttrValue"
        elif c == ">":
            self._emit_tag(i + 1)
        else:
            self._finish_attr(i)
            self._start_attr(i, c)
        return i + 1

    def _before_attr_value(self, i: int) -> int:
        c = self.doc[i]
        if c in _WS:
            return i + 1
        if c == '"':
            self.state, self.attr_quote = "AttrValueDouble", c
        elif c == "'":
            self.state, self.attr_quote = "AttrValueSingle", c
        elif c == "`" and self.legacy:
            self.state, self.attr_quote = "AttrValueBacktick", c
        elif c == ">":
            self._emit_tag(i + 1)
        else:
            self.state = "AttrValueUnquoted"
            return i
        return i + 1

    def _attr_value_quoted(self, i: int) -> int:
        c = self.doc[i]
        if c == self.attr_quote:
            self._finish_attr(i + 1)
            self.state = "BeforeAttrName"
        else:
            self.attr_value.append(c)
        return i + 1

    def _attr_value_unquoted(self, i: int) -> int:
        c = self.doc[i]
        if c in _WS:
            self._finish_attr(i)
            self.state = "BeforeAttrName"
        elif c == ">":
            self._emit_tag(i + 1)
        else:
            self.attr_value.append(c)
        return i + 1

    def _self_closing_start_tag(self, i: int) -> int:
        if self.doc[i] == ">":
            self.self_closing = True
            self._emit_tag(i + 1)
            return i + 1
        self.state = "BeforeAttrName"
        return i

    def _raw_text(self, i: int) -> int:
        doc, name = self.doc, self.raw_element
        j = doc.find("</", i)
        if j < 0:
            return self._clamp(len(doc), i)
        if j > i:
            return self._clamp(j, i)
        after = i + 2 + len(name)
        if doc[i + 2:after].lower() == name and after < len(doc) and doc[after] in _WS + "/>":
            self.events.append(HtmlEvent("RawText", (self.raw_start, i), name=name,
                                         data=doc[self.raw_start:i]))
            self.tag_start = i
            self.is_end = True
            self.tag_name = list(name)
            self.attrs = []
            self.attr_name = None
            self.state = "TagName"
            return after
        return i + 1

    def _comment(self, i: int) -> int:
        doc = self.doc
        if i == self.comment_start and (doc.startswith(">", i) or doc.startswith("->", i)):
            end = doc.index(">", i) + 1
            self.events.append(HtmlEvent("Comment", (self.tag_start, end)))
            self.state, self.text_start = "Data", end
            return end
        j = doc.find("-->", i)
        if j < 0:
            return self._clamp(len(doc), i)
        if self.stop is not None and i < self.stop <= j:
            return self.stop
        self.events.append(HtmlEvent("Comment", (self.tag_start, j + 3), data=doc[self.comment_start:j]))
        self.state, self.text_start = "Data", j + 3
        return j + 3

    def _bogus_comment(self, i: int) -> int:
        doc = self.doc
        j = doc.find(">", i)
        if j < 0:
            return self._clamp(len(doc), i)
        if self.stop is not None and i < self.stop <= j:
            return self.stop
        self.events.append(HtmlEvent("Comment", (self.tag_start, j + 1), data=doc[self.comment_start:j]))
        self.state, self.text_start = "Data", j + 1
        return j + 1


def _as_text(document: str | bytes) -> str:
    # latin-1 maps each byte to one character, so spans stay byte offsets.
    return document.decode("latin-1") if isinstance(document, (bytes, bytearray)) else document


def tokenize(document: str | bytes, legacy: bool = False) -> list[HtmlEvent]:
    """Split a document into HTML events.  Never raises on malformed input;
    constructs cut off by the end of input come back with ``malformed=True``.

    ``legacy`` enables backtick-quoted attribute values (old IE).
    """
    tokenizer = _Tokenizer(_as_text(document), legacy)
    tokenizer.run()
    return tokenizer.events


def tokenizer_state_at(document: str, pos: int, legacy: bool = False) -> TokenizerSnapshot:
    tokenizer = _Tokenizer(document, legacy, stop=pos)
    tokenizer.run()
    return tokenizer.snapshot()


# -- entities -----------------------------------------------------------------

_ENTITY_RE = re.compile(r"&(?:#[xX]([0-9a-fA-F]+);|#([0-9]+);|(lt|gt|amp|quot|apos);)")
_NAMED = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}


def _entity(match: re.Match) -> str:
    if match.group(3):
        return _NAMED[match.group(3)]
    digits = match.group(1) or match.group(2)
    cp = int(digits, 16 if match.group(1) else 10)
    if cp == 0 or cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
        return "\ufffd"
    return chr(cp)


def decode_entities(text: str) -> str:
    """One decoding pass: ``&amp;lt;`` becomes ``&lt;``, not ``<``."""
    if "&" not in text:
        return text
    return _ENTITY_RE.sub(_entity, text)


# -- script regions -----------------------------------------------------------

@dataclass(frozen=True)
class ScriptRegion:
    """Code the JavaScript interpreter would receive.

    ``source`` is ``ScriptElementBody``, ``EventHandlerAttribute``,
    ``JavascriptUrl`` or ``CssExpression``; ``attribute`` names the attribute
    for the attribute-borne kinds.
    """

    source: str
    code: str
    span: tuple[int, int]
    attribute: str | None = None
    legacy: bool = False

    def describe(self) -> str:
        return self.source if self.attribute is None else f"{self.source}({self.attribute})"

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "attribute": self.attribute,
            "code": self.code,
            "span": list(self.span),
            "legacy": self.legacy,
        }


_CSS_EXPRESSION = re.compile(r"expression\s*\(", re.IGNORECASE)
_CSS_JS_URL = re.compile(r"url\s*\(\s*(['\"]?)\s*javascript:", re.IGNORECASE)


def _balanced_argument(text: str, start: int) -> str:
    """Text from ``start`` up to the ``)`` closing an already-open paren."""
    depth, quote, i = 1, "", start
    while i < len(text):
        c = text[i]
        if quote:
            if c == "\\":
                i += 1
            elif c == quote:
                quote = ""
        elif c in "'\"":
            quote = c
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                break
        i += 1
    return text[start:i]


def _css_scripts(css: str) -> list[str]:
    """JavaScript reachable from CSS through the IE-era hooks."""
    found: list[tuple[int, str]] = []
    for m in _CSS_EXPRESSION.finditer(css):
        arg = _balanced_argument(css, m.end()).strip()
        # A quoted argument is treated as the expression text itself.
        if len(arg) >= 2 and arg[0] == arg[-1] and arg[0] in "'\"":
            arg = arg[1:-1]
        found.append((m.start(), arg))
    for m in _CSS_JS_URL.finditer(css):
        rest = css[m.end():]
        end = rest.find(m.group(1) or ")")
        found.append((m.start(), rest if end < 0 else rest[:end]))
    return [code for _, code in sorted(found)]


def _javascript_url_code(value: str) -> str | None:
    url = value.lstrip("".join(chr(c) for c in range(0x21)))
    url = url.replace("\t", "").replace("\n", "").replace("\r", "")
    if url[:11].lower() == "javascript:":
        return url[11:]
    return None


def collect_script_regions(events: list[HtmlEvent]) -> list[ScriptRegion]:
    regions: list[ScriptRegion] = []
    for event in events:
        if event.kind == "RawText" and event.name == "script":
            regions.append(ScriptRegion("ScriptElementBody", event.data, event.span))
        elif event.kind == "RawText" and event.name == "style":
            for code in _css_scripts(event.data):
                regions.append(ScriptRegion("CssExpression", code, event.span, legacy=True))
        elif event.kind == "StartTag" and not event.malformed:
            for attr in event.attribute_map().values():
                value = decode_entities(attr.value)
                if attr.name.startswith("on"):
                    regions.append(ScriptRegion("EventHandlerAttribute", value, attr.span, attr.name))
                elif attr.name in URL_ATTRIBUTES:
                    code = _javascript_url_code(value)
                    if code is not None:
                        regions.append(ScriptRegion("JavascriptUrl", code, attr.span, attr.name))
                elif attr.name == "style":
                    for code in _css_scripts(value):
                        regions.append(ScriptRegion("CssExpression", code, attr.span, attr.name, legacy=True))
    return regions


# -- JavaScript lexing --------------------------------------------------------

_NORMAL, _SINGLE, _DOUBLE, _TEMPLATE, _LINE, _BLOCK = (
    "Normal", "SingleQuoteString", "DoubleQuoteString", "TemplateString", "LineComment", "BlockComment")
_LINE_TERMINATORS = "\n\r\u2028\u2029"


def _ident_char(c: str) -> bool:
    return c.isalnum() or c in "_$"


def _scan_js(code: str, sentinel: str | None = None) -> tuple[bool, str]:
    """Lex ``code``; return (sentinel call seen in code position, final state)."""
    state = _NORMAL
    templates: list[int] = []  # brace depth inside each open ${...}
    i, n = 0, len(code)
    while i < n:
        c = code[i]
        if state == _NORMAL:
            if c == "'":
                state = _SINGLE
            elif c == '"':
                state = _DOUBLE
            elif c == "`":
                state = _TEMPLATE
            elif c == "/" and code.startswith("//", i):
                state, i = _LINE, i + 1
            elif c == "/" and code.startswith("/*", i):
                state, i = _BLOCK, i + 1
            elif c == "<" and code.startswith("<!--", i):
                state, i = _LINE, i + 3
            elif c == "{" and templates:
                templates[-1] += 1
            elif c == "}" and templates:
                if templates[-1] == 0:
                    templates.pop()
                    state = _TEMPLATE
                else:
                    templates[-1] -= 1
            elif c.isdigit():
                j = i + 1
                while j < n and (_ident_char(code[j]) or code[j] == "."):
                    j += 1
                i = j
                continue
            elif c.isalpha() or c in "_$":
                j = i + 1
                while j < n and _ident_char(code[j]):
                    j += 1
                if sentinel is not None and code[i:j] == sentinel:
                    k = j
                    while k < n and code[k].isspace():
                        k += 1
                    if k < n and code[k] == "(":
                        return True, state
                i = j
                continue
        elif state in (_SINGLE, _DOUBLE):
            if c == "\\":
                i += 1
            elif c == ("'" if state == _SINGLE else '"') or c in "\n\r":
                state = _NORMAL
        elif state == _TEMPLATE:
            if c == "\\":
                i += 1
            elif c == "`":
                state = _NORMAL
            elif c == "$" and code.startswith("${", i):
                templates.append(0)
                state, i = _NORMAL, i + 1
        elif state == _LINE:
            if c in _LINE_TERMINATORS:
                state = _NORMAL
        elif state == _BLOCK:
            if c == "*" and code.startswith("*/", i):
                state, i = _NORMAL, i + 1
        i += 1
    return False, state


def js_executes(sentinel: str, code: str) -> bool:
    """True iff ``sentinel`` appears as a whole identifier outside strings and
    comments and is immediately (modulo whitespace) followed by ``(``."""
    return _scan_js(code, sentinel)[0]


def js_state(code: str) -> str:
    """Lexer state after reading all of ``code``."""
    return _scan_js(code)[1]


# -- interpretation -----------------------------------------------------------

@dataclass
class ExecutionTrace:
    regions: list[ScriptRegion]
    executed: list[tuple[int, str]] = field(default_factory=list)
    sentinel: str = DEFAULT_SENTINEL

    def __bool__(self) -> bool:
        return bool(self.executed)

    def to_dict(self) -> dict:
        return {
            "sentinel": self.sentinel,
            "regions": [r.to_dict() for r in self.regions],
            "executed": [{"region": i, "reason": reason} for i, reason in self.executed],
        }


def interpret(document: str | bytes, sentinel: str = DEFAULT_SENTINEL, legacy: bool = False) -> ExecutionTrace:
    """Find every script region whose code calls ``sentinel``.

    Legacy (CSS) regions are reported in ``regions`` either way but only fire
    when ``legacy`` is on.
    """
    regions = collect_script_regions(tokenize(document, legacy))
    trace = ExecutionTrace(regions, sentinel=sentinel)
    for i, region in enumerate(regions):
        if region.legacy and not legacy:
            continue
        if js_executes(sentinel, region.code):
            trace.executed.append((i, f"{sentinel}() called from {region.describe()}"))
    return trace


_ATTR_VALUE_STATES = frozenset({"AttrValueDouble", "AttrValueSingle", "AttrValueUnquoted", "AttrValueBacktick"})
_IN_TAG_STATES = frozenset({"TagName", "BeforeAttrName", "AttrName", "AfterAttrName",
                            "BeforeAttrValue", "SelfClosingStartTag"})


def _string_context(js_lexer_state: str) -> StartContext | None:
    if js_lexer_state == _SINGLE:
        return JAVASCRIPT
    if js_lexer_state == _DOUBLE:
        return JAVASCRIPT_DOUBLE
    return None


def detect_context(template: str, placeholder: str = PLACEHOLDER, legacy: bool = False) -> StartContext:
    """Which start context the placeholder sits in.

    Outside a string literal, script code offers no generated way in, so an
    event handler falls back to AttributeValue (break out of the attribute)
    and a script body to TagContent (close the element).
    """
    hits = template.count(placeholder)
    if hits == 0:
        raise PlaceholderMissing(f"placeholder {placeholder!r} not found")
    if hits > 1:
        raise PlaceholderDuplicated(f"placeholder {placeholder!r} occurs {hits} times")
    snap = tokenizer_state_at(template, template.index(placeholder), legacy)
    if snap.state in _ATTR_VALUE_STATES:
        if snap.attr_name.startswith("on"):
            return _string_context(js_state(decode_entities(snap.attr_value))) or ATTRIBUTE_VALUE
        return ATTRIBUTE_VALUE
    if snap.state in _IN_TAG_STATES:
        return ATTRIBUTE_VALUE
    if snap.state == "RawText(script)":
        return _string_context(js_state(snap.raw_body)) or TAG_CONTENT
    return TAG_CONTENT
