import json
import random
from html.parser import HTMLParser
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xssunit.attack_fsm import ATTRIBUTE_VALUE, JAVASCRIPT, JAVASCRIPT_DOUBLE, TAG_CONTENT
from xssunit.browser import (
    collect_script_regions,
    decode_entities,
    detect_context,
    interpret,
    js_executes,
    js_state,
    tokenize,
)
from xssunit.encoders import encode
from xssunit.errors import PlaceholderDuplicated, PlaceholderMissing


def kinds(document, legacy=False):
    return [(e.kind, e.name) for e in tokenize(document, legacy)]


class TestTokenize:
    def test_simple_element(self):
        assert kinds("<p>hi</p>") == [("StartTag", "p"), ("Text", ""), ("EndTag", "p")]

    def test_attributes(self):
        (tag, *_) = tokenize("<a href=\"x\" onclick='f()' disabled>t</a>")
        attrs = [(a.name, a.value, a.quote) for a in tag.attributes]
        assert attrs == [("href", "x", '"'), ("onclick", "f()", "'"), ("disabled", "", "")]

    def test_names_lowercased(self):
        (tag,) = tokenize("<IMG SRC=x>")
        assert tag.name == "img" and tag.attributes[0].name == "src"

    def test_duplicate_attribute_first_wins(self):
        (tag,) = tokenize("<a href=one href=two>")
        assert tag.attribute_map()["href"].value == "one"

    @pytest.mark.parametrize("element", ["title", "textarea", "script", "style"])
    def test_raw_text_elements(self, element):
        events = tokenize(f"<{element}><b>x</b></{element}>")
        assert [e.kind for e in events] == ["StartTag", "RawText", "EndTag"]
        assert events[1].data == "<b>x</b>"

    def test_raw_text_ends_case_insensitively(self):
        events = tokenize("<script>a()</SCRIPT ><p>")
        assert [e.kind for e in events] == ["StartTag", "RawText", "EndTag", "StartTag"]

    def test_script_body_matches_stdlib_parser(self):
        class Collector(HTMLParser):
            def __init__(self):
                super().__init__(convert_charrefs=False)
                self.data = []

            def handle_data(self, data):
                self.data.append(data)

        doc = "<script>if (a<b) { x('</p>'); }</script>"
        ref = Collector()
        ref.feed(doc)
        ref.close()
        ours = [e.data for e in tokenize(doc) if e.kind == "RawText"]
        assert ours == ["".join(ref.data)]

    def test_comment(self):
        events = tokenize("<!-- c -->x")
        assert events[0].kind == "Comment" and events[0].data == " c "

    def test_spans_cover_source(self):
        doc = "<a href=\"x\">t</a><!--c-->"
        events = tokenize(doc)
        assert "".join(doc[e.span[0]:e.span[1]] for e in events) == doc

    def test_truncated_tag_is_malformed(self):
        (tag,) = tokenize("<img src=x")
        assert tag.malformed

    def test_backtick_only_in_legacy(self):
        (modern,) = tokenize("<div a=`x y`>")
        (legacy,) = tokenize("<div a=`x y`>", legacy=True)
        assert modern.attributes[0].value == "`x"
        assert legacy.attributes[0].value == "x y" and legacy.attributes[0].quote == "`"

    def test_bytes_spans_are_byte_offsets(self):
        events = tokenize(b"<p>\xc3\xa9</p>")
        assert events[1].span == (3, 5)

    def test_fuzz_never_raises(self):
        rng = random.Random(1234)
        alphabet = b"<>/='\"` !-abcdefghijklmnopqrstuvwxyz&#;\n\x00\xff"
        for _ in range(10_000):
            doc = bytes(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
            events = tokenize(doc, legacy=rng.random() < 0.5)
            collect_script_regions(events)


class TestEntities:
    @pytest.mark.parametrize("text, expected", [
        ("&lt;&gt;&amp;&quot;&apos;", "<>&\"'"),
        ("&#39;&#x27;&#X27;", "'''"),
        ("&amp;lt;", "&lt;"),
        ("&nbsp;&bogus;", "&nbsp;&bogus;"),
        ("&#0;&#xD800;&#x110000;", "\ufffd\ufffd\ufffd"),
        ("no entities", "no entities"),
    ])
    def test_decode(self, text, expected):
        assert decode_entities(text) == expected

    @given(st.text())
    def test_single_pass_inverts_escape(self, text):
        assert decode_entities(encode("escapeHtmlFull", text)) == text
        assert decode_entities(encode("escapeHtmlDecimal", text)) == text


class TestRegions:
    def test_script_body_verbatim(self):
        (region,) = collect_script_regions(tokenize("<script>a('&lt;')</script>"))
        assert region.source == "ScriptElementBody" and region.code == "a('&lt;')"

    def test_event_handler_decoded(self):
        (region,) = collect_script_regions(tokenize("<b onclick=\"f(&#39;x&#39;)\">"))
        assert region.describe() == "EventHandlerAttribute(onclick)"
        assert region.code == "f('x')"

    @pytest.mark.parametrize("value, code", [
        ("javascript:attack()", "attack()"),
        ("  JavaScript:attack()", "attack()"),
        ("java\tscript:attack()", "attack()"),
        ("http://example.com", None),
    ])
    def test_javascript_url(self, value, code):
        regions = collect_script_regions(tokenize(f'<a href="{value}">'))
        assert [r.code for r in regions] == ([] if code is None else [code])

    def test_css_hooks_are_legacy(self):
        regions = collect_script_regions(tokenize(
            "<div style=\"a:expression('attack();');b:url('javascript:attack();')\">"))
        assert [(r.code, r.legacy) for r in regions] == [("attack();", True), ("attack();", True)]

    def test_malformed_tag_skipped(self):
        assert collect_script_regions(tokenize("<b onclick=attack()")) == []


class TestJavaScriptLexer:
    @pytest.mark.parametrize("code, expected", [
        ("attack();", True),
        ("x = 1; attack ();", True),
        ("Fn('');attack();//');", True),
        ("Fn('\\');attack();//');", False),
        ("// attack();", False),
        ("/* attack(); */", False),
        ("<!-- attack();", False),
        ("`${attack()}`", True),
        ("`attack()`", False),
        ("myattack();", False),
        ("attack_x();", False),
        ("attack;", False),
        ("'a\nattack();", True),
    ])
    def test_executes(self, code, expected):
        assert js_executes("attack", code) is expected

    @pytest.mark.parametrize("code, state", [
        ("Fn('", "SingleQuoteString"),
        ('Fn("', "DoubleQuoteString"),
        ("x //", "LineComment"),
        ("x /*", "BlockComment"),
        ("`a${ {", "Normal"),
        ("f();", "Normal"),
    ])
    def test_state(self, code, state):
        assert js_state(code) == state

    def test_fixtures(self):
        data = json.loads(resources.files("xssunit").joinpath("data/js_fixtures.json").read_text())
        fixtures = data["fixtures"]
        assert len(fixtures) >= 30
        assert [f["code"] for f in fixtures if js_executes(data["sentinel"], f["code"]) != f["expected"]] == []


class TestInterpret:
    def test_script_body(self):
        assert interpret("<script>attack();</script>")

    def test_text_is_inert(self):
        assert not interpret("<p>attack();</p>")
        assert not interpret("<title><script>attack();</script></title>")

    def test_entity_in_event_handler_breaks_out(self):
        doc = "<b onclick=\"Fn('&#39;);attack();//');\">"
        trace = interpret(doc)
        assert trace.executed and "EventHandlerAttribute(onclick)" in trace.executed[0][1]

    def test_entity_in_script_body_is_inert(self):
        assert not interpret("<script>Fn('&#39;);attack();//');</script>")

    def test_legacy_gate(self):
        doc = "<div style=\"width:expression('attack();')\">"
        assert not interpret(doc)
        assert interpret(doc, legacy=True)

    def test_custom_sentinel(self):
        assert interpret("<script>boom()</script>", sentinel="boom")
        assert not interpret("<script>boom()</script>")

    def test_trace_dict(self):
        d = interpret("<script>attack();</script>").to_dict()
        assert d["executed"] == [{"region": 0, "reason": "attack() called from ScriptElementBody"}]

    @settings(max_examples=200, deadline=None)
    @given(st.text())
    def test_full_escaping_is_inert_in_attributes_and_text(self, text):
        value = encode("escapeHtmlFull", "x" + text)
        for template in ("<p>{}</p>", "<input value='{}'>", '<input value="{}">'):
            assert not interpret(template.format(value))


class TestDetectContext:
    @pytest.mark.parametrize("template, expected", [
        ("<input value='{{INJECT}}'>", ATTRIBUTE_VALUE),
        ('<input value="{{INJECT}}">', ATTRIBUTE_VALUE),
        ("<input value={{INJECT}}>", ATTRIBUTE_VALUE),
        ("<input {{INJECT}}>", ATTRIBUTE_VALUE),
        ("<p>{{INJECT}}</p>", TAG_CONTENT),
        ("<title>{{INJECT}}</title>", TAG_CONTENT),
        ("<input onclick=\"Fn('{{INJECT}}')\">", JAVASCRIPT),
        ("<input onclick='Fn(\"{{INJECT}}\")'>", JAVASCRIPT_DOUBLE),
        ("<input onclick=\"Fn(&#39;{{INJECT}}&#39;)\">", JAVASCRIPT),
        ("<input onclick=\"Fn({{INJECT}})\">", ATTRIBUTE_VALUE),
        ("<script>var a = '{{INJECT}}';</script>", JAVASCRIPT),
        ("<script>var a = {{INJECT}};</script>", TAG_CONTENT),
    ])
    def test_contexts(self, template, expected):
        assert detect_context(template) == expected

    def test_missing(self):
        with pytest.raises(PlaceholderMissing):
            detect_context("<p></p>")

    def test_duplicated(self):
        with pytest.raises(PlaceholderDuplicated):
            detect_context("<p>{{INJECT}}{{INJECT}}</p>")
