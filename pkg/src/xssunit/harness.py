"""Security unit tests: render a sink template with encoded attack strings and
ask the browser model whether the payload ran.

A template is an HTML page with a single ``{{INJECT}}`` placeholder standing in
for the tainted value, plus the encoder chain the application applies to it.
It may come from a file pair ``name.html`` + ``name.json``, where the sidecar
holds ``{"name", "chain", "declared_context", "metadata"}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .attack_fsm import (
    ALL_CONTEXTS,
    DEFAULT_PAYLOAD,
    AttackString,
    StartContext,
    StateMachine,
    default_machine,
    generate,
)
from .browser import DEFAULT_SENTINEL, PLACEHOLDER, ExecutionTrace, detect_context, interpret
from .encoders import apply_chain, parse_chain
from .errors import PlaceholderDuplicated, PlaceholderMissing, TemplateError, XssUnitError

SCHEMA_VERSION = 1
MODES = ("stop_first", "exhaustive")


@dataclass
class SinkTemplate:
    name: str
    html: str
    chain: tuple[str, ...] = ("identity",)
    declared_context: StartContext | None = None
    metadata: dict = field(default_factory=dict)

    def validate(self, legacy: bool = False) -> StartContext:
        """Check the template invariants and return the detected context."""
        parse_chain(self.chain)
        detected = detect_context(self.html, PLACEHOLDER, legacy)
        if self.declared_context is not None and self.declared_context != detected:
            raise TemplateError(
                f"{self.name}: declared context {self.declared_context} but placeholder sits in {detected}")
        return detected

    @classmethod
    def from_config(cls, html: str, config: dict, default_name: str = "template") -> SinkTemplate:
        declared = config.get("declared_context")
        try:
            return cls(
                name=config.get("name", default_name),
                html=html,
                chain=parse_chain(config.get("chain", ["identity"])),
                declared_context=StartContext.parse(declared) if declared else None,
                metadata=dict(config.get("metadata", {})),
            )
        except (TypeError, ValueError, KeyError) as exc:
            raise TemplateError(f"{default_name}: bad template config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> SinkTemplate:
        """Read ``path`` and its ``.json`` sidecar, if there is one."""
        path = Path(path)
        try:
            html = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise TemplateError(f"cannot read template {path}: {exc}") from exc
        config: dict = {}
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            try:
                config = json.loads(sidecar.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise TemplateError(f"{sidecar}: {exc}") from exc
            if not isinstance(config, dict):
                raise TemplateError(f"{sidecar}: expected a JSON object")
        return cls.from_config(html, config, default_name=path.stem)


def render(template: SinkTemplate, raw_value: str) -> str:
    hits = template.html.count(PLACEHOLDER)
    if hits == 0:
        raise PlaceholderMissing(f"{template.name}: no {PLACEHOLDER} placeholder")
    if hits > 1:
        raise PlaceholderDuplicated(f"{template.name}: {hits} placeholders")
    return template.html.replace(PLACEHOLDER, apply_chain(template.chain, raw_value))


@dataclass
class Verdict:
    status: str
    attacks_tried: int
    witness: AttackString | None = None
    witness_index: int | None = None
    trace: ExecutionTrace | None = None
    hits: list[int] = field(default_factory=list)

    @property
    def vulnerable(self) -> bool:
        return self.status == "vulnerable"

    def to_dict(self) -> dict:
        out: dict = {"status": self.status, "attacks_tried": self.attacks_tried}
        if self.witness is not None:
            out["witness"] = self.witness.to_record(self.witness_index)
            out["trace"] = self.trace.to_dict()
            out["hits"] = list(self.hits)
        return out


def run_unit_test(template: SinkTemplate, attacks: Sequence[AttackString], mode: str = "stop_first",
                  sentinel: str = DEFAULT_SENTINEL, legacy: bool = False) -> Verdict:
    """Try ``attacks`` in order against ``template``.

    ``stop_first`` returns at the first attack that runs; ``exhaustive`` tries
    all of them and records every hit, keeping the first as witness.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not attacks:
        raise ValueError("no attacks to try")
    verdict: Verdict | None = None
    for i, attack in enumerate(attacks):
        trace = interpret(render(template, attack.text), sentinel, legacy)
        if not trace.executed:
            continue
        if verdict is None:
            verdict = Verdict("vulnerable", i + 1, attack, i, trace, [i])
            if mode == "stop_first":
                break
        else:
            verdict.hits.append(i)
    if verdict is None:
        return Verdict("safe", len(attacks))
    if mode == "exhaustive":
        verdict.attacks_tried = len(attacks)
    replay = interpret(render(template, verdict.witness.text), sentinel, legacy)
    if not replay.executed:
        raise AssertionError(f"{template.name}: witness {verdict.witness.text!r} did not replay")
    return verdict


@dataclass
class SuiteEntry:
    name: str
    context: StartContext | None = None
    verdict: Verdict | None = None
    error: str | None = None
    expected: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"name": self.name, "context": None if self.context is None else str(self.context)}
        if self.error is not None:
            out["error"] = self.error
        else:
            out["verdict"] = self.verdict.to_dict()
        if self.expected is not None:
            out["expected"] = self.expected
            out["matches_expected"] = self.verdict is not None and self.verdict.status == self.expected
        return out


def run_suite(templates: Iterable[SinkTemplate], machine: StateMachine | None = None,
              payload: str = DEFAULT_PAYLOAD, mode: str = "stop_first", all_contexts: bool = False,
              legacy: bool = False, sentinel: str = DEFAULT_SENTINEL) -> list[SuiteEntry]:
    """Run one unit test per template.  Attacks come from the detected context
    only, or from all three with ``all_contexts``.  A broken template becomes
    an error entry and the suite carries on."""
    machine = machine or default_machine()
    cache: dict[tuple[StartContext, ...], list[AttackString]] = {}
    entries: list[SuiteEntry] = []
    for template in templates:
        entry = SuiteEntry(template.name, expected=template.metadata.get("expected"))
        try:
            entry.context = template.validate(legacy)
            contexts = ALL_CONTEXTS if all_contexts else (entry.context,)
            if contexts not in cache:
                cache[contexts] = generate(machine, contexts, payload)
            entry.verdict = run_unit_test(template, cache[contexts], mode, sentinel, legacy)
        except (XssUnitError, ValueError) as exc:
            entry.verdict = None
            entry.error = f"{type(exc).__name__}: {exc}"
        entries.append(entry)
    return entries


def suite_report(entries: Sequence[SuiteEntry]) -> dict:
    verdicts = [e.verdict for e in entries if e.verdict is not None]
    return {
        "schema_version": SCHEMA_VERSION,
        "summary": {
            "templates": len(entries),
            "vulnerable": sum(v.vulnerable for v in verdicts),
            "safe": sum(not v.vulnerable for v in verdicts),
            "errors": sum(e.error is not None for e in entries),
        },
        "results": [e.to_dict() for e in entries],
    }


def load_suite(directory: str | Path) -> list[SinkTemplate | SuiteEntry]:
    """Templates from every ``*.html`` in ``directory`` (sorted by file name);
    files that fail to load come back as error entries."""
    items: list[SinkTemplate | SuiteEntry] = []
    for path in sorted(Path(directory).glob("*.html")):
        try:
            items.append(SinkTemplate.load(path))
        except XssUnitError as exc:
            items.append(SuiteEntry(path.stem, error=f"{type(exc).__name__}: {exc}"))
    return items


# -- canonical templates ------------------------------------------------------

CANONICAL_TEMPLATES = {
    "attr-single": "<input type=\"text\" value='{{INJECT}}'>",
    "attr-double": '<input type="text" value="{{INJECT}}">',
    "attr-unquoted": "<input type=text value=x{{INJECT}}>",
    "attr-backtick": "<input type=text value=`{{INJECT}}`>",
    "attr-url": '<a href="{{INJECT}}">link</a>',
    "attr-style": '<div style="background:{{INJECT}}">x</div>',
    "body": "<p>{{INJECT}}</p>",
    "title": "<title>{{INJECT}}</title>",
    "textarea": "<textarea>{{INJECT}}</textarea>",
    "js-single": "<input type=\"button\" onclick=\"Fn('{{INJECT}}');\">",
    "js-double": "<input type='button' onclick='Fn(\"{{INJECT}}\");'>",
}

_MARKER_TEMPLATES = {"'": "attr-single", '"': "attr-double", " ": "attr-unquoted", "`": "attr-backtick"}


def canonical_template_name(attack: AttackString) -> str:
    """The page an attack was shaped for, judged from its leading characters."""
    text = attack.text
    if attack.context.kind == "AttributeValue":
        if text[:1] in _MARKER_TEMPLATES:
            return _MARKER_TEMPLATES[text[:1]]
        return "attr-url" if text.lower().startswith("javascript:") else "attr-style"
    if attack.context.kind == "TagContent":
        for element in ("title", "textarea"):
            if text.lower().startswith(f"</{element}>"):
                return element
        return "body"
    return "js-double" if text.startswith('"') else "js-single"


def canonical_template(attack: AttackString, chain: Sequence[str] = ("identity",)) -> SinkTemplate:
    name = canonical_template_name(attack)
    return SinkTemplate(name, CANONICAL_TEMPLATES[name], tuple(chain))


# -- corpus coverage ----------------------------------------------------------

@dataclass
class CorpusReport:
    total: int
    exact_matches: int
    mapped: int
    unmapped: list[str]

    @property
    def exact_rate(self) -> float:
        return self.exact_matches / self.total if self.total else 0.0

    @property
    def mapped_rate(self) -> float:
        return self.mapped / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "total": self.total,
            "exact_matches": self.exact_matches,
            "mapped": self.mapped,
            "exact_rate": round(self.exact_rate, 4),
            "mapped_rate": round(self.mapped_rate, 4),
            "unmapped": list(self.unmapped),
        }


def map_corpus(corpus: Sequence[str], generated: Sequence[AttackString]) -> CorpusReport:
    """Exact: the corpus entry equals a generated string.  Mapped: some
    generated string occurs inside it (exact matches included)."""
    texts = [a.text for a in generated]
    exact_set = set(texts)
    exact = mapped = 0
    unmapped: list[str] = []
    for entry in corpus:
        if entry in exact_set:
            exact += 1
            mapped += 1
        elif any(t in entry for t in texts):
            mapped += 1
        else:
            unmapped.append(entry)
    return CorpusReport(len(corpus), exact, mapped, unmapped)


def load_corpus(path: str | Path) -> list[str]:
    """One attack per line; blank lines and lines starting with ``#`` are skipped."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line.strip() and not line.startswith("#")]
