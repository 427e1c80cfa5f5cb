"""Attack-string generation from a finite state machine.

States model where a browser's interpreters are while reading the injected
text; every transition carries a list of tokens that move the interpreter one
step closer to running JavaScript.  An attack string is produced by walking a
path from a start state to ``FINAL`` and concatenating one token per edge,
substituting the payload for the ``%V%`` slot.

The default machine covers three injection points: inside an attribute value
(``S1``), inside a tag body (``S5``) and inside a JavaScript string literal
(``S9``)::

    S1 --Att.Marker--> S2 --Event--------------------> S4 --End.Tag--> FINAL
    S1 --Ctx.Keywords--------------------------------------------------> FINAL
                       S2 --Spec.Att--> S3 --Ctx.Keywords--> S4
                       S2 --End.Tag--> S5
    S5 --Start.Script--------------------------------------------------> FINAL
    S5 --Tag.Starter--> S6 --Event--> S8 --End.Tag--> FINAL
                        S6 --Spec.Att--> S7 --Ctx.Keywords--> S8
    S9 --Literal.Term--> S10 --Exp.Separator--> S11 --Stmt.Suffix--> FINAL
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .errors import MachineError, MultiplePayloadSlots, PathWithoutPayloadSlot

PAYLOAD_SLOT = "%V%"
DEFAULT_PAYLOAD = "attack();"
FINAL = "FINAL"

#: Labels whose tokens must all carry a payload slot.
SLOT_LABELS = frozenset({"Ctx.Keywords", "Event", "Start.Script", "Exp.Separator"})

CONTEXT_KINDS = ("AttributeValue", "TagContent", "JavaScript")
QUOTE_KINDS = ("single", "double")


@dataclass(frozen=True)
class Token:
    text: str
    legacy: bool = False

    def __post_init__(self) -> None:
        if self.text.count(PAYLOAD_SLOT) > 1:
            raise MachineError(f"token {self.text!r} has more than one payload slot")

    @property
    def has_payload_slot(self) -> bool:
        return PAYLOAD_SLOT in self.text


@dataclass(frozen=True)
class TransitionLabel:
    name: str
    tokens: tuple[Token, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise MachineError(f"label {self.name!r} has no tokens")
        if self.name in SLOT_LABELS:
            missing = [t.text for t in self.tokens if not t.has_payload_slot]
            if missing:
                raise MachineError(f"label {self.name!r} needs a payload slot in {missing!r}")


@dataclass(frozen=True)
class Transition:
    source: str
    label: str
    target: str


@dataclass(frozen=True, order=True)
class StartContext:
    """Where the injected value lands when the page is parsed.

    ``quote`` is the enclosing string delimiter and is only meaningful (and
    required) for the JavaScript kind.  It does not restrict generation: both
    literal terminators are always tried.
    """

    kind: str
    quote: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in CONTEXT_KINDS:
            raise ValueError(f"unknown context kind {self.kind!r}")
        if (self.kind == "JavaScript") != (self.quote is not None):
            raise ValueError("quote kind is required for, and only for, JavaScript contexts")
        if self.quote is not None and self.quote not in QUOTE_KINDS:
            raise ValueError(f"unknown quote kind {self.quote!r}")

    def __str__(self) -> str:
        return self.kind if self.quote is None else f"{self.kind}({self.quote})"

    @property
    def sort_key(self) -> tuple[int, str]:
        return CONTEXT_KINDS.index(self.kind), self.quote or ""

    @classmethod
    def parse(cls, text: str) -> StartContext:
        aliases = {
            "attr": ATTRIBUTE_VALUE,
            "attribute": ATTRIBUTE_VALUE,
            "tag": TAG_CONTENT,
            "body": TAG_CONTENT,
            "js": JAVASCRIPT,
            "javascript": JAVASCRIPT,
        }
        key = text.strip()
        if key.lower() in aliases:
            return aliases[key.lower()]
        if key.endswith(")") and "(" in key:
            kind, _, quote = key[:-1].partition("(")
            return cls(kind, quote)
        return cls(key)


ATTRIBUTE_VALUE = StartContext("AttributeValue")
TAG_CONTENT = StartContext("TagContent")
JAVASCRIPT = StartContext("JavaScript", "single")
JAVASCRIPT_DOUBLE = StartContext("JavaScript", "double")
ALL_CONTEXTS = (ATTRIBUTE_VALUE, TAG_CONTENT, JAVASCRIPT)


@dataclass(frozen=True, eq=False)
class StateMachine:
    states: tuple[str, ...]
    labels: Mapping[str, TransitionLabel]
    transitions: tuple[Transition, ...]
    start_states: Mapping[str, str]
    final: str = FINAL
    _outgoing: dict[str, tuple[Transition, ...]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        outgoing: dict[str, list[Transition]] = {s: [] for s in self.states}
        for t in self.transitions:
            for s in (t.source, t.target):
                if s not in outgoing:
                    raise MachineError(f"transition references unknown state {s!r}")
            if t.label not in self.labels:
                raise MachineError(f"transition references unknown label {t.label!r}")
            outgoing[t.source].append(t)
        object.__setattr__(self, "_outgoing", {s: tuple(ts) for s, ts in outgoing.items()})
        self._validate()

    def _validate(self) -> None:
        if self.final not in self._outgoing:
            raise MachineError(f"final state {self.final!r} is not declared")
        if self._outgoing[self.final]:
            raise MachineError("the final state must not have outgoing transitions")
        for kind, state in self.start_states.items():
            if kind not in CONTEXT_KINDS:
                raise MachineError(f"unknown start context {kind!r}")
            if state not in self._outgoing:
                raise MachineError(f"start state {state!r} is not declared")

        # Depth-first colouring: grey on the stack, black when finished.
        colour: dict[str, int] = {}

        def visit(state: str) -> None:
            colour[state] = 1
            for t in self._outgoing[state]:
                c = colour.get(t.target, 0)
                if c == 1:
                    raise MachineError(f"cycle through state {t.target!r}")
                if c == 0:
                    visit(t.target)
            colour[state] = 2

        for state in self.states:
            if state not in colour:
                visit(state)

        reaches_final = {self.final}
        changed = True
        while changed:
            changed = False
            for t in self.transitions:
                if t.target in reaches_final and t.source not in reaches_final:
                    reaches_final.add(t.source)
                    changed = True
        dead = [s for s in self.states if s not in reaches_final]
        if dead:
            raise MachineError(f"states cannot reach {self.final!r}: {dead!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateMachine):
            return NotImplemented
        return machine_to_dict(self) == machine_to_dict(other)

    def outgoing(self, state: str) -> tuple[Transition, ...]:
        return self._outgoing[state]

    def start_state(self, context: StartContext) -> str:
        try:
            return self.start_states[context.kind]
        except KeyError:
            raise MachineError(f"machine has no start state for {context}") from None


@dataclass(frozen=True)
class AttackPath:
    start: str
    labels: tuple[str, ...]
    token_choice: tuple[int, ...]

    def tokens(self, machine: StateMachine) -> list[Token]:
        return [machine.labels[name].tokens[i] for name, i in zip(self.labels, self.token_choice)]


@dataclass(frozen=True)
class AttackString:
    text: str
    payload: str
    path: AttackPath
    context: StartContext
    legacy: bool = False
    duplicate_of: int | None = None

    @property
    def pre_escaping(self) -> str:
        return self.text.partition(self.payload)[0]

    @property
    def post_escaping(self) -> str:
        return self.text.partition(self.payload)[2]

    def to_record(self, index: int) -> dict:
        return {
            "index": index,
            "context": str(self.context),
            "text": self.text,
            "path_labels": list(self.path.labels),
            "token_indices": list(self.path.token_choice),
            "legacy": self.legacy,
            "duplicate_of": self.duplicate_of,
        }


# Default token tables.  Order matters: it fixes enumeration order, so the
# tokens that work in the widest range of pages come first.
_DEFAULT_LABELS: dict[str, list[Token]] = {
    "Att.Marker": [Token("'"), Token('"'), Token(" "), Token("`", legacy=True)],
    "End.Tag": [Token(">"), Token("/>")],
    "Tag.Starter": [Token("<a "), Token("<img ")],
    "Att.Starter": [Token("atb="), Token("atb=' '"), Token('atb=" "')],
    "Event": [Token("onclick='%V%'")],
    "Ctx.Keywords": [
        Token("javascript:%V%"),
        Token("url('javascript:%V%')", legacy=True),
        Token("expression('%V%')", legacy=True),
    ],
    "Spec.Att": [Token("src="), Token("style="), Token("href=")],
    "Start.Script": [
        Token("<script>%V%</script>"),
        Token("</script><script>%V%</script>"),
        Token("</title><script>%V%</script>"),
        Token("</textarea><script>%V%</script>"),
    ],
    "Literal.Term": [Token("'"), Token('"')],
    "Exp.Separator": [Token(";%V%"), Token(");%V%"), Token("+(%V%)")],
    "Stmt.Suffix": [Token("//"), Token(";//"), Token("")],
}

_DEFAULT_TRANSITIONS = [
    ("S1", "Att.Marker", "S2"),
    ("S1", "Ctx.Keywords", FINAL),
    ("S2", "Event", "S4"),
    ("S2", "Spec.Att", "S3"),
    ("S2", "End.Tag", "S5"),
    ("S3", "Ctx.Keywords", "S4"),
    ("S4", "End.Tag", FINAL),
    ("S5", "Start.Script", FINAL),
    ("S5", "Tag.Starter", "S6"),
    ("S6", "Event", "S8"),
    ("S6", "Spec.Att", "S7"),
    ("S7", "Ctx.Keywords", "S8"),
    ("S8", "End.Tag", FINAL),
    ("S9", "Literal.Term", "S10"),
    ("S10", "Exp.Separator", "S11"),
    ("S11", "Stmt.Suffix", FINAL),
]


@lru_cache(maxsize=1)
def default_machine() -> StateMachine:
    """The built-in attack generation machine (states S1-S11 plus FINAL)."""
    return StateMachine(
        states=tuple(f"S{i}" for i in range(1, 12)) + (FINAL,),
        labels={name: TransitionLabel(name, tuple(tokens)) for name, tokens in _DEFAULT_LABELS.items()},
        transitions=tuple(Transition(*t) for t in _DEFAULT_TRANSITIONS),
        start_states={"AttributeValue": "S1", "TagContent": "S5", "JavaScript": "S9"},
    )


def enumerate_paths(machine: StateMachine, start: StartContext | str) -> list[AttackPath]:
    """Every (label walk, token choice) from ``start`` to the final state.

    Depth-first in transition declaration order, then token index order.
    ``start`` may also be a raw state id, which is handy for ad-hoc machines.
    """
    origin = start if isinstance(start, str) else machine.start_state(start)
    if origin not in machine.states:
        raise MachineError(f"unknown start state {origin!r}")
    paths: list[AttackPath] = []

    def walk(state: str, labels: tuple[str, ...], choice: tuple[int, ...]) -> None:
        if state == machine.final:
            paths.append(AttackPath(origin, labels, choice))
            return
        for t in machine.outgoing(state):
            for i in range(len(machine.labels[t.label].tokens)):
                walk(t.target, labels + (t.label,), choice + (i,))

    walk(origin, (), ())
    return paths


def assemble(path: AttackPath, machine: StateMachine, payload: str = DEFAULT_PAYLOAD,
             context: StartContext | None = None) -> AttackString:
    tokens = path.tokens(machine)
    slots = sum(t.has_payload_slot for t in tokens)
    if slots == 0:
        raise PathWithoutPayloadSlot(f"no token on path {path.labels!r} carries {PAYLOAD_SLOT}")
    if slots > 1:
        raise MultiplePayloadSlots(f"{slots} tokens on path {path.labels!r} carry {PAYLOAD_SLOT}")
    if context is None:
        context = _context_for_state(machine, path.start)
    text = "".join(t.text for t in tokens).replace(PAYLOAD_SLOT, payload)
    return AttackString(text, payload, path, context, legacy=any(t.legacy for t in tokens))


def _context_for_state(machine: StateMachine, state: str) -> StartContext:
    for kind, s in machine.start_states.items():
        if s == state:
            return JAVASCRIPT if kind == "JavaScript" else StartContext(kind)
    raise MachineError(f"{state!r} is not a start state")


def _ordered(contexts: Iterable[StartContext]) -> list[StartContext]:
    ordered = sorted(set(contexts), key=lambda c: c.sort_key)
    if not ordered:
        raise ValueError("at least one start context is required")
    return ordered


def generate(machine: StateMachine, contexts: Iterable[StartContext] = ALL_CONTEXTS,
             payload: str = DEFAULT_PAYLOAD) -> list[AttackString]:
    """Assemble every attack for ``contexts``, in AttributeValue, TagContent,
    JavaScript order.  Repeated texts are kept and point at their first
    occurrence through ``duplicate_of``."""
    if not payload:
        raise ValueError("payload must be non-empty")
    attacks: list[AttackString] = []
    first_seen: dict[str, int] = {}
    for context in _ordered(contexts):
        for path in enumerate_paths(machine, context):
            attack = assemble(path, machine, payload, context)
            if attack.text in first_seen:
                attack = AttackString(attack.text, payload, path, context, attack.legacy,
                                      duplicate_of=first_seen[attack.text])
            else:
                first_seen[attack.text] = len(attacks)
            attacks.append(attack)
    return attacks


def count(machine: StateMachine, contexts: Iterable[StartContext] = ALL_CONTEXTS) -> int:
    """Number of attack strings ``generate`` would return, without building them."""
    memo: dict[str, int] = {}

    def combos(state: str) -> int:
        if state == machine.final:
            return 1
        if state not in memo:
            memo[state] = sum(len(machine.labels[t.label].tokens) * combos(t.target)
                              for t in machine.outgoing(state))
        return memo[state]

    return sum(combos(machine.start_state(c)) for c in _ordered(contexts))


# -- config files -----------------------------------------------------------

def machine_to_dict(machine: StateMachine) -> dict:
    return {
        "states": list(machine.states),
        "final": machine.final,
        "start_states": dict(machine.start_states),
        "labels": {
            name: [{"text": t.text, "legacy": True} if t.legacy else {"text": t.text}
                   for t in label.tokens]
            for name, label in machine.labels.items()
        },
        "transitions": [{"from": t.source, "label": t.label, "to": t.target}
                        for t in machine.transitions],
    }


def machine_from_dict(data: Mapping) -> StateMachine:
    try:
        labels = {
            name: TransitionLabel(name, tuple(
                Token(t["text"], bool(t.get("legacy", False))) if isinstance(t, Mapping) else Token(t)
                for t in tokens))
            for name, tokens in data["labels"].items()
        }
        transitions = tuple(Transition(t["from"], t["label"], t["to"]) for t in data["transitions"])
        return StateMachine(
            states=tuple(data["states"]),
            labels=labels,
            transitions=transitions,
            start_states=dict(data["start_states"]),
            final=data.get("final", FINAL),
        )
    except (KeyError, TypeError) as exc:
        raise MachineError(f"malformed machine config: {exc!r}") from exc


def dumps_machine(machine: StateMachine) -> str:
    return json.dumps(machine_to_dict(machine), indent=2, ensure_ascii=False) + "\n"


def load_machine(path: str | Path) -> StateMachine:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MachineError(f"{path}: {exc}") from exc
    return machine_from_dict(data)


def default_config_text() -> str:
    """Contents of the bundled default machine config."""
    return resources.files("xssunit").joinpath("data/default_machine.json").read_text(encoding="utf-8")


def write_ndjson(attacks: Sequence[AttackString], fh: IO[str]) -> None:
    for i, attack in enumerate(attacks):
        fh.write(json.dumps(attack.to_record(i), ensure_ascii=False) + "\n")
