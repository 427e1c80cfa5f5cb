"""Command line front end.

Standard output carries only JSON (or NDJSON for ``generate``); everything
meant for humans goes to standard error.  Exit status: 0 when everything is
safe, 2 when at least one template is vulnerable, 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import __version__
from .attack_fsm import (
    ALL_CONTEXTS,
    DEFAULT_PAYLOAD,
    StartContext,
    StateMachine,
    count,
    default_machine,
    generate,
    load_machine,
    write_ndjson,
)
from .browser import DEFAULT_SENTINEL
from .encoders import parse_chain
from .errors import XssUnitError
from .harness import (
    MODES,
    SinkTemplate,
    SuiteEntry,
    load_corpus,
    load_suite,
    map_corpus,
    run_suite,
    suite_report,
)

EXIT_SAFE, EXIT_ERROR, EXIT_VULNERABLE = 0, 1, 2
OUTPUT_DIR_ENV = "XSSUNIT_OUTPUT_DIR"

_CONTEXT_FLAGS = {"attr": ("AttributeValue",), "tag": ("TagContent",), "js": ("JavaScript(single)",),
                  "all": tuple(str(c) for c in ALL_CONTEXTS)}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _bundled(name: str) -> Path:
    return Path(str(resources.files("xssunit").joinpath("data", name)))


def _output_path(path: str | None) -> Path | None:
    if path is None:
        return None
    out = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not out.is_absolute():
        out = Path(base) / out
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _emit_json(doc: dict, output: str | None) -> None:
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    path = _output_path(output)
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")
        print(f"report written to {path}", file=sys.stderr)


def _machine(args: argparse.Namespace) -> StateMachine:
    return load_machine(args.machine) if args.machine else default_machine()


def cmd_generate(args: argparse.Namespace) -> int:
    names = [n for flag in (args.context or ["all"]) for n in _CONTEXT_FLAGS[flag]]
    contexts = [StartContext.parse(n) for n in names]
    machine = _machine(args)
    attacks = generate(machine, contexts, args.payload)
    if args.no_legacy:
        attacks = [a for a in attacks if not a.legacy]
    path = _output_path(args.output)
    if path is None:
        write_ndjson(attacks, sys.stdout)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            write_ndjson(attacks, fh)
    print(f"{len(attacks)} attack strings (machine total {count(machine, contexts)})", file=sys.stderr)
    return EXIT_SAFE


def _suite_exit(entries: Sequence[SuiteEntry]) -> int:
    if any(e.verdict is not None and e.verdict.vulnerable for e in entries):
        return EXIT_VULNERABLE
    if any(e.error is not None for e in entries):
        return EXIT_ERROR
    return EXIT_SAFE


def _run(templates: list, args: argparse.Namespace) -> list[SuiteEntry]:
    ready = [t for t in templates if isinstance(t, SinkTemplate)]
    results = iter(run_suite(ready, _machine(args), args.payload, args.mode,
                             all_contexts=args.all_contexts, legacy=args.legacy, sentinel=args.sentinel))
    return [next(results) if isinstance(t, SinkTemplate) else t for t in templates]


def cmd_test(args: argparse.Namespace) -> int:
    template = SinkTemplate.load(args.template)
    if args.encoders:
        template.chain = parse_chain(args.encoders)
    (entry,) = _run([template], args)
    report = suite_report([entry])
    _emit_json(report, args.output)
    if entry.error is not None:
        print(f"{entry.name}: {entry.error}", file=sys.stderr)
        return EXIT_ERROR
    verdict = entry.verdict
    if verdict.vulnerable:
        print(f"{entry.name}: VULNERABLE after {verdict.attacks_tried} attacks, "
              f"witness {verdict.witness.text!r}", file=sys.stderr)
        return EXIT_VULNERABLE
    print(f"{entry.name}: safe against {verdict.attacks_tried} attacks", file=sys.stderr)
    return EXIT_SAFE


def cmd_suite(args: argparse.Namespace) -> int:
    directory = Path(args.directory) if args.directory else _bundled("templates")
    if not directory.is_dir():
        raise XssUnitError(f"not a directory: {directory}")
    entries = _run(load_suite(directory), args)
    report = suite_report(entries)
    _emit_json(report, args.output)
    summary = report["summary"]
    print(f"{summary['templates']} templates: {summary['vulnerable']} vulnerable, "
          f"{summary['safe']} safe, {summary['errors']} errors", file=sys.stderr)
    return _suite_exit(entries)


def cmd_corpus(args: argparse.Namespace) -> int:
    path = Path(args.corpus) if args.corpus else _bundled("corpus.txt")
    try:
        corpus = load_corpus(path)
    except OSError as exc:
        raise XssUnitError(f"cannot read corpus {path}: {exc}") from exc
    report = map_corpus(corpus, generate(_machine(args), ALL_CONTEXTS, args.payload))
    _emit_json(report.to_dict(), args.output)
    print(f"{report.total} corpus strings: {report.exact_matches} exact, {report.mapped} mapped",
          file=sys.stderr)
    return EXIT_SAFE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xssunit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--machine", metavar="CONFIG", help="state machine JSON (default: built-in)")
    common.add_argument("--payload", default=DEFAULT_PAYLOAD, help="JavaScript statement to inject")
    common.add_argument("-o", "--output", metavar="PATH",
                        help=f"write to PATH instead of stdout (relative to ${OUTPUT_DIR_ENV} if set)")

    running = _Parser(add_help=False)
    running.add_argument("--mode", choices=MODES, default="stop_first")
    running.add_argument("--all-contexts", action="store_true",
                         help="try attacks for all three start contexts, not just the detected one")
    running.add_argument("--legacy", action="store_true", help="enable old-IE browser rules (CSS expressions, backtick quotes)")
    running.add_argument("--sentinel", default=DEFAULT_SENTINEL, help="function name the payload calls")

    p = sub.add_parser("generate", parents=[common], help="print attack strings as NDJSON")
    p.add_argument("--context", action="append", choices=sorted(_CONTEXT_FLAGS),
                   help="start context (repeatable, default all)")
    p.add_argument("--no-legacy", action="store_true", help="drop attacks tagged legacy")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("test", parents=[common, running], help="run one template")
    p.add_argument("template", help="HTML file with one {{INJECT}} placeholder")
    p.add_argument("--encoders", help="comma-separated chain, applied left to right")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("suite", parents=[common, running], help="run every template in a directory")
    p.add_argument("directory", nargs="?", help="template directory (default: bundled examples)")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("corpus", parents=[common], help="coverage of known attacks by generated ones")
    p.add_argument("corpus", nargs="?", help="one attack per line (default: bundled corpus)")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (XssUnitError, ValueError, OSError) as exc:
        print(f"xssunit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
