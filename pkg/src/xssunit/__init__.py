"""Security unit testing for output encoders.

Generates XSS attack strings from a state machine, pushes them through encoder
chains into HTML sink templates, and decides with a lexical browser model
whether the sentinel payload would run.
"""

from .attack_fsm import (
    ALL_CONTEXTS,
    ATTRIBUTE_VALUE,
    DEFAULT_PAYLOAD,
    JAVASCRIPT,
    JAVASCRIPT_DOUBLE,
    TAG_CONTENT,
    AttackPath,
    AttackString,
    StartContext,
    StateMachine,
    assemble,
    count,
    default_machine,
    enumerate_paths,
    generate,
    load_machine,
)
from .browser import (
    ExecutionTrace,
    HtmlEvent,
    ScriptRegion,
    collect_script_regions,
    decode_entities,
    detect_context,
    interpret,
    js_executes,
    tokenize,
)
from .encoders import ENCODERS, apply_chain, encode, parse_chain
from .harness import (
    CorpusReport,
    SinkTemplate,
    Verdict,
    map_corpus,
    render,
    run_suite,
    run_unit_test,
)

__version__ = "0.1.0"
