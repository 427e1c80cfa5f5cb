"""
Why encoder order matters
=========================

An onclick handler holding a JavaScript string needs two encoders.  The
browser decodes HTML entities in the attribute before running the script, so
the HTML encoder must run last.
"""

from xssunit import SinkTemplate, generate, default_machine, render, run_unit_test
from xssunit.attack_fsm import JAVASCRIPT

html = "<input onclick=\"Fn('{{INJECT}}'); \" type='button' />"
attacks = generate(default_machine(), [JAVASCRIPT])

for chain in [("escapeHtml",),
              ("escapeHtmlDecimal", "escapeJavaScript"),
              ("escapeJavaScript", "escapeHtmlDecimal")]:
    template = SinkTemplate("onclick", html, chain)
    verdict = run_unit_test(template, attacks)
    line = f"{' then '.join(chain):40} {verdict.status:10} after {verdict.attacks_tried:2d}"
    if verdict.vulnerable:
        line += f"  witness {verdict.witness.text!r}"
    print(line)

# look at what the browser receives for the wrong order
wrong = SinkTemplate("onclick", html, ("escapeHtmlDecimal", "escapeJavaScript"))
print(render(wrong, "';attack();//"))
