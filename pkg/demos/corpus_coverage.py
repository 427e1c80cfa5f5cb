"""
How much of a known-attack corpus does the grammar cover?
=========================================================

Each corpus line is a real attack with its payload rewritten to attack();.
A line counts as exact when the generator produced the same string and as
mapped when some generated string occurs inside it.
"""

from importlib import resources

from xssunit import default_machine, generate
from xssunit.harness import load_corpus, map_corpus

path = resources.files("xssunit").joinpath("data/corpus.txt")
corpus = load_corpus(str(path))
report = map_corpus(corpus, generate(default_machine()))

print(f"{report.total} strings")
print(f"exact  {report.exact_matches:3d}  ({report.exact_rate:.1%})")
print(f"mapped {report.mapped:3d}  ({report.mapped_rate:.1%})")

# the strings that only map are supersets of something generated
texts = {a.text for a in generate(default_machine())}
for entry in corpus:
    if entry not in texts:
        inner = max((t for t in texts if t in entry), key=len)
        print(f"{entry!r:45} contains {inner!r}")
