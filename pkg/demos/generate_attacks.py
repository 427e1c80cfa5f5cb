"""
Walking the attack grammar
==========================

Build the default state machine, count its paths per start context and
print a few of the assembled attack strings.
"""

from collections import Counter

from xssunit import ALL_CONTEXTS, count, default_machine, generate

machine = default_machine()

# count() works on the graph directly, without building any strings
for context in ALL_CONTEXTS:
    print(f"{str(context):22} {count(machine, [context]):4d} attacks")
print("total", count(machine, ALL_CONTEXTS))

# generate() gives the strings themselves, in a fixed order
attacks = generate(machine)
by_shape = Counter(a.path.labels for a in attacks)
for labels, n in by_shape.most_common(5):
    print(f"{n:4d}  {' -> '.join(labels)}")

# the text around the payload is what escapes the injection point
for attack in attacks[:3] + attacks[-3:]:
    print(repr(attack.pre_escaping), "+", attack.payload, "+", repr(attack.post_escaping))

# legacy attacks rely on old IE behaviour (CSS expressions, backtick quotes)
print("legacy:", sum(a.legacy for a in attacks))
