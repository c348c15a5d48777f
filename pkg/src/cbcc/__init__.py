"""cbcc: a source-to-source compiler for C extended with code segments.

Segments are functions that never return; control moves between them with
parameterized goto.  The package parses the dialect, checks it, plans the
parallel argument copies each goto needs, and emits portable C against a
small runtime.  A converter rewrites ordinary call-and-return functions
into segment chains, and a benchmark harness compares the two shapes.
"""

__version__ = '0.1.0'
