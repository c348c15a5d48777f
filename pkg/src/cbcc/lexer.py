"""Tokenizer for CwC source text (UTF-8)."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import Span

KEYWORDS = frozenset([
    'int', 'char', 'void', 'struct', 'if', 'else', 'while', 'for',
    'return', 'goto', 'typedef', 'sizeof',
    '__code', '__return', '__environment',
])

## longest first so maximal munch falls out of the alternation order
PUNCTUATORS = [
    '->', '++', '--', '+=', '-=', '==', '!=', '<=', '>=', '&&', '||',
    '(', ')', '{', '}', '[', ']', ';', ',', '.',
    '+', '-', '*', '/', '%', '=', '<', '>', '!', '&',
]


class LexError(Exception):
    def __init__(self, span: Span, message: str):
        super().__init__(message)
        self.span = span
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'kw' | 'int' | 'str' | 'punct' | 'eof'
    text: str
    span: Span


_WS = re.compile(r'[ \t\r\n]+')
_LINE_COMMENT = re.compile(r'//[^\n]*')
_IDENT = re.compile(r'[A-Za-z_][A-Za-z0-9_]*')
_INT = re.compile(r'0[xX][0-9a-fA-F]+|[0-9]+')
_PUNCT = re.compile('|'.join(re.escape(p) for p in PUNCTUATORS))

_STR_ESCAPES = {'n': '\n', 't': '\t', 'r': '\r', '0': '\0',
                '"': '"', '\\': '\\'}


def tokenize(src: str) -> list[Token]:
    """Produce the token stream for `src`, ending with a single 'eof' token.

    Whitespace and comments are discarded.  Raises LexError on an
    unterminated string or comment and on any illegal character.
    """
    toks: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(src)

    def here(end: int) -> Span:
        return Span(pos, end, line, pos - line_start + 1)

    def advance_lines(text: str, start: int):
        nonlocal line, line_start
        idx = text.rfind('\n')
        if idx >= 0:
            line += text.count('\n')
            line_start = start + idx + 1

    while pos < n:
        m = _WS.match(src, pos)
        if m:
            advance_lines(m.group(), pos)
            pos = m.end()
            continue
        m = _LINE_COMMENT.match(src, pos)
        if m:
            pos = m.end()
            continue
        if src.startswith('/*', pos):
            end = src.find('*/', pos + 2)
            if end < 0:
                raise LexError(here(n), 'unterminated comment')
            advance_lines(src[pos:end + 2], pos)
            pos = end + 2
            continue
        if src[pos] == '"':
            text, end = _scan_string(src, pos, here)
            toks.append(Token('str', text, here(end)))
            pos = end
            continue
        m = _IDENT.match(src, pos)
        if m:
            word = m.group()
            kind = 'kw' if word in KEYWORDS else 'ident'
            toks.append(Token(kind, word, here(m.end())))
            pos = m.end()
            continue
        m = _INT.match(src, pos)
        if m:
            toks.append(Token('int', m.group(), here(m.end())))
            pos = m.end()
            continue
        m = _PUNCT.match(src, pos)
        if m:
            toks.append(Token('punct', m.group(), here(m.end())))
            pos = m.end()
            continue
        raise LexError(here(pos + 1), f"illegal character {src[pos]!r}")

    toks.append(Token('eof', '', Span(n, n, line, n - line_start + 1)))
    return toks


def _scan_string(src: str, pos: int, here) -> tuple[str, int]:
    out = []
    i = pos + 1
    n = len(src)
    while i < n:
        ch = src[i]
        if ch == '"':
            return ''.join(out), i + 1
        if ch == '\n':
            break
        if ch == '\\':
            if i + 1 >= n:
                break
            esc = src[i + 1]
            if esc not in _STR_ESCAPES:
                raise LexError(here(i + 2), f"unknown escape \\{esc}")
            out.append(_STR_ESCAPES[esc])
            i += 2
            continue
        out.append(ch)
        i += 1
    raise LexError(here(min(i + 1, n)), 'unterminated string literal')
