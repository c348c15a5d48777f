"""Token-level behavior: kinds, spans, comments, and the dialect keywords."""

import pytest

from cbcc.lexer import tokenize, LexError


def kinds(src):
    return [(t.kind, t.text) for t in tokenize(src) if t.kind != 'eof']


def test_keywords_vs_identifiers():
    toks = kinds('__code code int interface goto __return __environment')
    assert toks[0] == ('kw', '__code')
    assert toks[1] == ('ident', 'code')          # only the dunder is reserved
    assert toks[2] == ('kw', 'int')
    assert toks[3] == ('ident', 'interface')
    assert toks[4] == ('kw', 'goto')
    assert toks[5] == ('kw', '__return')
    assert toks[6] == ('kw', '__environment')


def test_punctuation_maximal_munch():
    toks = kinds('a->b -- - >= > == = ( * ) , ;')
    texts = [t for _, t in toks]
    assert texts == ['a', '->', 'b', '--', '-', '>=', '>', '==', '=',
                     '(', '*', ')', ',', ';']


def test_integer_and_string_literals():
    toks = kinds('0 42 0x2A "hi\\n"')
    assert toks[0] == ('int', '0')
    assert toks[1] == ('int', '42')
    assert toks[2] == ('int', '0x2A')
    assert toks[3][0] == 'str'


def test_comments_are_skipped():
    toks = kinds('a /* b\n c */ d // e\nf')
    assert [t for _, t in toks] == ['a', 'd', 'f']


def test_spans_track_lines_and_columns():
    toks = tokenize('int x;\n  goto f(1);\n')
    g = next(t for t in toks if t.text == 'goto')
    assert (g.span.line, g.span.col) == (2, 3)
    f = next(t for t in toks if t.text == 'f')
    assert (f.span.line, f.span.col) == (2, 8)


def test_span_offsets_slice_the_source():
    src = 'int  foo = 12;'
    for t in tokenize(src):
        if t.kind != 'eof':
            assert src[t.span.start:t.span.end] == t.text


def test_unterminated_string_raises():
    with pytest.raises(LexError):
        tokenize('"abc')


def test_unterminated_block_comment_raises():
    with pytest.raises(LexError):
        tokenize('/* never closed')


def test_stray_character_raises_with_position():
    with pytest.raises(LexError) as ei:
        tokenize('int x;\n@')
    assert ei.value.span.line == 2
