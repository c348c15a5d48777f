"""Name/type checking for the dialect, pinned by the golden fixtures.

Segments are total about control: no return, no falling off the end, goto
only at segments.  Everything else is small-C bookkeeping (arity, types,
scopes) plus the frame layout that the goto lowering depends on.
"""

from pathlib import Path

import pytest

from cbcc.parser import parse
from cbcc.sema import analyze, lint_cbc_purity

HERE = Path(__file__).resolve().parent
FIXTURES = HERE / 'fixtures'
CORPUS = HERE.parent / 'src' / 'cbcc' / 'corpus'

GOLDEN = ['ret_in_seg', 'fallthrough', 'goto_nonseg', 'seg_call']


def diags(src, file='<input>'):
    res = analyze(parse(src), file=file)
    return res, [d.format() for d in res.errors]


# ------------------------------------------------------------------ goldens

@pytest.mark.parametrize('name', GOLDEN)
def test_golden_negative_fixture(name):
    src = (FIXTURES / f"{name}.cbc").read_text()
    want = (FIXTURES / f"{name}.golden").read_text().splitlines()
    res, got = diags(src, file=f"{name}.cbc")
    assert got == want
    assert not res.ok


def test_golden_codes_are_distinct():
    codes = set()
    for name in GOLDEN:
        line = (FIXTURES / f"{name}.golden").read_text()
        codes.add(line.split(': ')[1])
    assert codes == {'E-RET-IN-SEG', 'E-FALLTHROUGH', 'E-GOTO-NONSEG',
                     'E-SEG-CALL'}


# ----------------------------------------------------------- segment control

def test_fallthrough_needs_every_path_to_goto():
    _, got = diags("""
    __code g(int i);
    __code f(int i)
    {
        if (i > 0)
            goto g(i);
        goto g(0);
    }
    """)
    assert got == []


def test_return_without_value_also_rejected_in_segment():
    _, got = diags('__code f(int i) { return; }')
    assert any('E-RET-IN-SEG' in d for d in got)


def test_goto_to_undeclared_segment_is_implicit():
    # mirrors old-C implicit declaration; definedness is emission's problem
    res, got = diags('__code f(int i) { goto g(i); }')
    assert got == []
    assert res.ok


def test_goto_arity_checked_against_declaration():
    _, got = diags('__code g(int a, int b); __code f(int i) { goto g(i); }')
    assert len(got) == 1 and 'E-ARITY' in got[0]


def test_goto_argument_type_mismatch():
    _, got = diags('__code g(int a); __code f(int i) { goto g("s"); }')
    assert len(got) == 1 and 'E-TYPE' in got[0]


def test_call_arity_and_types():
    _, got = diags("""
    int add(int a, int b) { return a + b; }
    int f(int i) { return add(i); }
    """)
    assert len(got) == 1 and 'E-ARITY' in got[0]


# ------------------------------------------------------------------- captures

def test_environment_only_in_functions():
    _, got = diags('__code f(int i) { void *e = __environment; goto f(i); }')
    assert len(got) == 1 and 'E-ENV-OUTSIDE-FN' in got[0]
    _, got = diags('void *g; int f(int i) { g = __environment; return i; }')
    assert got == []


def test_return_capture_only_in_functions():
    _, got = diags('__code f(int i) { void *r = __return; goto f(i); }')
    assert len(got) == 1 and 'E-ENV-OUTSIDE-FN' in got[0]


# -------------------------------------------------------------------- scopes

def test_undefined_identifier():
    _, got = diags('__code g(int a); __code f(int i) { goto g(x); }')
    assert len(got) == 1 and 'E-UNDEF' in got[0]


def test_block_scopes_allow_shadowing():
    _, got = diags("""
    int f(int x)
    {
        int y;
        y = x;
        {
            int x;
            x = 2;
            y += x;
        }
        return y;
    }
    """)
    assert got == []


def test_inner_declaration_does_not_leak():
    _, got = diags("""
    int f(int x)
    {
        {
            int y;
            y = x;
        }
        return y;
    }
    """)
    assert len(got) == 1 and 'E-UNDEF' in got[0]


def test_unreachable_statement_warned():
    res = analyze(parse('__code g(int a); __code f(int i) { goto g(i); i = 2; }'))
    assert not res.errors
    assert any(d.code == 'W-UNREACHABLE' for d in res.warnings)


# ----------------------------------------------------------------- frame data

def test_segment_frame_layout_is_word_aligned():
    res = analyze(parse('__code f(int a, char *s, int b) { goto f(a, s, b); }'))
    sig = res.segments['f']
    assert sig.frame_offsets == [0, 8, 16]
    assert sig.frame_bytes == 24


def test_struct_by_value_params_get_their_size():
    res = analyze(parse("""
    struct pair { int x; int y; };
    __code f(int a, struct pair p, int b) { goto f(a, p, b); }
    """))
    sig = res.segments['f']
    assert sig.frame_offsets == [0, 8, 16]
    assert sig.frame_bytes == 24


# ---------------------------------------------------------------- strict lint

def test_strict_lint_flags_loops_and_calls():
    res = analyze(parse("""
    int h(int a) { return a; }
    __code g(int a);
    __code f(int i)
    {
        while (i > 0)
            i--;
        i = h(i);
        goto g(i);
    }
    """))
    codes = [d.code for d in lint_cbc_purity(res)]
    assert codes == ['W-STRICT-LOOP', 'W-STRICT-CALL']


def test_strict_lint_exempts_io_builtins():
    res = analyze(parse('__code g(int a); __code f(int i) '
                        '{ printf("%d\\n", i); goto g(i); }'))
    assert lint_cbc_purity(res) == []


def test_strict_lint_silent_on_plain_functions():
    res = analyze(parse('int f(int i) { while (i > 9) i -= 9; return f(i); }'))
    assert lint_cbc_purity(res) == []


# ------------------------------------------------------------------- corpus

def test_corpus_is_clean():
    for path in sorted(CORPUS.glob('*.cbc')):
        res = analyze(parse(path.read_text()), file=path.name)
        assert res.ok, [d.format() for d in res.errors]
