"""Lowering plans and C emission: layout limits, determinism, backends.

Emission is pure text generation from the lowered unit, so two independent
pipeline runs must agree byte-for-byte.  The frame-store scan rebuilds each
access width from the emitted casts and checks every outgoing write stays
inside the declared CBC_MAX_FRAME.
"""

import re
from pathlib import Path

import pytest

from cbcc import ast
from cbcc.parser import parse
from cbcc.sema import analyze
from cbcc.lower import lower, LowerError, FIRST_USER_INDEX
from cbcc.emit import emit, EmitConfig, EmitError

CORPUS = Path(__file__).resolve().parent.parent / 'src' / 'cbcc' / 'corpus'


def pipeline(src, backend='trampoline', paracopy='min'):
    res = analyze(parse(src))
    assert res.ok, [d.format() for d in res.errors]
    lu = lower(res, paracopy_mode=paracopy)
    return res, lu, emit(lu, EmitConfig(backend=backend))


# ------------------------------------------------------------------ lowering

def test_every_goto_gets_a_plan():
    src = CORPUS.joinpath('kernel_straight.cbc').read_text()
    res = analyze(parse(src))
    lu = lower(res)
    gotos = [n for n in ast.walk(res.unit)
             if isinstance(n, (ast.GotoDirect, ast.GotoIndirect,
                               ast.GotoWithEnv))]
    assert len(lu.goto_plans) == len(gotos)


def test_max_frame_covers_widest_target():
    res = analyze(parse("""
    __code a(int x) { goto b(x, x, x); }
    __code b(int x, int y, int z) { goto a(x); }
    """))
    lu = lower(res)
    assert lu.max_frame == 24        # b: three ints at 8-byte slots


def test_lower_refuses_broken_units():
    res = analyze(parse('__code f(int i) { return i; }'))
    assert not res.ok
    with pytest.raises(LowerError):
        lower(res)


def test_bad_paracopy_mode_rejected():
    res = analyze(parse('__code f(int i) { goto f(i); }'))
    with pytest.raises(LowerError):
        lower(res, paracopy_mode='fancy')


def test_naive_mode_never_plans_fewer_steps():
    src = CORPUS.joinpath('scheduler.cbc').read_text()
    res = analyze(parse(src))
    lo = lower(res, paracopy_mode='min')
    hi = lower(res, paracopy_mode='naive')
    for key in lo.goto_plans:
        a = lo.goto_plans[key].plan
        b = hi.goto_plans[key].plan
        assert len(a.steps) <= len(b.steps)


def test_dump_names_every_segment():
    src = CORPUS.joinpath('kernel_straight.cbc').read_text()
    res = analyze(parse(src))
    text = lower(res).dump()
    for seg in res.segments:
        assert seg in text


def test_trampoline_indices_start_after_runtime_rows():
    src = CORPUS.joinpath('hello.cbc').read_text()
    res = analyze(parse(src))
    lu = lower(res)
    assert [s.index for s in lu.segments] == \
        list(range(FIRST_USER_INDEX, FIRST_USER_INDEX + len(lu.segments)))


# ------------------------------------------------------------------ emission

def test_emission_is_deterministic_across_pipelines():
    for path in sorted(CORPUS.glob('*.cbc')):
        src = path.read_text()
        for backend in ('trampoline', 'direct'):
            _, _, a = pipeline(src, backend)
            _, _, b = pipeline(src, backend)
            assert a == b, f"{path.name} differs across runs ({backend})"


_STORE = re.compile(r'\*\((?P<ty>[^()]+?)\s*\*\)\((?P<base>cbc_[fx]) \+ (?P<off>\d+)\)')


def access_width(ty, res):
    ty = ty.strip()
    if ty.endswith('*'):
        return 8
    if ty == 'int':
        return 4
    m = re.fullmatch(r'struct cbc_s_(\w+)', ty)
    if m:
        return res.table.struct_info(m.group(1)).size
    raise AssertionError(f"unrecognized frame access type {ty!r}")


def test_frame_stores_fit_declared_max():
    for path in sorted(CORPUS.glob('*.cbc')):
        src = path.read_text()
        for backend in ('trampoline', 'direct'):
            res, lu, text = pipeline(src, backend)
            declared = int(re.search(r'#define CBC_MAX_FRAME (\d+)', text).group(1))
            assert declared == lu.max_frame
            for m in _STORE.finditer(text):
                off = int(m.group('off'))
                width = access_width(m.group('ty'), res)
                assert off + width <= declared, \
                    f"{path.name}: {m.group(0)} exceeds CBC_MAX_FRAME {declared}"


def test_trampoline_emits_table_and_ids():
    src = CORPUS.joinpath('hello.cbc').read_text()
    _, lu, text = pipeline(src, 'trampoline')
    assert 'const cbc_step_fn cbc_table[] = {' in text
    assert 'cbc_rt_env_step,' in text and 'cbc_rt_halt_step,' in text
    assert re.search(r'enum \{ cbc_id_h = \d+ \};', text)
    assert f"cbc_rt_boot(cbc_table, {FIRST_USER_INDEX + len(lu.segments)}, "\
           f"CBC_MAX_FRAME);" in text


def test_direct_backend_has_no_table():
    src = CORPUS.joinpath('hello.cbc').read_text()
    _, _, text = pipeline(src, 'direct')
    assert 'cbc_table' not in text
    assert 'CBC_TAILCALL' in text
    assert 'cbc_rt_boot(0, 0, CBC_MAX_FRAME);' in text


def test_every_unit_exports_boot_helper():
    for path in sorted(CORPUS.glob('*.cbc')):
        for backend in ('trampoline', 'direct'):
            _, _, text = pipeline(path.read_text(), backend)
            assert 'void cbc_unit_boot(void)' in text
            if 'int main' in text:
                after = text.split('int main', 1)[1]
                assert 'cbc_unit_boot();' in after


def test_undefined_segment_is_an_emission_error():
    res = analyze(parse('__code f(int i) { goto g(i); }'))
    assert res.ok          # implicit declaration is fine at check time
    lu = lower(res)
    with pytest.raises(EmitError, match='never defined'):
        emit(lu, EmitConfig())


def test_capture_prologue_only_for_capturing_functions():
    src = CORPUS.joinpath('deadenv.cbc').read_text()
    _, _, text = pipeline(src)
    grab = text.split('int cbc_fn_grab(void)\n{', 1)[1].split('\n}\n', 1)[0]
    assert 'CBC_ENV_CAPTURE' in grab


def test_unknown_backend_rejected():
    with pytest.raises(EmitError):
        EmitConfig(backend='jit')
