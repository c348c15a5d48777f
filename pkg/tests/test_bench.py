"""Benchmark harness pieces that do not need a C compiler.

Builds are exercised up to source generation; the in-segment loop driver is
validated by direct evaluation.  Report formatting, records, and figure
rendering run on synthetic rows so their shape is pinned even on hosts
without a toolchain.
"""

from pathlib import Path

import pytest

from cbcc import bench
from cbcc.parser import parse
from cbcc.sema import analyze
from cbcc.lower import lower
from cbcc.interp import run_function


# ----------------------------------------------------------------- variants

def test_preset_flags_are_fixed():
    assert bench.PRESETS['plain'] == ('-O2',)
    assert bench.PRESETS['omit'] == ('-O2', '-fomit-frame-pointer')
    assert bench.PRESETS['fast'] == ('-O3', '-fomit-frame-pointer')


def test_oracle_value():
    # f0 is affine in its argument: 21 + 3*i
    assert bench.bench_oracle() == 21 + 3 * 233


def test_call_form_build_is_plain_c():
    b = bench.prepare_variant('call-form', 'direct')
    assert not b.link_runtime
    assert b.plan_copies == 0 and b.plan_temp_bytes == 0
    assert '__code' not in b.sources['bench_body.c']
    driver = b.sources['bench_driver.c']
    assert 'volatile int cbc_bench_sink' in driver
    assert 'cbc_rt' not in driver


def test_cps_builds_link_runtime_and_boot():
    for variant in ('cps-straight', 'cps-opt'):
        b = bench.prepare_variant(variant, 'trampoline')
        assert b.link_runtime
        unit = b.sources['bench_unit.c']
        assert 'void cbc_unit_boot(void)' in unit
        assert 'cbc_fn_bench_run' in unit
        assert b.plan_copies > 0
        driver = b.sources['bench_driver.c']
        assert '#include "cbc_rt.h"' in driver
        assert 'cbc_unit_boot();' in driver


def test_unknown_variant_rejected():
    with pytest.raises(bench.BenchError):
        bench.prepare_variant('jit-form', 'direct')


def test_loop_driver_computes_oracle_under_direct_evaluation():
    # the countdown lives inside the segment world; one capture per run
    for opt in (None, 'fuse'):
        src = bench._cps_variant_source(opt)
        res = analyze(parse(src))
        assert res.ok, [d.format() for d in res.errors]
        lu = lower(res)
        for n in (1, 2, 5):
            assert run_function(res, 'bench_run', [n], lu=lu) == 720


# ------------------------------------------------------------ configuration

def test_resolve_cc_missing_compiler():
    with pytest.raises(bench.BenchError):
        bench.resolve_cc('no-such-compiler-zq')


def test_find_runtime_explicit_dir(tmp_path):
    d = tmp_path / 'rt'
    d.mkdir()
    (d / 'cbc_rt.h').write_text('/* header */\n')
    assert bench.find_runtime(str(d)) == d


def test_find_runtime_env_var(tmp_path, monkeypatch):
    d = tmp_path / 'rt2'
    d.mkdir()
    (d / 'cbc_rt.h').write_text('/* header */\n')
    monkeypatch.setenv('CBC_RT_DIR', str(d))
    assert bench.find_runtime() == d


def test_run_bench_validates_inputs():
    with pytest.raises(bench.BenchError):
        bench.run_bench(preset='ludicrous')
    with pytest.raises(bench.BenchError):
        bench.run_bench(variants=('call-form', 'mystery'))


# ---------------------------------------------------------------- reporting

def rows():
    return [
        bench.BenchRow('call-form', '-', 0.812345, 1000, None, 0, 0, 720),
        bench.BenchRow('cps-straight', 'direct', 0.503210, 1000, 72, 15, 40, 720),
        bench.BenchRow('cps-opt', 'direct', 0.444001, 1000, 24, 23, 40, 720),
    ]


def report(**kw):
    r = bench.BenchReport(rows=rows(), compiler='testcc 1.0',
                          flags=('-O3', '-fomit-frame-pointer'),
                          preset='fast', iterations=1000, oracle=720, **kw)
    r.ordering_ok = bench._ordering(r)
    return r


def test_record_lines_one_per_row():
    lines = bench.record_lines(report())
    assert len(lines) == 3
    assert lines[0] == ('variant=call-form backend=- status=ok '
                        'iterations=1000 value=720 highwater=- plan_copies=0 '
                        'plan_temp_bytes=0 seconds=0.812345')
    assert all(ln.startswith('variant=') for ln in lines)


def test_everything_but_seconds_is_stable():
    a = [ln.rsplit(' seconds=', 1)[0] for ln in bench.record_lines(report())]
    rep2 = report()
    rep2.rows = [bench.BenchRow(r.variant, r.backend, r.seconds * 2,
                                r.iterations, r.highwater, r.plan_copies,
                                r.plan_temp_bytes, r.value)
                 for r in rep2.rows]
    b = [ln.rsplit(' seconds=', 1)[0] for ln in bench.record_lines(rep2)]
    assert a == b


def test_table_has_a_row_per_variant():
    table = bench.format_table(report())
    lines = table.splitlines()
    assert len(lines) == 4
    assert lines[0].startswith('variant')
    for v in bench.VARIANTS:
        assert any(ln.startswith(v) for ln in lines[1:])


def test_report_mentions_flags_and_ordering():
    text = bench.format_report(report())
    assert 'flags: -O3 -fomit-frame-pointer (preset=fast)' in text
    assert 'compiler: testcc 1.0' in text
    assert 'ordering (informative): cps-straight <= call-form' in text
    assert 'pass' in text


def test_ordering_is_informative_only():
    rep = report()
    slow = [bench.BenchRow('cps-straight', 'direct', 9.9, 1000, 72, 15, 40, 720)
            if r.variant == 'cps-straight' else r for r in rep.rows]
    rep.rows = slow
    rep.ordering_ok = bench._ordering(rep)
    assert rep.ordering_ok is False
    assert 'fail' in bench.format_report(rep)


def test_ordering_none_when_a_row_is_missing():
    rep = report()
    rep.rows = [r for r in rep.rows if r.variant != 'call-form']
    rep.ordering_ok = bench._ordering(rep)
    assert rep.ordering_ok is None
    assert 'n/a' in bench.format_report(rep)


def test_failed_row_is_marked():
    rep = report()
    rep.rows = rows()[:1] + [
        bench.BenchRow('cps-straight', 'direct', None, 1000, None, 15, 40,
                       None, failed='compile: exit 1')]
    lines = bench.record_lines(rep)
    assert 'status=failed' in lines[1]
    assert 'seconds=-' in lines[1]
    assert 'FAILED' in bench.format_table(rep)


def test_records_file_and_figures(tmp_path):
    rep = report()
    path = bench.write_records(rep, tmp_path)
    assert path.name == 'bench_records.txt'
    assert path.read_text().count('\n') == 3
    figures = bench.render_figures(rep, tmp_path)
    assert [p.name for p in figures] == list(bench.FIGURE_NAMES)
    for p in figures:
        assert p.stat().st_size > 0
        assert p.read_bytes()[:8] == b'\x89PNG\r\n\x1a\n'


def test_figures_skip_what_cannot_be_drawn(tmp_path):
    rep = report()
    rep.rows = [bench.BenchRow('call-form', '-', None, 1000, None, 0, 0,
                               None, failed='compile: boom')]
    figures = bench.render_figures(rep, tmp_path)
    assert figures == []


def test_parse_driver_output():
    got = bench.parse_driver_output(
        'result: 720\nseconds= 1.250000\nhighwater= 72\n')
    assert got == {'value': 720, 'seconds': 1.25, 'highwater': 72}
    assert bench.parse_driver_output('noise\n') == {}
