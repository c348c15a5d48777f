"""End-to-end checks for the `cbc` entry point, driven in-process."""

import json
from pathlib import Path

import pytest

from cbcc.cli import main
from cbcc.parser import parse
from cbcc.sema import analyze

CORPUS = sorted(Path(__file__).with_name('..').resolve()
                .joinpath('src/cbcc/corpus').glob('*.cbc'))
FIXTURES = Path(__file__).with_name('fixtures')


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -------------------------------------------------------------------- check

def test_check_clean_corpus(capsys):
    rc = main(['check'] + [str(f) for f in CORPUS])
    out = capsys.readouterr()
    assert rc == 0
    assert out.err == ''


def test_check_reports_golden_diagnostics(monkeypatch, capsys):
    monkeypatch.chdir(FIXTURES)
    rc = main(['check', 'ret_in_seg.cbc'])
    err = capsys.readouterr().err
    assert rc == 1
    assert err == (FIXTURES / 'ret_in_seg.golden').read_text()


def test_check_syntax_error(tmp_path, capsys):
    src = write(tmp_path, 'broken.cbc', 'int f( {\n')
    rc = main(['check', src])
    err = capsys.readouterr().err
    assert rc == 1
    assert 'E-SYNTAX' in err
    assert err.startswith(src + ':')


def test_check_missing_file(capsys):
    rc = main(['check', 'no/such/file.cbc'])
    assert rc == 1
    assert 'no/such/file.cbc' in capsys.readouterr().err


# frozen baseline: the transcribed listings are all strict-clean, because
# their only in-segment calls are to print builtins
STRICT_WARNINGS = {
    'deadenv.cbc': 0,
    'loop.cbc': 0,
    'hello.cbc': 0,
    'interface.cbc': 0,
    'scheduler.cbc': 0,
    'kernel_functions.cbc': 0,
    'kernel_opt.cbc': 0,
    'kernel_straight.cbc': 0,
}


def test_strict_corpus_warning_counts(capsys):
    assert {f.name for f in CORPUS} == set(STRICT_WARNINGS)
    for f in CORPUS:
        rc = main(['check', '--strict-cbc', str(f)])
        err = capsys.readouterr().err
        assert rc == 0, err
        got = sum('W-STRICT' in line for line in err.splitlines())
        assert got == STRICT_WARNINGS[f.name], f.name


def test_strict_flags_impurity(tmp_path, capsys):
    src = write(tmp_path, 'impure.cbc', '''\
int helper(int i);

__code f(int i)
{
    int j;
    j = 0;
    while (i > 0) {
        i -= 1;
    }
    j = helper(i);
    goto f(j);
}
''')
    rc = main(['check', '--strict-cbc', src])
    err = capsys.readouterr().err
    assert rc == 0  # warnings do not fail the build
    assert 'W-STRICT-LOOP' in err
    assert 'W-STRICT-CALL' in err


# ------------------------------------------------------------------ compile

HELLO = '''\
__code finish(int i)
{
    goto exit_segment(i);
}

__code greet()
{
    printf("hi\\n");
    goto finish(0);
}

__code exit_segment(int i);

int main()
{
    goto greet();
    return 0;
}
'''


def compilable(tmp_path):
    # exit_segment must be defined somewhere; keep the unit self-contained
    text = HELLO.replace('__code exit_segment(int i);',
                         '__code exit_segment(int i)\n{\n    goto finish(i);\n}')
    return text


def test_compile_writes_unit_and_manifest(tmp_path, capsys):
    src = write(tmp_path, 'greet.cbc', '''\
__code step(int i)
{
    if (i > 0)
        goto step(i - 1);
    printf("done\\n");
    goto step(i);
}

int main()
{
    goto step(3);
    return 0;
}
''')
    out = tmp_path / 'build'
    rc = main(['compile', '--emit-dir', str(out), src])
    stdout = capsys.readouterr().out
    assert rc == 0
    unit = out / 'greet.c'
    assert unit.exists()
    assert f'wrote {unit}' in stdout
    assert 'cbc_seg_step' in unit.read_text()

    manifest = json.loads((out / 'cbc_manifest.json').read_text())
    assert manifest['backend'] == 'trampoline'
    assert manifest['paracopy'] == 'min'
    assert manifest['outputs'] == ['greet.c']
    assert manifest['runtime_files'] == ['cbc_rt.h', 'cbc_rt.c']
    assert manifest['tailcall_macro'] == 'CBC_TAILCALL'


def test_compile_backend_changes_output(tmp_path, capsys):
    src = write(tmp_path, 'g.cbc', compilable(tmp_path))
    a = tmp_path / 'a'
    b = tmp_path / 'b'
    assert main(['compile', '--emit-dir', str(a), src]) == 0
    assert main(['compile', '--emit-dir', str(b), '--backend', 'direct',
                 src]) == 0
    capsys.readouterr()
    tramp = (a / 'g.c').read_text()
    direct = (b / 'g.c').read_text()
    assert 'cbc_table' in tramp
    assert 'cbc_table' not in direct
    assert 'CBC_TAILCALL' in direct


def test_compile_rejects_bad_unit(tmp_path, capsys):
    src = write(tmp_path, 'bad.cbc', '''\
__code f(int i)
{
    return i;
}
''')
    out = tmp_path / 'build'
    rc = main(['compile', '--emit-dir', str(out), src])
    err = capsys.readouterr().err
    assert rc == 1
    assert 'E-RET-IN-SEG' in err
    assert not (out / 'bad.c').exists()


def test_compile_dump_flags(tmp_path, capsys):
    src = write(tmp_path, 'g.cbc', compilable(tmp_path))
    rc = main(['compile', '--emit-dir', str(tmp_path / 'o'),
               '--dump-lowered', '--dump-paracopy', src])
    out = capsys.readouterr().out
    assert rc == 0
    assert 'goto[0]:' in out
    assert 'segment' in out


# ---------------------------------------------------------------------- cps

KERNEL = '''\
int g0(int i);
int h0(int i);

int f0(int i)
{
    int k;
    int j;
    k = 3 + i;
    j = g0(i + 3);
    return k + 4 + j;
}

int g0(int i)
{
    return h0(i + 4) + i;
}

int h0(int i)
{
    return i + 4;
}
'''


def test_cps_stdout_unit_is_clean(tmp_path, capsys):
    src = write(tmp_path, 'k.cbc', KERNEL)
    rc = main(['cps', '--roots', 'f0,g0,h0', src])
    out = capsys.readouterr().out
    assert rc == 0
    res = analyze(parse(out))
    assert res.ok and not res.warnings
    assert 'f0_k0' in out


def test_cps_output_file_and_fuse(tmp_path, capsys):
    src = write(tmp_path, 'k.cbc', KERNEL)
    dst = tmp_path / 'k_cps.cbc'
    rc = main(['cps', '--roots', 'f0', '--cps-opt', 'fuse',
               '-o', str(dst), src])
    capsys.readouterr()
    assert rc == 0
    text = dst.read_text()
    assert 'g0_s0' in text  # specialized callee clones carry an _s suffix
    assert analyze(parse(text)).ok


def test_cps_unknown_root(tmp_path, capsys):
    src = write(tmp_path, 'k.cbc', KERNEL)
    rc = main(['cps', '--roots', 'nope', src])
    err = capsys.readouterr().err
    assert rc == 1
    assert 'E-CPS-UNSUPPORTED' in err


def test_cps_rejects_unconvertible(tmp_path, capsys):
    src = write(tmp_path, 'p.cbc', '''\
int f(int *p)
{
    return *p;
}
''')
    rc = main(['cps', '--roots', 'f', src])
    err = capsys.readouterr().err
    assert rc == 1
    assert 'E-CPS-UNSUPPORTED' in err


# -------------------------------------------------------------------- usage

def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 1


def test_unknown_flag_is_usage_error(capsys):
    assert main(['check', '--wat', 'x.cbc']) == 1


def test_unknown_subcommand(capsys):
    assert main(['transmogrify']) == 1


def test_bench_rejects_unknown_preset(capsys):
    assert main(['bench', '--preset', 'warp']) == 1


def test_bench_rejects_unknown_variant(capsys):
    rc = main(['bench', '--variants', 'call-form,quantum'])
    err = capsys.readouterr().err
    assert rc == 1
    assert 'quantum' in err


def test_internal_errors_exit_2(monkeypatch, capsys):
    import cbcc.cli as cli

    def boom(args):
        raise RuntimeError('wires crossed')

    monkeypatch.setattr(cli, 'cmd_check', boom)
    rc = main(['check', 'whatever.cbc'])
    err = capsys.readouterr().err
    assert rc == 2
    assert 'internal error' in err
    assert 'wires crossed' in err
